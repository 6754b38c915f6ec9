#pragma once

#include <cmath>
#include <numbers>
#include <unordered_map>
#include <variant>
#include <vector>

#include "agmax/graph.hpp"

namespace agmax::train {

/// Learning-rate schedules, epoch-granular.
struct StepSchedule {
  std::vector<std::size_t> milestones;  // strictly increasing
  double factor = 0.1;
};
struct CosineSchedule {};

using Schedule = std::variant<StepSchedule, CosineSchedule>;

/// step: base * factor^(milestones passed);
/// cosine: 0.5 * base * (1 + cos(pi * epoch / epochs)).
inline double lr_at(const Schedule& schedule, double base_lr, std::size_t epoch,
                    std::size_t total_epochs) {
  if (const auto* step = std::get_if<StepSchedule>(&schedule)) {
    double lr = base_lr;
    for (const std::size_t m : step->milestones) {
      if (epoch >= m) lr *= step->factor;
    }
    return lr;
  }
  if (total_epochs == 0) return base_lr;
  return 0.5 * base_lr *
         (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) /
                         static_cast<double>(total_epochs)));
}

inline void validate(const Schedule& schedule) {
  if (const auto* step = std::get_if<StepSchedule>(&schedule)) {
    for (std::size_t i = 1; i < step->milestones.size(); ++i) {
      if (step->milestones[i] <= step->milestones[i - 1]) {
        throw ConfigError("schedule milestones must be strictly increasing");
      }
    }
    if (step->factor <= 0.0) {
      throw ConfigError("schedule factor must be positive");
    }
  }
}

/**
 * SGD with momentum and coupled weight decay:
 *   v <- momentum * v + grad + weight_decay * param
 *   param <- param - lr * v
 * Gradients are zeroed after the step. Velocity starts at zero; no Nesterov.
 * Weight decay covers biases too unless decay_biases is off.
 */
template <typename T>
class SgdOptimizer {
public:
  SgdOptimizer(double momentum, double weight_decay, bool decay_biases = true)
      : momentum_(momentum), weight_decay_(weight_decay),
        decay_biases_(decay_biases) {}

  void step(diff::ParameterStore<T>& store, double lr) {
    for (auto& [name, node] : store) {
      auto& velocity = velocity_for(name, node->value.shape());
      const bool decay =
          decay_biases_ || name.size() < 5 ||
          name.compare(name.size() - 5, 5, ".bias") != 0;
      const T wd = decay ? static_cast<T>(weight_decay_) : T{0};
      const T mom = static_cast<T>(momentum_);
      const T step_lr = static_cast<T>(lr);
      for (std::size_t i = 0; i < velocity.numel(); ++i) {
        const T g = node->grad[i];
        if (!std::isfinite(static_cast<double>(g))) {
          throw NumericError("sgd_step: non-finite gradient in parameter '" +
                             name + "'");
        }
        velocity[i] = mom * velocity[i] + g + wd * node->value[i];
        node->value[i] -= step_lr * velocity[i];
      }
      node->zero_grad();
    }
  }

private:
  diff::Tensor<T>& velocity_for(const std::string& name,
                                const diff::Shape& shape) {
    auto it = velocities_.find(name);
    if (it == velocities_.end()) {
      it = velocities_.emplace(name, diff::Tensor<T>(shape)).first;
    }
    return it->second;
  }

  double momentum_;
  double weight_decay_;
  bool decay_biases_;
  std::unordered_map<std::string, diff::Tensor<T>> velocities_;
};

}  // namespace agmax::train
