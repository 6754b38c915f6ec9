#pragma once

#include <vector>

#include "agmax/train.hpp"

namespace agmax::robust {

/**
 * FGSM settings. Epsilon is perturbation strength in input-intensity units:
 * the attack runs in [0,1] intensity space with normalization folded into
 * the model, which is what makes strengths like 0.1/0.3/0.5 meaningful.
 */
struct AttackConfig {
  double epsilon = 0.1;
  double clip_lo = 0.0;
  double clip_hi = 1.0;

  void validate() const {
    if (epsilon < 0.0) {
      throw ConfigError("attack: epsilon must be >= 0, got " +
                        std::to_string(epsilon));
    }
    if (clip_hi <= clip_lo) throw ConfigError("attack: empty clip range");
  }
};

namespace detail {

template <typename T>
diff::NodePtr<T> forward_from_intensity(const model::Encoder<T>& encoder,
                                        const diff::NodePtr<T>& x,
                                        const aug::NormalizeStage* normalize) {
  if (!normalize) return encoder.forward(x);
  std::vector<T> scale(normalize->mean.size());
  std::vector<T> shift(normalize->mean.size());
  for (std::size_t c = 0; c < scale.size(); ++c) {
    scale[c] = static_cast<T>(1.0 / normalize->stddev[c]);
    shift[c] = static_cast<T>(-normalize->mean[c] / normalize->stddev[c]);
  }
  return encoder.forward(
      diff::channel_affine(x, std::move(scale), std::move(shift)));
}

}  // namespace detail

/**
 * Fast Gradient Sign Method, single step:
 *   x_adv = clip(x + eps * sign(grad_x CE(model(x), y)))
 * with the gradient taken w.r.t. un-normalized intensities and sign(0) = 0.
 */
template <typename T>
std::vector<aug::Image> fgsm(const model::Encoder<T>& encoder,
                             const aug::LabeledBatch& batch,
                             const aug::NormalizeStage* normalize,
                             const AttackConfig& config) {
  config.validate();
  auto leaf = diff::variable(train::batch_to_tensor<T>(batch.images));
  auto logits = detail::forward_from_intensity(encoder, leaf, normalize);
  auto loss = train::cross_entropy(logits, batch.labels, 0.0);
  diff::backward(loss);

  const std::size_t stride = batch.images.front().pixels.size();
  std::vector<aug::Image> adversarial = batch.images;
  for (std::size_t i = 0; i < adversarial.size(); ++i) {
    for (std::size_t k = 0; k < stride; ++k) {
      const double g = static_cast<double>(leaf->grad[i * stride + k]);
      const double direction = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
      adversarial[i].pixels[k] =
          std::clamp(adversarial[i].pixels[k] + config.epsilon * direction,
                     config.clip_lo, config.clip_hi);
    }
  }
  return adversarial;
}

/**
 * Top-1 accuracy on adversarial inputs for each epsilon, using the same
 * evaluation path as train::evaluate. The epsilon = 0 entry reproduces clean
 * accuracy exactly.
 */
template <typename T>
std::vector<double> eval_under_attack(const model::Encoder<T>& encoder,
                                      const data::Dataset& dataset,
                                      const aug::NormalizeStage* normalize,
                                      const std::vector<double>& epsilons,
                                      std::size_t batch_size) {
  if (epsilons.empty()) throw Error("eval_under_attack: empty epsilon list");
  if (dataset.size() == 0) throw Error("eval_under_attack: empty dataset");
  std::vector<double> accuracies;
  accuracies.reserve(epsilons.size());
  for (const double eps : epsilons) {
    AttackConfig config;
    config.epsilon = eps;
    config.validate();
    std::size_t hits = 0;
    for (std::size_t start = 0; start < dataset.size(); start += batch_size) {
      const std::size_t end = std::min(dataset.size(), start + batch_size);
      aug::LabeledBatch chunk;
      chunk.num_classes = dataset.num_classes;
      chunk.images.assign(dataset.images.begin() + start,
                          dataset.images.begin() + end);
      chunk.labels.assign(dataset.labels.begin() + start,
                          dataset.labels.begin() + end);
      const auto adversarial = fgsm(encoder, chunk, normalize, config);
      auto logits = detail::forward_from_intensity(
                        encoder,
                        diff::constant(train::batch_to_tensor<T>(adversarial)),
                        normalize)
                        ->value;
      const auto predicted = model::predict(logits);
      for (std::size_t i = 0; i < chunk.labels.size(); ++i) {
        if (predicted[i] == chunk.labels[i]) ++hits;
      }
    }
    accuracies.push_back(static_cast<double>(hits) /
                         static_cast<double>(dataset.size()));
  }
  return accuracies;
}

/**
 * Desk-scale corruption stand-in: seeded Gaussian noise in intensity space,
 * clipped to [0,1], then the standard evaluation path. Per-item substreams
 * make the result independent of batching.
 */
template <typename T>
std::vector<double> gaussian_corruption_eval(const model::Encoder<T>& encoder,
                                             const data::Dataset& dataset,
                                             const aug::NormalizeStage* normalize,
                                             const std::vector<double>& sigmas,
                                             std::size_t batch_size,
                                             std::uint64_t seed) {
  if (dataset.size() == 0) throw Error("gaussian_corruption_eval: empty dataset");
  std::vector<double> accuracies;
  for (std::size_t s = 0; s < sigmas.size(); ++s) {
    const double sigma = sigmas[s];
    if (sigma < 0.0) {
      throw ConfigError("corruption: sigma must be >= 0, got " +
                        std::to_string(sigma));
    }
    RngStream rng = RngStream(seed).split(s);
    std::size_t hits = 0;
    for (std::size_t start = 0; start < dataset.size(); start += batch_size) {
      const std::size_t end = std::min(dataset.size(), start + batch_size);
      std::vector<aug::Image> noisy(dataset.images.begin() + start,
                                    dataset.images.begin() + end);
      for (std::size_t i = 0; i < noisy.size(); ++i) {
        RngStream item_rng = rng.split(start + i);
        for (auto& v : noisy[i].pixels) {
          v = std::clamp(v + sigma * item_rng.next_gaussian(), 0.0, 1.0);
        }
      }
      auto logits = detail::forward_from_intensity(
                        encoder, diff::constant(train::batch_to_tensor<T>(noisy)),
                        normalize)
                        ->value;
      const auto predicted = model::predict(logits);
      for (std::size_t i = start; i < end; ++i) {
        if (predicted[i - start] == dataset.labels[i]) ++hits;
      }
    }
    accuracies.push_back(static_cast<double>(hits) /
                         static_cast<double>(dataset.size()));
  }
  return accuracies;
}

}  // namespace agmax::robust
