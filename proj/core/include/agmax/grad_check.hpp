#pragma once

#include <cmath>
#include <functional>

#include "agmax/ops.hpp"

namespace agmax::diff {

/**
 * Central-difference check of the backward pass. `f` maps a leaf node to a
 * scalar node; returns the max over coordinates of
 *   |g_ad - g_fd| / max(1, |g_ad|, |g_fd|),
 * where g_fd = (f(x + h e_i) - f(x - h e_i)) / 2h. The unit denominator floor
 * turns the measure into absolute error for small gradients, which keeps
 * central-difference rounding noise from registering as disagreement.
 */
template <typename T>
double grad_check(const std::function<NodePtr<T>(NodePtr<T>)>& f,
                  const Tensor<T>& x, double h) {
  if (h <= 0.0) throw Error("grad_check: step must be positive");

  auto leaf = variable(x);
  auto root = f(leaf);
  if (!root->value.is_scalar()) {
    throw Error("grad_check: f must return a scalar, got shape " +
                ShapeError::to_string(root->value.shape()));
  }
  if (!std::isfinite(static_cast<double>(root->value[0]))) {
    throw NumericError("grad_check: f produced a non-finite value");
  }
  backward(root);

  const auto eval = [&](const Tensor<T>& point) {
    auto probe = constant(point);
    const double v = static_cast<double>(f(probe)->value[0]);
    if (!std::isfinite(v)) {
      throw NumericError("grad_check: f produced a non-finite value");
    }
    return v;
  };

  double max_err = 0.0;
  Tensor<T> probe = x;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const T saved = probe[i];
    probe[i] = saved + static_cast<T>(h);
    const double up = eval(probe);
    probe[i] = saved - static_cast<T>(h);
    const double down = eval(probe);
    probe[i] = saved;

    const double fd = (up - down) / (2.0 * h);
    const double ad = static_cast<double>(leaf->grad[i]);
    const double denom = std::max({1.0, std::abs(ad), std::abs(fd)});
    max_err = std::max(max_err, std::abs(ad - fd) / denom);
  }
  return max_err;
}

}  // namespace agmax::diff
