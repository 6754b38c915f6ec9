#pragma once

#include <vector>

#include "agmax/image.hpp"
#include "agmax/ops.hpp"

namespace agmax::train {

namespace detail {

template <typename T>
diff::NodePtr<T> nll_of_targets(const diff::NodePtr<T>& logits,
                                diff::Tensor<T> targets) {
  const std::size_t n = logits->value.dim(0);
  auto log_probs = diff::log_(diff::softmax(logits));
  auto weighted = diff::mul(diff::constant(std::move(targets)), log_probs);
  return diff::mul_scalar(diff::sum_all(weighted), T{-1} / static_cast<T>(n));
}

inline void check_smoothing(double smoothing) {
  if (smoothing < 0.0 || smoothing >= 1.0) {
    throw Error("cross_entropy: smoothing must lie in [0,1), got " +
                std::to_string(smoothing));
  }
}

}  // namespace detail

/**
 * Cross-entropy against the smoothed target (1-e)*onehot + e/C, averaged
 * over the batch. smoothing = 0 is plain CE.
 */
template <typename T>
diff::NodePtr<T> cross_entropy(const diff::NodePtr<T>& logits,
                               const std::vector<int>& labels,
                               double smoothing = 0.0) {
  detail::check_smoothing(smoothing);
  if (logits->value.rank() != 2 || logits->value.dim(0) != labels.size()) {
    throw ShapeError("cross_entropy", logits->value.shape(),
                     {labels.size(), 0});
  }
  const std::size_t n = labels.size();
  const std::size_t c = logits->value.dim(1);
  diff::Tensor<T> targets({n, c});
  const T uniform = static_cast<T>(smoothing / static_cast<double>(c));
  const T peak = static_cast<T>(1.0 - smoothing) + uniform;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
      throw Error("cross_entropy: label " + std::to_string(labels[i]) +
                  " out of range [0," + std::to_string(c) + ")");
    }
    for (std::size_t j = 0; j < c; ++j) targets.at(i, j) = uniform;
    targets.at(i, static_cast<std::size_t>(labels[i])) = peak;
  }
  return detail::nll_of_targets(logits, std::move(targets));
}

/**
 * Mixed-target cross-entropy: per item,
 * lambda*CE(label_a) + (1-lambda)*CE(label_b), with the same smoothing as
 * cross_entropy. Reduces to plain CE when lambda = 1 or the labels agree.
 */
template <typename T>
diff::NodePtr<T> mixed_cross_entropy(const diff::NodePtr<T>& logits,
                                     const std::vector<aug::MixedLabels>& mixed,
                                     double smoothing = 0.0) {
  detail::check_smoothing(smoothing);
  if (logits->value.rank() != 2 || logits->value.dim(0) != mixed.size()) {
    throw ShapeError("mixed_cross_entropy", logits->value.shape(),
                     {mixed.size(), 0});
  }
  const std::size_t n = mixed.size();
  const std::size_t c = logits->value.dim(1);
  diff::Tensor<T> targets({n, c});
  const T uniform = static_cast<T>(smoothing / static_cast<double>(c));
  const T boost = static_cast<T>(1.0 - smoothing);
  for (std::size_t i = 0; i < n; ++i) {
    const aug::MixedLabels& m = mixed[i];
    if (m.lambda < 0.0 || m.lambda > 1.0) {
      throw Error("mixed_cross_entropy: lambda " + std::to_string(m.lambda) +
                  " outside [0,1]");
    }
    for (const int label : {m.label_a, m.label_b}) {
      if (label < 0 || static_cast<std::size_t>(label) >= c) {
        throw Error("mixed_cross_entropy: label " + std::to_string(label) +
                    " out of range [0," + std::to_string(c) + ")");
      }
    }
    for (std::size_t j = 0; j < c; ++j) targets.at(i, j) = uniform;
    targets.at(i, static_cast<std::size_t>(m.label_a)) +=
        static_cast<T>(m.lambda) * boost;
    targets.at(i, static_cast<std::size_t>(m.label_b)) +=
        static_cast<T>(1.0 - m.lambda) * boost;
  }
  return detail::nll_of_targets(logits, std::move(targets));
}

}  // namespace agmax::train
