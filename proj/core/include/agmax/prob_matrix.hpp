#pragma once

#include <cstddef>
#include <vector>

#include "agmax/error.hpp"

namespace agmax::agree {

/**
 * C x C joint probability matrix over the class assignments of two views.
 * A valid joint has nonnegative entries summing to 1 within 1e-9; after
 * symmetrize() it equals its transpose exactly.
 */
struct ProbMatrix {
  std::size_t num_classes = 0;
  std::vector<double> values;  // row-major

  ProbMatrix() = default;
  explicit ProbMatrix(std::size_t c) : num_classes(c), values(c * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) {
    return values[r * num_classes + c];
  }
  double at(std::size_t r, std::size_t c) const {
    return values[r * num_classes + c];
  }

  static constexpr double kSumTolerance = 1e-9;

  bool is_valid() const;
  /// Throws on negative entries or a total off 1 by more than kSumTolerance.
  void require_valid() const;

  bool is_symmetric() const;  // exact equality
  void symmetrize();          // P <- (P + P^T) / 2

  std::vector<double> row_marginals() const;
  std::vector<double> col_marginals() const;
};

/**
 * I(P) = sum_{c1,c2} P_{c1,c2} * ln(P_{c1,c2} / (P_{c1} * P_{c2})) with the
 * 1e-12 floor inside the logs; marginals come from row/column sums. For a
 * valid joint the result lies in [0, ln C] up to numerical slack.
 */
double mutual_information(const ProbMatrix& joint);

}  // namespace agmax::agree
