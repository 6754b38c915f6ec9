#include "agmax/prob_matrix.hpp"

#include <cmath>

namespace agmax::agree {

namespace {
constexpr double kFloor = 1e-12;
}

bool ProbMatrix::is_valid() const {
  if (values.size() != num_classes * num_classes) return false;
  double sum = 0.0;
  for (const double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= kSumTolerance;
}

void ProbMatrix::require_valid() const {
  if (!is_valid()) {
    throw Error("ProbMatrix: not a valid joint distribution (negative, "
                "non-finite, or total != 1)");
  }
}

bool ProbMatrix::is_symmetric() const {
  for (std::size_t i = 0; i < num_classes; ++i) {
    for (std::size_t j = i + 1; j < num_classes; ++j) {
      if (at(i, j) != at(j, i)) return false;
    }
  }
  return true;
}

void ProbMatrix::symmetrize() {
  for (std::size_t i = 0; i < num_classes; ++i) {
    for (std::size_t j = i + 1; j < num_classes; ++j) {
      const double avg = 0.5 * (at(i, j) + at(j, i));
      at(i, j) = avg;
      at(j, i) = avg;
    }
  }
}

std::vector<double> ProbMatrix::row_marginals() const {
  std::vector<double> m(num_classes, 0.0);
  for (std::size_t i = 0; i < num_classes; ++i) {
    for (std::size_t j = 0; j < num_classes; ++j) m[i] += at(i, j);
  }
  return m;
}

std::vector<double> ProbMatrix::col_marginals() const {
  std::vector<double> m(num_classes, 0.0);
  for (std::size_t i = 0; i < num_classes; ++i) {
    for (std::size_t j = 0; j < num_classes; ++j) m[j] += at(i, j);
  }
  return m;
}

double mutual_information(const ProbMatrix& joint) {
  joint.require_valid();
  const auto pr = joint.row_marginals();
  const auto pc = joint.col_marginals();
  double info = 0.0;
  for (std::size_t i = 0; i < joint.num_classes; ++i) {
    for (std::size_t j = 0; j < joint.num_classes; ++j) {
      const double p = joint.at(i, j);
      info += p * (std::log(std::max(p, kFloor)) -
                   std::log(std::max(pr[i] * pc[j], kFloor)));
    }
  }
  return info;
}

}  // namespace agmax::agree
