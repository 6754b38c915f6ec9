#pragma once

#include <optional>
#include <string>

#include "agmax/grad_check.hpp"
#include "agmax/ops.hpp"
#include "agmax/prob_matrix.hpp"
#include "agmax/rng.hpp"

namespace agmax::agree {

/**
 * Agreement objective between the two views' prediction distributions.
 * All variants are losses: smaller means more agreement. The total loss is
 * L = L_CE + weight * L_agree with weight >= 0; weight 1 with Kind::mi
 * maximizes the mutual information between the views.
 */
enum class Kind { mi, mse, kl, ce };

Kind kind_from_name(const std::string& name);
const char* kind_name(Kind kind);

struct AgreementKind {
  Kind kind = Kind::mi;
  double weight = 1.0;

  void validate() const {
    if (weight < 0.0) {
      throw ConfigError("agreement weight must be nonnegative, got " +
                        std::to_string(weight));
    }
  }
};

namespace detail {

template <typename T>
void require_distribution_rows(const diff::NodePtr<T>& probs, const char* who) {
  if (probs->value.rank() != 2) {
    throw Error(std::string(who) + ": expected (n, C) probabilities, got " +
                ShapeError::to_string(probs->value.shape()));
  }
  const std::size_t n = probs->value.dim(0);
  const std::size_t c = probs->value.dim(1);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      sum += static_cast<double>(probs->value.at(i, j));
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw Error(std::string(who) + ": row " + std::to_string(i) +
                  " is not a distribution (sum " + std::to_string(sum) + ")");
    }
  }
}

}  // namespace detail

/**
 * Batch joint probability matrix P = (1/n) sum_i outer(phi1_i, phi2_i),
 * symmetrized as (P + P^T)/2; differentiable w.r.t. both inputs. Rows of the
 * inputs must already be distributions (softmax outputs).
 */
template <typename T>
diff::NodePtr<T> joint_matrix_node(const diff::NodePtr<T>& phi1,
                                   const diff::NodePtr<T>& phi2) {
  detail::require_distribution_rows(phi1, "joint_matrix");
  detail::require_distribution_rows(phi2, "joint_matrix");
  if (!phi1->value.same_shape(phi2->value)) {
    throw ShapeError("joint_matrix", phi1->value.shape(), phi2->value.shape());
  }
  const std::size_t n = phi1->value.dim(0);
  if (n == 0) throw Error("joint_matrix: empty batch");
  // (C,n) x (n,C) accumulates the outer products of all pairs in one pass.
  auto raw = diff::mul_scalar(
      diff::matmul(diff::transpose(phi1), phi2), T{1} / static_cast<T>(n));
  auto sym = diff::mul_scalar(diff::add(raw, diff::transpose(raw)), T{0.5});
  return sym;
}

/// Non-graph convenience for metrics; same construction as joint_matrix_node.
ProbMatrix joint_matrix(const diff::Tensor<double>& phi1,
                        const diff::Tensor<double>& phi2);

/// Graph form of mutual_information(ProbMatrix); P must be a (C,C) joint.
template <typename T>
diff::NodePtr<T> mutual_information_node(const diff::NodePtr<T>& joint) {
  if (joint->value.rank() != 2 || joint->value.dim(0) != joint->value.dim(1)) {
    throw Error("mutual_information: expected square joint, got " +
                ShapeError::to_string(joint->value.shape()));
  }
  const std::size_t c = joint->value.dim(0);
  auto pr = diff::reshape(diff::sum_axis(joint, 1), {c, 1});
  auto pc = diff::reshape(diff::sum_axis(joint, 0), {1, c});
  auto product = diff::matmul(pr, pc);
  auto ratio_log = diff::sub(diff::log_(joint), diff::log_(product));
  return diff::sum_all(diff::mul(joint, ratio_log));
}

/**
 * Scalar agreement loss over two (n, C) logit batches.
 *   mi:  -I(softmax(z1), softmax(z2)) via the joint matrix
 *   mse: mean squared difference of the softmax outputs
 *   kl:  symmetric 0.5*(KL(p1||p2) + KL(p2||p1)), batch mean
 *   ce:  symmetric stop-gradient cross-entropy, batch mean
 */
template <typename T>
diff::NodePtr<T> agreement_loss(const diff::NodePtr<T>& z1,
                                const diff::NodePtr<T>& z2, Kind kind) {
  if (z1->value.rank() != 2 || !z1->value.same_shape(z2->value)) {
    throw ShapeError("agreement_loss", z1->value.shape(), z2->value.shape());
  }
  const std::size_t n = z1->value.dim(0);
  const std::size_t c = z1->value.dim(1);
  if (c < 2) {
    throw Error("agreement_loss: needs at least 2 classes, got " +
                std::to_string(c));
  }
  auto p1 = diff::softmax(z1);
  auto p2 = diff::softmax(z2);
  switch (kind) {
    case Kind::mi:
      return diff::neg(mutual_information_node(joint_matrix_node(p1, p2)));
    case Kind::mse: {
      auto d = diff::sub(p1, p2);
      return diff::mean_all(diff::mul(d, d));
    }
    case Kind::kl: {
      auto forward = diff::sum_all(
          diff::mul(p1, diff::sub(diff::log_(p1), diff::log_(p2))));
      auto reverse = diff::sum_all(
          diff::mul(p2, diff::sub(diff::log_(p2), diff::log_(p1))));
      return diff::mul_scalar(diff::add(forward, reverse),
                              T{0.5} / static_cast<T>(n));
    }
    case Kind::ce: {
      auto h12 = diff::sum_all(diff::mul(diff::detach(p1), diff::log_(p2)));
      auto h21 = diff::sum_all(diff::mul(diff::detach(p2), diff::log_(p1)));
      return diff::mul_scalar(diff::add(h12, h21),
                              T{-0.5} / static_cast<T>(n));
    }
  }
  throw Error("agreement_loss: unreachable");
}

/// L = ce + w * agree. The agreement term already carries the convention
/// that smaller means more agreement.
template <typename T>
diff::NodePtr<T> total_loss(const diff::NodePtr<T>& ce,
                            const diff::NodePtr<T>& agree, T weight) {
  if (!ce->value.is_scalar() || !agree->value.is_scalar()) {
    throw Error("total_loss: both terms must be scalar");
  }
  return diff::add(ce, diff::mul_scalar(agree, weight));
}

/**
 * Optional learned joint estimator: a 2-layer MLP mapping the concatenated
 * softmax outputs to a C x C joint (softmax over C^2 entries averaged over
 * the batch, then symmetrized). Trained by pulling its (z1, z2) estimate
 * toward the closed-form joints of (p1, p1) and (p2, p2), both detached.
 * Off by default; the closed-form joint remains the training path.
 */
template <typename T>
class MlpJointEstimator {
public:
  MlpJointEstimator(std::size_t num_classes, std::size_t hidden,
                    RngStream& rng)
      : num_classes_(num_classes), hidden_(hidden) {
    if (num_classes < 2) throw Error("MlpJointEstimator: needs C >= 2");
    if (hidden < 1) throw Error("MlpJointEstimator: hidden width must be >= 1");
    const std::size_t in = 2 * num_classes;
    const std::size_t out = num_classes * num_classes;
    RngStream r1 = rng.split(0);
    RngStream r2 = rng.split(1);
    const T s1 = static_cast<T>(std::sqrt(2.0 / static_cast<double>(in)));
    const T s2 = static_cast<T>(std::sqrt(2.0 / static_cast<double>(hidden)));
    params_.add("joint_mlp.w1",
                diff::Tensor<T>::gaussian({in, hidden}, r1, s1));
    params_.add("joint_mlp.b1", diff::Tensor<T>({hidden}));
    params_.add("joint_mlp.w2",
                diff::Tensor<T>::gaussian({hidden, out}, r2, s2));
    params_.add("joint_mlp.b2", diff::Tensor<T>({out}));
  }

  diff::ParameterStore<T>& parameters() { return params_; }

  diff::NodePtr<T> estimate(const diff::NodePtr<T>& z1,
                            const diff::NodePtr<T>& z2) {
    const std::size_t n = z1->value.dim(0);
    auto input = diff::concat<T>({diff::softmax(z1), diff::softmax(z2)}, 1);
    auto h = diff::relu(diff::add_rowvec(
        diff::matmul(input, params_.get("joint_mlp.w1")),
        params_.get("joint_mlp.b1")));
    auto logits = diff::add_rowvec(diff::matmul(h, params_.get("joint_mlp.w2")),
                                   params_.get("joint_mlp.b2"));
    auto pooled = diff::mul_scalar(diff::sum_axis(logits, 0),
                                   T{1} / static_cast<T>(n));
    auto flat = diff::softmax(diff::reshape(pooled, {1, num_classes_ * num_classes_}));
    auto square = diff::reshape(flat, {num_classes_, num_classes_});
    return diff::mul_scalar(diff::add(square, diff::transpose(square)), T{0.5});
  }

  diff::NodePtr<T> training_loss(const diff::NodePtr<T>& z1,
                                 const diff::NodePtr<T>& z2) {
    auto p1 = diff::softmax(z1);
    auto p2 = diff::softmax(z2);
    auto target_a = diff::detach(joint_matrix_node(p1, p1));
    auto target_b = diff::detach(joint_matrix_node(p2, p2));
    auto est = estimate(z1, z2);
    auto da = diff::sub(est, target_a);
    auto db = diff::sub(est, target_b);
    return diff::mul_scalar(
        diff::add(diff::sum_all(diff::mul(da, da)),
                  diff::sum_all(diff::mul(db, db))),
        T{0.5});
  }

private:
  std::size_t num_classes_;
  std::size_t hidden_;
  diff::ParameterStore<T> params_;
};

}  // namespace agmax::agree
