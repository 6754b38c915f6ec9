#include "agmax/agreement.hpp"

namespace agmax::agree {

Kind kind_from_name(const std::string& name) {
  if (name == "mi") return Kind::mi;
  if (name == "mse") return Kind::mse;
  if (name == "kl") return Kind::kl;
  if (name == "ce") return Kind::ce;
  throw ConfigError("agreement kind must be one of mi|mse|kl|ce, got '" +
                    name + "'");
}

const char* kind_name(Kind kind) {
  switch (kind) {
    case Kind::mi: return "mi";
    case Kind::mse: return "mse";
    case Kind::kl: return "kl";
    case Kind::ce: return "ce";
  }
  return "?";
}

ProbMatrix joint_matrix(const diff::Tensor<double>& phi1,
                        const diff::Tensor<double>& phi2) {
  auto node = joint_matrix_node(diff::constant(phi1), diff::constant(phi2));
  ProbMatrix joint(node->value.dim(0));
  const auto data = node->value.data();
  joint.values.assign(data.begin(), data.end());
  return joint;
}

}  // namespace agmax::agree
