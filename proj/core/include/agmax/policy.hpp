#pragma once

#include <string>
#include <vector>

#include "agmax/image.hpp"
#include "agmax/rng.hpp"

namespace agmax::aug {

/**
 * Image operations available to policy files. Geometry ops resample with
 * nearest neighbor and fill exposed pixels with zeros; color ops act on
 * un-normalized intensities in [0,1].
 *
 * Magnitudes range over [0,10] and map to op parameters as follows:
 *
 *   rotate        angle = m/10 * 30 degrees, random sign
 *   translate_x/y shift = round(m/10 * 0.3 * extent) pixels, random sign
 *   shear_x/y     shear factor = m/10 * 0.3, random sign
 *   invert        (no parameter)
 *   solarize      threshold = 1 - m/10; pixels >= threshold are inverted
 *   posterize     bits kept = 8 - round(m/10 * 4), of the 8-bit quantization
 *   contrast      factor = 1 + 0.9 * m/10, random sign on the offset
 *   brightness    factor = 1 + 0.9 * m/10, random sign on the offset
 *   equalize      (no parameter) per-channel histogram equalization
 *   autocontrast  (no parameter) per-channel linear stretch to [0,1]
 */
enum class PolicyOp {
  rotate,
  translate_x,
  translate_y,
  shear_x,
  shear_y,
  invert,
  solarize,
  posterize,
  contrast,
  brightness,
  equalize,
  autocontrast,
};

PolicyOp policy_op_from_name(const std::string& name);
const char* policy_op_name(PolicyOp op);

struct PolicyElement {
  PolicyOp op;
  double probability;  // chance this element fires
  double magnitude;    // in [0,10]
};

using SubPolicy = std::vector<PolicyElement>;

/// A fixed augmentation policy: each application picks one sub-policy
/// uniformly at random and runs its elements in order.
struct Policy {
  std::string name;
  std::vector<SubPolicy> sub_policies;
};

/**
 * Policy file format (JSON):
 *   { "name": "...",
 *     "subpolicies": [ [["rotate", 0.7, 2], ["invert", 0.3, 0]], ... ] }
 * Unknown op names and magnitudes outside [0,10] are config errors.
 */
Policy parse_policy_json(const std::string& text, const std::string& origin);
Policy load_policy_file(const std::string& path);

/// Apply one op at a magnitude, consuming the sign draw where applicable.
Image apply_policy_op(const Image& img, PolicyOp op, double magnitude,
                      RngStream& rng);

/// Pick a sub-policy uniformly and apply each element with its probability.
Image policy_augment(const Image& img, const Policy& policy, RngStream& rng);

}  // namespace agmax::aug
