#include "agmax/policy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

#include <json.hpp>

namespace agmax::aug {

namespace {

constexpr std::array<const char*, 12> kOpNames = {
    "rotate",   "translateX", "translateY", "shearX",     "shearY",
    "invert",   "solarize",   "posterize",  "contrast",   "brightness",
    "equalize", "autocontrast"};

void require_unnormalized(const Image& img, const char* op) {
  if (img.normalized) {
    throw Error(std::string(op) + ": image already normalized");
  }
}

double signed_offset(double base, RngStream& rng) {
  return rng.next_bernoulli(0.5) ? base : -base;
}

// Nearest-neighbor inverse-mapped affine warp about the image center.
// Exposed pixels are filled with zeros.
Image affine_warp(const Image& img, double m00, double m01, double m10,
                  double m11, double tx, double ty) {
  Image out(img.height, img.width, img.channels);
  out.normalized = img.normalized;
  const double cy = (static_cast<double>(img.height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(img.width) - 1.0) / 2.0;
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const double rx = static_cast<double>(x) - cx;
      const double ry = static_cast<double>(y) - cy;
      const double sx = m00 * rx + m01 * ry + cx + tx;
      const double sy = m10 * rx + m11 * ry + cy + ty;
      const long ix = std::lround(sx);
      const long iy = std::lround(sy);
      if (ix < 0 || iy < 0 || ix >= static_cast<long>(img.width) ||
          iy >= static_cast<long>(img.height)) {
        continue;
      }
      for (std::size_t c = 0; c < img.channels; ++c) {
        out.at(c, y, x) = img.at(c, static_cast<std::size_t>(iy),
                                 static_cast<std::size_t>(ix));
      }
    }
  }
  return out;
}

Image map_pixels(const Image& img, const std::function<double(double)>& f) {
  Image out = img;
  for (auto& v : out.pixels) v = f(v);
  return out;
}

Image per_channel_lut(const Image& img,
                      const std::function<void(const Image&, std::size_t,
                                               std::array<double, 256>&)>& build) {
  Image out = img;
  std::array<double, 256> lut{};
  for (std::size_t c = 0; c < img.channels; ++c) {
    build(img, c, lut);
    for (std::size_t y = 0; y < img.height; ++y) {
      for (std::size_t x = 0; x < img.width; ++x) {
        const int q = static_cast<int>(std::clamp(
            std::lround(img.at(c, y, x) * 255.0), 0L, 255L));
        out.at(c, y, x) = lut[static_cast<std::size_t>(q)];
      }
    }
  }
  return out;
}

}  // namespace

PolicyOp policy_op_from_name(const std::string& name) {
  for (std::size_t i = 0; i < kOpNames.size(); ++i) {
    if (name == kOpNames[i]) return static_cast<PolicyOp>(i);
  }
  throw ConfigError("policy: unknown op '" + name + "'");
}

const char* policy_op_name(PolicyOp op) {
  return kOpNames[static_cast<std::size_t>(op)];
}

Image apply_policy_op(const Image& img, PolicyOp op, double magnitude,
                      RngStream& rng) {
  if (magnitude < 0.0 || magnitude > 10.0) {
    throw ConfigError("policy: magnitude " + std::to_string(magnitude) +
                      " outside [0,10]");
  }
  require_unnormalized(img, policy_op_name(op));
  const double level = magnitude / 10.0;
  switch (op) {
    case PolicyOp::rotate: {
      const double deg = signed_offset(level * 30.0, rng);
      const double rad = deg * std::numbers::pi / 180.0;
      const double c = std::cos(rad), s = std::sin(rad);
      // inverse rotation matrix
      return affine_warp(img, c, s, -s, c, 0.0, 0.0);
    }
    case PolicyOp::translate_x: {
      const double shift = signed_offset(
          std::round(level * 0.3 * static_cast<double>(img.width)), rng);
      return affine_warp(img, 1, 0, 0, 1, -shift, 0.0);
    }
    case PolicyOp::translate_y: {
      const double shift = signed_offset(
          std::round(level * 0.3 * static_cast<double>(img.height)), rng);
      return affine_warp(img, 1, 0, 0, 1, 0.0, -shift);
    }
    case PolicyOp::shear_x: {
      const double shear = signed_offset(level * 0.3, rng);
      return affine_warp(img, 1, shear, 0, 1, 0.0, 0.0);
    }
    case PolicyOp::shear_y: {
      const double shear = signed_offset(level * 0.3, rng);
      return affine_warp(img, 1, 0, shear, 1, 0.0, 0.0);
    }
    case PolicyOp::invert:
      return map_pixels(img, [](double v) { return 1.0 - v; });
    case PolicyOp::solarize: {
      const double threshold = 1.0 - level;
      return map_pixels(
          img, [threshold](double v) { return v >= threshold ? 1.0 - v : v; });
    }
    case PolicyOp::posterize: {
      const int bits = 8 - static_cast<int>(std::lround(level * 4.0));
      const int drop = 8 - bits;
      const int mask = ~((1 << drop) - 1) & 0xFF;
      return map_pixels(img, [mask](double v) {
        const long q = std::clamp(std::lround(v * 255.0), 0L, 255L);
        return static_cast<double>(q & mask) / 255.0;
      });
    }
    case PolicyOp::contrast: {
      const double factor = 1.0 + signed_offset(level * 0.9, rng);
      Image out = img;
      for (std::size_t c = 0; c < img.channels; ++c) {
        double mean = 0.0;
        for (std::size_t y = 0; y < img.height; ++y) {
          for (std::size_t x = 0; x < img.width; ++x) mean += img.at(c, y, x);
        }
        mean /= static_cast<double>(img.pixel_count());
        for (std::size_t y = 0; y < img.height; ++y) {
          for (std::size_t x = 0; x < img.width; ++x) {
            out.at(c, y, x) =
                std::clamp(mean + factor * (img.at(c, y, x) - mean), 0.0, 1.0);
          }
        }
      }
      return out;
    }
    case PolicyOp::brightness: {
      const double factor = 1.0 + signed_offset(level * 0.9, rng);
      return map_pixels(
          img, [factor](double v) { return std::clamp(v * factor, 0.0, 1.0); });
    }
    case PolicyOp::equalize:
      return per_channel_lut(
          img, [](const Image& src, std::size_t c, std::array<double, 256>& lut) {
            std::array<std::size_t, 256> hist{};
            for (std::size_t y = 0; y < src.height; ++y) {
              for (std::size_t x = 0; x < src.width; ++x) {
                const long q =
                    std::clamp(std::lround(src.at(c, y, x) * 255.0), 0L, 255L);
                ++hist[static_cast<std::size_t>(q)];
              }
            }
            std::array<std::size_t, 256> cdf{};
            std::size_t run = 0;
            std::size_t cdf_min = 0;
            bool seen = false;
            for (std::size_t i = 0; i < 256; ++i) {
              run += hist[i];
              cdf[i] = run;
              if (!seen && hist[i] > 0) {
                cdf_min = run;
                seen = true;
              }
            }
            const std::size_t total = run;
            if (total == cdf_min) {  // flat channel: identity
              for (std::size_t i = 0; i < 256; ++i) {
                lut[i] = static_cast<double>(i) / 255.0;
              }
              return;
            }
            for (std::size_t i = 0; i < 256; ++i) {
              lut[i] = static_cast<double>(cdf[i] - cdf_min) /
                       static_cast<double>(total - cdf_min);
            }
          });
    case PolicyOp::autocontrast: {
      Image out = img;
      for (std::size_t c = 0; c < img.channels; ++c) {
        double lo = 1.0, hi = 0.0;
        for (std::size_t y = 0; y < img.height; ++y) {
          for (std::size_t x = 0; x < img.width; ++x) {
            lo = std::min(lo, img.at(c, y, x));
            hi = std::max(hi, img.at(c, y, x));
          }
        }
        if (hi <= lo) continue;
        for (std::size_t y = 0; y < img.height; ++y) {
          for (std::size_t x = 0; x < img.width; ++x) {
            out.at(c, y, x) = (img.at(c, y, x) - lo) / (hi - lo);
          }
        }
      }
      return out;
    }
  }
  throw Error("apply_policy_op: unreachable");
}

Image policy_augment(const Image& img, const Policy& policy, RngStream& rng) {
  if (policy.sub_policies.empty()) return img;
  const std::size_t pick = rng.next_below(policy.sub_policies.size());
  Image out = img;
  for (const PolicyElement& elem : policy.sub_policies[pick]) {
    if (rng.next_double() < elem.probability) {
      out = apply_policy_op(out, elem.op, elem.magnitude, rng);
    }
  }
  return out;
}

Policy parse_policy_json(const std::string& text, const std::string& origin) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("policy file " + origin + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("subpolicies") ||
      !doc["subpolicies"].is_array()) {
    throw ConfigError("policy file " + origin +
                      ": expected object with 'subpolicies' array");
  }
  Policy policy;
  policy.name = doc.value("name", origin);
  for (const auto& sub : doc["subpolicies"]) {
    if (!sub.is_array()) {
      throw ConfigError("policy file " + origin + ": sub-policy must be an array");
    }
    SubPolicy parsed;
    for (const auto& elem : sub) {
      if (!elem.is_array() || elem.size() != 3 || !elem[0].is_string() ||
          !elem[1].is_number() || !elem[2].is_number()) {
        throw ConfigError("policy file " + origin +
                          ": element must be [op, probability, magnitude]");
      }
      PolicyElement e{policy_op_from_name(elem[0].get<std::string>()),
                      elem[1].get<double>(), elem[2].get<double>()};
      if (e.probability < 0.0 || e.probability > 1.0) {
        throw ConfigError("policy file " + origin + ": probability " +
                          std::to_string(e.probability) + " outside [0,1]");
      }
      if (e.magnitude < 0.0 || e.magnitude > 10.0) {
        throw ConfigError("policy file " + origin + ": magnitude " +
                          std::to_string(e.magnitude) + " outside [0,10]");
      }
      parsed.push_back(e);
    }
    policy.sub_policies.push_back(std::move(parsed));
  }
  return policy;
}

Policy load_policy_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("policy file not found: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_policy_json(buf.str(), path);
}

}  // namespace agmax::aug
