#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "agmax/ops.hpp"
#include "agmax/rng.hpp"

namespace agmax::model {

/// Weight initialization. Fan-in-scaled Gaussian is the default; the plain
/// Gaussian with a free sigma is the higher-entropy option.
enum class InitScheme { fan_in_gaussian, plain_gaussian };

struct EncoderConfig {
  std::string kind = "cnn";  // "mlp" | "cnn"

  // mlp: hidden layer widths between the flattened input and the class head
  std::vector<std::size_t> hidden = {64};
  // cnn: output channels of each 3x3 conv; every conv is followed by
  // relu and 2x2 max-pool, then a dense head to the classes
  std::vector<std::size_t> channel_plan = {8, 16};

  std::size_t in_channels = 3;
  std::size_t in_height = 24;
  std::size_t in_width = 24;
  std::size_t num_classes = 4;

  InitScheme init = InitScheme::fan_in_gaussian;
  double init_gain = std::sqrt(2.0);  // fan-in scheme: sigma = gain/sqrt(fan_in)
  double init_sigma = 0.1;            // plain scheme: fixed sigma

  void validate() const {
    if (kind != "mlp" && kind != "cnn") {
      throw ConfigError("model kind must be mlp or cnn, got '" + kind + "'");
    }
    if (num_classes < 2) {
      throw ConfigError("model needs at least 2 classes");
    }
    if (in_channels == 0 || in_height == 0 || in_width == 0) {
      throw ConfigError("model input shape has a zero dimension");
    }
    for (const std::size_t w : hidden) {
      if (w == 0) throw ConfigError("mlp hidden width must be >= 1");
    }
    for (const std::size_t c : channel_plan) {
      if (c == 0) throw ConfigError("cnn channel plan entry must be >= 1");
    }
    if (kind == "cnn") {
      std::size_t h = in_height, w = in_width;
      for (std::size_t i = 0; i < channel_plan.size(); ++i) {
        h /= 2;
        w /= 2;
      }
      if (h == 0 || w == 0) {
        throw ConfigError("cnn input too small for " +
                          std::to_string(channel_plan.size()) + " pool stages");
      }
    }
  }

  std::size_t flattened_input() const {
    return in_channels * in_height * in_width;
  }

  /// Analytic parameter count for the configured architecture.
  /// mlp: sum over layers of (w_in * w_out + w_out).
  /// cnn: sum over convs of (Cout*Cin*9 + Cout), plus the dense head on the
  /// final feature map of extent (H, W) halved once per pool stage.
  std::size_t parameter_count() const {
    std::size_t total = 0;
    if (kind == "mlp") {
      std::size_t prev = flattened_input();
      for (const std::size_t w : hidden) {
        total += prev * w + w;
        prev = w;
      }
      total += prev * num_classes + num_classes;
    } else {
      std::size_t prev = in_channels;
      std::size_t h = in_height, w = in_width;
      for (const std::size_t ch : channel_plan) {
        total += ch * prev * 9 + ch;
        prev = ch;
        h /= 2;
        w /= 2;
      }
      total += prev * h * w * num_classes + num_classes;
    }
    return total;
  }
};

/**
 * Small classifier encoder built on the differentiation graph. One
 * ParameterStore serves every forward call, so the two AgMax views share
 * weights structurally rather than by copying.
 */
template <typename T>
class Encoder {
public:
  Encoder(EncoderConfig config, RngStream& rng) : config_(std::move(config)) {
    config_.validate();
    if (config_.kind == "mlp") {
      std::size_t prev = config_.flattened_input();
      std::size_t layer = 1;
      for (const std::size_t width : config_.hidden) {
        add_dense("fc" + std::to_string(layer), prev, width, rng);
        prev = width;
        ++layer;
      }
      add_dense("head", prev, config_.num_classes, rng);
    } else {
      std::size_t prev = config_.in_channels;
      std::size_t h = config_.in_height, w = config_.in_width;
      std::size_t layer = 1;
      for (const std::size_t channels : config_.channel_plan) {
        add_conv("conv" + std::to_string(layer), prev, channels, rng);
        prev = channels;
        h /= 2;
        w /= 2;
        ++layer;
      }
      add_dense("head", prev * h * w, config_.num_classes, rng);
    }
  }

  const EncoderConfig& config() const { return config_; }
  diff::ParameterStore<T>& parameters() { return params_; }
  const diff::ParameterStore<T>& parameters() const { return params_; }

  /// (N, C, H, W) batch -> (N, num_classes) logits. Pure given parameters;
  /// builds a fresh graph every call.
  diff::NodePtr<T> forward(const diff::NodePtr<T>& x) const {
    if (x->value.rank() != 4 || x->value.dim(1) != config_.in_channels ||
        x->value.dim(2) != config_.in_height ||
        x->value.dim(3) != config_.in_width) {
      throw ShapeError("Encoder::forward", x->value.shape(),
                       {0, config_.in_channels, config_.in_height,
                        config_.in_width});
    }
    const std::size_t n = x->value.dim(0);
    if (config_.kind == "mlp") {
      auto h = diff::reshape(x, {n, config_.flattened_input()});
      for (std::size_t layer = 1; layer <= config_.hidden.size(); ++layer) {
        h = diff::relu(dense(h, "fc" + std::to_string(layer)));
      }
      return dense(h, "head");
    }
    auto h = x;
    std::size_t height = config_.in_height, width = config_.in_width;
    std::size_t channels = config_.channel_plan.back();
    for (std::size_t layer = 1; layer <= config_.channel_plan.size(); ++layer) {
      const std::string name = "conv" + std::to_string(layer);
      h = diff::maxpool2d(
          diff::relu(diff::conv2d(h, params_.get(name + ".weight"),
                                  params_.get(name + ".bias"), 1)),
          2);
      height /= 2;
      width /= 2;
    }
    auto flat = diff::reshape(h, {n, channels * height * width});
    return dense(flat, "head");
  }

private:
  void add_dense(const std::string& name, std::size_t in, std::size_t out,
                 RngStream& rng) {
    params_.add(name + ".weight",
                diff::Tensor<T>::gaussian({in, out}, rng, sigma_for(in)));
    params_.add(name + ".bias", diff::Tensor<T>({out}));
  }

  void add_conv(const std::string& name, std::size_t in, std::size_t out,
                RngStream& rng) {
    params_.add(name + ".weight", diff::Tensor<T>::gaussian(
                                      {out, in, 3, 3}, rng, sigma_for(in * 9)));
    params_.add(name + ".bias", diff::Tensor<T>({out}));
  }

  T sigma_for(std::size_t fan_in) const {
    if (config_.init == InitScheme::plain_gaussian) {
      return static_cast<T>(config_.init_sigma);
    }
    return static_cast<T>(config_.init_gain /
                          std::sqrt(static_cast<double>(fan_in)));
  }

  diff::NodePtr<T> dense(const diff::NodePtr<T>& x,
                         const std::string& name) const {
    return diff::add_rowvec(diff::matmul(x, params_.get(name + ".weight")),
                            params_.get(name + ".bias"));
  }

  EncoderConfig config_;
  diff::ParameterStore<T> params_;
};

/// Argmax per row; ties break toward the lowest class index.
template <typename T>
std::vector<int> predict(const diff::Tensor<T>& logits) {
  if (logits.rank() != 2) {
    throw Error("predict: expected (n, C) logits, got " +
                ShapeError::to_string(logits.shape()));
  }
  const std::size_t n = logits.dim(0);
  const std::size_t c = logits.dim(1);
  std::vector<int> classes(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j) {
      if (logits.at(i, j) > logits.at(i, best)) best = j;
    }
    classes[i] = static_cast<int>(best);
  }
  return classes;
}

}  // namespace agmax::model
