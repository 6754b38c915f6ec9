#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "agmax/image.hpp"

namespace agmax::data {

/// Immutable labeled image collection; the unit of ingestion.
struct Dataset {
  std::vector<aug::Image> images;
  std::vector<int> labels;
  std::size_t num_classes = 0;
  std::string split;  // "train" | "test"

  std::size_t size() const { return images.size(); }

  void validate() const {
    if (images.size() != labels.size()) {
      throw Error("Dataset: " + std::to_string(images.size()) + " images vs " +
                  std::to_string(labels.size()) + " labels");
    }
    for (const int label : labels) {
      if (label < 0 || static_cast<std::size_t>(label) >= num_classes) {
        throw Error("Dataset: label " + std::to_string(label) +
                    " out of range [0," + std::to_string(num_classes) + ")");
      }
    }
  }
};

/**
 * Procedural separable dataset: each class is an oriented grating at a
 * class-specific angle and frequency, with per-item phase/angle/frequency
 * jitter and pixel noise. The class evidence is spatially distributed, so
 * regional dropout (CutOut/CutMix) actually removes it, which is what makes
 * augmentation effects measurable at this scale.
 */
struct SynthSpec {
  std::size_t num_classes = 4;
  std::size_t train_per_class = 500;
  std::size_t test_per_class = 125;
  std::size_t image_size = 24;
  std::size_t channels = 3;

  double base_frequency = 2.5;   // cycles across the image, class 0
  double frequency_step = 0.9;   // per-class frequency increment
  double amplitude = 0.35;
  double phase_jitter = 0.35;    // radians, per item
  double angle_jitter = 0.04;    // radians, per item
  double frequency_jitter = 0.05;  // relative, per item
  double noise_sigma = 0.06;     // additive pixel noise

  std::uint64_t seed = 7;

  void validate() const {
    if (num_classes < 2) throw ConfigError("synth: needs at least 2 classes");
    if (image_size < 8) throw ConfigError("synth: image size must be >= 8");
    if (channels == 0) throw ConfigError("synth: needs at least 1 channel");
    if (train_per_class == 0 || test_per_class == 0) {
      throw ConfigError("synth: per-class item counts must be positive");
    }
  }
};

/// Train and test splits from disjoint sub-seeds; deterministic given spec.
std::pair<Dataset, Dataset> generate_synth(const SynthSpec& spec);

/// Mean image of one class over a dataset (oracle helper for separability).
aug::Image class_mean(const Dataset& dataset, int label);

/**
 * CIFAR-10 binary batch file: records of exactly 3073 bytes, 1 label byte
 * followed by 3x1024 channel-planar pixel bytes scaled to [0,1]. Truncated
 * files and labels >= 10 raise ParseError with the offending byte offset.
 */
Dataset load_cifar10(const std::string& path, const std::string& split = "train");

/// Write a 3-channel 32x32 dataset in the same binary layout.
void export_cifar10(const Dataset& dataset, const std::string& path);

/// Per-channel mean/stddev, computed on the train split only and reused for
/// test (no leakage).
struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};
ChannelStats channel_stats(const Dataset& train);

}  // namespace agmax::data
