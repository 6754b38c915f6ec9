#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "agmax/error.hpp"

namespace agmax::aug {

/**
 * Dense H x W x Ch image, stored channel-planar (pixels[c*H*W + y*W + x]).
 * Intensities live in [0,1] until a normalize stage runs; afterwards they are
 * unbounded reals and `normalized` is set.
 */
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> pixels;
  bool normalized = false;

  Image() = default;

  Image(std::size_t h, std::size_t w, std::size_t ch, double fill = 0.0)
      : height(h), width(w), channels(ch), pixels(h * w * ch, fill) {}

  std::size_t pixel_count() const { return height * width; }

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return pixels[(c * height + y) * width + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return pixels[(c * height + y) * width + x];
  }

  bool same_extent(const Image& other) const {
    return height == other.height && width == other.width &&
           channels == other.channels;
  }
};

/// Mixed-target bookkeeping for MixUp/CutMix. Unmixed items carry
/// lambda = 1 and label_b = label_a.
struct MixedLabels {
  int label_a = 0;
  int label_b = 0;
  double lambda = 1.0;
};

/// A batch of images with integer class labels; the unit of training.
struct LabeledBatch {
  std::vector<Image> images;
  std::vector<int> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return images.size(); }
};

/// Count of pixel positions (x, y) at which any channel differs.
std::size_t count_differing_pixels(const Image& a, const Image& b);

/// Binary PPM (P6) for 3-channel images, PGM (P5) for 1-channel.
/// Intensities are clamped to [0,1] and quantized to 8 bits.
void write_pnm(const Image& img, const std::string& path);

/// Inverse of write_pnm for round-trip checks; accepts P5 and P6.
Image read_pnm(const std::string& path);

}  // namespace agmax::aug
