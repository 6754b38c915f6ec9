#include "agmax/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "agmax/rng.hpp"

namespace agmax::data {

namespace {

constexpr std::size_t kCifarRecordBytes = 3073;
constexpr std::size_t kCifarPlane = 1024;  // 32 * 32

aug::Image synth_item(const SynthSpec& spec, std::size_t label,
                      RngStream& rng) {
  const double size = static_cast<double>(spec.image_size);
  const double class_angle =
      std::numbers::pi * static_cast<double>(label) /
          static_cast<double>(spec.num_classes) +
      0.2;
  const double class_freq =
      spec.base_frequency + spec.frequency_step * static_cast<double>(label);
  const double class_phase = 0.8 * static_cast<double>(label);

  const double angle = class_angle + spec.angle_jitter * rng.next_gaussian();
  const double freq =
      class_freq * (1.0 + spec.frequency_jitter * rng.next_gaussian());
  const double phase = class_phase + spec.phase_jitter * rng.next_gaussian();
  const double ca = std::cos(angle), sa = std::sin(angle);

  aug::Image img(spec.image_size, spec.image_size, spec.channels);
  for (std::size_t c = 0; c < spec.channels; ++c) {
    const double channel_shift = 0.4 * static_cast<double>(c);
    for (std::size_t y = 0; y < spec.image_size; ++y) {
      for (std::size_t x = 0; x < spec.image_size; ++x) {
        const double proj =
            (static_cast<double>(x) * ca + static_cast<double>(y) * sa) / size;
        const double wave = std::sin(2.0 * std::numbers::pi * freq * proj +
                                     phase + channel_shift);
        const double noise = spec.noise_sigma * rng.next_gaussian();
        img.at(c, y, x) =
            std::clamp(0.5 + spec.amplitude * wave + noise, 0.0, 1.0);
      }
    }
  }
  return img;
}

Dataset synth_split(const SynthSpec& spec, std::size_t per_class,
                    RngStream split_rng, const std::string& tag) {
  Dataset out;
  out.num_classes = spec.num_classes;
  out.split = tag;
  out.images.reserve(per_class * spec.num_classes);
  out.labels.reserve(per_class * spec.num_classes);
  for (std::size_t label = 0; label < spec.num_classes; ++label) {
    RngStream class_rng = split_rng.split(label);
    for (std::size_t item = 0; item < per_class; ++item) {
      RngStream item_rng = class_rng.split(item);
      out.images.push_back(synth_item(spec, label, item_rng));
      out.labels.push_back(static_cast<int>(label));
    }
  }
  return out;
}

}  // namespace

std::pair<Dataset, Dataset> generate_synth(const SynthSpec& spec) {
  spec.validate();
  RngStream root(spec.seed);
  return {synth_split(spec, spec.train_per_class, root.split(0), "train"),
          synth_split(spec, spec.test_per_class, root.split(1), "test")};
}

aug::Image class_mean(const Dataset& dataset, int label) {
  aug::Image mean;
  std::size_t count = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset.labels[i] != label) continue;
    const aug::Image& img = dataset.images[i];
    if (count == 0) {
      mean = aug::Image(img.height, img.width, img.channels);
    }
    for (std::size_t k = 0; k < img.pixels.size(); ++k) {
      mean.pixels[k] += img.pixels[k];
    }
    ++count;
  }
  if (count == 0) {
    throw Error("class_mean: no items with label " + std::to_string(label));
  }
  for (auto& v : mean.pixels) v /= static_cast<double>(count);
  return mean;
}

Dataset load_cifar10(const std::string& path, const std::string& split) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("load_cifar10: cannot open " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  if (bytes.size() % kCifarRecordBytes != 0) {
    const std::size_t offset =
        bytes.size() - bytes.size() % kCifarRecordBytes;
    throw ParseError("load_cifar10: " + path + " size " +
                         std::to_string(bytes.size()) +
                         " is not a multiple of 3073; truncated record",
                     offset);
  }
  Dataset out;
  out.num_classes = 10;
  out.split = split;
  const std::size_t records = bytes.size() / kCifarRecordBytes;
  out.images.reserve(records);
  out.labels.reserve(records);
  for (std::size_t r = 0; r < records; ++r) {
    const std::size_t base = r * kCifarRecordBytes;
    const auto label = static_cast<unsigned char>(bytes[base]);
    if (label >= 10) {
      throw ParseError("load_cifar10: " + path + ": label byte " +
                           std::to_string(static_cast<int>(label)) + " >= 10",
                       base);
    }
    aug::Image img(32, 32, 3);
    for (std::size_t c = 0; c < 3; ++c) {
      const std::size_t plane = base + 1 + c * kCifarPlane;
      for (std::size_t i = 0; i < kCifarPlane; ++i) {
        img.pixels[c * kCifarPlane + i] =
            static_cast<unsigned char>(bytes[plane + i]) / 255.0;
      }
    }
    out.images.push_back(std::move(img));
    out.labels.push_back(static_cast<int>(label));
  }
  return out;
}

void export_cifar10(const Dataset& dataset, const std::string& path) {
  dataset.validate();
  if (dataset.num_classes > 10) {
    throw Error("export_cifar10: more than 10 classes");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("export_cifar10: cannot open " + path);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const aug::Image& img = dataset.images[i];
    if (img.height != 32 || img.width != 32 || img.channels != 3) {
      throw Error("export_cifar10: requires 3-channel 32x32 images");
    }
    const char label = static_cast<char>(dataset.labels[i]);
    out.write(&label, 1);
    for (const double v : img.pixels) {
      const auto byte = static_cast<unsigned char>(
          std::clamp(std::lround(v * 255.0), 0L, 255L));
      out.write(reinterpret_cast<const char*>(&byte), 1);
    }
  }
  if (!out) throw Error("export_cifar10: write failed for " + path);
}

ChannelStats channel_stats(const Dataset& train) {
  if (train.size() == 0) throw Error("channel_stats: empty dataset");
  const std::size_t channels = train.images.front().channels;
  ChannelStats stats;
  stats.mean.assign(channels, 0.0);
  stats.stddev.assign(channels, 0.0);
  std::size_t per_channel = 0;
  for (const aug::Image& img : train.images) {
    per_channel += img.pixel_count();
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t y = 0; y < img.height; ++y) {
        for (std::size_t x = 0; x < img.width; ++x) {
          stats.mean[c] += img.at(c, y, x);
        }
      }
    }
  }
  for (auto& m : stats.mean) m /= static_cast<double>(per_channel);
  for (const aug::Image& img : train.images) {
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t y = 0; y < img.height; ++y) {
        for (std::size_t x = 0; x < img.width; ++x) {
          const double d = img.at(c, y, x) - stats.mean[c];
          stats.stddev[c] += d * d;
        }
      }
    }
  }
  for (auto& s : stats.stddev) {
    s = std::sqrt(s / static_cast<double>(per_channel));
    if (s < 1e-8) s = 1.0;  // flat channel: avoid dividing by ~0
  }
  return stats;
}

}  // namespace agmax::data
