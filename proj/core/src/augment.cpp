#include "agmax/augment.hpp"

#include <algorithm>
#include <cmath>

namespace agmax::aug {

namespace {

std::vector<double> broadcast_fill(const std::vector<double>& fill,
                                   std::size_t channels) {
  if (fill.size() == channels) return fill;
  if (fill.size() == 1) return std::vector<double>(channels, fill[0]);
  throw Error("cutout: fill has " + std::to_string(fill.size()) +
              " entries for " + std::to_string(channels) + " channels");
}

void require_unnormalized(const Image& img, const char* stage) {
  if (img.normalized) {
    throw Error(std::string(stage) + ": image already normalized");
  }
}

}  // namespace

void validate(const AugmentRecipe& recipe) {
  std::size_t normalize_count = 0;
  for (const Stage& stage : recipe.stages) {
    if (std::holds_alternative<NormalizeStage>(stage)) ++normalize_count;
    if (const auto* cut = std::get_if<CutoutStage>(&stage)) {
      if (cut->size < 0) {
        throw ConfigError("recipe: cutout size must be nonnegative, got " +
                          std::to_string(cut->size));
      }
    }
    if (const auto* flip = std::get_if<HFlipStage>(&stage)) {
      if (flip->probability < 0.0 || flip->probability > 1.0) {
        throw ConfigError("recipe: hflip probability outside [0,1]");
      }
    }
    if (const auto* pol = std::get_if<PolicyStage>(&stage)) {
      if (pol->apply_probability < 0.0 || pol->apply_probability > 1.0) {
        throw ConfigError("recipe: policy apply probability outside [0,1]");
      }
    }
  }
  if (normalize_count > 1) {
    throw ConfigError("recipe: normalize appears more than once");
  }
  if (recipe.mix != BatchMix::none && recipe.mix_alpha <= 0.0) {
    throw ConfigError("recipe: mix alpha must be positive, got " +
                      std::to_string(recipe.mix_alpha));
  }
  if (recipe.mix == BatchMix::cutmix &&
      (recipe.mix_probability < 0.0 || recipe.mix_probability > 1.0)) {
    throw ConfigError("recipe: cutmix probability outside [0,1]");
  }
}

Image pad_crop_at(const Image& img, std::size_t pad, std::size_t offset_y,
                  std::size_t offset_x) {
  require_unnormalized(img, "pad_crop");
  const std::size_t padded_h = img.height + 2 * pad;
  const std::size_t padded_w = img.width + 2 * pad;
  if (img.height > padded_h || img.width > padded_w) {
    throw Error("pad_crop: crop size larger than padded image");
  }
  if (offset_y + img.height > padded_h || offset_x + img.width > padded_w) {
    throw Error("pad_crop: offset out of range");
  }
  Image out(img.height, img.width, img.channels);
  for (std::size_t c = 0; c < img.channels; ++c) {
    for (std::size_t y = 0; y < img.height; ++y) {
      const std::size_t py = y + offset_y;  // row in the padded frame
      if (py < pad || py >= pad + img.height) continue;
      for (std::size_t x = 0; x < img.width; ++x) {
        const std::size_t px = x + offset_x;
        if (px < pad || px >= pad + img.width) continue;
        out.at(c, y, x) = img.at(c, py - pad, px - pad);
      }
    }
  }
  return out;
}

Image hflip(const Image& img) {
  Image out(img.height, img.width, img.channels);
  out.normalized = img.normalized;
  for (std::size_t c = 0; c < img.channels; ++c) {
    for (std::size_t y = 0; y < img.height; ++y) {
      for (std::size_t x = 0; x < img.width; ++x) {
        out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
      }
    }
  }
  return out;
}

Image normalize(const Image& img, const std::vector<double>& mean,
                const std::vector<double>& stddev) {
  if (img.normalized) throw Error("normalize: image already normalized");
  if (mean.size() != img.channels || stddev.size() != img.channels) {
    throw Error("normalize: expected " + std::to_string(img.channels) +
                " per-channel statistics");
  }
  Image out = img;
  for (std::size_t c = 0; c < img.channels; ++c) {
    if (stddev[c] <= 0.0) {
      throw Error("normalize: nonpositive stddev for channel " +
                  std::to_string(c));
    }
    for (std::size_t y = 0; y < img.height; ++y) {
      for (std::size_t x = 0; x < img.width; ++x) {
        out.at(c, y, x) = (img.at(c, y, x) - mean[c]) / stddev[c];
      }
    }
  }
  out.normalized = true;
  return out;
}

Image cutout_at(const Image& img, int size, const std::vector<double>& fill,
                std::size_t center_y, std::size_t center_x) {
  if (size < 0) {
    throw Error("cutout: size must be nonnegative, got " + std::to_string(size));
  }
  require_unnormalized(img, "cutout");
  const auto fills = broadcast_fill(fill, img.channels);
  Image out = img;
  const long y0 = static_cast<long>(center_y) - size / 2;
  const long x0 = static_cast<long>(center_x) - size / 2;
  const std::size_t cy0 = static_cast<std::size_t>(std::max(0L, y0));
  const std::size_t cx0 = static_cast<std::size_t>(std::max(0L, x0));
  const std::size_t cy1 = static_cast<std::size_t>(
      std::clamp(y0 + size, 0L, static_cast<long>(img.height)));
  const std::size_t cx1 = static_cast<std::size_t>(
      std::clamp(x0 + size, 0L, static_cast<long>(img.width)));
  for (std::size_t c = 0; c < img.channels; ++c) {
    for (std::size_t y = cy0; y < cy1; ++y) {
      for (std::size_t x = cx0; x < cx1; ++x) out.at(c, y, x) = fills[c];
    }
  }
  return out;
}

Image cutout(const Image& img, int size, const std::vector<double>& fill,
             RngStream& rng) {
  if (size < 0) {
    throw Error("cutout: size must be nonnegative, got " + std::to_string(size));
  }
  const std::size_t cy = rng.next_below(img.height);
  const std::size_t cx = rng.next_below(img.width);
  return cutout_at(img, size, fill, cy, cx);
}

Image standard_augment(const Image& img, const AugmentRecipe& recipe,
                       RngStream& rng) {
  Image out = img;
  for (const Stage& stage : recipe.stages) {
    if (const auto* pc = std::get_if<PadCropStage>(&stage)) {
      const std::size_t oy = rng.next_below(2 * pc->pad + 1);
      const std::size_t ox = rng.next_below(2 * pc->pad + 1);
      out = pad_crop_at(out, pc->pad, oy, ox);
    } else if (const auto* fl = std::get_if<HFlipStage>(&stage)) {
      if (rng.next_bernoulli(fl->probability)) out = hflip(out);
    } else if (const auto* nm = std::get_if<NormalizeStage>(&stage)) {
      out = normalize(out, nm->mean, nm->stddev);
    } else if (const auto* cut = std::get_if<CutoutStage>(&stage)) {
      out = cutout(out, cut->size, cut->fill, rng);
    } else if (const auto* pol = std::get_if<PolicyStage>(&stage)) {
      if (rng.next_bernoulli(pol->apply_probability)) {
        out = policy_augment(out, pol->policy, rng);
      }
    }
  }
  return out;
}

std::pair<Image, Image> positive_pair(const Image& img,
                                      const AugmentRecipe& recipe,
                                      RngStream& rng) {
  RngStream first = rng.split(0);
  RngStream second = rng.split(1);
  return {standard_augment(img, recipe, first),
          standard_augment(img, recipe, second)};
}

MixDraw draw_mixup(std::size_t batch_size, double alpha, RngStream& rng) {
  if (batch_size < 2) {
    throw Error("mixup: batch size must be at least 2, got " +
                std::to_string(batch_size));
  }
  if (alpha <= 0.0) {
    throw Error("mixup: alpha must be positive, got " + std::to_string(alpha));
  }
  MixDraw draw;
  draw.applied = true;
  draw.lambda = rng.next_beta(alpha, alpha);
  draw.lambda_adjusted = draw.lambda;
  draw.partner = rng.permutation(batch_size);
  return draw;
}

MixDraw draw_cutmix(std::size_t batch_size, std::size_t height,
                    std::size_t width, double alpha, double p_apply,
                    RngStream& rng) {
  if (batch_size < 2) {
    throw Error("cutmix: batch size must be at least 2, got " +
                std::to_string(batch_size));
  }
  if (alpha <= 0.0) {
    throw Error("cutmix: alpha must be positive, got " + std::to_string(alpha));
  }
  if (p_apply < 0.0 || p_apply > 1.0) {
    throw Error("cutmix: p_apply outside [0,1]");
  }
  MixDraw draw;
  if (!rng.next_bernoulli(p_apply)) return draw;  // identity, lambda = 1

  draw.applied = true;
  draw.lambda = rng.next_beta(alpha, alpha);
  const double cut_ratio = std::sqrt(1.0 - draw.lambda);
  const long cut_h = std::lround(cut_ratio * static_cast<double>(height));
  const long cut_w = std::lround(cut_ratio * static_cast<double>(width));
  const long cy = static_cast<long>(rng.next_below(height));
  const long cx = static_cast<long>(rng.next_below(width));

  const long y0 = cy - cut_h / 2;
  const long x0 = cx - cut_w / 2;
  draw.y0 = static_cast<std::size_t>(std::clamp(y0, 0L, static_cast<long>(height)));
  draw.y1 = static_cast<std::size_t>(
      std::clamp(y0 + cut_h, 0L, static_cast<long>(height)));
  draw.x0 = static_cast<std::size_t>(std::clamp(x0, 0L, static_cast<long>(width)));
  draw.x1 = static_cast<std::size_t>(
      std::clamp(x0 + cut_w, 0L, static_cast<long>(width)));

  const double area = static_cast<double>((draw.y1 - draw.y0) * (draw.x1 - draw.x0));
  draw.lambda_adjusted = 1.0 - area / static_cast<double>(height * width);
  draw.partner = rng.permutation(batch_size);
  if (area == 0.0) draw.applied = false;  // clipped away entirely
  return draw;
}

std::pair<LabeledBatch, std::vector<MixedLabels>> apply_mixup(
    const LabeledBatch& batch, const MixDraw& draw) {
  std::vector<MixedLabels> mixed(batch.size());
  LabeledBatch out = batch;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    mixed[i] = {batch.labels[i], batch.labels[i], 1.0};
  }
  if (!draw.applied) return {std::move(out), std::move(mixed)};

  const double lam = draw.lambda;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const std::size_t j = draw.partner[i];
    const Image& a = batch.images[i];
    const Image& b = batch.images[j];
    if (!a.same_extent(b)) throw Error("mixup: images differ in extent");
    Image& dst = out.images[i];
    for (std::size_t k = 0; k < dst.pixels.size(); ++k) {
      dst.pixels[k] = lam * a.pixels[k] + (1.0 - lam) * b.pixels[k];
    }
    mixed[i] = {batch.labels[i], batch.labels[j], lam};
  }
  return {std::move(out), std::move(mixed)};
}

std::pair<LabeledBatch, std::vector<MixedLabels>> apply_cutmix(
    const LabeledBatch& batch, const MixDraw& draw) {
  std::vector<MixedLabels> mixed(batch.size());
  LabeledBatch out = batch;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    mixed[i] = {batch.labels[i], batch.labels[i], 1.0};
  }
  if (!draw.applied) return {std::move(out), std::move(mixed)};

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const std::size_t j = draw.partner[i];
    const Image& src = batch.images[j];
    Image& dst = out.images[i];
    if (!dst.same_extent(src)) throw Error("cutmix: images differ in extent");
    for (std::size_t c = 0; c < dst.channels; ++c) {
      for (std::size_t y = draw.y0; y < draw.y1; ++y) {
        for (std::size_t x = draw.x0; x < draw.x1; ++x) {
          dst.at(c, y, x) = src.at(c, y, x);
        }
      }
    }
    mixed[i] = {batch.labels[i], batch.labels[j], draw.lambda_adjusted};
  }
  return {std::move(out), std::move(mixed)};
}

std::pair<LabeledBatch, std::vector<MixedLabels>> mixup(
    const LabeledBatch& batch, double alpha, RngStream& rng) {
  return apply_mixup(batch, draw_mixup(batch.size(), alpha, rng));
}

std::pair<LabeledBatch, std::vector<MixedLabels>> cutmix(
    const LabeledBatch& batch, double alpha, double p_apply, RngStream& rng) {
  if (batch.images.empty()) throw Error("cutmix: empty batch");
  const Image& first = batch.images.front();
  return apply_cutmix(
      batch, draw_cutmix(batch.size(), first.height, first.width, alpha,
                         p_apply, rng));
}

}  // namespace agmax::aug
