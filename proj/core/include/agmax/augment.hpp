#pragma once

#include <utility>
#include <variant>
#include <vector>

#include "agmax/image.hpp"
#include "agmax/policy.hpp"
#include "agmax/rng.hpp"

namespace agmax::aug {

// Per-image stages, applied in recipe order.
struct PadCropStage {
  std::size_t pad = 4;  // zero-pad all sides, then random-crop back
};
struct HFlipStage {
  double probability = 0.5;
};
struct NormalizeStage {
  std::vector<double> mean;
  std::vector<double> stddev;
};
struct CutoutStage {
  int size = 16;
  std::vector<double> fill;  // per channel, in [0,1]; single value broadcasts
};
struct PolicyStage {
  Policy policy;
  double apply_probability = 1.0;
};

using Stage =
    std::variant<PadCropStage, HFlipStage, NormalizeStage, CutoutStage, PolicyStage>;

enum class BatchMix { none, mixup, cutmix };

/**
 * Ordered augmentation recipe. Per-image stages run independently for each
 * image (and each view, for positive pairs); the batch-level mix runs once
 * per batch afterwards. At most one of mixup/cutmix, and normalize at most
 * once, enforced by validate().
 */
struct AugmentRecipe {
  std::vector<Stage> stages;
  BatchMix mix = BatchMix::none;
  double mix_alpha = 1.0;
  double mix_probability = 1.0;  // chance cutmix fires for a batch
};

void validate(const AugmentRecipe& recipe);

// Deterministic cores; the stochastic wrappers draw placements and delegate.
Image pad_crop_at(const Image& img, std::size_t pad, std::size_t offset_y,
                  std::size_t offset_x);
Image hflip(const Image& img);
Image normalize(const Image& img, const std::vector<double>& mean,
                const std::vector<double>& stddev);
Image cutout_at(const Image& img, int size, const std::vector<double>& fill,
                std::size_t center_y, std::size_t center_x);

/// Square of side `size` set to `fill`, centered at a uniform random pixel
/// and clipped at the boundary. size 0 is the identity.
Image cutout(const Image& img, int size, const std::vector<double>& fill,
             RngStream& rng);

/// Apply the recipe's per-image stages in order.
Image standard_augment(const Image& img, const AugmentRecipe& recipe,
                       RngStream& rng);

/// Two independent stochastic applications of the per-image stages to the
/// same source, using split substreams; the AgMax positive pair.
std::pair<Image, Image> positive_pair(const Image& img,
                                      const AugmentRecipe& recipe,
                                      RngStream& rng);

/**
 * One sampled batch-level mix. Drawing is separated from application so the
 * two AgMax views can share the identical mix (same lambda, same permutation,
 * same box).
 */
struct MixDraw {
  bool applied = false;
  double lambda = 1.0;           // raw Beta draw
  double lambda_adjusted = 1.0;  // area-corrected for cutmix; = lambda for mixup
  std::vector<std::size_t> partner;
  // cutmix box [y0,y1) x [x0,x1), already clipped
  std::size_t y0 = 0, y1 = 0, x0 = 0, x1 = 0;
};

MixDraw draw_mixup(std::size_t batch_size, double alpha, RngStream& rng);
MixDraw draw_cutmix(std::size_t batch_size, std::size_t height,
                    std::size_t width, double alpha, double p_apply,
                    RngStream& rng);

std::pair<LabeledBatch, std::vector<MixedLabels>> apply_mixup(
    const LabeledBatch& batch, const MixDraw& draw);
std::pair<LabeledBatch, std::vector<MixedLabels>> apply_cutmix(
    const LabeledBatch& batch, const MixDraw& draw);

/// lambda ~ Beta(alpha, alpha) once per batch; items pair with a uniform
/// random permutation and blend as lambda*x_i + (1-lambda)*x_partner(i).
std::pair<LabeledBatch, std::vector<MixedLabels>> mixup(
    const LabeledBatch& batch, double alpha, RngStream& rng);

/// With probability p_apply, paste a sqrt(1-lambda)-scaled box from the
/// partner image and mix labels by the clipped-area fraction.
std::pair<LabeledBatch, std::vector<MixedLabels>> cutmix(
    const LabeledBatch& batch, double alpha, double p_apply, RngStream& rng);

}  // namespace agmax::aug
