#pragma once

// Appearance augmentation for driving frames and the identity perturbations
// applied to driver masks.
//
// All geometric warps keep the canvas size. Content is resampled with linear
// interpolation about a center point; samples falling outside the source
// region read as zero.

#include <vector>

#include "maskanim/config.hpp"
#include "maskanim/core.hpp"
#include "maskanim/random.hpp"

namespace maskanim {

/// Color jitter parameters. The identity is (1, 1, 1, 0).
struct JitterParams {
  double brightness = 1.0;  // multiplies every channel
  double contrast = 1.0;    // blend factor toward the image's mean luminance
  double saturation = 1.0;  // blend factor toward each pixel's luminance
  double hue_shift = 0.0;   // HSV hue rotation, in full turns
};

[[nodiscard]] JitterParams sample_jitter(RandomStream& rng, const PerturbationConfig& ranges = {});

/// Applies brightness, contrast, saturation, then hue, clamping to [0, 1]
/// after each step. Identity parameters return the input unchanged. Throws
/// std::invalid_argument when a parameter lies outside `ranges`.
[[nodiscard]] Frame color_jitter(const Frame& frame, const JitterParams& params,
                                 const PerturbationConfig& ranges = {});

/// Rec. 601 luma weights.
inline constexpr float kLumaR = 0.299f;
inline constexpr float kLumaG = 0.587f;
inline constexpr float kLumaB = 0.114f;

/// Median pixel value; the midpoint of the two middle values for even counts.
[[nodiscard]] float median_value(const Mask& mask);

/// Zeroes every pixel strictly below the mask's median.
[[nodiscard]] Mask median_threshold(const Mask& mask);

/// Scales content about the canvas center by `factor` (< 1 shrinks), zero-filling.
[[nodiscard]] Mask scale_about_center(const Mask& mask, double factor);

/// Test-time perturbation: median threshold, then shrink by `shrink_factor`.
[[nodiscard]] Mask perturb_test(const Mask& mask, const PerturbationConfig& config = {});

enum class StripOrientation {
  vertical,    // cut into columns; strips rescale horizontally, global rescale vertical
  horizontal,  // cut into rows; strips rescale vertically, global rescale horizontal
};

struct StripWarpParams {
  StripOrientation orientation = StripOrientation::vertical;
  std::vector<double> strip_scales;
  double global_scale = 1.0;
};

[[nodiscard]] StripWarpParams sample_strip_warp(RandomStream& rng,
                                                const PerturbationConfig& config = {});

/// Cuts the mask into `strip_scales.size()` equal strips, rescales each about
/// its own center inside its strip, then rescales the whole canvas along the
/// strip axis about the image center. Unit scales are an exact identity.
[[nodiscard]] Mask strip_warp(const Mask& mask, const StripWarpParams& params);

/// Adds n * scale with n ~ Poisson(lambda) independently per pixel, then clamps.
[[nodiscard]] Mask add_poisson_noise(const Mask& mask, double lambda, double scale,
                                     RandomStream& rng);

/// Selects which stages of the training perturbation run.
struct TrainPerturbationStages {
  bool warp = true;
  bool threshold = true;
  bool noise = true;
};

/// Training-time perturbation: random strip warp, median threshold, Poisson noise.
[[nodiscard]] Mask perturb_train(const Mask& mask, RandomStream& rng,
                                 const PerturbationConfig& config = {},
                                 TrainPerturbationStages stages = {});

}  // namespace maskanim
