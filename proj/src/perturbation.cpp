#include "maskanim/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace maskanim {

namespace {

void check_in_range(double v, double lo, double hi, const char* name) {
  if (!(v >= lo && v <= hi)) {
    throw std::invalid_argument(std::string("color_jitter: ") + name + " " + std::to_string(v) +
                                " outside [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                "]");
  }
}

inline float clamp01(float v) { return std::clamp(v, 0.0f, 1.0f); }

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
  const float mx = std::max({r, g, b});
  const float mn = std::min({r, g, b});
  const float delta = mx - mn;
  v = mx;
  s = mx > 0.0f ? delta / mx : 0.0f;
  if (delta <= 0.0f) {
    h = 0.0f;
    return;
  }
  float hue;
  if (mx == r) {
    hue = (g - b) / delta;
    if (hue < 0.0f) hue += 6.0f;
  } else if (mx == g) {
    hue = (b - r) / delta + 2.0f;
  } else {
    hue = (r - g) / delta + 4.0f;
  }
  h = hue / 6.0f;
}

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
  const float scaled = h * 6.0f;
  const int sector = static_cast<int>(std::floor(scaled)) % 6;
  const float f = scaled - std::floor(scaled);
  const float p = v * (1.0f - s);
  const float q = v * (1.0f - s * f);
  const float t = v * (1.0f - s * (1.0f - f));
  switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

// Rescales a strided 1-D segment of length `len` about its center. Samples
// outside the segment read as zero. scale == 1 copies exactly.
void scale_segment(const float* src, float* dst, int len, std::ptrdiff_t stride, double scale) {
  if (scale == 1.0) {
    for (int i = 0; i < len; ++i) dst[i * stride] = src[i * stride];
    return;
  }
  const double center = 0.5 * len;
  for (int i = 0; i < len; ++i) {
    const double pos = center + (i + 0.5 - center) / scale - 0.5;
    const double fl = std::floor(pos);
    const int i0 = static_cast<int>(fl);
    const auto t = static_cast<float>(pos - fl);
    const float v0 = (i0 >= 0 && i0 < len) ? src[i0 * stride] : 0.0f;
    const float v1 = (i0 + 1 >= 0 && i0 + 1 < len) ? src[(i0 + 1) * stride] : 0.0f;
    dst[i * stride] = clamp01((1.0f - t) * v0 + t * v1);
  }
}

// Applies scale_segment to every row (axis_x) or every column of the plane.
void scale_plane_axis(const Tensor& in, Tensor& out, bool along_x, int begin, int end,
                      double scale) {
  const int w = in.w();
  const int h = in.h();
  const float* ip = in.plane(0, 0);
  float* op = out.plane(0, 0);
  if (along_x) {
    for (int y = 0; y < h; ++y) {
      const std::size_t row = static_cast<std::size_t>(y) * w;
      scale_segment(ip + row + begin, op + row + begin, end - begin, 1, scale);
    }
  } else {
    for (int x = 0; x < w; ++x) {
      scale_segment(ip + static_cast<std::size_t>(begin) * w + x,
                    op + static_cast<std::size_t>(begin) * w + x, end - begin, w, scale);
    }
  }
}

}  // namespace

JitterParams sample_jitter(RandomStream& rng, const PerturbationConfig& ranges) {
  JitterParams p;
  p.brightness = rng.uniform(ranges.brightness_min, ranges.brightness_max);
  p.contrast = rng.uniform(ranges.contrast_min, ranges.contrast_max);
  p.saturation = rng.uniform(ranges.saturation_min, ranges.saturation_max);
  p.hue_shift = rng.uniform(ranges.hue_min, ranges.hue_max);
  return p;
}

Frame color_jitter(const Frame& frame, const JitterParams& params,
                   const PerturbationConfig& ranges) {
  check_in_range(params.brightness, ranges.brightness_min, ranges.brightness_max, "brightness");
  check_in_range(params.contrast, ranges.contrast_min, ranges.contrast_max, "contrast");
  check_in_range(params.saturation, ranges.saturation_min, ranges.saturation_max, "saturation");
  check_in_range(params.hue_shift, ranges.hue_min, ranges.hue_max, "hue_shift");

  Tensor t = frame.tensor();
  const std::size_t plane = t.shape().plane();
  float* r = t.plane(0, 0);
  float* g = t.plane(0, 1);
  float* b = t.plane(0, 2);

  if (params.brightness != 1.0) {
    const auto k = static_cast<float>(params.brightness);
    for (float& v : t.values()) v = clamp01(v * k);
  }
  if (params.contrast != 1.0) {
    double sum = 0.0;
    for (std::size_t i = 0; i < plane; ++i) sum += kLumaR * r[i] + kLumaG * g[i] + kLumaB * b[i];
    const auto mean = static_cast<float>(sum / static_cast<double>(plane));
    const auto k = static_cast<float>(params.contrast);
    for (float& v : t.values()) v = clamp01(mean + k * (v - mean));
  }
  if (params.saturation != 1.0) {
    const auto k = static_cast<float>(params.saturation);
    for (std::size_t i = 0; i < plane; ++i) {
      const float luma = kLumaR * r[i] + kLumaG * g[i] + kLumaB * b[i];
      r[i] = clamp01(luma + k * (r[i] - luma));
      g[i] = clamp01(luma + k * (g[i] - luma));
      b[i] = clamp01(luma + k * (b[i] - luma));
    }
  }
  if (params.hue_shift != 0.0) {
    const auto shift = static_cast<float>(params.hue_shift);
    for (std::size_t i = 0; i < plane; ++i) {
      float h, s, v;
      rgb_to_hsv(r[i], g[i], b[i], h, s, v);
      h += shift;
      h -= std::floor(h);
      hsv_to_rgb(h, s, v, r[i], g[i], b[i]);
      r[i] = clamp01(r[i]);
      g[i] = clamp01(g[i]);
      b[i] = clamp01(b[i]);
    }
  }
  return Frame(std::move(t));
}

float median_value(const Mask& mask) {
  std::vector<float> v(mask.tensor().values().begin(), mask.tensor().values().end());
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const float upper = v[mid];
  if (n % 2 == 1) return upper;
  const float lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return static_cast<float>(0.5 * (static_cast<double>(lower) + upper));
}

Mask median_threshold(const Mask& mask) {
  const float rho = median_value(mask);
  Tensor t = mask.tensor();
  for (float& v : t.values()) {
    if (v < rho) v = 0.0f;
  }
  return Mask(std::move(t));
}

Mask scale_about_center(const Mask& mask, double factor) {
  if (!(factor > 0.0)) throw std::invalid_argument("scale_about_center: factor must be positive");
  const int res = mask.resolution();
  Tensor tmp(mask.tensor().shape());
  scale_plane_axis(mask.tensor(), tmp, /*along_x=*/true, 0, res, factor);
  Tensor out(mask.tensor().shape());
  scale_plane_axis(tmp, out, /*along_x=*/false, 0, res, factor);
  return Mask(std::move(out));
}

Mask perturb_test(const Mask& mask, const PerturbationConfig& config) {
  return scale_about_center(median_threshold(mask), config.shrink_factor);
}

StripWarpParams sample_strip_warp(RandomStream& rng, const PerturbationConfig& config) {
  StripWarpParams p;
  p.orientation = rng.coin_flip() ? StripOrientation::vertical : StripOrientation::horizontal;
  p.strip_scales.resize(static_cast<std::size_t>(config.strip_count));
  for (double& s : p.strip_scales) s = rng.uniform(config.strip_scale_min, config.strip_scale_max);
  p.global_scale = rng.uniform(config.global_scale_min, config.global_scale_max);
  return p;
}

Mask strip_warp(const Mask& mask, const StripWarpParams& params) {
  const int res = mask.resolution();
  const int strips = static_cast<int>(params.strip_scales.size());
  if (strips < 1 || strips > res) {
    throw std::invalid_argument("strip_warp: strip count must be in [1, resolution]");
  }
  // Vertical cuts give column strips, each rescaled along x; the global
  // rescale then runs along the strip axis (y). Horizontal is the transpose.
  const bool strips_along_x = params.orientation == StripOrientation::vertical;
  Tensor warped(mask.tensor().shape());
  for (int k = 0; k < strips; ++k) {
    const int begin = k * res / strips;
    const int end = (k + 1) * res / strips;
    const double scale = params.strip_scales[static_cast<std::size_t>(k)];
    if (strips_along_x) {
      for (int y = 0; y < res; ++y) {
        const std::size_t row = static_cast<std::size_t>(y) * res;
        scale_segment(mask.tensor().plane(0, 0) + row + begin, warped.plane(0, 0) + row + begin,
                      end - begin, 1, scale);
      }
    } else {
      for (int x = 0; x < res; ++x) {
        const std::size_t offset = static_cast<std::size_t>(begin) * res + x;
        scale_segment(mask.tensor().plane(0, 0) + offset, warped.plane(0, 0) + offset,
                      end - begin, res, scale);
      }
    }
  }
  Tensor out(mask.tensor().shape());
  scale_plane_axis(warped, out, /*along_x=*/!strips_along_x, 0, res, params.global_scale);
  return Mask(std::move(out));
}

Mask add_poisson_noise(const Mask& mask, double lambda, double scale, RandomStream& rng) {
  Tensor t = mask.tensor();
  if (lambda <= 0.0 || scale == 0.0) return Mask(std::move(t));
  for (float& v : t.values()) {
    const int count = rng.poisson(lambda);
    v = clamp01(static_cast<float>(v + count * scale));
  }
  return Mask(std::move(t));
}

Mask perturb_train(const Mask& mask, RandomStream& rng, const PerturbationConfig& config,
                   TrainPerturbationStages stages) {
  Mask out = mask;
  if (stages.warp) out = strip_warp(out, sample_strip_warp(rng, config));
  if (stages.threshold) out = median_threshold(out);
  if (stages.noise) out = add_poisson_noise(out, config.poisson_lambda, config.noise_scale, rng);
  return out;
}

}  // namespace maskanim
