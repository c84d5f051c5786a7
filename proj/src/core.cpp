#include "maskanim/core.hpp"

#include <stdexcept>

#include "maskanim/kernels.hpp"

namespace maskanim {

namespace {

void check_image(const Tensor& t, int channels, const char* what) {
  const Shape s = t.shape();
  if (s.n != 1 || s.c != channels || s.h != s.w || s.h < 1) {
    throw std::invalid_argument(std::string(what) + ": expected shape (1," +
                                std::to_string(channels) + ",R,R), got " + s.str());
  }
  for (float v : t.values()) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw std::invalid_argument(std::string(what) + ": value " + std::to_string(v) +
                                  " outside [0,1]");
    }
  }
}

}  // namespace

Frame::Frame(Tensor data) : data_(std::move(data)) { check_image(data_, 3, "Frame"); }

Frame Frame::filled(int resolution, float value) {
  return Frame(Tensor(Shape{1, 3, resolution, resolution}, value));
}

Mask::Mask(Tensor data) : data_(std::move(data)) { check_image(data_, 1, "Mask"); }

Mask Mask::filled(int resolution, float value) {
  return Mask(Tensor(Shape{1, 1, resolution, resolution}, value));
}

void require_source_clip(const VideoClip& clip) {
  if (clip.frames.size() < 2) {
    throw std::invalid_argument("clip '" + clip.id + "' needs at least 2 frames, has " +
                                std::to_string(clip.frames.size()));
  }
  for (const Frame& f : clip.frames) {
    if (f.resolution() != clip.frames.front().resolution()) {
      throw std::invalid_argument("clip '" + clip.id + "' mixes frame resolutions");
    }
  }
}

Tensor resample(const Tensor& x, int target_resolution) {
  if (target_resolution < 1) {
    throw std::invalid_argument("resample: target resolution must be positive, got " +
                                std::to_string(target_resolution));
  }
  if (x.h() == target_resolution && x.w() == target_resolution) return x;
  return kernels::resize_bilinear(x, target_resolution, target_resolution);
}

Frame downscale(const Frame& x, int target_resolution) {
  return Frame(resample(x.tensor(), target_resolution));
}

Mask downscale(const Mask& x, int target_resolution) {
  return Mask(resample(x.tensor(), target_resolution));
}

Mask upscale(const Mask& x, int target_resolution) {
  if (target_resolution < x.resolution()) {
    throw std::invalid_argument("upscale: target " + std::to_string(target_resolution) +
                                " below source " + std::to_string(x.resolution()));
  }
  return Mask(resample(x.tensor(), target_resolution));
}

}  // namespace maskanim
