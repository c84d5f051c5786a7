#include "maskanim/inference.hpp"

#include <stdexcept>

#include "maskanim/errors.hpp"
#include "maskanim/image_io.hpp"
#include "maskanim/perturbation.hpp"

namespace maskanim {

AnimationMode parse_animation_mode(const std::string& name) {
  if (name == "full") return AnimationMode::full;
  if (name == "no_pert") return AnimationMode::no_pert;
  if (name == "no_ref") return AnimationMode::no_ref;
  if (name == "no_id") return AnimationMode::no_id;
  throw ConfigError("unknown animation mode '" + name + "' (full, no_pert, no_ref, no_id)");
}

const char* animation_mode_name(AnimationMode mode) {
  switch (mode) {
    case AnimationMode::full: return "full";
    case AnimationMode::no_pert: return "no_pert";
    case AnimationMode::no_ref: return "no_ref";
    case AnimationMode::no_id: return "no_id";
  }
  return "?";
}

std::vector<std::pair<std::string, Tensor>> AnimationResult::intermediates() const {
  return {{"s_small", source_small.tensor()}, {"m_s", m_s.tensor()}, {"Md", driver_mask.tensor()},
          {"p", p.tensor()},                  {"m_d", m_d.tensor()}, {"c", c.tensor()}};
}

AnimationResult animate_frame(ModelBundle& models, const Frame& s, const Frame& d,
                              AnimationMode mode) {
  const int frame_res = models.frame_resolution();
  if (s.resolution() != frame_res || d.resolution() != frame_res) {
    throw std::invalid_argument("animate_frame: frames must be " + std::to_string(frame_res) +
                                "x" + std::to_string(frame_res));
  }
  const int mask_res = models.mask_resolution();
  const PerturbationConfig& pert = models.config().perturbation;

  Frame source_small = downscale(s, mask_res);
  Mask m_s = models.mask(s);
  Mask driver_mask = models.mask(d);
  const bool perturb = mode == AnimationMode::full || mode == AnimationMode::no_ref;
  const bool refine = mode == AnimationMode::full || mode == AnimationMode::no_pert;
  Mask p = perturb ? perturb_test(driver_mask, pert) : driver_mask;
  Mask m_d = refine ? models.refine(source_small, m_s, p) : p;
  Frame c = models.coarse(source_small, m_s, m_d);
  Frame f = models.fine(s, upscale(m_s, frame_res), upscale(m_d, frame_res), c);
  return {std::move(f), std::move(source_small), std::move(m_s), std::move(driver_mask),
          std::move(p), std::move(m_d), std::move(c)};
}

VideoClip animate_video(ModelBundle& models, const Frame& source, const VideoClip& driving,
                        AnimationMode mode) {
  VideoClip out{driving.id, {}};
  out.frames.reserve(driving.frames.size());
  for (const Frame& d : driving.frames) out.frames.push_back(animate_frame(models, source, d, mode).f);
  return out;
}

VideoClip reconstruct_video(ModelBundle& models, const VideoClip& clip, AnimationMode mode) {
  if (clip.frames.size() < 2) {
    throw std::invalid_argument("reconstruct_video: clip '" + clip.id + "' has fewer than two frames");
  }
  VideoClip driving{clip.id, {clip.frames.begin() + 1, clip.frames.end()}};
  return animate_video(models, clip.frames.front(), driving, mode);
}

void dump_intermediates(const std::filesystem::path& dir, const Frame& s, const Frame& d,
                        const AnimationResult& result) {
  write_png(dir / "s.png", s);
  write_png(dir / "m_s.png", result.m_s);
  write_png(dir / "d.png", d);
  write_png(dir / "Md.png", result.driver_mask);
  write_png(dir / "p.png", result.p);
  write_png(dir / "m_d.png", result.m_d);
  write_png(dir / "c.png", result.c);
  write_png(dir / "f.png", result.f);
}

}  // namespace maskanim
