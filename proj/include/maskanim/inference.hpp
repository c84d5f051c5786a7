#pragma once

// Test-time animation. For a source frame s and a driving frame d:
//   m_s = D(M(s))
//   p   = P_test(D(M(d)))
//   m_d = R(D(s), m_s, p)
//   c   = L(D(s), m_s, m_d)
//   f   = H(s, U(m_s), U(m_d), c)
// Ablations: no_pert uses p = D(M(d)); no_ref uses m_d = p; no_id does both.

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "maskanim/core.hpp"
#include "maskanim/networks.hpp"

namespace maskanim {

enum class AnimationMode { full, no_pert, no_ref, no_id };

[[nodiscard]] AnimationMode parse_animation_mode(const std::string& name);
[[nodiscard]] const char* animation_mode_name(AnimationMode mode);

struct AnimationResult {
  Frame f;
  Frame source_small;  // D(s)
  Mask m_s;
  Mask driver_mask;    // D(M(d))
  Mask p;
  Mask m_d;
  Frame c;

  /// The six intermediates in pipeline order, as (name, image tensor).
  [[nodiscard]] std::vector<std::pair<std::string, Tensor>> intermediates() const;
};

/// Runs every network in evaluation mode. Throws std::invalid_argument when s
/// or d is not at the bundle's frame resolution.
[[nodiscard]] AnimationResult animate_frame(ModelBundle& models, const Frame& s, const Frame& d,
                                            AnimationMode mode = AnimationMode::full);

/// One generated frame per driving frame, each computed independently.
[[nodiscard]] VideoClip animate_video(ModelBundle& models, const Frame& source,
                                      const VideoClip& driving,
                                      AnimationMode mode = AnimationMode::full);

/// Frame 0 drives nothing and serves as the source; frames 1..N-1 drive.
/// Throws std::invalid_argument for clips shorter than two frames.
[[nodiscard]] VideoClip reconstruct_video(ModelBundle& models, const VideoClip& clip,
                                          AnimationMode mode = AnimationMode::full);

/// Writes s, m_s, d, Md, p, m_d, c and f as PNGs named after the panels.
void dump_intermediates(const std::filesystem::path& dir, const Frame& s, const Frame& d,
                        const AnimationResult& result);

}  // namespace maskanim
