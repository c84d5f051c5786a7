#pragma once

// Frame-directory datasets, training-pair sampling and the synthetic toy set.
//
// Layout: <root>/<split>/<video_id>/frame_%05d.png, frames ordered by name.
// Toy videos add mask_%05d.png (binary object masks) and keypoints.json:
//   {"resolution": R, "object_color": [r, g, b],
//    "frames": [{"file": "frame_00000.png", "keypoints": [[x, y, detected], ...]}, ...]}
// Keypoint coordinates are in pixels with pixel (col, row) centered at (col, row).

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "maskanim/core.hpp"
#include "maskanim/random.hpp"

namespace maskanim {

struct ClipEntry {
  std::string id;
  std::filesystem::path directory;
  std::vector<std::filesystem::path> frames;
};

/// Clip descriptors; frames are decoded on demand and are safe to load from
/// several threads.
class VideoDataset {
 public:
  std::string split;
  int resolution = 0;
  std::vector<ClipEntry> clips;
  /// Skipped clips and similar notes collected while loading.
  std::vector<std::string> warnings;

  [[nodiscard]] std::size_t size() const { return clips.size(); }
  /// Decodes one frame, resized to `resolution` when needed. Throws IoError.
  [[nodiscard]] Frame load_frame(std::size_t clip, std::size_t index) const;
  [[nodiscard]] VideoClip load_clip(std::size_t clip) const;
};

/// Enumerates <root>/<split> in lexicographic id order. Clips with fewer than
/// two frames are skipped with a warning. Throws IoError when the split
/// directory is missing.
[[nodiscard]] VideoDataset load_video_dataset(const std::filesystem::path& root,
                                              const std::string& split, int resolution);

/// Sorted frame_*.png files of one video directory.
[[nodiscard]] std::vector<std::filesystem::path> list_frames(const std::filesystem::path& video_dir);

/// Loads a single video directory as a clip named after the directory.
[[nodiscard]] VideoClip load_clip_directory(const std::filesystem::path& video_dir, int resolution);

/// Two distinct uniform indices in [0, length).
[[nodiscard]] std::pair<std::size_t, std::size_t> sample_frame_indices(std::size_t length,
                                                                       RandomStream& rng);

struct TrainingPair {
  Frame source;
  Frame driving;
  std::string clip_id;
  std::size_t source_index = 0;
  std::size_t driving_index = 0;
};

/// Uniform clip, then two distinct uniform frames of it.
[[nodiscard]] TrainingPair sample_pair(const VideoDataset& dataset, RandomStream& rng);
/// Two distinct uniform frames of the given clip.
[[nodiscard]] TrainingPair sample_pair_from_clip(const VideoDataset& dataset, std::size_t clip,
                                                 RandomStream& rng);

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  bool detected = false;
};

/// Center of mass followed by the four bounding-box corners (top-left,
/// top-right, bottom-left, bottom-right) of the pixels >= 0.5. All five are
/// undetected when no pixel qualifies.
[[nodiscard]] std::vector<Keypoint> object_keypoints(const Tensor& mask);

enum class ToyObject { square, disc, figure };
enum class ToyBackground { solid, gradient, textured };
enum class ToyMotion { drift, swing, pulse };

struct ToySpec {
  int num_videos = 8;
  int frames_per_video = 8;
  int resolution = 64;
  ToyObject object = ToyObject::square;
  ToyBackground background = ToyBackground::solid;
  ToyMotion motion = ToyMotion::drift;
  std::uint64_t seed = 0;
  /// Videos written to the test split; negative means max(1, num_videos / 4).
  int test_videos = -1;
};

[[nodiscard]] ToyObject parse_toy_object(const std::string& name);
[[nodiscard]] ToyBackground parse_toy_background(const std::string& name);
[[nodiscard]] ToyMotion parse_toy_motion(const std::string& name);

/// Writes `num_videos` train clips and the test clips under `root`, then
/// returns the loaded train split. Equal specs produce identical files.
VideoDataset generate_toy_dataset(const ToySpec& spec, const std::filesystem::path& root);

}  // namespace maskanim
