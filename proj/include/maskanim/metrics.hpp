#pragma once

// Video-reconstruction metrics and the evaluation report.
//
// Keypoint detectors and embedders are pluggable:
//   toy               segments a frame by its distance to the object color
//                     stored in the truth video's keypoints.json; embeddings
//                     are an 8x8 luma thumbnail plus 8-bin color histograms
//   external:<path>   precomputed results read from <path>/<role>/<video_id>.json
//                     with role "generated" or "truth":
//                     {"frames": [{"file": ..., "keypoints": [[x, y, detected], ...]}]}
//                     {"frames": [{"file": ..., "embedding": [...]}]}
//   none              disables the dependent metrics

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "maskanim/config.hpp"
#include "maskanim/core.hpp"
#include "maskanim/data.hpp"

namespace maskanim {

using KeypointSet = std::vector<Keypoint>;

/// Where a frame comes from, so adapters can look up precomputed results.
struct FrameRef {
  std::string role;  // "generated" or "truth"
  std::string video_id;
  std::string file;
  std::filesystem::path truth_dir;  // the truth video's directory
};

class KeypointDetector {
 public:
  virtual ~KeypointDetector() = default;
  [[nodiscard]] virtual KeypointSet detect(const Frame& frame, const FrameRef& ref) const = 0;
};

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  [[nodiscard]] virtual std::vector<double> embed(const Frame& frame, const FrameRef& ref) const = 0;
};

class ToyDetector final : public KeypointDetector {
 public:
  /// Pixels closer than `threshold` (Euclidean, RGB in [0, 1]) to the object
  /// color count as object.
  explicit ToyDetector(double threshold = 0.2) : threshold_(threshold) {}
  [[nodiscard]] KeypointSet detect(const Frame& frame, const FrameRef& ref) const override;
  [[nodiscard]] KeypointSet detect_with_color(const Frame& frame, const std::array<double, 3>& color) const;

 private:
  double threshold_;
};

class ToyEmbedder final : public EmbeddingBackend {
 public:
  [[nodiscard]] std::vector<double> embed(const Frame& frame, const FrameRef& ref) const override;
  [[nodiscard]] std::vector<double> embed(const Frame& frame) const;
};

class ExternalDetector final : public KeypointDetector {
 public:
  explicit ExternalDetector(std::filesystem::path root) : root_(std::move(root)) {}
  [[nodiscard]] KeypointSet detect(const Frame& frame, const FrameRef& ref) const override;

 private:
  std::filesystem::path root_;
};

class ExternalEmbedder final : public EmbeddingBackend {
 public:
  explicit ExternalEmbedder(std::filesystem::path root) : root_(std::move(root)) {}
  [[nodiscard]] std::vector<double> embed(const Frame& frame, const FrameRef& ref) const override;

 private:
  std::filesystem::path root_;
};

/// "toy", "none" (nullptr) or "external:<path>"; anything else is a ConfigError.
[[nodiscard]] std::unique_ptr<KeypointDetector> make_detector(const std::string& spec);
[[nodiscard]] std::unique_ptr<EmbeddingBackend> make_embedder(const std::string& spec);

/// Mean absolute pixel difference over all frames and channels. Throws
/// std::invalid_argument on length or resolution mismatch.
[[nodiscard]] double l1_metric(const VideoClip& generated, const VideoClip& truth);

/// Per frame: mean distance over keypoints detected in both; then the mean
/// over frames that had any such keypoint. Throws UndefinedMetricError when
/// no frame qualifies and std::invalid_argument on length mismatch.
[[nodiscard]] double akd(const std::vector<KeypointSet>& generated,
                         const std::vector<KeypointSet>& truth);

/// Fraction of truth-detected keypoints missing in the generated frames.
/// Throws UndefinedMetricError when truth detects nothing.
[[nodiscard]] double mkr(const std::vector<KeypointSet>& generated,
                         const std::vector<KeypointSet>& truth);

/// Mean Euclidean distance between per-frame embeddings.
[[nodiscard]] double aed(const std::vector<std::vector<double>>& generated,
                         const std::vector<std::vector<double>>& truth);

/// Windowed SSIM on luma with a normalized Gaussian window, averaged over all
/// windows lying fully inside the image. Throws std::invalid_argument when the
/// images differ in size or are smaller than the window.
[[nodiscard]] double ssim(const Frame& a, const Frame& b, int window = 11, double sigma = 1.5);

/// Cosine similarity. Throws UndefinedMetricError for a zero-norm vector.
[[nodiscard]] double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);
[[nodiscard]] double csim(const Frame& a, const Frame& b, const EmbeddingBackend& embedder,
                          const FrameRef& ref_a = {}, const FrameRef& ref_b = {});

/// 100 * (baseline - ours) / baseline. Throws std::invalid_argument for a zero baseline.
[[nodiscard]] double relative_improvement(double ours, double baseline);

inline const std::vector<std::string> kMetricNames{"l1", "akd", "mkr", "aed", "ssim", "csim"};

struct VideoMetrics {
  std::string video_id;
  int frames = 0;
  /// Missing entries are metrics that were disabled or undefined.
  std::map<std::string, double> values;
  std::map<std::string, std::string> notes;
};

struct MetricReport {
  std::vector<VideoMetrics> videos;
  /// Mean over the videos where each metric is defined.
  std::map<std::string, double> aggregate;
  std::map<std::string, int> counts;

  void write(const std::filesystem::path& out_dir) const;
};

/// Matches generated videos to truth videos by directory name and frames by
/// file name. Every generated video and frame must exist in the truth tree;
/// otherwise a ConfigError lists all of the mismatches.
[[nodiscard]] MetricReport evaluate(const std::filesystem::path& generated_dir,
                                    const std::filesystem::path& truth_dir,
                                    const KeypointDetector* detector,
                                    const EmbeddingBackend* embedder,
                                    const PipelineConfig& config);

}  // namespace maskanim
