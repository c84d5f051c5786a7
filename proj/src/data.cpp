#include "maskanim/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "maskanim/errors.hpp"
#include "maskanim/image_io.hpp"

namespace maskanim {

namespace fs = std::filesystem;

namespace {

bool is_frame_file(const fs::path& p) {
  const std::string name = p.filename().string();
  return p.extension() == ".png" && name.rfind("frame_", 0) == 0;
}

std::string numbered(const char* stem, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%05d.png", stem, index);
  return buf;
}

}  // namespace

std::vector<fs::path> list_frames(const fs::path& video_dir) {
  std::vector<fs::path> frames;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(video_dir, ec)) {
    if (entry.is_regular_file() && is_frame_file(entry.path())) frames.push_back(entry.path());
  }
  if (ec) throw IoError(video_dir.string() + ": " + ec.message());
  std::sort(frames.begin(), frames.end());
  return frames;
}

namespace {

Frame decode_frame(const fs::path& path, int resolution) {
  Tensor t = read_png_tensor(path, 3);
  if (t.h() != t.w()) {
    throw IoError(path.string() + ": frame is " + std::to_string(t.w()) + "x" +
                  std::to_string(t.h()) + ", expected a square image");
  }
  if (resolution > 0 && t.h() != resolution) t = resample(t, resolution);
  return Frame(std::move(t));
}

}  // namespace

Frame VideoDataset::load_frame(std::size_t clip, std::size_t index) const {
  return decode_frame(clips.at(clip).frames.at(index), resolution);
}

VideoClip VideoDataset::load_clip(std::size_t clip) const {
  VideoClip out{clips.at(clip).id, {}};
  for (std::size_t i = 0; i < clips[clip].frames.size(); ++i) out.frames.push_back(load_frame(clip, i));
  return out;
}

VideoDataset load_video_dataset(const fs::path& root, const std::string& split, int resolution) {
  const fs::path dir = root / split;
  if (!fs::is_directory(dir)) throw IoError(dir.string() + ": split directory not found");
  VideoDataset ds;
  ds.split = split;
  ds.resolution = resolution;
  std::vector<fs::path> videos;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) videos.push_back(entry.path());
  }
  std::sort(videos.begin(), videos.end());
  for (const fs::path& v : videos) {
    ClipEntry clip{v.filename().string(), v, list_frames(v)};
    if (clip.frames.size() < 2) {
      ds.warnings.push_back(v.string() + ": " + std::to_string(clip.frames.size()) +
                            " frame(s), clip skipped");
      continue;
    }
    ds.clips.push_back(std::move(clip));
  }
  return ds;
}

VideoClip load_clip_directory(const fs::path& video_dir, int resolution) {
  if (!fs::is_directory(video_dir)) throw IoError(video_dir.string() + ": not a directory");
  VideoClip clip{video_dir.filename().string(), {}};
  for (const fs::path& p : list_frames(video_dir)) clip.frames.push_back(decode_frame(p, resolution));
  return clip;
}

std::pair<std::size_t, std::size_t> sample_frame_indices(std::size_t length, RandomStream& rng) {
  if (length < 2) throw std::invalid_argument("sample_frame_indices: need at least two frames");
  const int n = static_cast<int>(length);
  const int i = rng.uniform_int(0, n - 1);
  int j = rng.uniform_int(0, n - 2);
  if (j >= i) ++j;
  return {static_cast<std::size_t>(i), static_cast<std::size_t>(j)};
}

TrainingPair sample_pair_from_clip(const VideoDataset& dataset, std::size_t clip, RandomStream& rng) {
  const auto [i, j] = sample_frame_indices(dataset.clips.at(clip).frames.size(), rng);
  return {dataset.load_frame(clip, i), dataset.load_frame(clip, j), dataset.clips[clip].id, i, j};
}

TrainingPair sample_pair(const VideoDataset& dataset, RandomStream& rng) {
  if (dataset.size() == 0) throw std::invalid_argument("sample_pair: empty dataset");
  const auto clip = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(dataset.size()) - 1));
  return sample_pair_from_clip(dataset, clip, rng);
}

std::vector<Keypoint> object_keypoints(const Tensor& mask) {
  double mass = 0.0;
  double sx = 0.0;
  double sy = 0.0;
  int x0 = mask.w();
  int y0 = mask.h();
  int x1 = -1;
  int y1 = -1;
  for (int y = 0; y < mask.h(); ++y) {
    for (int x = 0; x < mask.w(); ++x) {
      if (mask.at(0, 0, y, x) < 0.5f) continue;
      mass += 1.0;
      sx += x;
      sy += y;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (mass == 0.0) return std::vector<Keypoint>(5);
  return {{sx / mass, sy / mass, true},
          {static_cast<double>(x0), static_cast<double>(y0), true},
          {static_cast<double>(x1), static_cast<double>(y0), true},
          {static_cast<double>(x0), static_cast<double>(y1), true},
          {static_cast<double>(x1), static_cast<double>(y1), true}};
}

ToyObject parse_toy_object(const std::string& name) {
  if (name == "square") return ToyObject::square;
  if (name == "disc") return ToyObject::disc;
  if (name == "figure") return ToyObject::figure;
  throw ConfigError("unknown toy object '" + name + "' (square, disc, figure)");
}

ToyBackground parse_toy_background(const std::string& name) {
  if (name == "solid") return ToyBackground::solid;
  if (name == "gradient") return ToyBackground::gradient;
  if (name == "textured") return ToyBackground::textured;
  throw ConfigError("unknown toy background '" + name + "' (solid, gradient, textured)");
}

ToyMotion parse_toy_motion(const std::string& name) {
  if (name == "drift") return ToyMotion::drift;
  if (name == "swing") return ToyMotion::swing;
  if (name == "pulse") return ToyMotion::pulse;
  throw ConfigError("unknown toy motion '" + name + "' (drift, swing, pulse)");
}

namespace {

using Color = std::array<double, 3>;

constexpr double kTextureAmplitude = 0.08;

double distance(const Color& a, const Color& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) +
                   (a[2] - b[2]) * (a[2] - b[2]));
}

// Distance from p to the segment [a, b].
double segment_distance(const Color& p, const Color& a, const Color& b) {
  double num = 0.0;
  double den = 0.0;
  for (int k = 0; k < 3; ++k) {
    num += (p[k] - a[k]) * (b[k] - a[k]);
    den += (b[k] - a[k]) * (b[k] - a[k]);
  }
  const double t = den > 0.0 ? std::clamp(num / den, 0.0, 1.0) : 0.0;
  Color q{};
  for (int k = 0; k < 3; ++k) q[k] = a[k] + t * (b[k] - a[k]);
  return distance(p, q);
}

Color random_color(RandomStream& rng) {
  return {rng.uniform_int(0, 255) / 255.0, rng.uniform_int(0, 255) / 255.0,
          rng.uniform_int(0, 255) / 255.0};
}

struct ToyVideo {
  Color object;
  Color background;
  Color background_far;
  std::vector<float> texture;  // per 4x4 block offsets
  double size;
  double x0, y0, x1, y1;
  double amplitude;
  double phase;
};

ToyVideo sample_video(const ToySpec& spec, RandomStream& rng) {
  const double r = spec.resolution;
  ToyVideo v{};
  v.object = random_color(rng);
  // Keep every background pixel far from the object color so color
  // segmentation recovers the object mask exactly.
  double separation = 0.0;
  do {
    v.background = random_color(rng);
    v.background_far = random_color(rng);
    separation = spec.background == ToyBackground::gradient
                     ? segment_distance(v.object, v.background, v.background_far)
                     : distance(v.object, v.background);
  } while (separation < 0.6);
  const int blocks = (spec.resolution + 3) / 4;
  v.texture.resize(static_cast<std::size_t>(blocks) * blocks);
  for (float& t : v.texture) t = static_cast<float>(rng.uniform(-kTextureAmplitude, kTextureAmplitude));
  v.size = r * rng.uniform(0.2, 0.28);
  v.x0 = r * rng.uniform(0.3, 0.7);
  v.y0 = r * rng.uniform(0.3, 0.7);
  v.x1 = r * rng.uniform(0.3, 0.7);
  v.y1 = r * rng.uniform(0.3, 0.7);
  v.amplitude = r * rng.uniform(0.1, 0.2);
  v.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return v;
}

bool inside(ToyObject object, double px, double py, double cx, double cy, double size) {
  const double half = 0.5 * size;
  switch (object) {
    case ToyObject::square:
      return std::fabs(px - cx) <= half && std::fabs(py - cy) <= half;
    case ToyObject::disc:
      return (px - cx) * (px - cx) + (py - cy) * (py - cy) <= half * half;
    case ToyObject::figure: {
      const bool body = std::fabs(px - cx) <= 0.3 * size && std::fabs(py - (cy + 0.15 * size)) <= half;
      const double hy = cy - 0.5 * size;
      const double hr = 0.22 * size;
      const bool head = (px - cx) * (px - cx) + (py - hy) * (py - hy) <= hr * hr;
      return body || head;
    }
  }
  return false;
}

void render(const ToySpec& spec, const ToyVideo& v, int t, Tensor& frame, Tensor& mask) {
  const int r = spec.resolution;
  const double u = spec.frames_per_video > 1 ? static_cast<double>(t) / (spec.frames_per_video - 1) : 0.0;
  const double turn = 2.0 * std::numbers::pi * u + v.phase;
  double cx = v.x0;
  double cy = v.y0;
  double size = v.size;
  switch (spec.motion) {
    case ToyMotion::drift:
      cx = v.x0 + u * (v.x1 - v.x0);
      cy = v.y0 + u * (v.y1 - v.y0);
      break;
    case ToyMotion::swing:
      cx = v.x0 + v.amplitude * std::sin(turn);
      cy = v.y0 + 0.3 * v.amplitude * std::sin(2.0 * turn);
      break;
    case ToyMotion::pulse:
      cx = v.x0 + 0.25 * u * (v.x1 - v.x0);
      cy = v.y0 + 0.25 * u * (v.y1 - v.y0);
      size = v.size * (1.0 + 0.3 * std::sin(turn));
      break;
  }
  const int blocks = (r + 3) / 4;
  for (int y = 0; y < r; ++y) {
    for (int x = 0; x < r; ++x) {
      const bool on = inside(spec.object, x + 0.5, y + 0.5, cx, cy, size);
      mask.at(0, 0, y, x) = on ? 1.0f : 0.0f;
      for (int k = 0; k < 3; ++k) {
        double value = v.object[static_cast<std::size_t>(k)];
        if (!on) {
          value = v.background[static_cast<std::size_t>(k)];
          if (spec.background == ToyBackground::gradient) {
            const double g = (x + 0.5) / r;
            value += g * (v.background_far[static_cast<std::size_t>(k)] - value);
          } else if (spec.background == ToyBackground::textured) {
            value += v.texture[static_cast<std::size_t>(y / 4) * blocks + static_cast<std::size_t>(x / 4)];
          }
        }
        frame.at(0, k, y, x) = static_cast<float>(std::clamp(value, 0.0, 1.0));
      }
    }
  }
}

void write_video(const ToySpec& spec, const ToyVideo& v, const fs::path& dir) {
  fs::create_directories(dir);
  nlohmann::json kp;
  kp["resolution"] = spec.resolution;
  kp["object_color"] = {v.object[0], v.object[1], v.object[2]};
  kp["frames"] = nlohmann::json::array();
  const Shape frame_shape{1, 3, spec.resolution, spec.resolution};
  const Shape mask_shape{1, 1, spec.resolution, spec.resolution};
  for (int t = 0; t < spec.frames_per_video; ++t) {
    Tensor frame(frame_shape);
    Tensor mask(mask_shape);
    render(spec, v, t, frame, mask);
    write_png(dir / numbered("frame", t), frame);
    write_png(dir / numbered("mask", t), mask);
    nlohmann::json points = nlohmann::json::array();
    for (const Keypoint& k : object_keypoints(mask)) points.push_back({k.x, k.y, k.detected ? 1 : 0});
    kp["frames"].push_back({{"file", numbered("frame", t)}, {"keypoints", points}});
  }
  std::ofstream out(dir / "keypoints.json", std::ios::trunc);
  if (!out) throw IoError((dir / "keypoints.json").string() + ": cannot open for writing");
  out << kp.dump(1) << '\n';
}

}  // namespace

VideoDataset generate_toy_dataset(const ToySpec& spec, const fs::path& root) {
  if (spec.num_videos < 1 || spec.frames_per_video < 2 || spec.resolution < 8) {
    throw ConfigError("toy spec: need >= 1 video, >= 2 frames per video and resolution >= 8");
  }
  const int test_videos = spec.test_videos >= 0 ? spec.test_videos : std::max(1, spec.num_videos / 4);
  RandomStream rng(derive_seed(spec.seed, "toy"));
  char id[32];
  for (int i = 0; i < spec.num_videos; ++i) {
    std::snprintf(id, sizeof(id), "vid_%03d", i);
    write_video(spec, sample_video(spec, rng), root / "train" / id);
  }
  for (int i = 0; i < test_videos; ++i) {
    std::snprintf(id, sizeof(id), "vid_%03d", i);
    write_video(spec, sample_video(spec, rng), root / "test" / id);
  }
  return load_video_dataset(root, "train", spec.resolution);
}

}  // namespace maskanim
