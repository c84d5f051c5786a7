#include "maskanim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "maskanim/errors.hpp"
#include "maskanim/image_io.hpp"
#include "maskanim/perturbation.hpp"

namespace maskanim {

namespace fs = std::filesystem;

namespace {

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

// The entry of a per-video JSON file describing `file`.
const nlohmann::json& frame_entry(const nlohmann::json& doc, const std::string& file,
                                  const fs::path& path) {
  for (const auto& frame : doc.at("frames")) {
    if (frame.value("file", "") == file) return frame;
  }
  throw IoError(path.string() + ": no entry for frame '" + file + "'");
}

KeypointSet parse_keypoints(const nlohmann::json& points) {
  KeypointSet out;
  for (const auto& p : points) {
    out.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>() != 0.0});
  }
  return out;
}

}  // namespace

KeypointSet ToyDetector::detect_with_color(const Frame& frame, const std::array<double, 3>& color) const {
  const Tensor& t = frame.tensor();
  Tensor mask(Shape{1, 1, t.h(), t.w()});
  const double limit = threshold_ * threshold_;
  for (int y = 0; y < t.h(); ++y) {
    for (int x = 0; x < t.w(); ++x) {
      double d2 = 0.0;
      for (int k = 0; k < 3; ++k) {
        const double diff = t.at(0, k, y, x) - color[static_cast<std::size_t>(k)];
        d2 += diff * diff;
      }
      mask.at(0, 0, y, x) = d2 < limit ? 1.0f : 0.0f;
    }
  }
  return object_keypoints(mask);
}

KeypointSet ToyDetector::detect(const Frame& frame, const FrameRef& ref) const {
  const fs::path path = ref.truth_dir / "keypoints.json";
  const nlohmann::json doc = read_json(path);
  if (ref.role == "truth") return parse_keypoints(frame_entry(doc, ref.file, path).at("keypoints"));
  const auto color = doc.at("object_color").get<std::array<double, 3>>();
  return detect_with_color(frame, color);
}

std::vector<double> ToyEmbedder::embed(const Frame& frame) const {
  constexpr int kThumb = 8;
  constexpr int kBins = 8;
  const Tensor small = resample(frame.tensor(), kThumb);
  std::vector<double> out;
  out.reserve(kThumb * kThumb + 3 * kBins);
  for (int y = 0; y < kThumb; ++y) {
    for (int x = 0; x < kThumb; ++x) {
      out.push_back(kLumaR * small.at(0, 0, y, x) + kLumaG * small.at(0, 1, y, x) +
                    kLumaB * small.at(0, 2, y, x));
    }
  }
  const Tensor& t = frame.tensor();
  const double inv = 1.0 / static_cast<double>(t.shape().plane());
  for (int k = 0; k < 3; ++k) {
    std::vector<double> hist(kBins, 0.0);
    const float* p = t.plane(0, k);
    for (std::size_t i = 0; i < t.shape().plane(); ++i) {
      const int bin = std::min(kBins - 1, static_cast<int>(p[i] * kBins));
      hist[static_cast<std::size_t>(bin)] += inv;
    }
    out.insert(out.end(), hist.begin(), hist.end());
  }
  return out;
}

std::vector<double> ToyEmbedder::embed(const Frame& frame, const FrameRef&) const { return embed(frame); }

KeypointSet ExternalDetector::detect(const Frame&, const FrameRef& ref) const {
  const fs::path path = root_ / ref.role / (ref.video_id + ".json");
  return parse_keypoints(frame_entry(read_json(path), ref.file, path).at("keypoints"));
}

std::vector<double> ExternalEmbedder::embed(const Frame&, const FrameRef& ref) const {
  const fs::path path = root_ / ref.role / (ref.video_id + ".json");
  return frame_entry(read_json(path), ref.file, path).at("embedding").get<std::vector<double>>();
}

std::unique_ptr<KeypointDetector> make_detector(const std::string& spec) {
  if (spec == "none") return nullptr;
  if (spec == "toy") return std::make_unique<ToyDetector>();
  if (spec.rfind("external:", 0) == 0) return std::make_unique<ExternalDetector>(spec.substr(9));
  throw ConfigError("unknown detector '" + spec + "' (toy, none, external:<path>)");
}

std::unique_ptr<EmbeddingBackend> make_embedder(const std::string& spec) {
  if (spec == "none") return nullptr;
  if (spec == "toy") return std::make_unique<ToyEmbedder>();
  if (spec.rfind("external:", 0) == 0) return std::make_unique<ExternalEmbedder>(spec.substr(9));
  throw ConfigError("unknown embedder '" + spec + "' (toy, none, external:<path>)");
}

double l1_metric(const VideoClip& generated, const VideoClip& truth) {
  if (generated.frames.size() != truth.frames.size() || generated.frames.empty()) {
    throw std::invalid_argument("l1_metric: clips must have equal, nonzero lengths");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < truth.frames.size(); ++i) {
    const Tensor& a = generated.frames[i].tensor();
    const Tensor& b = truth.frames[i].tensor();
    if (a.shape() != b.shape()) throw std::invalid_argument("l1_metric: resolution mismatch");
    for (std::size_t k = 0; k < a.numel(); ++k) {
      sum += std::fabs(static_cast<double>(a.data()[k]) - b.data()[k]);
    }
    count += a.numel();
  }
  return sum / static_cast<double>(count);
}

namespace {

void require_equal_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": " + std::to_string(a) + " generated vs " +
                                std::to_string(b) + " truth frames");
  }
}

}  // namespace

double akd(const std::vector<KeypointSet>& generated, const std::vector<KeypointSet>& truth) {
  require_equal_length(generated.size(), truth.size(), "akd");
  double sum = 0.0;
  int frames = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    require_equal_length(generated[i].size(), truth[i].size(), "akd keypoints");
    double frame_sum = 0.0;
    int matched = 0;
    for (std::size_t k = 0; k < truth[i].size(); ++k) {
      const Keypoint& g = generated[i][k];
      const Keypoint& t = truth[i][k];
      if (!g.detected || !t.detected) continue;
      frame_sum += std::hypot(g.x - t.x, g.y - t.y);
      ++matched;
    }
    if (matched == 0) continue;
    sum += frame_sum / matched;
    ++frames;
  }
  if (frames == 0) throw UndefinedMetricError("akd: no keypoint detected in both videos");
  return sum / frames;
}

double mkr(const std::vector<KeypointSet>& generated, const std::vector<KeypointSet>& truth) {
  require_equal_length(generated.size(), truth.size(), "mkr");
  int detected = 0;
  int missing = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    require_equal_length(generated[i].size(), truth[i].size(), "mkr keypoints");
    for (std::size_t k = 0; k < truth[i].size(); ++k) {
      if (!truth[i][k].detected) continue;
      ++detected;
      if (!generated[i][k].detected) ++missing;
    }
  }
  if (detected == 0) throw UndefinedMetricError("mkr: no keypoint detected in the truth video");
  return static_cast<double>(missing) / detected;
}

double aed(const std::vector<std::vector<double>>& generated,
           const std::vector<std::vector<double>>& truth) {
  require_equal_length(generated.size(), truth.size(), "aed");
  if (truth.empty()) throw std::invalid_argument("aed: no frames");
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (generated[i].size() != truth[i].size()) {
      throw std::invalid_argument("aed: embedding dimensions differ");
    }
    double d2 = 0.0;
    for (std::size_t k = 0; k < truth[i].size(); ++k) {
      d2 += (generated[i][k] - truth[i][k]) * (generated[i][k] - truth[i][k]);
    }
    sum += std::sqrt(d2);
  }
  return sum / static_cast<double>(truth.size());
}

namespace {

std::vector<double> luma(const Frame& f) {
  const Tensor& t = f.tensor();
  std::vector<double> out(t.shape().plane());
  const float* r = t.plane(0, 0);
  const float* g = t.plane(0, 1);
  const float* b = t.plane(0, 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<double>(kLumaR) * r[i] + static_cast<double>(kLumaG) * g[i] +
             static_cast<double>(kLumaB) * b[i];
  }
  return out;
}

// Separable "valid" filtering of an n x n image with a normalized 1-D kernel.
std::vector<double> filter_valid(const std::vector<double>& img, int n, const std::vector<double>& k) {
  const int win = static_cast<int>(k.size());
  const int m = n - win + 1;
  std::vector<double> rows(static_cast<std::size_t>(n) * m);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < m; ++x) {
      double s = 0.0;
      for (int i = 0; i < win; ++i) s += k[static_cast<std::size_t>(i)] * img[static_cast<std::size_t>(y) * n + x + i];
      rows[static_cast<std::size_t>(y) * m + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(m) * m);
  for (int y = 0; y < m; ++y) {
    for (int x = 0; x < m; ++x) {
      double s = 0.0;
      for (int i = 0; i < win; ++i) s += k[static_cast<std::size_t>(i)] * rows[static_cast<std::size_t>(y + i) * m + x];
      out[static_cast<std::size_t>(y) * m + x] = s;
    }
  }
  return out;
}

}  // namespace

double ssim(const Frame& a, const Frame& b, int window, double sigma) {
  if (a.resolution() != b.resolution()) throw std::invalid_argument("ssim: resolution mismatch");
  const int n = a.resolution();
  if (window < 1 || window > n) {
    throw std::invalid_argument("ssim: window " + std::to_string(window) + " does not fit a " +
                                std::to_string(n) + "x" + std::to_string(n) + " image");
  }
  std::vector<double> kernel(static_cast<std::size_t>(window));
  double norm = 0.0;
  for (int i = 0; i < window; ++i) {
    const double d = i - (window - 1) / 2.0;
    kernel[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    norm += kernel[static_cast<std::size_t>(i)];
  }
  for (double& v : kernel) v /= norm;

  const std::vector<double> x = luma(a);
  const std::vector<double> y = luma(b);
  std::vector<double> xx(x.size());
  std::vector<double> yy(x.size());
  std::vector<double> xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = filter_valid(x, n, kernel);
  const auto my = filter_valid(y, n, kernel);
  const auto sxx = filter_valid(xx, n, kernel);
  const auto syy = filter_valid(yy, n, kernel);
  const auto sxy = filter_valid(xy, n, kernel);
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  double sum = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    sum += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
           ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return sum / static_cast<double>(mx.size());
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_similarity: dimension mismatch");
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw UndefinedMetricError("csim: zero-norm embedding");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double csim(const Frame& a, const Frame& b, const EmbeddingBackend& embedder, const FrameRef& ref_a,
            const FrameRef& ref_b) {
  return cosine_similarity(embedder.embed(a, ref_a), embedder.embed(b, ref_b));
}

double relative_improvement(double ours, double baseline) {
  if (baseline == 0.0) throw std::invalid_argument("relative_improvement: zero baseline");
  return 100.0 * (baseline - ours) / baseline;
}

namespace {

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

void MetricReport::write(const fs::path& out_dir) const {
  fs::create_directories(out_dir);
  std::ofstream csv(out_dir / "report.csv", std::ios::trunc);
  if (!csv) throw IoError((out_dir / "report.csv").string() + ": cannot open for writing");
  csv << "video_id,frames";
  for (const std::string& m : kMetricNames) csv << ',' << m;
  csv << '\n';
  int total_frames = 0;
  nlohmann::json doc;
  doc["videos"] = nlohmann::json::array();
  for (const VideoMetrics& v : videos) {
    csv << v.video_id << ',' << v.frames;
    nlohmann::json row{{"video_id", v.video_id}, {"frames", v.frames}};
    for (const std::string& m : kMetricNames) {
      const auto it = v.values.find(m);
      csv << ',' << (it == v.values.end() ? "" : format_value(it->second));
      row[m] = it == v.values.end() ? nlohmann::json(nullptr) : nlohmann::json(it->second);
    }
    if (!v.notes.empty()) row["notes"] = v.notes;
    csv << '\n';
    doc["videos"].push_back(row);
    total_frames += v.frames;
  }
  csv << "aggregate," << total_frames;
  nlohmann::json agg = nlohmann::json::object();
  for (const std::string& m : kMetricNames) {
    const auto it = aggregate.find(m);
    csv << ',' << (it == aggregate.end() ? "" : format_value(it->second));
    agg[m] = it == aggregate.end() ? nlohmann::json(nullptr) : nlohmann::json(it->second);
  }
  csv << '\n';
  doc["aggregate"] = agg;
  doc["counts"] = counts;
  std::ofstream json(out_dir / "report.json", std::ios::trunc);
  if (!json) throw IoError((out_dir / "report.json").string() + ": cannot open for writing");
  json << doc.dump(2) << '\n';
}

MetricReport evaluate(const fs::path& generated_dir, const fs::path& truth_dir,
                      const KeypointDetector* detector, const EmbeddingBackend* embedder,
                      const PipelineConfig& config) {
  if (!fs::is_directory(generated_dir)) throw IoError(generated_dir.string() + ": not a directory");
  if (!fs::is_directory(truth_dir)) throw IoError(truth_dir.string() + ": not a directory");
  std::vector<fs::path> videos;
  for (const auto& entry : fs::directory_iterator(generated_dir)) {
    if (entry.is_directory()) videos.push_back(entry.path());
  }
  std::sort(videos.begin(), videos.end());
  if (videos.empty()) throw ConfigError(generated_dir.string() + ": no generated videos");

  std::vector<std::string> problems;
  for (const fs::path& v : videos) {
    const fs::path truth = truth_dir / v.filename();
    if (!fs::is_directory(truth)) {
      problems.push_back("video '" + v.filename().string() + "' missing from truth");
      continue;
    }
    const auto frames = list_frames(v);
    if (frames.empty()) problems.push_back("video '" + v.filename().string() + "' has no frames");
    for (const fs::path& f : frames) {
      if (!fs::exists(truth / f.filename())) {
        problems.push_back("frame '" + v.filename().string() + "/" + f.filename().string() +
                           "' missing from truth");
      }
    }
  }
  if (!problems.empty()) {
    std::string message = std::to_string(problems.size()) + " mismatch(es) between generated and truth:";
    for (const std::string& p : problems) message += " " + p + ";";
    throw ConfigError(message);
  }

  MetricReport report;
  for (const fs::path& v : videos) {
    const std::string id = v.filename().string();
    const fs::path truth_video = truth_dir / id;
    const auto frames = list_frames(v);
    VideoMetrics vm;
    vm.video_id = id;
    vm.frames = static_cast<int>(frames.size());

    VideoClip gen{id, {}};
    VideoClip tru{id, {}};
    for (const fs::path& f : frames) {
      gen.frames.push_back(read_frame_png(f));
      Tensor t = read_png_tensor(truth_video / f.filename(), 3);
      if (t.h() != gen.frames.back().resolution()) t = resample(t, gen.frames.back().resolution());
      tru.frames.push_back(Frame(std::move(t)));
    }
    vm.values["l1"] = l1_metric(gen, tru);
    double ssim_sum = 0.0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      ssim_sum += ssim(gen.frames[i], tru.frames[i], config.ssim_window, config.ssim_sigma);
    }
    vm.values["ssim"] = ssim_sum / static_cast<double>(frames.size());

    const auto ref = [&](const char* role, std::size_t i) {
      return FrameRef{role, id, frames[i].filename().string(), truth_video};
    };
    if (detector != nullptr) {
      std::vector<KeypointSet> kg;
      std::vector<KeypointSet> kt;
      for (std::size_t i = 0; i < frames.size(); ++i) {
        kg.push_back(detector->detect(gen.frames[i], ref("generated", i)));
        kt.push_back(detector->detect(tru.frames[i], ref("truth", i)));
      }
      try {
        vm.values["akd"] = akd(kg, kt);
      } catch (const UndefinedMetricError& e) {
        vm.notes["akd"] = e.what();
      }
      try {
        vm.values["mkr"] = mkr(kg, kt);
      } catch (const UndefinedMetricError& e) {
        vm.notes["mkr"] = e.what();
      }
    }
    if (embedder != nullptr) {
      std::vector<std::vector<double>> eg;
      std::vector<std::vector<double>> et;
      for (std::size_t i = 0; i < frames.size(); ++i) {
        eg.push_back(embedder->embed(gen.frames[i], ref("generated", i)));
        et.push_back(embedder->embed(tru.frames[i], ref("truth", i)));
      }
      vm.values["aed"] = aed(eg, et);
      try {
        double sum = 0.0;
        for (std::size_t i = 0; i < frames.size(); ++i) sum += cosine_similarity(eg[i], et[i]);
        vm.values["csim"] = sum / static_cast<double>(frames.size());
      } catch (const UndefinedMetricError& e) {
        vm.notes["csim"] = e.what();
      }
    }
    report.videos.push_back(std::move(vm));
  }
  for (const std::string& m : kMetricNames) {
    double sum = 0.0;
    int count = 0;
    for (const VideoMetrics& v : report.videos) {
      const auto it = v.values.find(m);
      if (it == v.values.end()) continue;
      sum += it->second;
      ++count;
    }
    report.counts[m] = count;
    if (count > 0) report.aggregate[m] = sum / count;
  }
  return report;
}

}  // namespace maskanim
