#include "corruptions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "data.hpp"
#include "error.hpp"
#include "npy.hpp"
#include "stats.hpp"

namespace selekt {

const std::vector<std::string>& synthetic_corruptions() {
  static const std::vector<std::string> names{"brightness", "contrast", "gaussian_noise",
                                              "motion_blur", "pixelate"};
  return names;
}

const std::vector<std::string>& benchmark_corruptions() {
  static const std::vector<std::string> names{
      "brightness",     "contrast",        "defocus_blur", "elastic_transform",
      "fog",            "frost",           "gaussian_blur", "gaussian_noise",
      "glass_blur",     "impulse_noise",   "jpeg_compression", "motion_blur",
      "pixelate",       "saturate",        "shot_noise",   "snow",
      "spatter",        "speckle_noise",   "zoom_blur"};
  return names;
}

const char* to_string(CorruptionSource s) {
  return s == CorruptionSource::kSynthetic ? "synthetic" : "benchmark";
}

void CorruptionSpec::validate() const {
  require(severity >= 1 && severity <= 5, ErrorCode::kInvalidArgument,
          "severity must be in 1..5", "severity");
  const auto& names =
      source == CorruptionSource::kSynthetic ? synthetic_corruptions() : benchmark_corruptions();
  require(std::find(names.begin(), names.end(), name) != names.end(),
          ErrorCode::kInvalidArgument,
          "unknown " + std::string(to_string(source)) + " corruption '" + name + "'", "name");
}

namespace {

float clip01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

void motion_blur(ImageBatch& b, int severity) {
  const int half = severity;  // kernel length 2s + 1
  const int w = b.shape.width;
  const std::size_t rows = b.size() * b.shape.channels * b.shape.height;
  std::vector<float> line(w);
  for (std::size_t r = 0; r < rows; ++r) {
    float* row = b.pixels.data() + r * w;
    std::copy(row, row + w, line.begin());
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int k = -half; k <= half; ++k) s += line[std::clamp(x + k, 0, w - 1)];
      row[x] = clip01(s / (2 * half + 1));
    }
  }
}

void pixelate(ImageBatch& b, int severity) {
  const int f = severity + 1;
  const int h = b.shape.height;
  const int w = b.shape.width;
  const std::size_t planes = b.size() * b.shape.channels;
  for (std::size_t pl = 0; pl < planes; ++pl) {
    float* p = b.pixels.data() + pl * h * w;
    for (int by = 0; by < h; by += f) {
      for (int bx = 0; bx < w; bx += f) {
        const int ey = std::min(by + f, h);
        const int ex = std::min(bx + f, w);
        double s = 0.0;
        for (int y = by; y < ey; ++y)
          for (int x = bx; x < ex; ++x) s += p[y * w + x];
        const float m = clip01(s / ((ey - by) * (ex - bx)));
        for (int y = by; y < ey; ++y)
          for (int x = bx; x < ex; ++x) p[y * w + x] = m;
      }
    }
  }
}

}  // namespace

ImageBatch apply_corruption(const ImageBatch& batch, const CorruptionSpec& spec,
                            std::uint64_t seed) {
  require(spec.source == CorruptionSource::kSynthetic, ErrorCode::kInvalidArgument,
          "only synthetic corruptions can be generated", "source");
  spec.validate();
  ImageBatch out = batch;
  const int s = spec.severity;
  if (spec.name == "brightness") {
    for (auto& p : out.pixels) p = clip01(p + 0.1 * s);
  } else if (spec.name == "contrast") {
    const double k = 1.0 - 0.15 * s;
    for (auto& p : out.pixels) p = clip01((p - 0.5) * k + 0.5);
  } else if (spec.name == "gaussian_noise") {
    std::mt19937_64 rng(mix_seed(seed, 0x6e6f697365ULL));
    std::normal_distribution<double> z(0.0, 1.0);
    const double sigma = 0.04 * s;
    for (auto& p : out.pixels) p = clip01(p + sigma * z(rng));
  } else if (spec.name == "motion_blur") {
    motion_blur(out, s);
  } else if (spec.name == "pixelate") {
    pixelate(out, s);
  }
  return out;
}

CorruptionStream synthetic_suite(const ImageBatch& clean, std::vector<std::string> names,
                                 std::vector<int> severities, std::uint64_t seed) {
  require(!names.empty() && !severities.empty(), ErrorCode::kInvalidArgument,
          "empty corruption suite");
  for (const auto& n : names)
    for (int s : severities) CorruptionSpec{n, s, CorruptionSource::kSynthetic}.validate();
  std::size_t i = 0;
  return [&clean, names = std::move(names), severities = std::move(severities), seed,
          i]() mutable -> std::optional<CorruptedBatch> {
    if (i >= names.size() * severities.size()) return std::nullopt;
    CorruptionSpec spec{names[i / severities.size()], severities[i % severities.size()],
                        CorruptionSource::kSynthetic};
    ++i;
    return CorruptedBatch{spec, apply_corruption(clean, spec, seed)};
  };
}

// ---------------------------------------------------------------------------
// Benchmark layout

BenchmarkReader::BenchmarkReader(std::filesystem::path root, Options options)
    : root_(std::move(root)), options_(std::move(options)) {
  require(std::filesystem::is_directory(root_), ErrorCode::kNotFound,
          "benchmark directory " + root_.string() + " does not exist");
  const auto labels_path = root_ / "labels.npy";
  require(std::filesystem::exists(labels_path), ErrorCode::kNotFound,
          "missing labels file " + labels_path.string());
  const auto& known = benchmark_corruptions();
  for (const auto& entry : std::filesystem::directory_iterator(root_)) {
    if (entry.path().extension() != ".npy") continue;
    const std::string stem = entry.path().stem().string();
    if (stem == "labels") continue;
    const bool registered = std::find(known.begin(), known.end(), stem) != known.end();
    if (!registered) {
      require(!options_.strict, ErrorCode::kInvalidArgument,
              "unknown corruption file " + entry.path().filename().string());
      continue;
    }
    if (!options_.only.empty() &&
        std::find(options_.only.begin(), options_.only.end(), stem) == options_.only.end())
      continue;
    files_.push_back(stem);
  }
  std::sort(files_.begin(), files_.end());

  const auto lab = npy::read(labels_path).as_int64();
  labels_.assign(lab.begin(), lab.end());
  for (const auto& f : files_) {
    const auto h = npy::read_header(root_ / (f + ".npy"));
    require(h.shape.size() == 4, ErrorCode::kShapeMismatch, f + ".npy must be 5N x H x W x C");
    require(h.shape[0] % 5 == 0, ErrorCode::kShapeMismatch,
            f + ".npy has " + std::to_string(h.shape[0]) + " rows, not divisible by 5");
    const std::size_t n = h.shape[0] / 5;
    // labels.npy may hold N entries or the 5N repeated entries of the
    // published files.
    if (labels_.size() == 5 * n) labels_.resize(n);
    require(labels_.size() == n, ErrorCode::kShapeMismatch,
            "labels.npy has " + std::to_string(labels_.size()) + " entries, expected " +
                std::to_string(n));
  }
}

std::optional<CorruptedBatch> BenchmarkReader::next() {
  if (file_index_ >= files_.size()) return std::nullopt;
  const std::string& name = files_[file_index_];
  if (!current_) {
    std::vector<int> repeated;
    const auto img = npy::read(root_ / (name + ".npy"));
    const std::size_t rows = img.shape[0];
    for (std::size_t i = 0; i < rows; ++i) repeated.push_back(labels_[i % labels_.size()]);
    current_ = from_hwc_u8(img.bytes, rows, static_cast<int>(img.shape[1]),
                           static_cast<int>(img.shape[2]), static_cast<int>(img.shape[3]),
                           std::move(repeated));
  }
  const std::size_t n = labels_.size();
  CorruptionSpec spec{name, options_.reverse_severity ? 5 - block_ : block_ + 1,
                      CorruptionSource::kBenchmark};
  CorruptedBatch out{spec, current_->slice(block_ * n, (block_ + 1) * n)};
  if (++block_ == 5) {
    block_ = 0;
    current_.reset();
    ++file_index_;
  }
  return out;
}

CorruptionStream BenchmarkReader::stream() {
  return [this] { return next(); };
}

// ---------------------------------------------------------------------------
// Evaluation

CorruptionEvalResult corrupted_eval(const Model& model, CorruptionStream source,
                                    const ImageBatch& clean, std::string source_name) {
  CorruptionEvalResult r;
  r.source = std::move(source_name);
  r.clean_accuracy = accuracy(model, clean);
  std::map<std::string, std::pair<double, int>> sums;
  std::map<std::string, double> norm_sums;
  double total = 0.0;
  double total_norm = 0.0;
  while (auto item = source()) {
    auto& [spec, batch] = *item;
    require(batch.size() == clean.size(), ErrorCode::kShapeMismatch,
            "corrupted set for " + spec.name + " has " + std::to_string(batch.size()) +
                " samples, clean set has " + std::to_string(clean.size()));
    const double acc = accuracy(model, batch);
    const double norm = r.clean_accuracy > 0.0 ? acc / r.clean_accuracy
                                               : std::numeric_limits<double>::quiet_NaN();
    r.entries.push_back({spec.name, spec.severity, acc, norm});
    auto& s = sums[spec.name];
    s.first += acc;
    s.second += 1;
    norm_sums[spec.name] += norm;
    total += acc;
    total_norm += norm;
  }
  require(!r.entries.empty(), ErrorCode::kInvalidArgument, "empty corruption source");
  for (const auto& [name, s] : sums) {
    r.mean_by_corruption[name] = s.first / s.second;
    r.normalized_by_corruption[name] = norm_sums[name] / s.second;
  }
  r.mean_accuracy = total / static_cast<double>(r.entries.size());
  r.mean_normalized = total_norm / static_cast<double>(r.entries.size());
  return r;
}

namespace {
nlohmann::json num(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}
double num(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}
}  // namespace

void to_json(nlohmann::json& j, const CorruptionEvalResult& r) {
  j = nlohmann::json::object();
  j["source"] = r.source;
  j["clean_accuracy"] = r.clean_accuracy;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : r.entries)
    j["entries"].push_back({{"corruption", e.name},
                            {"severity", e.severity},
                            {"accuracy", e.accuracy},
                            {"normalized_accuracy", num(e.normalized)}});
  j["mean_by_corruption"] = nlohmann::json::object();
  for (const auto& [k, v] : r.mean_by_corruption) j["mean_by_corruption"][k] = v;
  j["normalized_by_corruption"] = nlohmann::json::object();
  for (const auto& [k, v] : r.normalized_by_corruption) j["normalized_by_corruption"][k] = num(v);
  j["mean_accuracy"] = r.mean_accuracy;
  j["mean_normalized_accuracy"] = num(r.mean_normalized);
}

void from_json(const nlohmann::json& j, CorruptionEvalResult& r) {
  r.source = j.at("source").get<std::string>();
  r.clean_accuracy = j.at("clean_accuracy").get<double>();
  r.entries.clear();
  for (const auto& e : j.at("entries"))
    r.entries.push_back({e.at("corruption").get<std::string>(), e.at("severity").get<int>(),
                         e.at("accuracy").get<double>(), num(e.at("normalized_accuracy"))});
  r.mean_by_corruption.clear();
  for (const auto& [k, v] : j.at("mean_by_corruption").items()) r.mean_by_corruption[k] = num(v);
  r.normalized_by_corruption.clear();
  for (const auto& [k, v] : j.at("normalized_by_corruption").items())
    r.normalized_by_corruption[k] = num(v);
  r.mean_accuracy = j.at("mean_accuracy").get<double>();
  r.mean_normalized = num(j.at("mean_normalized_accuracy"));
}

}  // namespace selekt
