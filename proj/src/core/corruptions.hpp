#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "backbone.hpp"
#include "tensor.hpp"

namespace selekt {

enum class CorruptionSource { kSynthetic, kBenchmark };

struct CorruptionSpec {
  std::string name;
  int severity = 1;  // 1..5
  CorruptionSource source = CorruptionSource::kSynthetic;

  void validate() const;
};

// brightness, contrast, gaussian_noise, motion_blur, pixelate
const std::vector<std::string>& synthetic_corruptions();
// The 19 corruption files of the CIFAR-10-C style benchmark.
const std::vector<std::string>& benchmark_corruptions();

// Deterministic given (batch, spec, seed). Severity maps:
//   brightness      clip(x + 0.1 s)
//   contrast        (x - 0.5)(1 - 0.15 s) + 0.5
//   gaussian_noise  clip(x + N(0, (0.04 s)^2)), one noise draw shared by all severities
//   motion_blur     horizontal box kernel of length 2s + 1, edge-replicated
//   pixelate        block means over (s + 1) x (s + 1) cells, nearest upsampling
ImageBatch apply_corruption(const ImageBatch& batch, const CorruptionSpec& spec,
                            std::uint64_t seed);

using CorruptedBatch = std::pair<CorruptionSpec, ImageBatch>;
// Pull-style iterator over corrupted versions of a test set.
using CorruptionStream = std::function<std::optional<CorruptedBatch>()>;

CorruptionStream synthetic_suite(const ImageBatch& clean, std::vector<std::string> names,
                                 std::vector<int> severities, std::uint64_t seed);

// Reads a directory holding one <corruption>.npy per corruption (5N x H x W x 3
// uint8, severities stacked in blocks of N) plus labels.npy (N or 5N entries).
class BenchmarkReader {
 public:
  struct Options {
    bool strict = false;            // unknown .npy files are an error
    bool reverse_severity = false;  // blocks stored high -> low
    std::vector<std::string> only;  // restrict to these corruptions (empty = all)
  };

  BenchmarkReader(std::filesystem::path root, Options options);

  std::optional<CorruptedBatch> next();
  std::size_t total_specs() const { return files_.size() * 5; }
  const std::vector<int>& labels() const { return labels_; }

  CorruptionStream stream();

 private:
  std::filesystem::path root_;
  Options options_;
  std::vector<std::string> files_;
  std::vector<int> labels_;
  std::size_t file_index_ = 0;
  int block_ = 0;
  std::optional<ImageBatch> current_;  // all 5 blocks of the current file
};

struct CorruptionEvalResult {
  struct Entry {
    std::string name;
    int severity = 0;
    double accuracy = 0.0;
    double normalized = 0.0;  // NaN when clean accuracy is 0
  };
  std::string source;
  double clean_accuracy = 0.0;
  std::vector<Entry> entries;
  std::map<std::string, double> mean_by_corruption;
  std::map<std::string, double> normalized_by_corruption;
  double mean_accuracy = 0.0;
  double mean_normalized = 0.0;
};

CorruptionEvalResult corrupted_eval(const Model& model, CorruptionStream source,
                                    const ImageBatch& clean, std::string source_name);

void to_json(nlohmann::json& j, const CorruptionEvalResult& r);
void from_json(const nlohmann::json& j, CorruptionEvalResult& r);

const char* to_string(CorruptionSource s);

}  // namespace selekt
