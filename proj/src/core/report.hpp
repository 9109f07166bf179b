#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "harness.hpp"

namespace selekt {

// Flat per-run metrics keyed by slash-separated names:
//   clean_acc, network_si
//   attack/fgsm/eps=E, attack/pgd/eps=E/steps=S/step=H
//   corrupt/mean_acc, corrupt/mean_norm, corrupt/<name>/acc, corrupt/<name>/norm
//   dims/<kind>/<perturbation>/<layer index>/<layer id>
//   jacobian/<norm>
// Later evaluations of the same metric replace earlier ones.
std::map<std::string, double> run_metrics(const RunRecord& record);

struct SummaryRun {
  std::string run_id;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  std::string status;
  int best_epoch = -1;
  std::map<std::string, double> metrics;
};

struct MetricSummary {
  std::string name;
  double alpha = 0.0;
  std::size_t n = 0;
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct AlphaGroup {
  double alpha = 0.0;
  std::size_t runs = 0;
  std::size_t completed = 0;
  std::size_t diverged = 0;
  std::size_t failed = 0;
};

struct Summary {
  std::vector<AlphaGroup> groups;     // ascending alpha
  std::vector<MetricSummary> metrics; // sorted by (name, alpha)
  std::vector<SummaryRun> runs;

  // Nullptr when the metric has no value at this alpha.
  const MetricSummary* find(const std::string& name, double alpha) const;
  std::vector<std::string> metric_names() const;
};

// Groups completed runs by alpha and bootstraps every metric over seeds.
// Diverged and failed runs are counted per group but contribute no values.
Summary build_summary(const std::vector<RunRecord>& records, std::uint64_t bootstrap_seed = 0);

void to_json(nlohmann::json& j, const Summary& s);
void from_json(const nlohmann::json& j, Summary& s);

// Writes summary.json, summary.csv (alpha, metric, n, mean, lower, upper),
// runs.csv and corruptions.csv into out_dir. Reals use 17 significant digits
// so the CSVs reload to the same doubles.
void write_report(const Summary& summary, const std::vector<RunRecord>& records,
                  const std::filesystem::path& out_dir);

Summary read_summary(const std::filesystem::path& summary_json);
std::vector<MetricSummary> read_summary_csv(const std::filesystem::path& summary_csv);

}  // namespace selekt
