#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "harness.hpp"
#include "report.hpp"

namespace selekt {

// Strict text parsing for flag values; errors carry `field`.
double parse_real(const std::string& text, const std::string& field);
std::int64_t parse_integer(const std::string& text, const std::string& field);
std::vector<double> parse_real_list(const std::string& text, const std::string& field);
std::vector<std::int64_t> parse_integer_list(const std::string& text, const std::string& field);
std::vector<std::string> parse_name_list(const std::string& text, const std::string& field);

struct TrainCommand {
  std::filesystem::path config;
  std::optional<std::string> alpha;
  std::optional<std::string> seed;
  std::optional<std::filesystem::path> runs_root;  // default_runs_root() when empty
};

// Trains one run into a fresh run directory. The record is written even when
// the run diverges; the divergence is then raised as kDivergedRun.
RunRecord cmd_train(const TrainCommand& cmd);

struct SweepCommand {
  std::filesystem::path config;
  std::string alphas;
  std::string seeds;
  std::optional<std::filesystem::path> runs_root;
};

std::vector<RunRecord> cmd_sweep(const SweepCommand& cmd);

// Parameters of one `evaluate` call. Unset fields fall back to the run
// config's evaluation defaults.
struct EvalRequest {
  std::string kind;  // attack | corrupt | dims | jacobian
  std::string method = "fgsm";
  std::vector<double> epsilons;
  std::vector<int> steps;
  std::optional<double> step_size;
  std::vector<std::string> corruptions;
  std::vector<int> severities;
  std::optional<std::filesystem::path> benchmark;  // benchmark layout directory
  bool reverse_severity = false;
  bool strict = false;
  std::vector<std::string> perturbations;  // dims: clean | pgd<N> | fgsm | <corruption><severity>
  std::optional<double> threshold;
  std::optional<std::string> norm;
  std::optional<std::size_t> samples;
};

// Accepts JSON whose list fields are arrays or comma-separated strings and
// whose scalar fields are numbers or strings.
EvalRequest parse_eval_request(const nlohmann::json& j);

// Runs the evaluation on the best-epoch checkpoint and appends the results
// to record.json.
RunRecord cmd_evaluate(const std::filesystem::path& run_dir, const EvalRequest& req);

Summary cmd_report(const std::filesystem::path& runs_dir, const std::filesystem::path& out_dir);

std::filesystem::path cmd_plot(const std::filesystem::path& summary, const std::string& fig,
                               const std::string& kind,
                               const std::optional<std::filesystem::path>& out);

// Writes the config's dataset to the local layout under out_dir.
void cmd_materialize(const std::filesystem::path& config, const std::filesystem::path& out_dir);

// Problems found in every record.json under runs_dir, prefixed by run id.
std::vector<std::string> cmd_validate(const std::filesystem::path& runs_dir);

}  // namespace selekt
