#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "attacks.hpp"
#include "backbone.hpp"
#include "data.hpp"
#include "selectivity.hpp"

namespace selekt {

struct ValidationPolicy {
  std::string policy = "fixed_count";  // fixed_count | per_class
  std::size_t count = 500;             // fixed_count: total validation samples
  std::size_t per_class = 50;          // per_class: samples drawn from each class
};

// Defaults used by `evaluate` when a flag is not given.
struct EvaluationDefaults {
  std::size_t max_samples = 1000;  // leading test samples used by attacks and corruptions
  std::vector<double> epsilons{0.0, 1.0 / 255, 2.0 / 255, 4.0 / 255, 8.0 / 255, 16.0 / 255};
  double pgd_epsilon = 8.0 / 255;
  double pgd_step_size = 1e-4;
  std::vector<int> pgd_steps{1, 5, 10, 25};
  std::vector<std::string> corruptions{"brightness", "contrast", "gaussian_noise", "motion_blur",
                                       "pixelate"};
  std::vector<int> severities{1, 2, 3, 4, 5};
  std::uint64_t corruption_seed = 0;
  std::size_t dims_samples = 2000;
  double dims_threshold = 0.9;
  std::vector<std::string> dims_perturbations{"clean", "pgd25", "motion_blur3"};
  std::size_t jacobian_samples = 500;
  std::string jacobian_norm = "frobenius";
};

struct TrainConfig {
  ArchConfig arch;
  DatasetDescriptor dataset;
  double alpha = 0.0;
  int epochs = 30;
  std::size_t batch_size = 128;
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::vector<int> anneal_epochs{15, 25};
  double anneal_factor = 0.1;
  std::uint64_t seed = 0;
  ValidationPolicy validation;
  int min_classes_for_si = 2;
  double dead_unit_epsilon = 1e-12;
  EvaluationDefaults evaluation;

  void validate() const;
  RegularizerConfig regularizer() const;
};

// Strict parse: unknown keys and wrongly typed values are rejected with the
// offending field path (e.g. "arch.widths") attached to the error.
TrainConfig parse_train_config(const nlohmann::json& j);
TrainConfig load_train_config(const std::filesystem::path& path);
nlohmann::json train_config_to_json(const TrainConfig& c);

// Learning rate in effect during (0-based) `epoch`.
double learning_rate_at(const TrainConfig& c, int epoch);

struct Split {
  ImageBatch train;
  ImageBatch val;
  ImageBatch test;
};

// Carves the validation set out of the train pool; the test set is returned
// unchanged. Pool order is preserved within train and val.
Split split_dataset(const Dataset& data, const ValidationPolicy& policy, std::uint64_t seed);

struct EpochMetrics {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_cross_entropy = 0.0;
  double mean_batch_si = 0.0;  // over batches where the selectivity term was evaluated
  std::size_t skipped_batches = 0;
  double val_accuracy = 0.0;
};

// An analysis attached to a run, always computed on the best-epoch checkpoint.
struct Evaluation {
  std::string kind;  // attack | corrupt | dims | jacobian
  int checkpoint_epoch = -1;
  nlohmann::json spec;
  nlohmann::json result;
};

inline constexpr const char* kRunRecordSchema = "selekt.run_record/1";

struct RunRecord {
  std::string run_id;
  TrainConfig config;
  std::string status = "completed";  // completed | diverged | failed
  std::string failure;
  std::vector<EpochMetrics> epochs;
  int best_epoch = -1;
  std::string checkpoint;  // file name relative to the run directory
  double best_val_accuracy = 0.0;
  double clean_test_accuracy = 0.0;
  std::optional<SelectivityReport> test_selectivity;
  std::vector<Evaluation> evaluations;
};

nlohmann::json run_record_to_json(const RunRecord& r);
RunRecord run_record_from_json(const nlohmann::json& j);

struct TrainOptions {
  // When set, the best-so-far checkpoint is written here after every
  // improving epoch.
  std::optional<std::filesystem::path> checkpoint_path;
  // Reuse an already loaded dataset (it must match config.dataset).
  const Dataset* dataset = nullptr;
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct TrainOutcome {
  RunRecord record;
  std::optional<Model> best_model;  // empty if no epoch completed
};

// SGD with momentum; weight decay is added to the gradient before the momentum
// update, as in torch.optim.SGD. Divergence ends the run and is reported in
// the record.
TrainOutcome train(const TrainConfig& config, const TrainOptions& options = {});

// One run per (alpha, seed), alpha-major. With a runs root every run gets its
// own directory holding record.json and the best checkpoint. A run that
// throws is recorded as failed and the sweep continues.
std::vector<RunRecord> run_sweep(const TrainConfig& base, std::span<const double> alphas,
                                 std::span<const std::uint64_t> seeds,
                                 const std::optional<std::filesystem::path>& runs_root);

// Test-set selectivity of a model, accumulated in chunks.
SelectivityReport dataset_selectivity(const Model& model, const ImageBatch& data,
                                      const RegularizerConfig& cfg, std::string source,
                                      std::size_t chunk = 256);

}  // namespace selekt
