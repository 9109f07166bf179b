#include "harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

#include "corruptions.hpp"
#include "error.hpp"
#include "run_store.hpp"
#include "stability.hpp"
#include "stats.hpp"

namespace selekt {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config parsing

namespace {

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

[[noreturn]] void field_error(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::kInvalidArgument, path + ": " + what, path);
}

class Fields {
 public:
  Fields(const json& obj, std::string path, std::initializer_list<const char*> allowed)
      : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) field_error(path_.empty() ? "config" : path_, "expected an object");
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      const bool known = std::any_of(allowed.begin(), allowed.end(),
                                     [&](const char* k) { return it.key() == k; });
      if (!known) field_error(join(path_, it.key()), "unknown field");
    }
  }

  const json* find(const char* key) const {
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }
  std::string path(const char* key) const { return join(path_, key); }

  template <class T>
  void get(const char* key, T& out) const {
    if (const json* v = find(key)) out = convert<T>(*v, path(key));
  }

 private:
  template <class T>
  static T convert(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) field_error(path, "expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) field_error(path, "expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) field_error(path, "expected a number");
      return v.get<T>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) field_error(path, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_unsigned()) field_error(path, "expected a non-negative integer");
        return v.get<T>();
      } else {
        const auto x = v.get<std::int64_t>();
        if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max())
          field_error(path, "integer out of range");
        return static_cast<T>(x);
      }
    } else {
      if (!v.is_array()) field_error(path, "expected an array");
      T out;
      for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(convert<typename T::value_type>(v[i], path + "[" + std::to_string(i) + "]"));
      return out;
    }
  }

  const json& obj_;
  std::string path_;
};

void parse_arch(const json& j, ArchConfig& a) {
  Fields f(j, "arch",
           {"family", "in_channels", "image_size", "classes", "widths", "strides", "kernel",
            "batchnorm"});
  f.get("family", a.family);
  f.get("in_channels", a.in_channels);
  f.get("image_size", a.image_size);
  f.get("classes", a.classes);
  f.get("widths", a.widths);
  f.get("strides", a.strides);
  f.get("kernel", a.kernel);
  f.get("batchnorm", a.batchnorm);
}

void parse_dataset(const json& j, DatasetDescriptor& d) {
  Fields f(j, "dataset",
           {"source", "classes", "image_size", "channels", "train_per_class", "test_per_class",
            "seed", "root", "train_count", "test_count"});
  f.get("source", d.source);
  f.get("classes", d.classes);
  f.get("image_size", d.image_size);
  f.get("channels", d.channels);
  f.get("train_per_class", d.train_per_class);
  f.get("test_per_class", d.test_per_class);
  f.get("seed", d.seed);
  f.get("root", d.root);
  f.get("train_count", d.train_count);
  f.get("test_count", d.test_count);
}

void parse_evaluation(const json& j, EvaluationDefaults& e) {
  Fields f(j, "evaluation",
           {"max_samples", "epsilons", "pgd_epsilon", "pgd_step_size", "pgd_steps", "corruptions",
            "severities", "corruption_seed", "dims_samples", "dims_threshold",
            "dims_perturbations", "jacobian_samples", "jacobian_norm"});
  f.get("max_samples", e.max_samples);
  f.get("epsilons", e.epsilons);
  f.get("pgd_epsilon", e.pgd_epsilon);
  f.get("pgd_step_size", e.pgd_step_size);
  f.get("pgd_steps", e.pgd_steps);
  f.get("corruptions", e.corruptions);
  f.get("severities", e.severities);
  f.get("corruption_seed", e.corruption_seed);
  f.get("dims_samples", e.dims_samples);
  f.get("dims_threshold", e.dims_threshold);
  f.get("dims_perturbations", e.dims_perturbations);
  f.get("jacobian_samples", e.jacobian_samples);
  f.get("jacobian_norm", e.jacobian_norm);
}

}  // namespace

TrainConfig parse_train_config(const json& j) {
  TrainConfig c;
  Fields f(j, "",
           {"arch", "dataset", "alpha", "epochs", "batch_size", "lr", "momentum", "weight_decay",
            "anneal_epochs", "anneal_factor", "seed", "validation", "regularizer", "evaluation"});
  if (const json* a = f.find("arch")) parse_arch(*a, c.arch);
  // Dataset shape fields default to the architecture's.
  c.dataset.classes = c.arch.classes;
  c.dataset.image_size = c.arch.image_size;
  c.dataset.channels = c.arch.in_channels;
  if (const json* d = f.find("dataset")) parse_dataset(*d, c.dataset);
  f.get("alpha", c.alpha);
  f.get("epochs", c.epochs);
  f.get("batch_size", c.batch_size);
  f.get("lr", c.lr);
  f.get("momentum", c.momentum);
  f.get("weight_decay", c.weight_decay);
  f.get("anneal_epochs", c.anneal_epochs);
  f.get("anneal_factor", c.anneal_factor);
  f.get("seed", c.seed);
  if (const json* v = f.find("validation")) {
    Fields fv(*v, "validation", {"policy", "count", "per_class"});
    fv.get("policy", c.validation.policy);
    fv.get("count", c.validation.count);
    fv.get("per_class", c.validation.per_class);
  }
  if (const json* r = f.find("regularizer")) {
    Fields fr(*r, "regularizer", {"min_classes_for_si", "dead_unit_epsilon"});
    fr.get("min_classes_for_si", c.min_classes_for_si);
    fr.get("dead_unit_epsilon", c.dead_unit_epsilon);
  }
  if (const json* e = f.find("evaluation")) parse_evaluation(*e, c.evaluation);
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kNotFound, "cannot open config " + path.string(), "config");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kInvalidArgument, path.string() + ": " + e.what(), "config");
  }
  return parse_train_config(j);
}

json train_config_to_json(const TrainConfig& c) {
  const auto& e = c.evaluation;
  return {{"arch", c.arch},
          {"dataset", c.dataset},
          {"alpha", c.alpha},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"momentum", c.momentum},
          {"weight_decay", c.weight_decay},
          {"anneal_epochs", c.anneal_epochs},
          {"anneal_factor", c.anneal_factor},
          {"seed", c.seed},
          {"validation",
           {{"policy", c.validation.policy},
            {"count", c.validation.count},
            {"per_class", c.validation.per_class}}},
          {"regularizer",
           {{"min_classes_for_si", c.min_classes_for_si},
            {"dead_unit_epsilon", c.dead_unit_epsilon}}},
          {"evaluation",
           {{"max_samples", e.max_samples},
            {"epsilons", e.epsilons},
            {"pgd_epsilon", e.pgd_epsilon},
            {"pgd_step_size", e.pgd_step_size},
            {"pgd_steps", e.pgd_steps},
            {"corruptions", e.corruptions},
            {"severities", e.severities},
            {"corruption_seed", e.corruption_seed},
            {"dims_samples", e.dims_samples},
            {"dims_threshold", e.dims_threshold},
            {"dims_perturbations", e.dims_perturbations},
            {"jacobian_samples", e.jacobian_samples},
            {"jacobian_norm", e.jacobian_norm}}}};
}

RegularizerConfig TrainConfig::regularizer() const {
  return {alpha, min_classes_for_si, dead_unit_epsilon};
}

void TrainConfig::validate() const {
  arch.validate();
  require(arch.family == "small_cnn", ErrorCode::kInvalidArgument,
          "only small_cnn models are trainable", "arch.family");
  dataset.validate();
  require(dataset.classes == arch.classes, ErrorCode::kInvalidArgument,
          "dataset.classes must equal arch.classes", "dataset.classes");
  require(dataset.image_size == arch.image_size, ErrorCode::kInvalidArgument,
          "dataset.image_size must equal arch.image_size", "dataset.image_size");
  require(dataset.channels == arch.in_channels, ErrorCode::kInvalidArgument,
          "dataset.channels must equal arch.in_channels", "dataset.channels");
  regularizer().validate();
  require(epochs >= 1, ErrorCode::kInvalidArgument, "epochs must be >= 1", "epochs");
  require(batch_size >= 1, ErrorCode::kInvalidArgument, "batch_size must be >= 1", "batch_size");
  require(std::isfinite(lr) && lr > 0.0, ErrorCode::kInvalidArgument, "lr must be > 0", "lr");
  require(momentum >= 0.0 && momentum < 1.0, ErrorCode::kInvalidArgument,
          "momentum must be in [0,1)", "momentum");
  require(weight_decay >= 0.0, ErrorCode::kInvalidArgument, "weight_decay must be >= 0",
          "weight_decay");
  require(anneal_factor > 0.0, ErrorCode::kInvalidArgument, "anneal_factor must be > 0",
          "anneal_factor");
  for (std::size_t i = 0; i < anneal_epochs.size(); ++i) {
    require(anneal_epochs[i] >= 1 && anneal_epochs[i] < epochs, ErrorCode::kInvalidArgument,
            "anneal epochs must lie in [1, epochs)", "anneal_epochs");
    require(i == 0 || anneal_epochs[i] > anneal_epochs[i - 1], ErrorCode::kInvalidArgument,
            "anneal epochs must be strictly increasing", "anneal_epochs");
  }
  require(validation.policy == "fixed_count" || validation.policy == "per_class",
          ErrorCode::kInvalidArgument, "unknown validation policy '" + validation.policy + "'",
          "validation.policy");
  if (validation.policy == "fixed_count")
    require(validation.count >= 1, ErrorCode::kInvalidArgument, "validation count must be >= 1",
            "validation.count");
  else
    require(validation.per_class >= 1, ErrorCode::kInvalidArgument,
            "validation per_class must be >= 1", "validation.per_class");

  const auto& e = evaluation;
  require(e.max_samples >= 1, ErrorCode::kInvalidArgument, "max_samples must be >= 1",
          "evaluation.max_samples");
  for (double eps : e.epsilons)
    require(std::isfinite(eps) && eps >= 0.0, ErrorCode::kInvalidArgument,
            "epsilons must be >= 0", "evaluation.epsilons");
  AttackSpec{AttackMethod::kPgd, e.pgd_epsilon, e.pgd_step_size, 1}.validate();
  for (int s : e.pgd_steps)
    require(s >= 0, ErrorCode::kInvalidArgument, "pgd_steps must be >= 0", "evaluation.pgd_steps");
  for (const auto& n : e.corruptions)
    for (int s : e.severities) CorruptionSpec{n, s, CorruptionSource::kSynthetic}.validate();
  require(e.dims_samples >= 2, ErrorCode::kInvalidArgument, "dims_samples must be >= 2",
          "evaluation.dims_samples");
  require(e.dims_threshold > 0.0 && e.dims_threshold < 1.0, ErrorCode::kInvalidArgument,
          "dims_threshold must be in (0,1)", "evaluation.dims_threshold");
  require(e.jacobian_samples >= 1, ErrorCode::kInvalidArgument, "jacobian_samples must be >= 1",
          "evaluation.jacobian_samples");
  jacobian_norm_from_string(e.jacobian_norm);
}

double learning_rate_at(const TrainConfig& c, int epoch) {
  const auto passed = std::count_if(c.anneal_epochs.begin(), c.anneal_epochs.end(),
                                    [&](int a) { return a <= epoch; });
  return c.lr * std::pow(c.anneal_factor, static_cast<double>(passed));
}

// ---------------------------------------------------------------------------
// Splits

Split split_dataset(const Dataset& data, const ValidationPolicy& policy, std::uint64_t seed) {
  const ImageBatch& pool = data.train_pool;
  const std::size_t n = pool.size();
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> val_idx;
  if (policy.policy == "fixed_count") {
    require(policy.count < n, ErrorCode::kInvalidArgument,
            "validation count " + std::to_string(policy.count) + " leaves no training samples",
            "validation.count");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    val_idx.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(policy.count));
  } else if (policy.policy == "per_class") {
    std::vector<std::vector<std::size_t>> by_class(data.classes);
    for (std::size_t i = 0; i < n; ++i) {
      const int y = pool.labels[i];
      require(y >= 0 && y < data.classes, ErrorCode::kInvalidArgument, "label out of range");
      by_class[y].push_back(i);
    }
    for (int c = 0; c < data.classes; ++c) {
      auto& idx = by_class[c];
      require(idx.size() >= policy.per_class, ErrorCode::kInvalidArgument,
              "class " + std::to_string(c) + " has " + std::to_string(idx.size()) +
                  " samples, fewer than the " + std::to_string(policy.per_class) +
                  " requested for validation",
              "validation.per_class");
      std::shuffle(idx.begin(), idx.end(), rng);
      val_idx.insert(val_idx.end(), idx.begin(),
                     idx.begin() + static_cast<std::ptrdiff_t>(policy.per_class));
    }
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown validation policy '" + policy.policy + "'",
                "validation.policy");
  }
  std::sort(val_idx.begin(), val_idx.end());
  std::vector<std::size_t> train_idx;
  train_idx.reserve(n - val_idx.size());
  std::size_t v = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (v < val_idx.size() && val_idx[v] == i)
      ++v;
    else
      train_idx.push_back(i);
  }
  return {pool.gather(train_idx), pool.gather(val_idx), data.test};
}

// ---------------------------------------------------------------------------
// Training

SelectivityReport dataset_selectivity(const Model& model, const ImageBatch& data,
                                      const RegularizerConfig& cfg, std::string source,
                                      std::size_t chunk) {
  require(data.size() > 0, ErrorCode::kInvalidArgument, "empty dataset");
  ClassMeanAccumulator acc(model.arch().classes);
  for (std::size_t begin = 0; begin < data.size(); begin += chunk) {
    const auto part = data.slice(begin, std::min(data.size(), begin + chunk));
    const auto out = forward_with_activations(model, part);
    acc.add(out.acts, part.labels);
  }
  return make_selectivity_report(acc.finish(), cfg, std::move(source));
}

TrainOutcome train(const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  Dataset loaded;
  const Dataset* data = options.dataset;
  if (data == nullptr) {
    loaded = load_dataset(config.dataset);
    data = &loaded;
  }
  require(data->classes == config.arch.classes, ErrorCode::kInvalidArgument,
          "dataset class count does not match the architecture", "dataset.classes");
  const Split split = split_dataset(*data, config.validation, mix_seed(config.seed, 2));
  require(split.train.shape == config.arch.input_shape(), ErrorCode::kShapeMismatch,
          "dataset images do not match the architecture input shape", "dataset.image_size");

  Model model = Model::build(config.arch, mix_seed(config.seed, 1));
  std::mt19937_64 shuffle_rng(mix_seed(config.seed, 3));
  const LossSpec loss_spec = LossSpec::regularized(config.regularizer());
  auto params = model.parameters();
  std::vector<float> velocity(params.size(), 0.0f);
  std::vector<float> best_params, best_running;

  TrainOutcome outcome;
  RunRecord& rec = outcome.record;
  rec.config = config;
  const float momentum = static_cast<float>(config.momentum);
  const float wd = static_cast<float>(config.weight_decay);
  const std::size_t n = split.train.size();
  std::vector<std::size_t> order(n);

  for (int epoch = 0; epoch < config.epochs && rec.status == "completed"; ++epoch) {
    EpochMetrics m;
    m.epoch = epoch;
    m.lr = learning_rate_at(config, epoch);
    const float lr = static_cast<float>(m.lr);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0, ce_sum = 0.0, si_sum = 0.0;
    std::size_t si_batches = 0;
    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const std::size_t end = std::min(n, begin + config.batch_size);
      const auto batch = split.train.gather(std::span(order).subspan(begin, end - begin));
      LossAndGrads<float> r;
      try {
        r = loss_and_grads(model, batch, loss_spec, true, false, true);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNonFinite) throw;
        rec.status = "diverged";
        rec.failure = "non-finite loss in epoch " + std::to_string(epoch) + " at sample " +
                      std::to_string(begin);
        break;
      }
      const double bn = static_cast<double>(end - begin);
      loss_sum += r.loss * bn;
      ce_sum += r.cross_entropy * bn;
      if (r.regularizer_skipped) {
        ++m.skipped_batches;
        spdlog::debug("epoch {} batch at {}: selectivity term skipped", epoch, begin);
      } else {
        si_sum += r.network_si;
        ++si_batches;
      }
      const auto& g = r.grads.params;
      for (std::size_t i = 0; i < params.size(); ++i) {
        velocity[i] = momentum * velocity[i] + (g[i] + wd * params[i]);
        params[i] -= lr * velocity[i];
      }
      model.update_running_stats(r.trace);
    }
    if (rec.status != "completed") break;
    if (!std::all_of(params.begin(), params.end(), [](float p) { return std::isfinite(p); })) {
      rec.status = "diverged";
      rec.failure = "non-finite parameters after epoch " + std::to_string(epoch);
      break;
    }
    m.train_loss = loss_sum / static_cast<double>(n);
    m.train_cross_entropy = ce_sum / static_cast<double>(n);
    m.mean_batch_si = si_batches > 0 ? si_sum / static_cast<double>(si_batches)
                                     : std::numeric_limits<double>::quiet_NaN();
    m.val_accuracy = accuracy(model, split.val);
    rec.epochs.push_back(m);
    spdlog::info("alpha={} seed={} epoch {}/{} lr={:.4g} loss={:.4f} ce={:.4f} si={:.4f} val={:.4f}",
                 config.alpha, config.seed, epoch + 1, config.epochs, m.lr, m.train_loss,
                 m.train_cross_entropy, m.mean_batch_si, m.val_accuracy);
    if (options.on_epoch) options.on_epoch(m);

    if (rec.best_epoch < 0 || m.val_accuracy > rec.best_val_accuracy) {
      rec.best_epoch = epoch;
      rec.best_val_accuracy = m.val_accuracy;
      best_params.assign(params.begin(), params.end());
      best_running.assign(model.running_stats().begin(), model.running_stats().end());
      if (options.checkpoint_path) save_checkpoint(*options.checkpoint_path, model);
    }
  }

  if (rec.status == "diverged") spdlog::warn("run diverged: {}", rec.failure);
  if (rec.best_epoch >= 0) {
    outcome.best_model.emplace(config.arch, std::move(best_params), std::move(best_running));
    if (rec.status == "completed") {
      rec.clean_test_accuracy = accuracy(*outcome.best_model, split.test);
      rec.test_selectivity =
          dataset_selectivity(*outcome.best_model, split.test, config.regularizer(), "test");
    }
  }
  return outcome;
}

std::vector<RunRecord> run_sweep(const TrainConfig& base, std::span<const double> alphas,
                                 std::span<const std::uint64_t> seeds,
                                 const std::optional<std::filesystem::path>& runs_root) {
  require(!alphas.empty(), ErrorCode::kInvalidArgument, "empty alpha grid", "alphas");
  require(!seeds.empty(), ErrorCode::kInvalidArgument, "empty seed grid", "seeds");
  base.validate();
  const Dataset data = load_dataset(base.dataset);
  std::vector<RunRecord> records;
  for (double alpha : alphas) {
    for (std::uint64_t seed : seeds) {
      TrainConfig cfg = base;
      cfg.alpha = alpha;
      cfg.seed = seed;
      TrainOptions opts;
      opts.dataset = &data;
      std::optional<RunDir> dir;
      if (runs_root) {
        dir = allocate_run(*runs_root, cfg);
        opts.checkpoint_path = dir->dir / kCheckpointFile;
      }
      RunRecord rec;
      try {
        rec = train(cfg, opts).record;
      } catch (const std::exception& e) {
        spdlog::error("run alpha={} seed={} failed: {}", alpha, seed, e.what());
        rec = RunRecord{};
        rec.config = cfg;
        rec.status = "failed";
        rec.failure = e.what();
      }
      if (dir) {
        rec.run_id = dir->run_id;
        if (rec.best_epoch >= 0) rec.checkpoint = kCheckpointFile;
        write_record(dir->dir, rec);
      }
      records.push_back(std::move(rec));
    }
  }
  return records;
}

// ---------------------------------------------------------------------------
// Record serialization

namespace {
json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double from_nullable(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}
}  // namespace

json run_record_to_json(const RunRecord& r) {
  json epochs = json::array();
  for (const auto& m : r.epochs)
    epochs.push_back({{"epoch", m.epoch},
                      {"lr", m.lr},
                      {"train_loss", m.train_loss},
                      {"train_cross_entropy", m.train_cross_entropy},
                      {"mean_batch_si", nullable(m.mean_batch_si)},
                      {"skipped_batches", m.skipped_batches},
                      {"val_accuracy", m.val_accuracy}});
  json evals = json::array();
  for (const auto& e : r.evaluations)
    evals.push_back({{"kind", e.kind},
                     {"checkpoint_epoch", e.checkpoint_epoch},
                     {"spec", e.spec},
                     {"result", e.result}});
  return {{"schema", kRunRecordSchema},
          {"run_id", r.run_id},
          {"config", train_config_to_json(r.config)},
          {"status", r.status},
          {"failure", r.failure.empty() ? json(nullptr) : json(r.failure)},
          {"epochs", epochs},
          {"best_epoch", r.best_epoch},
          {"checkpoint", r.checkpoint.empty() ? json(nullptr) : json(r.checkpoint)},
          {"best_val_accuracy", r.best_val_accuracy},
          {"clean_test_accuracy", r.clean_test_accuracy},
          {"test_selectivity", r.test_selectivity ? json(*r.test_selectivity) : json(nullptr)},
          {"evaluations", evals}};
}

RunRecord run_record_from_json(const json& j) {
  require(j.value("schema", "") == std::string(kRunRecordSchema), ErrorCode::kIo,
          "record has an unknown schema tag");
  RunRecord r;
  try {
    r.run_id = j.at("run_id").get<std::string>();
    r.config = parse_train_config(j.at("config"));
    r.status = j.at("status").get<std::string>();
    r.failure = j.at("failure").is_null() ? "" : j.at("failure").get<std::string>();
    for (const auto& m : j.at("epochs"))
      r.epochs.push_back({m.at("epoch").get<int>(), m.at("lr").get<double>(),
                          m.at("train_loss").get<double>(),
                          m.at("train_cross_entropy").get<double>(),
                          from_nullable(m.at("mean_batch_si")),
                          m.at("skipped_batches").get<std::size_t>(),
                          m.at("val_accuracy").get<double>()});
    r.best_epoch = j.at("best_epoch").get<int>();
    r.checkpoint = j.at("checkpoint").is_null() ? "" : j.at("checkpoint").get<std::string>();
    r.best_val_accuracy = j.at("best_val_accuracy").get<double>();
    r.clean_test_accuracy = j.at("clean_test_accuracy").get<double>();
    if (!j.at("test_selectivity").is_null())
      r.test_selectivity = j.at("test_selectivity").get<SelectivityReport>();
    for (const auto& e : j.at("evaluations"))
      r.evaluations.push_back({e.at("kind").get<std::string>(),
                               e.at("checkpoint_epoch").get<int>(), e.at("spec"), e.at("result")});
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIo, std::string("malformed run record: ") + e.what());
  }
  return r;
}

}  // namespace selekt
