#include "commands.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include <spdlog/spdlog.h>

#include "attacks.hpp"
#include "corruptions.hpp"
#include "dimensionality.hpp"
#include "error.hpp"
#include "plot.hpp"
#include "run_store.hpp"
#include "stability.hpp"

namespace selekt {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Flag parsing

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_list(const std::string& text, const std::string& field) {
  std::string t = trim(text);
  if (t.size() >= 2 && t.front() == '[' && t.back() == ']') t = t.substr(1, t.size() - 2);
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = t.find(',', start);
    const std::string item = trim(t.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    require(!item.empty(), ErrorCode::kInvalidArgument,
            field + ": empty list item in '" + text + "'", field);
    out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

double parse_real(const std::string& text, const std::string& field) {
  const std::string t = trim(text);
  double v = 0.0;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  if (begin != end && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  require(!t.empty() && ec == std::errc() && ptr == end && std::isfinite(v),
          ErrorCode::kInvalidArgument, field + ": '" + text + "' is not a real number", field);
  return v;
}

std::int64_t parse_integer(const std::string& text, const std::string& field) {
  const std::string t = trim(text);
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  require(!t.empty() && ec == std::errc() && ptr == t.data() + t.size(),
          ErrorCode::kInvalidArgument, field + ": '" + text + "' is not an integer", field);
  return v;
}

std::vector<double> parse_real_list(const std::string& text, const std::string& field) {
  std::vector<double> out;
  for (const auto& item : split_list(text, field)) out.push_back(parse_real(item, field));
  return out;
}

std::vector<std::int64_t> parse_integer_list(const std::string& text, const std::string& field) {
  std::vector<std::int64_t> out;
  for (const auto& item : split_list(text, field)) out.push_back(parse_integer(item, field));
  return out;
}

std::vector<std::string> parse_name_list(const std::string& text, const std::string& field) {
  return split_list(text, field);
}

// ---------------------------------------------------------------------------
// train / sweep

RunRecord cmd_train(const TrainCommand& cmd) {
  TrainConfig cfg = load_train_config(cmd.config);
  if (cmd.alpha) cfg.alpha = parse_real(*cmd.alpha, "alpha");
  if (cmd.seed) {
    const auto s = parse_integer(*cmd.seed, "seed");
    require(s >= 0, ErrorCode::kInvalidArgument, "seed: must be non-negative", "seed");
    cfg.seed = static_cast<std::uint64_t>(s);
  }
  cfg.validate();
  const RunDir dir = allocate_run(cmd.runs_root ? *cmd.runs_root : default_runs_root(), cfg);
  TrainOptions opts;
  opts.checkpoint_path = dir.dir / kCheckpointFile;
  RunRecord rec;
  try {
    rec = train(cfg, opts).record;
  } catch (const std::exception& e) {
    rec = RunRecord{};
    rec.config = cfg;
    rec.status = "failed";
    rec.failure = e.what();
    rec.run_id = dir.run_id;
    write_record(dir.dir, rec);
    throw;
  }
  rec.run_id = dir.run_id;
  if (rec.best_epoch >= 0) rec.checkpoint = kCheckpointFile;
  write_record(dir.dir, rec);
  if (rec.status == "diverged")
    throw Error(ErrorCode::kDivergedRun, "run " + rec.run_id + " diverged: " + rec.failure);
  return rec;
}

std::vector<RunRecord> cmd_sweep(const SweepCommand& cmd) {
  const TrainConfig base = load_train_config(cmd.config);
  const auto alphas = parse_real_list(cmd.alphas, "alphas");
  std::vector<std::uint64_t> seeds;
  for (auto s : parse_integer_list(cmd.seeds, "seeds")) {
    require(s >= 0, ErrorCode::kInvalidArgument, "seeds: must be non-negative", "seeds");
    seeds.push_back(static_cast<std::uint64_t>(s));
  }
  return run_sweep(base, alphas, seeds, cmd.runs_root ? *cmd.runs_root : default_runs_root());
}

// ---------------------------------------------------------------------------
// evaluate

namespace {

template <class T>
std::vector<T> list_field(const json& v, const std::string& field) {
  if (v.is_string()) {
    std::vector<T> out;
    if constexpr (std::is_same_v<T, std::string>) {
      return parse_name_list(v.get<std::string>(), field);
    } else if constexpr (std::is_floating_point_v<T>) {
      return parse_real_list(v.get<std::string>(), field);
    } else {
      for (auto x : parse_integer_list(v.get<std::string>(), field)) out.push_back(static_cast<T>(x));
      return out;
    }
  }
  require(v.is_array(), ErrorCode::kInvalidArgument, field + ": expected a list", field);
  std::vector<T> out;
  for (const auto& item : v) {
    if constexpr (std::is_same_v<T, std::string>) {
      require(item.is_string(), ErrorCode::kInvalidArgument, field + ": expected names", field);
    } else {
      require(item.is_number(), ErrorCode::kInvalidArgument, field + ": expected numbers", field);
    }
    out.push_back(item.get<T>());
  }
  return out;
}

double real_field(const json& v, const std::string& field) {
  if (v.is_string()) return parse_real(v.get<std::string>(), field);
  require(v.is_number(), ErrorCode::kInvalidArgument, field + ": expected a number", field);
  return v.get<double>();
}

bool bool_field(const json& v, const std::string& field) {
  if (v.is_boolean()) return v.get<bool>();
  require(v.is_string(), ErrorCode::kInvalidArgument, field + ": expected a boolean", field);
  const auto s = v.get<std::string>();
  require(s == "true" || s == "false" || s == "1" || s == "0", ErrorCode::kInvalidArgument,
          field + ": expected true or false", field);
  return s == "true" || s == "1";
}

std::string string_field(const json& v, const std::string& field) {
  require(v.is_string(), ErrorCode::kInvalidArgument, field + ": expected a string", field);
  return v.get<std::string>();
}

}  // namespace

EvalRequest parse_eval_request(const json& j) {
  require(j.is_object(), ErrorCode::kInvalidArgument, "evaluation request must be an object");
  EvalRequest r;
  for (const auto& [key, v] : j.items()) {
    if (key == "kind") r.kind = string_field(v, key);
    else if (key == "method") r.method = string_field(v, key);
    else if (key == "eps") r.epsilons = list_field<double>(v, key);
    else if (key == "steps") r.steps = list_field<int>(v, key);
    else if (key == "step_size") r.step_size = real_field(v, key);
    else if (key == "corruptions") r.corruptions = list_field<std::string>(v, key);
    else if (key == "severities") r.severities = list_field<int>(v, key);
    else if (key == "benchmark") r.benchmark = fs::path(string_field(v, key));
    else if (key == "reverse_severity") r.reverse_severity = bool_field(v, key);
    else if (key == "strict") r.strict = bool_field(v, key);
    else if (key == "perturbation") r.perturbations = list_field<std::string>(v, key);
    else if (key == "threshold") r.threshold = real_field(v, key);
    else if (key == "norm") r.norm = string_field(v, key);
    else if (key == "samples") {
      const double s = real_field(v, key);
      require(s >= 1 && s == std::floor(s), ErrorCode::kInvalidArgument,
              "samples: expected a positive integer", key);
      r.samples = static_cast<std::size_t>(s);
    } else {
      throw Error(ErrorCode::kInvalidArgument, key + ": unknown evaluation option", key);
    }
  }
  require(r.kind == "attack" || r.kind == "corrupt" || r.kind == "dims" || r.kind == "jacobian",
          ErrorCode::kInvalidArgument,
          "kind: unknown evaluation kind '" + r.kind + "' (attack, corrupt, dims, jacobian)", "kind");
  require(r.method == "fgsm" || r.method == "pgd", ErrorCode::kInvalidArgument,
          "method: must be fgsm or pgd", "method");
  for (double e : r.epsilons)
    require(e >= 0.0, ErrorCode::kInvalidArgument, "eps: must be >= 0", "eps");
  for (int s : r.steps) require(s >= 0, ErrorCode::kInvalidArgument, "steps: must be >= 0", "steps");
  if (r.step_size)
    require(*r.step_size > 0.0, ErrorCode::kInvalidArgument, "step_size: must be > 0", "step_size");
  if (r.threshold)
    require(*r.threshold > 0.0 && *r.threshold < 1.0, ErrorCode::kInvalidArgument,
            "threshold: must be in (0,1)", "threshold");
  if (r.norm) jacobian_norm_from_string(*r.norm);
  return r;
}

namespace {

ImageBatch leading(const ImageBatch& b, std::size_t n) { return b.slice(0, std::min(n, b.size())); }

ImageBatch attack_in_chunks(const Model& model, const ImageBatch& data, const AttackSpec& spec) {
  ImageBatch out = data;
  constexpr std::size_t chunk = 256;
  for (std::size_t begin = 0; begin < data.size(); begin += chunk) {
    const std::size_t end = std::min(data.size(), begin + chunk);
    const auto adv = attack(model, data.slice(begin, end), spec);
    std::copy(adv.pixels.begin(), adv.pixels.end(),
              out.pixels.begin() + static_cast<std::ptrdiff_t>(begin * data.shape.pixels()));
  }
  return out;
}

LayerActivations<float> collect_activations(const Model& model, const ImageBatch& data) {
  LayerActivations<float> all;
  constexpr std::size_t chunk = 256;
  std::vector<std::vector<Mat<float>>> parts;
  for (std::size_t begin = 0; begin < data.size(); begin += chunk) {
    auto out = forward_with_activations(model, data.slice(begin, std::min(data.size(), begin + chunk)));
    if (all.layer_ids.empty()) {
      all.layer_ids = out.acts.layer_ids;
      parts.resize(out.acts.layers());
    }
    for (std::size_t l = 0; l < out.acts.layers(); ++l) parts[l].push_back(std::move(out.acts.values[l]));
  }
  for (auto& blocks : parts) {
    Eigen::Index rows = 0;
    for (const auto& b : blocks) rows += b.rows();
    Mat<float> m(rows, blocks.front().cols());
    Eigen::Index r = 0;
    for (const auto& b : blocks) {
      m.middleRows(r, b.rows()) = b;
      r += b.rows();
    }
    all.values.push_back(std::move(m));
  }
  return all;
}

struct Perturbation {
  MatrixKind kind = MatrixKind::kClean;
  std::optional<AttackSpec> attack;
  std::optional<CorruptionSpec> corruption;
};

// clean | fgsm | pgd<steps> | <corruption><severity>
Perturbation parse_perturbation(const std::string& token, double eps, double step) {
  Perturbation p;
  if (token == "clean") return p;
  if (token == "fgsm") {
    p.kind = MatrixKind::kAdversarialDiff;
    p.attack = AttackSpec{AttackMethod::kFgsm, eps, step, 1};
    return p;
  }
  std::size_t digits = token.size();
  while (digits > 0 && std::isdigit(static_cast<unsigned char>(token[digits - 1]))) --digits;
  require(digits < token.size() && digits > 0, ErrorCode::kInvalidArgument,
          "perturbation: '" + token + "' is not clean, fgsm, pgd<steps> or <corruption><severity>",
          "perturbation");
  std::string name = token.substr(0, digits);
  const int n = static_cast<int>(parse_integer(token.substr(digits), "perturbation"));
  if (name == "pgd") {
    p.kind = MatrixKind::kAdversarialDiff;
    p.attack = AttackSpec{AttackMethod::kPgd, eps, step, n};
    p.attack->validate();
    return p;
  }
  if (name.back() == '_' || name.back() == '@') name.pop_back();
  p.kind = MatrixKind::kCorruptionDiff;
  p.corruption = CorruptionSpec{name, n, CorruptionSource::kSynthetic};
  p.corruption->validate();
  return p;
}

json eval_attack(const Model& model, const ImageBatch& test, const EvalRequest& req,
                 const EvaluationDefaults& ev, json& spec) {
  std::vector<AttackSpec> specs;
  const std::size_t n = req.samples.value_or(ev.max_samples);
  if (req.method == "fgsm") {
    const auto eps = req.epsilons.empty() ? ev.epsilons : req.epsilons;
    for (double e : eps) specs.push_back({AttackMethod::kFgsm, e, 1e-4, 0});
    spec = {{"method", "fgsm"}, {"epsilons", eps}};
  } else {
    const auto eps = req.epsilons.empty() ? std::vector<double>{ev.pgd_epsilon} : req.epsilons;
    const auto steps = req.steps.empty() ? ev.pgd_steps : req.steps;
    const double step = req.step_size.value_or(ev.pgd_step_size);
    for (double e : eps)
      for (int s : steps) specs.push_back({AttackMethod::kPgd, e, step, s});
    spec = {{"method", "pgd"}, {"epsilons", eps}, {"steps", steps}, {"step_size", step}};
  }
  const ImageBatch data = leading(test, n);
  spec["samples"] = data.size();
  return attack_sweep(model, data, specs);
}

json eval_corrupt(const Model& model, const ImageBatch& test, const EvalRequest& req,
                  const EvaluationDefaults& ev, json& spec) {
  const std::size_t n = req.samples.value_or(ev.max_samples);
  const ImageBatch clean = leading(test, n);
  spec = {{"samples", clean.size()}};
  if (req.benchmark) {
    BenchmarkReader reader(*req.benchmark, {req.strict, req.reverse_severity, req.corruptions});
    spec["source"] = "benchmark";
    spec["root"] = req.benchmark->string();
    spec["reverse_severity"] = req.reverse_severity;
    CorruptionStream limited = [&reader, n]() -> std::optional<CorruptedBatch> {
      auto item = reader.next();
      if (item && item->second.size() > n) item->second = leading(item->second, n);
      return item;
    };
    return corrupted_eval(model, limited, clean, "benchmark");
  }
  const auto names = req.corruptions.empty() ? ev.corruptions : req.corruptions;
  const auto sevs = req.severities.empty() ? ev.severities : req.severities;
  spec["source"] = "synthetic";
  spec["corruptions"] = names;
  spec["severities"] = sevs;
  spec["seed"] = ev.corruption_seed;
  return corrupted_eval(model, synthetic_suite(clean, names, sevs, ev.corruption_seed), clean,
                        "synthetic");
}

std::vector<std::pair<json, json>> eval_dims(const Model& model, const ImageBatch& test,
                                             const EvalRequest& req, const EvaluationDefaults& ev) {
  const ImageBatch data = leading(test, req.samples.value_or(ev.dims_samples));
  const double threshold = req.threshold.value_or(ev.dims_threshold);
  const double eps = req.epsilons.empty() ? ev.pgd_epsilon : req.epsilons.front();
  const double step = req.step_size.value_or(ev.pgd_step_size);
  const auto tokens = req.perturbations.empty() ? ev.dims_perturbations : req.perturbations;
  std::vector<Perturbation> parsed;
  for (const auto& t : tokens) parsed.push_back(parse_perturbation(t, eps, step));

  const auto clean_acts = collect_activations(model, data);
  std::vector<std::pair<json, json>> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& p = parsed[i];
    json spec = {{"perturbation", tokens[i]}, {"threshold", threshold}, {"samples", data.size()}};
    DimReport report;
    if (p.kind == MatrixKind::kClean) {
      report = clean_dim_profile(clean_acts, threshold);
    } else {
      ImageBatch perturbed;
      if (p.attack) {
        perturbed = attack_in_chunks(model, data, *p.attack);
        spec["attack"] = *p.attack;
      } else {
        perturbed = apply_corruption(data, *p.corruption, ev.corruption_seed);
        spec["corruption"] = {{"name", p.corruption->name},
                              {"severity", p.corruption->severity},
                              {"seed", ev.corruption_seed}};
      }
      report = difference_dim_profile(clean_acts, collect_activations(model, perturbed), p.kind,
                                      tokens[i], threshold);
    }
    out.push_back({spec, report});
  }
  return out;
}

json eval_jacobian(const Model& model, const ImageBatch& test, const EvalRequest& req,
                   const EvaluationDefaults& ev, json& spec) {
  JacobianOptions opts;
  opts.norm = jacobian_norm_from_string(req.norm.value_or(ev.jacobian_norm));
  opts.max_samples = req.samples.value_or(ev.jacobian_samples);
  spec = {{"norm", to_string(opts.norm)}, {"samples", std::min(opts.max_samples, test.size())},
          {"of", "logits"}};
  return jacobian_magnitude(model, test, opts);
}

}  // namespace

RunRecord cmd_evaluate(const fs::path& run_dir, const EvalRequest& req) {
  RunRecord rec = read_record(run_dir);
  require(rec.status != "diverged", ErrorCode::kDivergedRun,
          "diverged run " + rec.run_id + " cannot be evaluated", "run");
  require(rec.status == "completed", ErrorCode::kInvalidArgument,
          "run " + rec.run_id + " did not complete (" + rec.status + ")", "run");
  require(!rec.checkpoint.empty() && fs::exists(run_dir / rec.checkpoint), ErrorCode::kNotFound,
          "run " + rec.run_id + " has no checkpoint", "run");
  const Model model = load_checkpoint(run_dir / rec.checkpoint);
  require(model.arch() == rec.config.arch, ErrorCode::kShapeMismatch,
          "checkpoint architecture does not match the run config");

  DatasetDescriptor desc = rec.config.dataset;
  const Dataset data = load_dataset(desc);
  const auto& ev = rec.config.evaluation;
  spdlog::info("evaluating {} ({}) on checkpoint from epoch {}", rec.run_id, req.kind,
               rec.best_epoch);

  auto attach = [&](json spec, json result) {
    rec.evaluations.push_back({req.kind, rec.best_epoch, std::move(spec), std::move(result)});
  };
  json spec;
  if (req.kind == "attack") {
    json result = eval_attack(model, data.test, req, ev, spec);
    attach(spec, result);
  } else if (req.kind == "corrupt") {
    json result = eval_corrupt(model, data.test, req, ev, spec);
    attach(spec, result);
  } else if (req.kind == "dims") {
    for (auto& [s, r] : eval_dims(model, data.test, req, ev)) attach(s, r);
  } else {
    json result = eval_jacobian(model, data.test, req, ev, spec);
    attach(spec, result);
  }
  write_record(run_dir, rec);
  return rec;
}

// ---------------------------------------------------------------------------
// report / plot / data / validate

Summary cmd_report(const fs::path& runs_dir, const fs::path& out_dir) {
  const auto dirs = list_run_dirs(runs_dir);
  require(!dirs.empty(), ErrorCode::kInvalidArgument, "no runs under " + runs_dir.string(), "runs");
  std::vector<RunRecord> records;
  for (const auto& d : dirs) records.push_back(read_record(d));
  Summary s = build_summary(records);
  write_report(s, records, out_dir);
  return s;
}

fs::path cmd_plot(const fs::path& summary, const std::string& fig, const std::string& kind,
                  const std::optional<fs::path>& out) {
  return plot_figure(summary, fig, kind, out);
}

void cmd_materialize(const fs::path& config, const fs::path& out_dir) {
  const TrainConfig cfg = load_train_config(config);
  materialize(load_dataset(cfg.dataset), out_dir);
}

std::vector<std::string> cmd_validate(const fs::path& runs_dir) {
  std::vector<std::string> problems;
  for (const auto& d : list_run_dirs(runs_dir)) {
    const std::string id = d.filename().string();
    json j;
    try {
      j = read_json(d / kRecordFile);
    } catch (const Error& e) {
      problems.push_back(id + ": " + e.what());
      continue;
    }
    for (const auto& p : validate_record_json(j)) problems.push_back(id + ": " + p);
  }
  return problems;
}

}  // namespace selekt
