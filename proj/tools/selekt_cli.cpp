// Command-line front end. Exit codes: 0 success, 1 usage or config error,
// 2 runtime failure. Errors go to stderr as one line:
//   error: code=<name> field=<field> message="<text>"

#include <cstdio>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "selekt/selekt.h"

namespace {

std::string quoted(const std::string& s) { return nlohmann::json(s).dump(); }

int fail(const std::string& code, const std::string& field, const std::string& message,
         int exit_code) {
  std::fprintf(stderr, "error: code=%s field=%s message=%s\n", code.c_str(),
               field.empty() ? "-" : field.c_str(), quoted(message).c_str());
  return exit_code;
}

int report(selekt_status st) {
  if (st == SELEKT_OK) return 0;
  return fail(selekt_status_name(st), selekt_last_error_field(), selekt_last_error(),
              st == SELEKT_INVALID_ARGUMENT ? 1 : 2);
}

const char* c_or_null(const std::optional<std::string>& s) { return s ? s->c_str() : nullptr; }

struct Owned {
  char* p = nullptr;
  ~Owned() { selekt_string_free(p); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Class selectivity robustness toolkit"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off");

  // train
  auto* train = app.add_subcommand("train", "Train one run");
  std::string train_config;
  std::optional<std::string> alpha, seed, train_out;
  train->add_option("--config", train_config, "Config JSON")->required();
  train->add_option("--alpha", alpha, "Override the regularization scale");
  train->add_option("--seed", seed, "Override the run seed");
  train->add_option("--out", train_out, "Runs root directory");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Train one run per (alpha, seed)");
  std::string sweep_config, alphas, seeds;
  std::optional<std::string> sweep_out;
  sweep->add_option("--config", sweep_config, "Config JSON")->required();
  sweep->add_option("--alphas", alphas, "Comma-separated alpha grid")->required();
  sweep->add_option("--seeds", seeds, "Comma-separated seeds")->required();
  sweep->add_option("--out", sweep_out, "Runs root directory");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Attach an evaluation to a run");
  std::string run_id, kind;
  std::optional<std::string> runs_root;
  std::map<std::string, std::optional<std::string>> eval_opts{
      {"method", {}},      {"eps", {}},       {"steps", {}},     {"step_size", {}},
      {"corruptions", {}}, {"severities", {}}, {"benchmark", {}}, {"perturbation", {}},
      {"threshold", {}},   {"norm", {}},       {"samples", {}}};
  bool reverse_severity = false, strict = false;
  evaluate->add_option("--run", run_id, "Run id or run directory")->required();
  evaluate->add_option("--kind", kind, "attack, corrupt, dims or jacobian")->required();
  evaluate->add_option("--runs", runs_root, "Runs root directory");
  evaluate->add_option("--method", eval_opts["method"], "attack: fgsm or pgd");
  evaluate->add_option("--eps", eval_opts["eps"], "attack/dims: epsilon list");
  evaluate->add_option("--steps", eval_opts["steps"], "attack: PGD step counts");
  evaluate->add_option("--step-size", eval_opts["step_size"], "attack/dims: PGD step size");
  evaluate->add_option("--corruptions", eval_opts["corruptions"], "corrupt: corruption names");
  evaluate->add_option("--severities", eval_opts["severities"], "corrupt: severity list");
  evaluate->add_option("--benchmark", eval_opts["benchmark"], "corrupt: benchmark directory");
  evaluate->add_flag("--reverse-severity", reverse_severity, "corrupt: blocks stored high to low");
  evaluate->add_flag("--strict", strict, "corrupt: reject unknown benchmark files");
  evaluate->add_option("--perturbation", eval_opts["perturbation"],
                       "dims: clean, fgsm, pgd<steps> or <corruption><severity>");
  evaluate->add_option("--threshold", eval_opts["threshold"], "dims: variance threshold");
  evaluate->add_option("--norm", eval_opts["norm"], "jacobian: frobenius or spectral");
  evaluate->add_option("--samples", eval_opts["samples"], "Number of test samples");

  // report
  auto* rep = app.add_subcommand("report", "Aggregate runs into summary files");
  std::string report_runs, report_out;
  rep->add_option("--runs", report_runs, "Runs directory")->required();
  rep->add_option("--out", report_out, "Output directory")->required();

  // plot
  auto* plot = app.add_subcommand("plot", "Render a figure family from a summary");
  std::string summary, fig;
  std::optional<std::string> plot_kind, plot_out;
  plot->add_option("--summary", summary, "summary.json")->required();
  plot->add_option("--fig", fig,
                   "acc-vs-alpha, acc-vs-eps, acc-vs-steps, jacobian-vs-alpha, dims-vs-layer, "
                   "corruption-bars")
      ->required();
  plot->add_option("--kind", plot_kind, "Figure variant");
  plot->add_option("--out", plot_out, "Output directory");

  // data
  auto* data = app.add_subcommand("data", "Dataset utilities");
  std::string data_config, materialize_dir;
  data->add_option("--config", data_config, "Config JSON")->required();
  data->add_option("--materialize", materialize_dir, "Write the dataset to this directory")
      ->required();

  // validate
  auto* validate = app.add_subcommand("validate", "Check every record.json under a runs directory");
  std::string validate_runs;
  validate->add_option("--runs", validate_runs, "Runs directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", "-", e.what(), 1);
  }

  if (selekt_status st = selekt_set_log_level(log_level.c_str()); st != SELEKT_OK) return report(st);

  if (*train) {
    Owned rec;
    const auto st = selekt_cmd_train(train_config.c_str(), c_or_null(alpha), c_or_null(seed),
                                     c_or_null(train_out), &rec.p);
    if (st != SELEKT_OK) return report(st);
    const auto j = nlohmann::json::parse(rec.p);
    std::printf("run %s completed: best_epoch=%d clean_test_acc=%.4f\n",
                j["run_id"].get<std::string>().c_str(), j["best_epoch"].get<int>(),
                j["clean_test_accuracy"].get<double>());
    return 0;
  }
  if (*sweep) {
    Owned recs;
    const auto st = selekt_cmd_sweep(sweep_config.c_str(), alphas.c_str(), seeds.c_str(),
                                     c_or_null(sweep_out), &recs.p);
    if (st != SELEKT_OK) return report(st);
    int bad = 0;
    for (const auto& r : nlohmann::json::parse(recs.p)) {
      std::printf("%s alpha=%g seed=%llu status=%s\n", r["run_id"].get<std::string>().c_str(),
                  r["config"]["alpha"].get<double>(),
                  static_cast<unsigned long long>(r["config"]["seed"].get<std::uint64_t>()),
                  r["status"].get<std::string>().c_str());
      bad += r["status"] != "completed";
    }
    if (bad > 0) return fail("runtime", "-", std::to_string(bad) + " run(s) did not complete", 2);
    return 0;
  }
  if (*evaluate) {
    nlohmann::json req{{"kind", kind}};
    for (const auto& [key, value] : eval_opts)
      if (value) req[key] = *value;
    if (reverse_severity) req["reverse_severity"] = true;
    if (strict) req["strict"] = true;
    Owned rec;
    const auto st =
        selekt_cmd_evaluate(c_or_null(runs_root), run_id.c_str(), req.dump().c_str(), &rec.p);
    if (st != SELEKT_OK) return report(st);
    const auto j = nlohmann::json::parse(rec.p);
    std::printf("run %s: %zu evaluation(s) attached\n", j["run_id"].get<std::string>().c_str(),
                j["evaluations"].size());
    return 0;
  }
  if (*rep) {
    const auto st = selekt_cmd_report(report_runs.c_str(), report_out.c_str(), nullptr);
    if (st != SELEKT_OK) return report(st);
    std::printf("wrote %s/summary.json, summary.csv, runs.csv, corruptions.csv\n",
                report_out.c_str());
    return 0;
  }
  if (*plot) {
    Owned path;
    const auto st = selekt_cmd_plot(summary.c_str(), fig.c_str(), c_or_null(plot_kind),
                                    c_or_null(plot_out), &path.p);
    if (st != SELEKT_OK) return report(st);
    std::printf("wrote %s\n", path.p);
    return 0;
  }
  if (*data) {
    const auto st = selekt_cmd_materialize(data_config.c_str(), materialize_dir.c_str());
    if (st != SELEKT_OK) return report(st);
    std::printf("wrote dataset to %s\n", materialize_dir.c_str());
    return 0;
  }
  if (*validate) {
    Owned problems;
    const auto st = selekt_cmd_validate(validate_runs.c_str(), &problems.p);
    if (st != SELEKT_OK) return report(st);
    const auto list = nlohmann::json::parse(problems.p);
    for (const auto& p : list) std::printf("%s\n", p.get<std::string>().c_str());
    if (!list.empty())
      return fail("invalid_record", "-", std::to_string(list.size()) + " problem(s) found", 2);
    std::printf("all records valid\n");
    return 0;
  }
  return 1;
}
