// Acceptance run: one PASS/FAIL line per criterion. Criteria 1, 2 and 4-7 run
// in process; the desk sweep behind 3, 4, 8 and 9 goes through the CLI binary.
#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/SVD>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "common/oracles.hpp"
#include "core/attacks.hpp"
#include "core/backbone.hpp"
#include "core/dimensionality.hpp"
#include "core/harness.hpp"
#include "core/report.hpp"
#include "core/run_store.hpp"
#include "core/selectivity.hpp"
#include "core/stability.hpp"
#include "core/stats.hpp"

using namespace selekt;
namespace fs = std::filesystem;

namespace {

constexpr std::array<double, 3> kAlphas{-2.0, 0.0, 2.0};
constexpr int kSeeds = 5;
const std::vector<std::string> kEvalKinds{"--kind attack --method fgsm",
                                          "--kind attack --method pgd", "--kind corrupt",
                                          "--kind dims", "--kind jacobian"};

struct Verdict {
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct CliResult {
  int exit = -1;
  std::string out;
};

CliResult cli(const std::string& args) {
  const std::string cmd = std::string(SELEKT_CLI_PATH) + " --log-level warn " + args + " 2>&1";
  CliResult r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (p == nullptr) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), p) != nullptr) r.out += buf.data();
  const int status = ::pclose(p);
  r.exit = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  if (r.exit != 0) std::cerr << "command failed (" << r.exit << "): " << cmd << "\n" << r.out;
  return r;
}

std::string fixed(double v, int digits = 4) { return fmt::format("{:.{}f}", v, digits); }

std::string ci_text(const MetricSummary& m) {
  return fmt::format("{:.4f} [{:.4f}, {:.4f}]", m.mean, m.lower, m.upper);
}

double half_width(const MetricSummary& m) { return (m.upper - m.lower) / 2.0; }

// ---------------------------------------------------------------------------
// 1. Selectivity arithmetic

Verdict selectivity_arithmetic() {
  Stopwatch clock;
  std::vector<std::string> failures;
  auto si = [](std::vector<double> row) {
    const Eigen::Map<const Eigen::RowVectorXd> m(row.data(), static_cast<Eigen::Index>(row.size()));
    return selectivity_index(Eigen::MatrixXd(m), std::vector<bool>(row.size(), true), {}).front();
  };
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> pos(1e-3, 10.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double v = pos(rng);
    const std::size_t k = 2 + static_cast<std::size_t>(trial % 19);
    std::vector<double> uniform(k, v), one_hot(k, 0.0);
    one_hot[static_cast<std::size_t>(trial) % k] = v;
    if (si(uniform) != 0.0) failures.push_back(fmt::format("uniform {} x{} -> {}", v, k, si(uniform)));
    if (si(one_hot) != 1.0) failures.push_back(fmt::format("one-hot {} x{} -> {}", v, k, si(one_hot)));
  }
  const std::vector<std::vector<double>> layers{{0.2, 0.4}, {0.6}};
  const double net = network_selectivity(layers);
  if (net != 0.45) failures.push_back(fmt::format("layer means [0.3, 0.6] gave {}", net));
  Verdict v;
  v.pass = failures.empty();
  v.detail = v.pass ? "uniform -> 0 and one-hot -> 1 exactly on 1000 cases each; "
                      "layer means [0.3, 0.6] -> 0.45 exactly (pooled would be 0.4)"
                    : failures.front();
  v.seconds = clock.seconds();
  v.pass = v.pass && v.seconds < 60.0;
  return v;
}

// ---------------------------------------------------------------------------
// 2. Regularizer gradient

Verdict regularizer_gradient() {
  Stopwatch clock;
  const auto arch = oracle::tiny_arch();
  const std::vector<int> labels{0, 1, 2, 0, 1, 2};
  std::mt19937_64 rng(2);
  std::normal_distribution<double> noise(0.0, 0.3);
  double worst = 0.0;
  int points = 0;
  bool enough = true;
  for (double alpha : {-1.0, 0.0, 1.0}) {
    RegularizerConfig reg;
    reg.alpha = alpha;
    const auto spec = LossSpec::regularized(reg);
    int checked = 0;
    for (std::uint64_t attempt = 0; attempt < 400 && checked < 20; ++attempt) {
      auto net = Network<double>::build(arch, 1000 + attempt);
      for (auto& p : net.parameters()) p += noise(rng);
      const auto pixels = oracle::uniform(labels.size() * net.input_size(), rng);
      const auto m = oracle::margins(net, pixels, labels, true);
      if (m.relu < 1e-3 || m.argmax < 1e-3) continue;
      const auto r = loss_and_grads<double>(net, pixels, labels, spec, true, false, true);
      if (r.regularizer_skipped) continue;
      auto f = [&](const std::vector<double>& p) {
        const Network<double> moved(arch, p, {net.running_stats().begin(), net.running_stats().end()});
        return loss_and_grads<double>(moved, pixels, labels, spec, false, false, true).loss;
      };
      const std::vector<double> x(net.parameters().begin(), net.parameters().end());
      worst = std::max(worst, oracle::relative_error(oracle::fd_gradient(f, x, 1e-6), r.grads.params));
      ++checked;
    }
    enough = enough && checked == 20;
    points += checked;
  }
  Verdict v;
  v.seconds = clock.seconds();
  v.pass = enough && worst < 1e-4 && arch.parameter_count() <= 1000 && v.seconds < 60.0;
  v.detail = fmt::format("{} params, {} points (20 per alpha in -1,0,1), max rel err {:.2e} (< 1e-4)",
                         arch.parameter_count(), points, worst);
  return v;
}

// ---------------------------------------------------------------------------
// 4. Attack correctness (property part; the trained-model part follows the sweep)

ImageBatch random_images(const ArchConfig& a, std::size_t n, std::mt19937_64& rng) {
  ImageBatch b;
  b.shape = a.input_shape();
  const auto px = oracle::uniform(n * b.shape.pixels(), rng);
  b.pixels.assign(px.begin(), px.end());
  for (std::size_t i = 0; i < n; ++i) b.labels.push_back(static_cast<int>(rng() % a.classes));
  return b;
}

std::string attack_properties(const Model& model, bool& ok) {
  std::mt19937_64 rng(4);
  const auto batch = random_images(model.arch(), 16, rng);
  const bool identity = fgsm(model, batch, 0.0).pixels == batch.pixels;
  bool same = true;
  for (double eps : {0.001, 0.01, 0.05}) {
    AttackSpec s{AttackMethod::kPgd, eps, eps, 1};
    same = same && pgd(model, batch, s).pixels == fgsm(model, batch, eps).pixels;
  }
  std::uniform_real_distribution<double> eps_dist(0.0, 0.1);
  std::uniform_real_distribution<double> step_dist(1e-4, 0.05);
  int bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    auto b = random_images(model.arch(), 1, rng);
    for (std::size_t i = 0; i < b.pixels.size(); i += 5) b.pixels[i] = (i / 5) % 2 ? 1.0f : 0.0f;
    const double eps = eps_dist(rng);
    const auto adv = trial % 2 ? fgsm(model, b, eps)
                               : pgd(model, b, {AttackMethod::kPgd, eps, step_dist(rng), 1 + trial % 10});
    for (std::size_t i = 0; i < adv.pixels.size(); ++i) {
      const double d = std::abs(static_cast<double>(adv.pixels[i]) - b.pixels[i]);
      if (d > eps || adv.pixels[i] < 0.0f || adv.pixels[i] > 1.0f) {
        ++bad;
        break;
      }
    }
  }
  ok = identity && same && bad == 0;
  return fmt::format("eps=0 identity {}, pgd(1 step of eps) == fgsm {}, {} of 1000 budget/range violations",
                     identity ? "exact" : "BROKEN", same ? "exact" : "BROKEN", bad);
}

// ---------------------------------------------------------------------------
// 5. Dimensionality oracle

Verdict dimensionality_oracle() {
  Stopwatch clock;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z(0.0, 1.0);
  auto gaussian = [&](Eigen::Index r, Eigen::Index c) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = z(rng);
    return m;
  };
  int mismatches = 0, compared = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index rows = 2 + static_cast<Eigen::Index>(rng() % 199);
    const Eigen::Index cols = 1 + static_cast<Eigen::Index>(rng() % 64);
    const Eigen::Index full = std::min(rows - 1, cols);
    const Eigen::Index rank = 1 + static_cast<Eigen::Index>(rng() % full);
    Eigen::MatrixXd left = gaussian(rows, rank);
    for (Eigen::Index k = 0; k < rank; ++k) left.col(k) *= std::pow(0.8, static_cast<double>(k));
    const Eigen::MatrixXd m = left * gaussian(rank, cols);
    for (double t : {0.5, 0.9, 0.99}) {
      ++compared;
      if (dims_to_variance(m, t) != oracle::svd_dims(m, t)) ++mismatches;
    }
  }
  // Identity perturbation on a real network: zero dims in every layer.
  ArchConfig a;
  a.image_size = 16;
  const auto model = Model::build(a, 5);
  const auto data = random_images(a, 300, rng);
  const auto clean = forward_with_activations(model, data).acts;
  const auto same = forward_with_activations(model, fgsm(model, data, 0.0)).acts;
  const auto diff = difference_dim_profile(clean, same, MatrixKind::kAdversarialDiff, "identity");
  int nonzero = 0;
  for (const auto& l : diff.layers) nonzero += l.dims != 0;
  Verdict v;
  v.seconds = clock.seconds();
  v.pass = mismatches == 0 && nonzero == 0 && v.seconds < 60.0;
  v.detail = fmt::format("{} mismatches vs full SVD over {} (matrix, threshold) pairs on 200 matrices; "
                         "identity perturbation: {} of {} layers nonzero",
                         mismatches, compared, nonzero, diff.layers.size());
  return v;
}

// ---------------------------------------------------------------------------
// 6. Jacobian probe

Verdict jacobian_probe() {
  Stopwatch clock;
  std::mt19937_64 rng(6);
  ArchConfig lin;
  lin.family = "linear";
  lin.in_channels = 3;
  lin.image_size = 4;
  lin.classes = 5;
  bool exact = true;
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = oracle::uniform(lin.parameter_count(), rng, -1.0, 1.0);
    const Network<double> net(lin, p);
    const auto x = oracle::uniform(net.input_size(), rng);
    const Eigen::Map<const RowMat<double>> w(p.data(), lin.classes,
                                             static_cast<Eigen::Index>(net.input_size()));
    exact = exact && input_output_jacobian<double>(net, x) == Mat<double>(w);
  }
  const auto arch = oracle::tiny_arch();
  double worst = 0.0;
  int checked = 0;
  for (std::uint64_t attempt = 0; attempt < 400 && checked < 20; ++attempt) {
    const auto net = Network<double>::build(arch, 2000 + attempt % 7);
    const auto x = oracle::uniform(net.input_size(), rng);
    if (oracle::margins(net, x, {0}, false).relu < 1e-3) continue;
    const auto jac = input_output_jacobian<double>(net, x);
    std::vector<double> fd, ours;
    for (int c = 0; c < arch.classes; ++c) {
      auto f = [&](const std::vector<double>& v) { return net.forward(v, 1).logits(0, c); };
      const auto row = oracle::fd_gradient(f, x, 1e-6);
      fd.insert(fd.end(), row.begin(), row.end());
      for (Eigen::Index p = 0; p < jac.cols(); ++p) ours.push_back(jac(c, p));
    }
    worst = std::max(worst, oracle::relative_error(fd, ours));
    ++checked;
  }
  Verdict v;
  v.seconds = clock.seconds();
  v.pass = exact && checked == 20 && worst < 1e-4 && v.seconds < 60.0;
  v.detail = fmt::format("linear: Jacobian == W {} on 20 models; relu net: {} inputs, max rel err {:.2e} (< 1e-4)",
                         exact ? "exactly" : "NOT exactly", checked, worst);
  return v;
}

// ---------------------------------------------------------------------------
// 7. Bootstrap coverage

Verdict bootstrap_coverage() {
  Stopwatch clock;
  std::mt19937_64 rng(7);
  std::bernoulli_distribution coin(0.5);
  int covered = 0;
  for (int d = 0; d < 1000; ++d) {
    std::vector<double> x(20);
    for (auto& v : x) v = coin(rng) ? 1.0 : 0.0;
    const auto ci = bootstrap_ci(x, 0.95, 10000, static_cast<std::uint64_t>(d));
    covered += ci.lower <= 0.5 && 0.5 <= ci.upper;
  }
  const double rate = covered / 1000.0;
  Verdict v;
  v.seconds = clock.seconds();
  v.pass = rate >= 0.90 && rate <= 0.98 && v.seconds < 60.0;
  v.detail = fmt::format("coverage {:.3f} of 1000 Bernoulli(0.5) n=20 datasets (target 0.90-0.98)", rate);
  return v;
}

// ---------------------------------------------------------------------------
// Desk sweep through the CLI

struct Sweep {
  bool ok = false;
  std::string problem;
  double train_seconds = 0.0;
  double eval_seconds = 0.0;
  std::vector<RunRecord> records;
  std::map<std::pair<double, std::uint64_t>, fs::path> dirs;
};

bool sweep_complete(const fs::path& runs) {
  if (!fs::exists(runs)) return false;
  std::size_t n = 0;
  for (const auto& d : list_run_dirs(runs)) {
    const auto r = read_record(d);
    if (r.status != "completed" || r.evaluations.size() < 7) return false;
    ++n;
  }
  return n == kAlphas.size() * kSeeds;
}

Sweep run_sweep_cli(const fs::path& config, const fs::path& runs, bool reuse) {
  Sweep s;
  if (!(reuse && sweep_complete(runs))) {
    fs::remove_all(runs);
    Stopwatch train_clock;
    const auto r = cli(fmt::format("sweep --config {} --alphas -2,0,2 --seeds 0,1,2,3,4 --out {}",
                                   config.string(), runs.string()));
    s.train_seconds = train_clock.seconds();
    if (r.exit != 0) {
      s.problem = "sweep exited " + std::to_string(r.exit);
      return s;
    }
    Stopwatch eval_clock;
    for (const auto& d : list_run_dirs(runs))
      for (const auto& kind : kEvalKinds) {
        const auto e = cli(fmt::format("evaluate --run {} {}", d.string(), kind));
        if (e.exit != 0) {
          s.problem = fmt::format("evaluate {} on {} exited {}", kind, d.filename().string(), e.exit);
          return s;
        }
      }
    s.eval_seconds = eval_clock.seconds();
  } else {
    std::cout << "reusing completed sweep under " << runs << "\n";
  }
  for (const auto& d : list_run_dirs(runs)) {
    s.records.push_back(read_record(d));
    s.dirs[{s.records.back().config.alpha, s.records.back().config.seed}] = d;
  }
  s.ok = s.records.size() == kAlphas.size() * kSeeds;
  if (!s.ok) s.problem = fmt::format("expected {} runs, found {}", kAlphas.size() * kSeeds, s.records.size());
  return s;
}

std::string metric_with(const Summary& s, const std::string& prefix, const std::string& part) {
  for (const auto& name : s.metric_names())
    if (name.rfind(prefix, 0) == 0 && name.find(part) != std::string::npos) return name;
  return {};
}

// ---------------------------------------------------------------------------
// 3. Regularizer steering

Verdict steering(const Sweep& sweep, const Summary& s, const TrainConfig& desk) {
  Verdict v;
  v.seconds = sweep.train_seconds;
  std::vector<const MetricSummary*> si;
  for (double a : kAlphas) si.push_back(s.find("network_si", a));
  if (std::find(si.begin(), si.end(), nullptr) != si.end()) {
    v.detail = "network_si missing from the summary";
    return v;
  }
  bool ordered = true;
  for (std::size_t i = 0; i + 1 < si.size(); ++i) {
    const double gap = si[i + 1]->mean - si[i]->mean;
    ordered = ordered && gap > half_width(*si[i]) && gap > half_width(*si[i + 1]);
  }
  bool seeds = true;
  for (const auto* m : si) seeds = seeds && m->n == static_cast<std::size_t>(kSeeds);
  const bool config_ok = desk.epochs == 30 && desk.arch.family == "small_cnn" &&
                         desk.dataset.source == "synthetic";
  const bool in_time = sweep.train_seconds < 1800.0;
  v.pass = ordered && seeds && config_ok && in_time;
  v.detail = fmt::format("test mu_SI alpha=-2 {} < alpha=0 {} < alpha=+2 {}; gaps {} CI half-widths; "
                         "{} seeds x {} epochs",
                         ci_text(*si[0]), ci_text(*si[1]), ci_text(*si[2]),
                         ordered ? "exceed" : "do NOT exceed", si[0]->n, desk.epochs);
  if (!config_ok) v.detail += "; config is not the 30-epoch small_cnn synthetic desk setup";
  if (!in_time) v.detail += fmt::format("; sweep took {:.0f} s (limit 1800)", sweep.train_seconds);
  return v;
}

// ---------------------------------------------------------------------------
// 8. Directional trends

enum class Trend { kHolds, kInconclusive, kReversed };

const char* trend_name(Trend t) {
  switch (t) {
    case Trend::kHolds:
      return "holds";
    case Trend::kInconclusive:
      return "inconclusive at desk scale";
    default:
      return "REVERSED with CI separation";
  }
}

Trend compare(const MetricSummary& expected_high, const MetricSummary& expected_low) {
  if (expected_high.mean > expected_low.mean) return Trend::kHolds;
  if (expected_high.upper < expected_low.lower) return Trend::kReversed;
  return Trend::kInconclusive;
}

Verdict trends(const Summary& s, std::vector<std::string>& lines) {
  Verdict v;
  std::vector<Trend> all;
  auto check = [&](const std::string& label, const std::string& high_name, double high_alpha,
                   const std::string& low_name, double low_alpha) {
    const auto* hi = s.find(high_name, high_alpha);
    const auto* lo = s.find(low_name, low_alpha);
    if (hi == nullptr || lo == nullptr) {
      lines.push_back(label + ": metric missing");
      all.push_back(Trend::kReversed);
      return Trend::kReversed;
    }
    const Trend t = compare(*hi, *lo);
    lines.push_back(fmt::format("{}: {} vs {} -> {}", label, ci_text(*hi), ci_text(*lo), trend_name(t)));
    all.push_back(t);
    return t;
  };
  check("(a) corrupted accuracy, alpha=-2 above alpha=+2", "corrupt/mean_acc", -2.0,
        "corrupt/mean_acc", 2.0);
  const auto pgd25 = metric_with(s, "attack/pgd/", "/steps=25/");
  check("(b) PGD-25 accuracy, alpha=+2 above alpha=-2", pgd25, 2.0, pgd25, -2.0);
  check("(c) Jacobian magnitude, alpha=-2 above alpha=+2", "jacobian/frobenius", -2.0,
        "jacobian/frobenius", 2.0);
  const auto adv = metric_with(s, "dims/adversarial_diff/pgd25/0/", "");
  const auto cor = metric_with(s, "dims/corruption_diff/motion_blur3/0/", "");
  for (double a : kAlphas)
    check(fmt::format("(d) first-layer dim fraction, pgd25 above motion_blur3 at alpha={:+g}", a),
          adv, a, cor, a);
  const auto reversed = std::count(all.begin(), all.end(), Trend::kReversed);
  const auto inconclusive = std::count(all.begin(), all.end(), Trend::kInconclusive);
  v.pass = reversed == 0;
  v.detail = fmt::format("{} of {} directions hold, {} inconclusive at desk scale, {} reversed with CI separation",
                         all.size() - reversed - inconclusive, all.size(), inconclusive, reversed);
  return v;
}

// ---------------------------------------------------------------------------
// 9. Pipeline integrity

Verdict pipeline(const Sweep& sweep, const fs::path& work, const fs::path& config, double elapsed) {
  Stopwatch clock;
  Verdict v;
  std::vector<std::string> problems;
  const fs::path report = work / "report";
  fs::remove_all(report);
  if (cli(fmt::format("report --runs {} --out {}", (work / "runs").string(), report.string())).exit != 0)
    problems.push_back("report failed");
  const std::vector<std::pair<std::string, std::string>> figs{
      {"acc-vs-alpha", ""},          {"acc-vs-eps", "fgsm"},          {"acc-vs-steps", ""},
      {"jacobian-vs-alpha", ""},     {"dims-vs-layer", "clean"},      {"dims-vs-layer", "adversarial_diff"},
      {"dims-vs-layer", "corruption_diff"}, {"corruption-bars", "acc"}};
  std::set<std::string> families;
  for (const auto& [fig, kind] : figs) {
    const auto r = cli(fmt::format("plot --summary {} --fig {}{}", (report / "summary.json").string(), fig,
                                   kind.empty() ? "" : " --kind " + kind));
    const fs::path svg = report / "figures" / (kind.empty() ? fig + ".svg" : fig + "-" + kind + ".svg");
    std::ifstream in(svg);
    std::stringstream text;
    text << in.rdbuf();
    if (r.exit != 0 || text.str().find("class=\"ci-band\"") == std::string::npos)
      problems.push_back("figure " + svg.filename().string() + " missing or without CI bands");
    else
      families.insert(fig);
  }
  const auto val = cli("validate --runs " + (work / "runs").string());
  if (val.exit != 0 || val.out.find("all records valid") == std::string::npos)
    problems.push_back("validate reported problems");
  for (const auto& d : list_run_dirs(work / "runs"))
    for (const auto& p : validate_record_json(read_json(d / kRecordFile)))
      problems.push_back(d.filename().string() + ": " + p);

  // Replay seed 0 at every alpha into a fresh root and compare every metric.
  const fs::path replay = work / "replay";
  fs::remove_all(replay);
  std::size_t replayed = 0, metrics_compared = 0;
  for (double a : kAlphas) {
    const auto t = cli(fmt::format("train --config {} --alpha {} --seed 0 --out {}", config.string(), a,
                                   replay.string()));
    if (t.exit != 0) {
      problems.push_back(fmt::format("replay train alpha={} failed", a));
      continue;
    }
    fs::path dir;
    for (const auto& d : list_run_dirs(replay))
      if (read_record(d).config.alpha == a) dir = d;
    for (const auto& kind : kEvalKinds) cli(fmt::format("evaluate --run {} {}", dir.string(), kind));
    const auto again = read_record(dir);
    const auto original = read_record(sweep.dirs.at({a, 0}));
    const auto m1 = run_metrics(original), m2 = run_metrics(again);
    metrics_compared += m1.size();
    if (m1 != m2 || run_record_to_json(original).at("epochs") != run_record_to_json(again).at("epochs"))
      problems.push_back(fmt::format("replay of alpha={} seed=0 differs", a));
    ++replayed;
  }
  v.seconds = elapsed + clock.seconds();
  if (v.seconds >= 2700.0) problems.push_back("pipeline over 45 min");
  v.pass = problems.empty() && families.size() == 6 && replayed == kAlphas.size();
  v.detail = v.pass ? fmt::format("{} runs x 5 evaluations, report, {} figure families with CI bands, "
                                  "records valid, {} replayed runs match on {} metrics",
                                  sweep.records.size(), families.size(), replayed, metrics_compared)
                    : problems.front();
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  fs::path work = "acceptance_work";
  fs::path config = SELEKT_DESK_CONFIG;
  bool reuse = false;
  app.add_option("--work", work, "Scratch directory for the desk sweep");
  app.add_option("--config", config, "Desk config");
  app.add_flag("--reuse", reuse, "Reuse a completed sweep under the work directory");
  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::warn);
  fs::create_directories(work);

  Stopwatch total;
  std::map<int, Verdict> v;
  v[1] = selectivity_arithmetic();
  v[2] = regularizer_gradient();
  v[5] = dimensionality_oracle();
  v[6] = jacobian_probe();
  v[7] = bootstrap_coverage();

  const TrainConfig desk = load_train_config(config);
  Stopwatch pipeline_clock;
  const Sweep sweep = run_sweep_cli(config, work / "runs", reuse);
  std::vector<std::string> trend_lines;
  std::optional<Summary> summary;
  if (sweep.ok) summary = build_summary(sweep.records);

  {
    Stopwatch clock;
    bool props = false;
    std::string detail;
    ArchConfig a = desk.arch;
    detail = attack_properties(Model::build(a, 4), props);
    bool trained = false;
    if (sweep.ok) {
      const fs::path dir = sweep.dirs.at({0.0, 0});
      const Model model = load_checkpoint(dir / kCheckpointFile);
      const auto data = load_dataset(desk.dataset);
      const auto test = data.test.slice(0, std::min<std::size_t>(1000, data.test.size()));
      const std::vector<AttackSpec> specs{{AttackMethod::kFgsm, 0.01, 0.002, 1},
                                          {AttackMethod::kPgd, 0.01, 0.002, 25}};
      const auto r = attack_sweep(model, test, specs);
      trained = r.rows[1].accuracy <= r.rows[0].accuracy + 0.01;
      detail += fmt::format("; trained alpha=0 seed=0 model at eps=0.01: pgd25 {} <= fgsm {} + 0.01",
                            fixed(r.rows[1].accuracy), fixed(r.rows[0].accuracy));
    } else {
      detail += "; trained-model check skipped: " + sweep.problem;
    }
    v[4] = {props && trained, detail, clock.seconds()};
  }

  if (summary) {
    v[3] = steering(sweep, *summary, desk);
    v[8] = trends(*summary, trend_lines);
    v[9] = pipeline(sweep, work, config, pipeline_clock.seconds());
  } else {
    for (int c : {3, 8, 9}) v[c] = {false, "desk sweep failed: " + sweep.problem, 0.0};
  }

  std::cout << "\n";
  bool all = true;
  for (const auto& [c, r] : v) {
    all = all && r.pass;
    std::cout << fmt::format("criterion {} {} ({:.1f} s): {}\n", c, r.pass ? "PASS" : "FAIL", r.seconds,
                             r.detail);
    if (c == 8)
      for (const auto& line : trend_lines) std::cout << "    " << line << "\n";
  }
  if (summary) {
    for (double a : kAlphas)
      if (const auto* acc = summary->find("clean_acc", a))
        std::cout << fmt::format("note: clean test accuracy alpha={:+g}: {}\n", a, ci_text(*acc));
    if (const auto* acc = summary->find("clean_acc", 0.0))
      std::cout << fmt::format("note: learnability (alpha=0 clean accuracy > 0.80): {}\n",
                               acc->mean > 0.8 ? "yes" : "no");
  }
  std::cout << fmt::format("note: sweep training {:.0f} s, evaluation {:.0f} s, total {:.0f} s\n",
                           sweep.train_seconds, sweep.eval_seconds, total.seconds());
  std::cout << (all ? "acceptance: all criteria pass\n" : "acceptance: FAILED\n");
  return all ? 0 : 1;
}
