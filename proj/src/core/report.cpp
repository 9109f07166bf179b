#include "report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "error.hpp"
#include "run_store.hpp"
#include "stats.hpp"

namespace selekt {

using nlohmann::json;

namespace {

std::string g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string g17(double v) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void add_attack(const json& result, std::map<std::string, double>& out) {
  for (const auto& row : result.at("rows")) {
    const auto method = row.at("method").get<std::string>();
    const double eps = row.at("epsilon").get<double>();
    std::string name = "attack/" + method + "/eps=" + g(eps);
    if (method == "pgd")
      name += "/steps=" + std::to_string(row.at("steps").get<int>()) +
              "/step=" + g(row.at("step_size").get<double>());
    out[name] = row.at("accuracy").get<double>();
  }
}

double nullable(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

void add_corrupt(const json& result, std::map<std::string, double>& out) {
  out["corrupt/mean_acc"] = result.at("mean_accuracy").get<double>();
  out["corrupt/mean_norm"] = nullable(result.at("mean_normalized_accuracy"));
  for (const auto& [name, v] : result.at("mean_by_corruption").items())
    out["corrupt/" + name + "/acc"] = nullable(v);
  for (const auto& [name, v] : result.at("normalized_by_corruption").items())
    out["corrupt/" + name + "/norm"] = nullable(v);
}

void add_dims(const json& result, std::map<std::string, double>& out) {
  const auto kind = result.at("kind").get<std::string>();
  const auto& p = result.at("perturbation");
  const std::string pert = p.is_null() ? "none" : p.get<std::string>();
  int i = 0;
  for (const auto& layer : result.at("layers"))
    out["dims/" + kind + "/" + pert + "/" + std::to_string(i++) + "/" +
        layer.at("layer_id").get<std::string>()] = layer.at("fraction").get<double>();
}

}  // namespace

std::map<std::string, double> run_metrics(const RunRecord& record) {
  std::map<std::string, double> out;
  if (record.status != "completed") return out;
  out["clean_acc"] = record.clean_test_accuracy;
  if (record.test_selectivity) out["network_si"] = record.test_selectivity->network_si;
  for (const auto& e : record.evaluations) {
    try {
      if (e.kind == "attack")
        add_attack(e.result, out);
      else if (e.kind == "corrupt")
        add_corrupt(e.result, out);
      else if (e.kind == "dims")
        add_dims(e.result, out);
      else if (e.kind == "jacobian")
        out["jacobian/" + e.result.at("norm").get<std::string>()] = e.result.at("mean").get<double>();
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::kIo, "run " + record.run_id + ": malformed " + e.kind +
                                      " evaluation: " + ex.what());
    }
  }
  return out;
}

const MetricSummary* Summary::find(const std::string& name, double alpha) const {
  for (const auto& m : metrics)
    if (m.name == name && m.alpha == alpha) return &m;
  return nullptr;
}

std::vector<std::string> Summary::metric_names() const {
  std::set<std::string> names;
  for (const auto& m : metrics) names.insert(m.name);
  return {names.begin(), names.end()};
}

Summary build_summary(const std::vector<RunRecord>& records, std::uint64_t bootstrap_seed) {
  require(!records.empty(), ErrorCode::kInvalidArgument, "no runs to summarize", "runs");
  Summary s;
  std::map<double, AlphaGroup> groups;
  std::map<std::pair<std::string, double>, std::vector<double>> values;
  for (const auto& r : records) {
    auto& grp = groups[r.config.alpha];
    grp.alpha = r.config.alpha;
    ++grp.runs;
    if (r.status == "completed")
      ++grp.completed;
    else if (r.status == "diverged")
      ++grp.diverged;
    else
      ++grp.failed;
    SummaryRun row{r.run_id, r.config.alpha, r.config.seed, r.status, r.best_epoch, run_metrics(r)};
    for (const auto& [name, v] : row.metrics)
      if (std::isfinite(v)) values[{name, r.config.alpha}].push_back(v);
    s.runs.push_back(std::move(row));
  }
  for (const auto& [a, grp] : groups) s.groups.push_back(grp);
  require(std::any_of(s.groups.begin(), s.groups.end(), [](const AlphaGroup& g) { return g.completed > 0; }),
          ErrorCode::kInvalidArgument, "no completed runs to summarize", "runs");
  for (const auto& [key, v] : values) {
    const auto ci = bootstrap_ci(v, 0.95, 10000, bootstrap_seed);
    s.metrics.push_back({key.first, key.second, v.size(), ci.mean, ci.lower, ci.upper});
  }
  return s;
}

void to_json(json& j, const Summary& s) {
  j = json::object();
  j["schema"] = "selekt.summary/1";
  j["groups"] = json::array();
  for (const auto& g : s.groups)
    j["groups"].push_back({{"alpha", g.alpha},
                           {"runs", g.runs},
                           {"completed", g.completed},
                           {"diverged", g.diverged},
                           {"failed", g.failed}});
  j["metrics"] = json::array();
  for (const auto& m : s.metrics)
    j["metrics"].push_back({{"name", m.name},
                            {"alpha", m.alpha},
                            {"n", m.n},
                            {"mean", m.mean},
                            {"lower", m.lower},
                            {"upper", m.upper}});
  j["runs"] = json::array();
  for (const auto& r : s.runs) {
    json metrics = json::object();
    for (const auto& [k, v] : r.metrics) metrics[k] = std::isfinite(v) ? json(v) : json(nullptr);
    j["runs"].push_back({{"run_id", r.run_id},
                         {"alpha", r.alpha},
                         {"seed", r.seed},
                         {"status", r.status},
                         {"best_epoch", r.best_epoch},
                         {"metrics", metrics}});
  }
}

void from_json(const json& j, Summary& s) {
  s = Summary{};
  for (const auto& g : j.at("groups"))
    s.groups.push_back({g.at("alpha").get<double>(), g.at("runs").get<std::size_t>(),
                        g.at("completed").get<std::size_t>(), g.at("diverged").get<std::size_t>(),
                        g.at("failed").get<std::size_t>()});
  for (const auto& m : j.at("metrics"))
    s.metrics.push_back({m.at("name").get<std::string>(), m.at("alpha").get<double>(),
                         m.at("n").get<std::size_t>(), m.at("mean").get<double>(),
                         m.at("lower").get<double>(), m.at("upper").get<double>()});
  for (const auto& r : j.at("runs")) {
    SummaryRun row{r.at("run_id").get<std::string>(), r.at("alpha").get<double>(),
                   r.at("seed").get<std::uint64_t>(), r.at("status").get<std::string>(),
                   r.at("best_epoch").get<int>(), {}};
    for (const auto& [k, v] : r.at("metrics").items()) row.metrics[k] = nullable(v);
    s.runs.push_back(std::move(row));
  }
}

void write_report(const Summary& summary, const std::vector<RunRecord>& records,
                  const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  require(!ec, ErrorCode::kIo, "cannot create " + out_dir.string() + ": " + ec.message(), "out");

  write_text_atomic(out_dir / "summary.json", json(summary).dump(2) + "\n");

  std::ostringstream csv;
  csv << "alpha,metric,n,mean,lower,upper\n";
  for (const auto& m : summary.metrics)
    csv << g17(m.alpha) << ',' << m.name << ',' << m.n << ',' << g17(m.mean) << ','
        << g17(m.lower) << ',' << g17(m.upper) << '\n';
  write_text_atomic(out_dir / "summary.csv", csv.str());

  std::set<std::string> columns;
  for (const auto& r : summary.runs)
    for (const auto& [k, v] : r.metrics)
      if (k != "clean_acc" && k != "network_si") columns.insert(k);
  std::ostringstream runs;
  runs << "run_id,alpha,seed,status,best_epoch,clean_acc,network_si";
  for (const auto& c : columns) runs << ',' << c;
  runs << '\n';
  auto cell = [](const std::map<std::string, double>& m, const std::string& k) {
    auto it = m.find(k);
    return it == m.end() ? std::string() : g17(it->second);
  };
  for (const auto& r : summary.runs) {
    runs << r.run_id << ',' << g17(r.alpha) << ',' << r.seed << ',' << r.status << ','
         << r.best_epoch << ',' << cell(r.metrics, "clean_acc") << ','
         << cell(r.metrics, "network_si");
    for (const auto& c : columns) runs << ',' << cell(r.metrics, c);
    runs << '\n';
  }
  write_text_atomic(out_dir / "runs.csv", runs.str());

  std::ostringstream corr;
  corr << "run_id,alpha,seed,corruption,severity,accuracy,normalized_accuracy\n";
  for (const auto& r : records) {
    if (r.status != "completed") continue;
    for (const auto& e : r.evaluations) {
      if (e.kind != "corrupt") continue;
      for (const auto& row : e.result.at("entries"))
        corr << r.run_id << ',' << g17(r.config.alpha) << ',' << r.config.seed << ','
             << row.at("corruption").get<std::string>() << ',' << row.at("severity").get<int>()
             << ',' << g17(row.at("accuracy").get<double>()) << ','
             << g17(nullable(row.at("normalized_accuracy"))) << '\n';
    }
  }
  write_text_atomic(out_dir / "corruptions.csv", corr.str());
}

Summary read_summary(const std::filesystem::path& summary_json) {
  const json j = read_json(summary_json);
  try {
    return j.get<Summary>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIo, summary_json.string() + ": malformed summary: " + e.what(),
                "summary");
  }
}

std::vector<MetricSummary> read_summary_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kNotFound, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  require(line == "alpha,metric,n,mean,lower,upper", ErrorCode::kIo,
          path.string() + ": unexpected header");
  std::vector<MetricSummary> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    require(f.size() == 6, ErrorCode::kIo, path.string() + ": malformed row '" + line + "'");
    out.push_back({f[1], std::stod(f[0]), std::stoul(f[2]), std::stod(f[3]), std::stod(f[4]),
                   std::stod(f[5])});
  }
  return out;
}

}  // namespace selekt
