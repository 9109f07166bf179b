#include "run_store.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "error.hpp"

namespace selekt {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path default_runs_root() {
  const char* env = std::getenv("SELEKT_RUNS_DIR");
  return env != nullptr && *env != '\0' ? fs::path(env) : fs::path("runs");
}

std::string config_hash(const TrainConfig& config) {
  const std::string text = train_config_to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf, 8);
}

namespace {

// Leading decimal counter of a run directory name, or -1.
long run_counter(const std::string& name) {
  std::size_t i = 0;
  while (i < name.size() && std::isdigit(static_cast<unsigned char>(name[i]))) ++i;
  if (i == 0 || i >= name.size() || name[i] != '-') return -1;
  return std::stol(name.substr(0, i));
}

}  // namespace

RunDir allocate_run(const fs::path& root, const TrainConfig& config) {
  std::error_code ec;
  fs::create_directories(root, ec);
  require(!ec, ErrorCode::kIo, "cannot create runs directory " + root.string() + ": " + ec.message());
  long next = 0;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) next = std::max(next, run_counter(entry.path().filename().string()) + 1);
  const std::string hash = config_hash(config);
  for (int attempt = 0; attempt < 10000; ++attempt, ++next) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%05ld-", next);
    const std::string id = buf + hash;
    const fs::path dir = root / id;
    if (fs::create_directory(dir, ec)) return {id, dir};
    require(!ec, ErrorCode::kIo, "cannot create run directory " + dir.string() + ": " + ec.message());
  }
  throw Error(ErrorCode::kIo, "could not allocate a run directory under " + root.string());
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.parent_path() / ("." + path.filename().string() + ".tmp" +
                                             std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorCode::kIo, "cannot write " + tmp.string());
    out << text;
    out.flush();
    require(out.good(), ErrorCode::kIo, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error(ErrorCode::kIo, "cannot replace " + path.string() + ": " + ec.message());
  }
}

void write_record(const fs::path& run_dir, const RunRecord& record) {
  write_text_atomic(run_dir / kRecordFile, run_record_to_json(record).dump(2) + "\n");
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kNotFound, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kIo, path.string() + ": " + e.what());
  }
}

RunRecord read_record(const fs::path& run_dir) {
  const json j = read_json(run_dir / kRecordFile);
  try {
    return run_record_from_json(j);
  } catch (const Error& e) {
    throw Error(e.code(), (run_dir / kRecordFile).string() + ": " + e.what(), e.field());
  }
}

std::vector<fs::path> list_run_dirs(const fs::path& root) {
  require(fs::is_directory(root), ErrorCode::kNotFound,
          "runs directory " + root.string() + " does not exist");
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory() && fs::exists(entry.path() / kRecordFile)) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

fs::path resolve_run(const fs::path& root, const std::string& id) {
  require(!id.empty(), ErrorCode::kInvalidArgument, "empty run id", "run");
  const fs::path under_root = root / id;
  if (fs::exists(under_root / kRecordFile)) return under_root;
  if (fs::exists(fs::path(id) / kRecordFile)) return fs::path(id);
  throw Error(ErrorCode::kNotFound, "run '" + id + "' not found under " + root.string(), "run");
}

namespace {

bool matches(const json& v, json::value_t type) {
  if (type == json::value_t::number_float) return v.is_number();
  if (type == json::value_t::number_integer) return v.is_number_integer();
  return v.type() == type;
}

struct Checker {
  std::vector<std::string> problems;

  bool expect(const json& obj, const char* key, json::value_t type, const std::string& where,
              bool nullable = false) {
    auto it = obj.find(key);
    if (it == obj.end()) {
      problems.push_back(where + "." + key + ": missing");
      return false;
    }
    if (nullable && it->is_null()) return false;
    if (!matches(*it, type)) {
      problems.push_back(where + "." + key + ": wrong type");
      return false;
    }
    return true;
  }
};

}  // namespace

std::vector<std::string> validate_record_json(const json& j) {
  using vt = json::value_t;
  Checker c;
  if (!j.is_object()) return {"record: not an object"};
  if (c.expect(j, "schema", vt::string, "record") && j["schema"] != kRunRecordSchema)
    c.problems.push_back("record.schema: unknown tag");
  c.expect(j, "run_id", vt::string, "record");
  if (c.expect(j, "status", vt::string, "record")) {
    const auto s = j["status"].get<std::string>();
    if (s != "completed" && s != "diverged" && s != "failed")
      c.problems.push_back("record.status: unknown value '" + s + "'");
  }
  c.expect(j, "failure", vt::string, "record", true);
  c.expect(j, "checkpoint", vt::string, "record", true);
  c.expect(j, "best_val_accuracy", vt::number_float, "record");
  c.expect(j, "clean_test_accuracy", vt::number_float, "record");
  const bool has_best = c.expect(j, "best_epoch", vt::number_integer, "record");
  if (c.expect(j, "config", vt::object, "record")) {
    try {
      parse_train_config(j["config"]);
    } catch (const Error& e) {
      c.problems.push_back(std::string("record.config: ") + e.what());
    }
  }
  int n_epochs = 0;
  if (c.expect(j, "epochs", vt::array, "record")) {
    for (const auto& m : j["epochs"]) {
      const std::string w = "record.epochs[" + std::to_string(n_epochs++) + "]";
      if (!m.is_object()) {
        c.problems.push_back(w + ": not an object");
        continue;
      }
      c.expect(m, "epoch", vt::number_integer, w);
      c.expect(m, "lr", vt::number_float, w);
      c.expect(m, "train_loss", vt::number_float, w);
      c.expect(m, "train_cross_entropy", vt::number_float, w);
      c.expect(m, "mean_batch_si", vt::number_float, w, true);
      c.expect(m, "skipped_batches", vt::number_integer, w);
      c.expect(m, "val_accuracy", vt::number_float, w);
    }
  }
  if (has_best && j.contains("epochs") && j["epochs"].is_array()) {
    const int best = j["best_epoch"].get<int>();
    if (best < -1 || best >= n_epochs) {
      c.problems.push_back("record.best_epoch: out of range");
    } else if (best >= 0) {
      // First maximum of the validation accuracy trace.
      int arg = 0;
      for (int e = 1; e < n_epochs; ++e)
        if (j["epochs"][e].value("val_accuracy", 0.0) > j["epochs"][arg].value("val_accuracy", 0.0))
          arg = e;
      if (arg != best) c.problems.push_back("record.best_epoch: not the first validation maximum");
    }
  }
  if (j.contains("test_selectivity") && !j["test_selectivity"].is_null()) {
    try {
      j["test_selectivity"].get<SelectivityReport>();
    } catch (const std::exception& e) {
      c.problems.push_back(std::string("record.test_selectivity: ") + e.what());
    }
  } else if (!j.contains("test_selectivity")) {
    c.problems.push_back("record.test_selectivity: missing");
  }
  if (c.expect(j, "evaluations", vt::array, "record")) {
    int i = 0;
    for (const auto& e : j["evaluations"]) {
      const std::string w = "record.evaluations[" + std::to_string(i++) + "]";
      if (!e.is_object()) {
        c.problems.push_back(w + ": not an object");
        continue;
      }
      if (c.expect(e, "kind", vt::string, w)) {
        const auto k = e["kind"].get<std::string>();
        if (k != "attack" && k != "corrupt" && k != "dims" && k != "jacobian")
          c.problems.push_back(w + ".kind: unknown value '" + k + "'");
      }
      if (c.expect(e, "checkpoint_epoch", vt::number_integer, w) && has_best &&
          e["checkpoint_epoch"] != j["best_epoch"])
        c.problems.push_back(w + ".checkpoint_epoch: does not match best_epoch");
      c.expect(e, "spec", vt::object, w);
      c.expect(e, "result", vt::object, w);
    }
  }
  return c.problems;
}

}  // namespace selekt
