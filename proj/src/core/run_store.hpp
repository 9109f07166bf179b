#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "harness.hpp"

namespace selekt {

// $SELEKT_RUNS_DIR if set and non-empty, otherwise "runs".
std::filesystem::path default_runs_root();

// First 8 hex digits of the FNV-1a hash of the canonical config JSON.
std::string config_hash(const TrainConfig& config);

struct RunDir {
  std::string run_id;
  std::filesystem::path dir;
};

// Creates <root>/<counter>-<hash> with the next free 5-digit counter.
// Directory creation is the claim, so concurrent writers never share a run.
RunDir allocate_run(const std::filesystem::path& root, const TrainConfig& config);

inline constexpr const char* kRecordFile = "record.json";
inline constexpr const char* kCheckpointFile = "checkpoint.bin";

// Writes to a temporary file in the same directory, then renames over the
// target, so readers only ever see complete files.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
void write_record(const std::filesystem::path& run_dir, const RunRecord& record);
RunRecord read_record(const std::filesystem::path& run_dir);
nlohmann::json read_json(const std::filesystem::path& path);

// Run directories (those holding a record.json) under root, sorted by name.
std::vector<std::filesystem::path> list_run_dirs(const std::filesystem::path& root);

// Accepts a run id under root or a path to a run directory.
std::filesystem::path resolve_run(const std::filesystem::path& root, const std::string& id);

// Structural check of a record.json document; returns one message per problem.
std::vector<std::string> validate_record_json(const nlohmann::json& j);

}  // namespace selekt
