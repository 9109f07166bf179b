#include "selekt/selekt.h"

#include <cstring>
#include <string>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "core/attacks.hpp"
#include "core/backbone.hpp"
#include "core/commands.hpp"
#include "core/data.hpp"
#include "core/dimensionality.hpp"
#include "core/error.hpp"
#include "core/run_store.hpp"
#include "core/selectivity.hpp"
#include "core/stability.hpp"
#include "core/stats.hpp"

struct selekt_model {
  selekt::Model model;
};

struct selekt_dataset {
  selekt::Dataset data;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_field;

selekt_status to_status(selekt::ErrorCode c) {
  switch (c) {
    case selekt::ErrorCode::kInvalidArgument:
      return SELEKT_INVALID_ARGUMENT;
    case selekt::ErrorCode::kNotFound:
      return SELEKT_NOT_FOUND;
    case selekt::ErrorCode::kIo:
      return SELEKT_IO;
    case selekt::ErrorCode::kShapeMismatch:
      return SELEKT_SHAPE_MISMATCH;
    case selekt::ErrorCode::kNonFinite:
      return SELEKT_NON_FINITE;
    case selekt::ErrorCode::kDivergedRun:
      return SELEKT_DIVERGED_RUN;
    case selekt::ErrorCode::kRuntime:
      return SELEKT_RUNTIME;
  }
  return SELEKT_INTERNAL;
}

template <class F>
selekt_status guard(F&& f) {
  g_error.clear();
  g_field.clear();
  try {
    f();
    return SELEKT_OK;
  } catch (const selekt::Error& e) {
    g_error = e.what();
    g_field = e.field();
    return to_status(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_error = e.what();
    return SELEKT_INVALID_ARGUMENT;
  } catch (const std::bad_alloc&) {
    g_error = "out of memory";
    return SELEKT_INTERNAL;
  } catch (const std::exception& e) {
    g_error = e.what();
    return SELEKT_INTERNAL;
  }
}

void need(const void* p, const char* name) {
  if (p == nullptr)
    throw selekt::Error(selekt::ErrorCode::kInvalidArgument, std::string(name) + " is null", name);
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

selekt::ArchConfig parse_arch(const char* arch_json) {
  need(arch_json, "arch_json");
  return nlohmann::json::parse(arch_json).get<selekt::ArchConfig>();
}

selekt::ImageBatch make_batch(const selekt::Model& m, const float* pixels, const int* labels,
                              size_t n) {
  need(pixels, "pixels");
  selekt::ImageBatch b;
  b.shape = m.arch().input_shape();
  b.pixels.assign(pixels, pixels + n * b.shape.pixels());
  if (labels != nullptr)
    b.labels.assign(labels, labels + n);
  else
    b.labels.assign(n, 0);
  b.validate(m.arch().classes);
  return b;
}

std::optional<std::string> opt(const char* s) {
  return s == nullptr ? std::nullopt : std::optional<std::string>(s);
}

}  // namespace

extern "C" {

const char* selekt_version(void) { return "0.1.0"; }

const char* selekt_status_name(selekt_status status) {
  switch (status) {
    case SELEKT_OK:
      return "ok";
    case SELEKT_INVALID_ARGUMENT:
      return "invalid_argument";
    case SELEKT_NOT_FOUND:
      return "not_found";
    case SELEKT_IO:
      return "io";
    case SELEKT_SHAPE_MISMATCH:
      return "shape_mismatch";
    case SELEKT_NON_FINITE:
      return "non_finite";
    case SELEKT_DIVERGED_RUN:
      return "diverged_run";
    case SELEKT_RUNTIME:
      return "runtime";
    case SELEKT_INTERNAL:
      return "internal";
  }
  return "unknown";
}

const char* selekt_last_error(void) { return g_error.c_str(); }
const char* selekt_last_error_field(void) { return g_field.c_str(); }

selekt_status selekt_set_log_level(const char* level) {
  return guard([&] {
    need(level, "level");
    const auto l = spdlog::level::from_str(level);
    if (l == spdlog::level::off && std::string(level) != "off")
      throw selekt::Error(selekt::ErrorCode::kInvalidArgument,
                          std::string("unknown log level '") + level + "'", "log-level");
    spdlog::set_level(l);
  });
}

void selekt_string_free(char* s) { std::free(s); }

// ---------------------------------------------------------------------------
// Models

selekt_status selekt_model_create(const char* arch_json, uint64_t seed, selekt_model** out) {
  return guard([&] {
    need(out, "out");
    *out = new selekt_model{selekt::Model::build(parse_arch(arch_json), seed)};
  });
}

selekt_status selekt_model_from_params(const char* arch_json, const float* params, size_t count,
                                       selekt_model** out) {
  return guard([&] {
    need(out, "out");
    need(params, "params");
    *out = new selekt_model{selekt::Model(parse_arch(arch_json), {params, params + count})};
  });
}

selekt_status selekt_model_load(const char* path, selekt_model** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new selekt_model{selekt::load_checkpoint(path)};
  });
}

selekt_status selekt_model_save(const selekt_model* model, const char* path) {
  return guard([&] {
    need(model, "model");
    need(path, "path");
    selekt::save_checkpoint(path, model->model);
  });
}

void selekt_model_free(selekt_model* model) { delete model; }

selekt_status selekt_model_input_size(const selekt_model* model, size_t* out) {
  return guard([&] {
    need(model, "model");
    need(out, "out");
    *out = model->model.input_size();
  });
}

selekt_status selekt_model_classes(const selekt_model* model, size_t* out) {
  return guard([&] {
    need(model, "model");
    need(out, "out");
    *out = static_cast<size_t>(model->model.arch().classes);
  });
}

selekt_status selekt_model_param_count(const selekt_model* model, size_t* out) {
  return guard([&] {
    need(model, "model");
    need(out, "out");
    *out = model->model.parameters().size();
  });
}

selekt_status selekt_model_params(const selekt_model* model, float* out, size_t count) {
  return guard([&] {
    need(model, "model");
    need(out, "out");
    const auto p = model->model.parameters();
    selekt::require(count == p.size(), selekt::ErrorCode::kShapeMismatch,
                    "count does not match the parameter count", "count");
    std::copy(p.begin(), p.end(), out);
  });
}

selekt_status selekt_model_forward(const selekt_model* model, const float* pixels, size_t n,
                                   float* logits) {
  return guard([&] {
    need(model, "model");
    need(pixels, "pixels");
    need(logits, "logits");
    const auto& m = model->model;
    const auto fwd = m.forward({pixels, n * m.input_size()}, n);
    for (size_t i = 0; i < n; ++i)
      for (int c = 0; c < m.arch().classes; ++c)
        logits[i * m.arch().classes + c] = fwd.logits(static_cast<Eigen::Index>(i), c);
  });
}

selekt_status selekt_model_layer_count(const selekt_model* model, size_t* out) {
  return guard([&] {
    need(model, "model");
    need(out, "out");
    *out = model->model.arch().relu_layers();
  });
}

selekt_status selekt_model_layer_units(const selekt_model* model, size_t layer, size_t* out) {
  return guard([&] {
    need(model, "model");
    need(out, "out");
    const auto& a = model->model.arch();
    selekt::require(layer < a.relu_layers(), selekt::ErrorCode::kInvalidArgument,
                    "layer index out of range", "layer");
    *out = static_cast<size_t>(a.widths[layer]);
  });
}

selekt_status selekt_model_activations(const selekt_model* model, const float* pixels, size_t n,
                                       size_t layer, float* out) {
  return guard([&] {
    need(model, "model");
    need(pixels, "pixels");
    need(out, "out");
    const auto& m = model->model;
    selekt::require(layer < m.arch().relu_layers(), selekt::ErrorCode::kInvalidArgument,
                    "layer index out of range", "layer");
    const auto fwd = m.forward({pixels, n * m.input_size()}, n);
    const auto& v = fwd.acts.values[layer];
    for (Eigen::Index i = 0; i < v.rows(); ++i)
      for (Eigen::Index u = 0; u < v.cols(); ++u) out[i * v.cols() + u] = v(i, u);
  });
}

selekt_status selekt_model_jacobian(const selekt_model* model, const float* sample, double* out) {
  return guard([&] {
    need(model, "model");
    need(sample, "sample");
    need(out, "out");
    const auto& m = model->model;
    const auto jac = selekt::input_output_jacobian<float>(m, {sample, m.input_size()});
    for (Eigen::Index i = 0; i < jac.rows(); ++i)
      for (Eigen::Index p = 0; p < jac.cols(); ++p) out[i * jac.cols() + p] = jac(i, p);
  });
}

selekt_status selekt_fgsm(const selekt_model* model, const float* pixels, const int* labels,
                          size_t n, double epsilon, float* out) {
  return guard([&] {
    need(model, "model");
    need(labels, "labels");
    need(out, "out");
    const auto adv = selekt::fgsm(model->model, make_batch(model->model, pixels, labels, n), epsilon);
    std::copy(adv.pixels.begin(), adv.pixels.end(), out);
  });
}

selekt_status selekt_pgd(const selekt_model* model, const float* pixels, const int* labels,
                         size_t n, double epsilon, double step_size, int steps, float* out) {
  return guard([&] {
    need(model, "model");
    need(labels, "labels");
    need(out, "out");
    const selekt::AttackSpec spec{selekt::AttackMethod::kPgd, epsilon, step_size, steps};
    const auto adv = selekt::pgd(model->model, make_batch(model->model, pixels, labels, n), spec);
    std::copy(adv.pixels.begin(), adv.pixels.end(), out);
  });
}

// ---------------------------------------------------------------------------
// Numerics

selekt_status selekt_selectivity_index(const double* means, size_t units, size_t classes,
                                       double* out) {
  return guard([&] {
    need(means, "means");
    need(out, "out");
    Eigen::MatrixXd m(units, classes);
    for (size_t u = 0; u < units; ++u)
      for (size_t c = 0; c < classes; ++c) m(u, c) = means[u * classes + c];
    const auto si = selekt::selectivity_index(m, std::vector<bool>(classes, true), {});
    std::copy(si.begin(), si.end(), out);
  });
}

selekt_status selekt_dims_to_variance(const double* matrix, size_t rows, size_t cols,
                                      double threshold, int center, int* out) {
  return guard([&] {
    need(matrix, "matrix");
    need(out, "out");
    Eigen::MatrixXd m(rows, cols);
    for (size_t r = 0; r < rows; ++r)
      for (size_t c = 0; c < cols; ++c) m(r, c) = matrix[r * cols + c];
    selekt::PcaOptions opts;
    opts.center = center != 0;
    *out = selekt::dims_to_variance(m, threshold, opts);
  });
}

selekt_status selekt_bootstrap_ci(const double* values, size_t n, double level, int resamples,
                                  uint64_t seed, double* out) {
  return guard([&] {
    need(values, "values");
    need(out, "out");
    const auto ci = selekt::bootstrap_ci({values, n}, level, resamples, seed);
    out[0] = ci.mean;
    out[1] = ci.lower;
    out[2] = ci.upper;
  });
}

// ---------------------------------------------------------------------------
// Datasets

selekt_status selekt_dataset_load(const char* descriptor_json, selekt_dataset** out) {
  return guard([&] {
    need(descriptor_json, "descriptor_json");
    need(out, "out");
    const auto desc = nlohmann::json::parse(descriptor_json).get<selekt::DatasetDescriptor>();
    *out = new selekt_dataset{selekt::load_dataset(desc)};
  });
}

void selekt_dataset_free(selekt_dataset* dataset) { delete dataset; }

namespace {
const selekt::ImageBatch& pick(const selekt_dataset* d, int split) {
  need(d, "dataset");
  if (split != 0 && split != 1)
    throw selekt::Error(selekt::ErrorCode::kInvalidArgument, "split must be 0 or 1", "split");
  return split == 0 ? d->data.train_pool : d->data.test;
}
}  // namespace

selekt_status selekt_dataset_size(const selekt_dataset* dataset, int split, size_t* out) {
  return guard([&] {
    need(out, "out");
    *out = pick(dataset, split).size();
  });
}

selekt_status selekt_dataset_copy(const selekt_dataset* dataset, int split, float* pixels,
                                  int* labels) {
  return guard([&] {
    const auto& b = pick(dataset, split);
    if (pixels != nullptr) std::copy(b.pixels.begin(), b.pixels.end(), pixels);
    if (labels != nullptr) std::copy(b.labels.begin(), b.labels.end(), labels);
  });
}

selekt_status selekt_dataset_materialize(const selekt_dataset* dataset, const char* dir) {
  return guard([&] {
    need(dataset, "dataset");
    need(dir, "dir");
    selekt::materialize(dataset->data, dir);
  });
}

// ---------------------------------------------------------------------------
// Commands

selekt_status selekt_cmd_train(const char* config_path, const char* alpha, const char* seed,
                               const char* runs_root, char** record_json) {
  return guard([&] {
    need(config_path, "config");
    selekt::TrainCommand cmd{config_path, opt(alpha), opt(seed), std::nullopt};
    if (runs_root != nullptr) cmd.runs_root = runs_root;
    const auto rec = selekt::cmd_train(cmd);
    if (record_json != nullptr) *record_json = dup(selekt::run_record_to_json(rec).dump());
  });
}

selekt_status selekt_cmd_sweep(const char* config_path, const char* alphas, const char* seeds,
                               const char* runs_root, char** records_json) {
  return guard([&] {
    need(config_path, "config");
    need(alphas, "alphas");
    need(seeds, "seeds");
    selekt::SweepCommand cmd{config_path, alphas, seeds, std::nullopt};
    if (runs_root != nullptr) cmd.runs_root = runs_root;
    const auto recs = selekt::cmd_sweep(cmd);
    if (records_json != nullptr) {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& r : recs) arr.push_back(selekt::run_record_to_json(r));
      *records_json = dup(arr.dump());
    }
  });
}

selekt_status selekt_cmd_evaluate(const char* runs_root, const char* run_id,
                                  const char* request_json, char** record_json) {
  return guard([&] {
    need(run_id, "run");
    need(request_json, "request_json");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(request_json);
    } catch (const nlohmann::json::parse_error& e) {
      throw selekt::Error(selekt::ErrorCode::kInvalidArgument, e.what(), "request");
    }
    const auto req = selekt::parse_eval_request(j);
    const auto root = runs_root != nullptr ? std::filesystem::path(runs_root)
                                           : selekt::default_runs_root();
    const auto rec = selekt::cmd_evaluate(selekt::resolve_run(root, run_id), req);
    if (record_json != nullptr) *record_json = dup(selekt::run_record_to_json(rec).dump());
  });
}

selekt_status selekt_cmd_report(const char* runs_dir, const char* out_dir, char** summary_json) {
  return guard([&] {
    need(runs_dir, "runs");
    need(out_dir, "out");
    const auto s = selekt::cmd_report(runs_dir, out_dir);
    if (summary_json != nullptr) *summary_json = dup(nlohmann::json(s).dump());
  });
}

selekt_status selekt_cmd_plot(const char* summary_path, const char* fig, const char* kind,
                              const char* out_dir, char** written_path) {
  return guard([&] {
    need(summary_path, "summary");
    need(fig, "fig");
    std::optional<std::filesystem::path> out;
    if (out_dir != nullptr) out = out_dir;
    const auto path = selekt::cmd_plot(summary_path, fig, kind ? kind : "", out);
    if (written_path != nullptr) *written_path = dup(path.string());
  });
}

selekt_status selekt_cmd_materialize(const char* config_path, const char* out_dir) {
  return guard([&] {
    need(config_path, "config");
    need(out_dir, "materialize");
    selekt::cmd_materialize(config_path, out_dir);
  });
}

selekt_status selekt_cmd_validate(const char* runs_dir, char** problems_json) {
  return guard([&] {
    need(runs_dir, "runs");
    const auto problems = selekt::cmd_validate(runs_dir);
    if (problems_json != nullptr) *problems_json = dup(nlohmann::json(problems).dump());
  });
}

}  // extern "C"
