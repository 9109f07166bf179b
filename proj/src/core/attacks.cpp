#include "attacks.hpp"

#include <cmath>
#include <cstdio>

#include "error.hpp"

namespace selekt {

void AttackSpec::validate() const {
  require(std::isfinite(epsilon) && epsilon >= 0.0, ErrorCode::kInvalidArgument,
          "epsilon must be >= 0", "epsilon");
  if (method == AttackMethod::kPgd) {
    require(steps >= 0, ErrorCode::kInvalidArgument, "steps must be >= 0", "steps");
    require(std::isfinite(step_size) && step_size > 0.0, ErrorCode::kInvalidArgument,
            "step_size must be > 0", "step_size");
  }
}

std::string AttackSpec::label() const {
  char buf[128];
  if (method == AttackMethod::kFgsm)
    std::snprintf(buf, sizeof(buf), "fgsm(eps=%g)", epsilon);
  else
    std::snprintf(buf, sizeof(buf), "pgd(eps=%g, step=%g, steps=%d)", epsilon, step_size, steps);
  return buf;
}

void to_json(nlohmann::json& j, const AttackSpec& s) {
  j = {{"method", s.method == AttackMethod::kFgsm ? "fgsm" : "pgd"}, {"epsilon", s.epsilon}};
  if (s.method == AttackMethod::kPgd) {
    j["step_size"] = s.step_size;
    j["steps"] = s.steps;
  }
}

void from_json(const nlohmann::json& j, AttackSpec& s) {
  const auto m = j.at("method").get<std::string>();
  require(m == "fgsm" || m == "pgd", ErrorCode::kInvalidArgument,
          "unknown attack method '" + m + "'", "method");
  s.method = m == "fgsm" ? AttackMethod::kFgsm : AttackMethod::kPgd;
  s.epsilon = j.at("epsilon").get<double>();
  s.step_size = j.value("step_size", 1e-4);
  s.steps = j.value("steps", 25);
}

namespace {

Buffer<float> input_gradient(const Model& model, const ImageBatch& batch) {
  auto r = loss_and_grads(model, batch, LossSpec::plain(), false, true);
  for (float g : r.grads.inputs)
    require(std::isfinite(g), ErrorCode::kNonFinite, "input gradient is not finite");
  return std::move(r.grads.inputs);
}

float sign(float g) { return g > 0.0f ? 1.0f : (g < 0.0f ? -1.0f : 0.0f); }

// Projects x onto [x0 - eps, x0 + eps] and then [0,1]. The float result is
// nudged toward x0 when rounding would leave it just outside the ball.
float project(double x, float x0, double eps) {
  double lo = static_cast<double>(x0) - eps;
  double hi = static_cast<double>(x0) + eps;
  double v = std::min(std::max(x, lo), hi);
  v = std::min(std::max(v, 0.0), 1.0);
  float f = static_cast<float>(v);
  while (std::abs(static_cast<double>(f) - static_cast<double>(x0)) > eps)
    f = std::nextafter(f, x0);
  return f;
}

void check_model_batch(const Model& model, const ImageBatch& batch) {
  require(batch.size() > 0, ErrorCode::kInvalidArgument, "empty batch");
  require(batch.shape == model.arch().input_shape(), ErrorCode::kShapeMismatch,
          "batch image shape does not match the architecture");
}

}  // namespace

ImageBatch fgsm(const Model& model, const ImageBatch& batch, double epsilon) {
  require(std::isfinite(epsilon) && epsilon >= 0.0, ErrorCode::kInvalidArgument,
          "epsilon must be >= 0", "epsilon");
  check_model_batch(model, batch);
  ImageBatch out = batch;
  if (epsilon == 0.0) return out;
  const auto g = input_gradient(model, batch);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const float x0 = batch.pixels[i];
    out.pixels[i] = project(static_cast<double>(x0) + epsilon * sign(g[i]), x0, epsilon);
  }
  return out;
}

ImageBatch pgd(const Model& model, const ImageBatch& batch, const AttackSpec& spec) {
  require(spec.method == AttackMethod::kPgd, ErrorCode::kInvalidArgument,
          "pgd needs a pgd attack spec", "method");
  spec.validate();
  check_model_batch(model, batch);
  ImageBatch x = batch;
  for (int step = 0; step < spec.steps; ++step) {
    const auto g = input_gradient(model, x);
    for (std::size_t i = 0; i < x.pixels.size(); ++i)
      x.pixels[i] = project(static_cast<double>(x.pixels[i]) + spec.step_size * sign(g[i]),
                            batch.pixels[i], spec.epsilon);
  }
  return x;
}

ImageBatch attack(const Model& model, const ImageBatch& batch, const AttackSpec& spec) {
  spec.validate();
  return spec.method == AttackMethod::kFgsm ? fgsm(model, batch, spec.epsilon)
                                            : pgd(model, batch, spec);
}

AttackSweepResult attack_sweep(const Model& model, const ImageBatch& data,
                               std::span<const AttackSpec> specs, std::size_t chunk) {
  require(!specs.empty(), ErrorCode::kInvalidArgument, "attack sweep needs at least one spec");
  AttackSweepResult r;
  r.clean_accuracy = accuracy(model, data);
  for (const auto& spec : specs) {
    std::size_t correct = 0;
    try {
      for (std::size_t begin = 0; begin < data.size(); begin += chunk) {
        const auto part = data.slice(begin, std::min(data.size(), begin + chunk));
        const auto adv = attack(model, part, spec);
        const auto pred = predict(model, adv);
        for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == part.labels[i];
      }
    } catch (const Error& e) {
      throw Error(e.code(), spec.label() + ": " + e.what(), e.field());
    }
    r.rows.push_back({spec, static_cast<double>(correct) / static_cast<double>(data.size())});
  }
  return r;
}

void to_json(nlohmann::json& j, const AttackSweepResult& r) {
  j = nlohmann::json::object();
  j["clean_accuracy"] = r.clean_accuracy;
  j["rows"] = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json e = row.spec;
    e["accuracy"] = row.accuracy;
    j["rows"].push_back(std::move(e));
  }
}

void from_json(const nlohmann::json& j, AttackSweepResult& r) {
  r.clean_accuracy = j.at("clean_accuracy").get<double>();
  r.rows.clear();
  for (const auto& e : j.at("rows")) r.rows.push_back({e.get<AttackSpec>(), e.at("accuracy").get<double>()});
}

}  // namespace selekt
