#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "backbone.hpp"

namespace selekt {

enum class AttackMethod { kFgsm, kPgd };

struct AttackSpec {
  AttackMethod method = AttackMethod::kFgsm;
  double epsilon = 0.0;      // L-inf budget on the [0,1] pixel scale
  double step_size = 1e-4;   // pgd only
  int steps = 25;            // pgd only

  void validate() const;
  std::string label() const;
};

void to_json(nlohmann::json& j, const AttackSpec& s);
void from_json(const nlohmann::json& j, AttackSpec& s);

// Untargeted white-box attacks on the plain cross-entropy loss. Outputs stay
// inside the epsilon ball around the clean input and inside [0,1]; labels are
// copied unchanged.
ImageBatch fgsm(const Model& model, const ImageBatch& batch, double epsilon);
// Iterated sign-gradient steps from the clean input (no random start), each
// followed by projection onto the epsilon ball and clipping to [0,1].
ImageBatch pgd(const Model& model, const ImageBatch& batch, const AttackSpec& spec);
ImageBatch attack(const Model& model, const ImageBatch& batch, const AttackSpec& spec);

struct AttackSweepResult {
  struct Row {
    AttackSpec spec;
    double accuracy = 0.0;
  };
  double clean_accuracy = 0.0;
  std::vector<Row> rows;
};

// Accuracy on perturbed copies of `data`, one row per spec, attacked in chunks.
AttackSweepResult attack_sweep(const Model& model, const ImageBatch& data,
                               std::span<const AttackSpec> specs, std::size_t chunk = 256);

void to_json(nlohmann::json& j, const AttackSweepResult& r);
void from_json(const nlohmann::json& j, AttackSweepResult& r);

}  // namespace selekt
