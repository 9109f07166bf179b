#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "backbone.hpp"
#include "stats.hpp"

namespace selekt {

// Jacobian of the logits with respect to the input pixels at one sample:
// classes x pixels, row i = d logit_i / d x. Throws kNonFinite on NaN/inf.
template <class T>
Mat<T> input_output_jacobian(const Network<T>& model, std::span<const T> sample);

enum class JacobianNorm { kFrobenius, kSpectral };
const char* to_string(JacobianNorm n);
JacobianNorm jacobian_norm_from_string(const std::string& s);

double matrix_norm(const Eigen::MatrixXd& m, JacobianNorm norm);

struct JacobianOptions {
  JacobianNorm norm = JacobianNorm::kFrobenius;
  std::size_t max_samples = 500;  // leading samples of the batch
  std::uint64_t bootstrap_seed = 0;
};

struct JacobianReport {
  JacobianNorm norm = JacobianNorm::kFrobenius;
  std::vector<double> values;
  double mean = 0.0;
  BootstrapCI ci;
  std::size_t samples = 0;
};

JacobianReport jacobian_magnitude(const Model& model, const ImageBatch& batch,
                                  const JacobianOptions& options = {});

void to_json(nlohmann::json& j, const JacobianReport& r);
void from_json(const nlohmann::json& j, JacobianReport& r);

}  // namespace selekt
