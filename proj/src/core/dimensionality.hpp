#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "tensor.hpp"

namespace selekt {

struct PcaOptions {
  bool center = true;
  // A (centered) matrix whose sum of squares is at most
  // (zero_tolerance * max|entry|)^2 * rows * cols is treated as variance-free.
  // Absorbs float rounding such as (a + p) - a != p.
  double zero_tolerance = 1e-6;
};

// Smallest k such that the top-k principal components explain at least
// `threshold` of the total variance; 0 for a variance-free matrix.
int dims_to_variance(const Eigen::MatrixXd& samples_by_units, double threshold,
                     const PcaOptions& options = {});

enum class MatrixKind { kClean, kCorruptionDiff, kAdversarialDiff };
const char* to_string(MatrixKind k);
MatrixKind matrix_kind_from_string(const std::string& s);

struct DimReport {
  struct Layer {
    std::string layer_id;
    int dims = 0;
    int units = 0;
    double fraction = 0.0;  // dims / units
  };
  MatrixKind kind = MatrixKind::kClean;
  std::string perturbation;  // empty for clean profiles
  double threshold = 0.9;
  std::size_t samples_used = 0;
  std::vector<Layer> layers;
};

DimReport clean_dim_profile(const LayerActivations<float>& acts, double threshold = 0.9,
                            const PcaOptions& options = {});

// Rows of `clean` and `perturbed` must be the same underlying samples.
DimReport difference_dim_profile(const LayerActivations<float>& clean,
                                 const LayerActivations<float>& perturbed, MatrixKind kind,
                                 std::string perturbation, double threshold = 0.9,
                                 const PcaOptions& options = {});

void to_json(nlohmann::json& j, const DimReport& r);
void from_json(const nlohmann::json& j, DimReport& r);

}  // namespace selekt
