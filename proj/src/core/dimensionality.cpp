#include "dimensionality.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "error.hpp"

namespace selekt {

const char* to_string(MatrixKind k) {
  switch (k) {
    case MatrixKind::kClean:
      return "clean";
    case MatrixKind::kCorruptionDiff:
      return "corruption_diff";
    case MatrixKind::kAdversarialDiff:
      return "adversarial_diff";
  }
  return "clean";
}

MatrixKind matrix_kind_from_string(const std::string& s) {
  if (s == "clean") return MatrixKind::kClean;
  if (s == "corruption_diff") return MatrixKind::kCorruptionDiff;
  if (s == "adversarial_diff") return MatrixKind::kAdversarialDiff;
  throw Error(ErrorCode::kInvalidArgument, "unknown matrix kind '" + s + "'", "kind");
}

int dims_to_variance(const Eigen::MatrixXd& m, double threshold, const PcaOptions& options) {
  require(m.rows() >= 2, ErrorCode::kInvalidArgument, "PCA needs at least 2 samples");
  require(threshold > 0.0 && threshold < 1.0, ErrorCode::kInvalidArgument,
          "threshold must be in (0,1)", "threshold");
  if (m.cols() == 0) return 0;
  Eigen::MatrixXd x = m;
  if (options.center) x.rowwise() -= x.colwise().mean();

  const double max_abs = m.cwiseAbs().maxCoeff();
  const double floor = options.zero_tolerance * max_abs;
  if (x.squaredNorm() <= floor * floor * static_cast<double>(m.rows() * m.cols())) return 0;

  // Squared singular values of x are the eigenvalues of the Gram matrix of its
  // smaller side.
  const Eigen::MatrixXd gram = x.rows() < x.cols() ? Eigen::MatrixXd(x * x.transpose())
                                                   : Eigen::MatrixXd(x.transpose() * x);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  require(eig.info() == Eigen::Success, ErrorCode::kRuntime, "eigendecomposition failed");
  std::vector<double> var(eig.eigenvalues().data(),
                          eig.eigenvalues().data() + eig.eigenvalues().size());
  for (auto& v : var) v = std::max(v, 0.0);
  std::sort(var.begin(), var.end(), std::greater<>());
  double total = 0.0;
  for (double v : var) total += v;
  if (total <= 0.0) return 0;
  double cum = 0.0;
  for (std::size_t k = 0; k < var.size(); ++k) {
    cum += var[k];
    if (cum / total >= threshold) return static_cast<int>(k + 1);
  }
  return static_cast<int>(var.size());
}

namespace {

DimReport::Layer profile_layer(const std::string& id, const Eigen::MatrixXd& m, double threshold,
                               const PcaOptions& options) {
  DimReport::Layer l;
  l.layer_id = id;
  l.units = static_cast<int>(m.cols());
  try {
    l.dims = dims_to_variance(m, threshold, options);
  } catch (const Error& e) {
    throw Error(e.code(), "layer " + id + ": " + e.what(), e.field());
  }
  l.fraction = l.units > 0 ? static_cast<double>(l.dims) / l.units : 0.0;
  return l;
}

}  // namespace

DimReport clean_dim_profile(const LayerActivations<float>& acts, double threshold,
                            const PcaOptions& options) {
  require(acts.layers() > 0, ErrorCode::kInvalidArgument, "no layers to profile");
  DimReport r;
  r.kind = MatrixKind::kClean;
  r.threshold = threshold;
  r.samples_used = static_cast<std::size_t>(acts.values.front().rows());
  for (std::size_t l = 0; l < acts.layers(); ++l)
    r.layers.push_back(
        profile_layer(acts.layer_ids[l], acts.values[l].cast<double>(), threshold, options));
  return r;
}

DimReport difference_dim_profile(const LayerActivations<float>& clean,
                                 const LayerActivations<float>& perturbed, MatrixKind kind,
                                 std::string perturbation, double threshold,
                                 const PcaOptions& options) {
  require(clean.layers() > 0, ErrorCode::kInvalidArgument, "no layers to profile");
  require(clean.layers() == perturbed.layers(), ErrorCode::kShapeMismatch,
          "clean and perturbed activations have different layer counts");
  DimReport r;
  r.kind = kind;
  r.perturbation = std::move(perturbation);
  r.threshold = threshold;
  r.samples_used = static_cast<std::size_t>(clean.values.front().rows());
  for (std::size_t l = 0; l < clean.layers(); ++l) {
    const auto& a = clean.values[l];
    const auto& b = perturbed.values[l];
    require(clean.layer_ids[l] == perturbed.layer_ids[l], ErrorCode::kShapeMismatch,
            "layer order differs between clean and perturbed activations");
    require(a.rows() == b.rows(), ErrorCode::kShapeMismatch,
            "layer " + clean.layer_ids[l] + ": clean has " + std::to_string(a.rows()) +
                " samples, perturbed has " + std::to_string(b.rows()));
    require(a.cols() == b.cols(), ErrorCode::kShapeMismatch,
            "layer " + clean.layer_ids[l] + ": unit counts differ");
    const Eigen::MatrixXd diff = a.cast<double>() - b.cast<double>();
    r.layers.push_back(profile_layer(clean.layer_ids[l], diff, threshold, options));
  }
  return r;
}

void to_json(nlohmann::json& j, const DimReport& r) {
  j = nlohmann::json::object();
  j["kind"] = to_string(r.kind);
  j["perturbation"] = r.perturbation.empty() ? nlohmann::json(nullptr) : nlohmann::json(r.perturbation);
  j["threshold"] = r.threshold;
  j["samples_used"] = r.samples_used;
  j["layers"] = nlohmann::json::array();
  for (const auto& l : r.layers)
    j["layers"].push_back({{"layer_id", l.layer_id},
                           {"dims_90", l.dims},
                           {"units", l.units},
                           {"fraction", l.fraction}});
}

void from_json(const nlohmann::json& j, DimReport& r) {
  r.kind = matrix_kind_from_string(j.at("kind").get<std::string>());
  r.perturbation = j.at("perturbation").is_null() ? "" : j.at("perturbation").get<std::string>();
  r.threshold = j.at("threshold").get<double>();
  r.samples_used = j.at("samples_used").get<std::size_t>();
  r.layers.clear();
  for (const auto& l : j.at("layers"))
    r.layers.push_back({l.at("layer_id").get<std::string>(), l.at("dims_90").get<int>(),
                        l.at("units").get<int>(), l.at("fraction").get<double>()});
}

}  // namespace selekt
