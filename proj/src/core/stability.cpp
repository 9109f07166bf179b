#include "stability.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "error.hpp"

namespace selekt {

template <class T>
Mat<T> input_output_jacobian(const Network<T>& model, std::span<const T> sample) {
  const std::size_t d = model.input_size();
  require(sample.size() == d, ErrorCode::kShapeMismatch,
          "sample has " + std::to_string(sample.size()) + " values, model expects " +
              std::to_string(d));
  const int c = model.arch().classes;
  // One copy of the sample per class; seeding row i with e_i gives row i of J.
  Buffer<T> tiled(d * c);
  for (int i = 0; i < c; ++i) std::copy(sample.begin(), sample.end(), tiled.begin() + i * d);
  const auto out = model.forward(tiled, c);
  const Mat<T> seed = Mat<T>::Identity(c, c);
  const auto g = model.backward(out, seed, {}, false, true);
  Mat<T> jac(c, static_cast<Eigen::Index>(d));
  for (int i = 0; i < c; ++i)
    for (std::size_t p = 0; p < d; ++p) jac(i, static_cast<Eigen::Index>(p)) = g.inputs[i * d + p];
  require(jac.allFinite(), ErrorCode::kNonFinite, "Jacobian has non-finite entries");
  return jac;
}

template Mat<float> input_output_jacobian(const Network<float>&, std::span<const float>);
template Mat<double> input_output_jacobian(const Network<double>&, std::span<const double>);

const char* to_string(JacobianNorm n) {
  return n == JacobianNorm::kFrobenius ? "frobenius" : "spectral";
}

JacobianNorm jacobian_norm_from_string(const std::string& s) {
  if (s == "frobenius") return JacobianNorm::kFrobenius;
  if (s == "spectral") return JacobianNorm::kSpectral;
  throw Error(ErrorCode::kInvalidArgument, "unknown Jacobian norm '" + s + "'", "norm");
}

double matrix_norm(const Eigen::MatrixXd& m, JacobianNorm norm) {
  if (norm == JacobianNorm::kFrobenius) return m.norm();
  if (m.size() == 0) return 0.0;
  const Eigen::MatrixXd gram = m.rows() <= m.cols() ? Eigen::MatrixXd(m * m.transpose())
                                                    : Eigen::MatrixXd(m.transpose() * m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(eig.eigenvalues().maxCoeff(), 0.0));
}

JacobianReport jacobian_magnitude(const Model& model, const ImageBatch& batch,
                                  const JacobianOptions& options) {
  require(batch.size() > 0, ErrorCode::kInvalidArgument, "empty batch");
  require(options.max_samples > 0, ErrorCode::kInvalidArgument, "max_samples must be > 0",
          "max_samples");
  require(batch.shape == model.arch().input_shape(), ErrorCode::kShapeMismatch,
          "batch image shape does not match the architecture");
  JacobianReport r;
  r.norm = options.norm;
  r.samples = std::min(batch.size(), options.max_samples);
  r.values.reserve(r.samples);
  for (std::size_t i = 0; i < r.samples; ++i) {
    const auto jac = input_output_jacobian<float>(model, batch.sample(i));
    r.values.push_back(matrix_norm(jac.cast<double>(), options.norm));
  }
  r.ci = bootstrap_ci(r.values, 0.95, 10000, options.bootstrap_seed);
  r.mean = r.ci.mean;
  return r;
}

void to_json(nlohmann::json& j, const JacobianReport& r) {
  j = {{"norm", to_string(r.norm)},
       {"values", r.values},
       {"mean", r.mean},
       {"ci", r.ci},
       {"samples", r.samples}};
}

void from_json(const nlohmann::json& j, JacobianReport& r) {
  r.norm = jacobian_norm_from_string(j.at("norm").get<std::string>());
  r.values = j.at("values").get<std::vector<double>>();
  r.mean = j.at("mean").get<double>();
  r.ci = j.at("ci").get<BootstrapCI>();
  r.samples = j.at("samples").get<std::size_t>();
}

}  // namespace selekt
