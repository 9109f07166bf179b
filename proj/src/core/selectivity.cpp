#include "selectivity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

#include "error.hpp"

namespace selekt {

void RegularizerConfig::validate() const {
  require(std::isfinite(alpha), ErrorCode::kInvalidArgument, "alpha must be finite",
          "alpha");
  require(min_classes_for_si >= 2, ErrorCode::kInvalidArgument,
          "min_classes_for_si must be >= 2", "min_classes_for_si");
  require(dead_unit_epsilon > 0.0, ErrorCode::kInvalidArgument,
          "dead_unit_epsilon must be > 0", "dead_unit_epsilon");
}

int UnitClassStats::present_count() const {
  int n = 0;
  for (bool p : class_present) n += p ? 1 : 0;
  return n;
}

template <class T>
void ClassMeanAccumulator::add(const LayerActivations<T>& acts, std::span<const int> labels) {
  if (sums_.empty()) {
    layer_ids_ = acts.layer_ids;
    counts_.assign(classes_, 0);
    for (const auto& a : acts.values) sums_.push_back(Eigen::MatrixXd::Zero(a.cols(), classes_));
  }
  require(acts.layers() == sums_.size(), ErrorCode::kShapeMismatch,
          "layer count changed between batches");
  for (int label : labels) {
    require(label >= 0 && label < classes_, ErrorCode::kInvalidArgument, "label out of range");
    ++counts_[label];
  }
  for (std::size_t l = 0; l < acts.layers(); ++l) {
    const auto& a = acts.values[l];
    require(static_cast<std::size_t>(a.rows()) == labels.size(), ErrorCode::kShapeMismatch,
            "activation rows do not match label count");
    require(a.cols() == sums_[l].rows(), ErrorCode::kShapeMismatch,
            "unit count changed between batches");
    for (Eigen::Index n = 0; n < a.rows(); ++n)
      sums_[l].col(labels[n]) += a.row(n).transpose().template cast<double>();
  }
}

UnitClassStats ClassMeanAccumulator::finish() const {
  std::size_t total = 0;
  for (auto c : counts_) total += c;
  require(total > 0, ErrorCode::kInvalidArgument, "no samples accumulated");
  UnitClassStats stats;
  stats.layer_ids = layer_ids_;
  stats.class_counts = counts_;
  stats.class_present.resize(classes_);
  for (int c = 0; c < classes_; ++c) stats.class_present[c] = counts_[c] > 0;
  for (const auto& s : sums_) {
    Eigen::MatrixXd m(s.rows(), s.cols());
    for (int c = 0; c < classes_; ++c) {
      if (counts_[c] > 0)
        m.col(c) = s.col(c) / static_cast<double>(counts_[c]);
      else
        m.col(c).setConstant(std::numeric_limits<double>::quiet_NaN());
    }
    stats.means.push_back(std::move(m));
  }
  return stats;
}

template <class T>
UnitClassStats class_conditional_means(const LayerActivations<T>& acts,
                                       std::span<const int> labels, int classes) {
  require(classes >= 2, ErrorCode::kInvalidArgument, "class count must be >= 2");
  require(!labels.empty() && acts.layers() > 0, ErrorCode::kInvalidArgument,
          "class_conditional_means needs a non-empty input");
  ClassMeanAccumulator acc(classes);
  acc.add(acts, labels);
  return acc.finish();
}

std::vector<double> selectivity_index(const Eigen::MatrixXd& means,
                                      const std::vector<bool>& class_present,
                                      const RegularizerConfig& cfg) {
  require(static_cast<std::size_t>(means.cols()) == class_present.size(),
          ErrorCode::kShapeMismatch, "means columns do not match class count");
  std::vector<int> present;
  for (std::size_t c = 0; c < class_present.size(); ++c)
    if (class_present[c]) present.push_back(static_cast<int>(c));
  require(static_cast<int>(present.size()) >= cfg.min_classes_for_si,
          ErrorCode::kInvalidArgument,
          "selectivity needs at least " + std::to_string(cfg.min_classes_for_si) +
              " classes present, got " + std::to_string(present.size()));

  std::vector<double> si(means.rows(), 0.0);
  const double k = static_cast<double>(present.size());
  for (Eigen::Index u = 0; u < means.rows(); ++u) {
    int best = present.front();
    for (int c : present)
      if (means(u, c) > means(u, best)) best = c;
    // Averaging offsets from the smallest rest mean keeps uniform and one-hot
    // means exact.
    const double mu_max = means(u, best);
    double floor = mu_max;
    for (int c : present)
      if (c != best) floor = std::min(floor, means(u, c));
    double offset = 0.0;
    for (int c : present)
      if (c != best) offset += means(u, c) - floor;
    const double mu_rest = floor + offset / (k - 1.0);
    const double denom = mu_max + mu_rest;
    if (denom < cfg.dead_unit_epsilon) continue;
    si[u] = (mu_max - mu_rest) / denom;
  }
  return si;
}

std::vector<std::vector<double>> selectivity_index(const UnitClassStats& stats,
                                                   const RegularizerConfig& cfg) {
  std::vector<std::vector<double>> out;
  out.reserve(stats.means.size());
  for (const auto& m : stats.means) out.push_back(selectivity_index(m, stats.class_present, cfg));
  return out;
}

namespace {
double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}
}  // namespace

double network_selectivity(const std::vector<std::vector<double>>& per_layer_si) {
  require(!per_layer_si.empty(), ErrorCode::kInvalidArgument, "empty layer list");
  double total = 0.0;
  for (const auto& layer : per_layer_si) {
    require(!layer.empty(), ErrorCode::kInvalidArgument, "layer without units");
    total += mean_of(layer);
  }
  return total / static_cast<double>(per_layer_si.size());
}

SelectivityReport make_selectivity_report(const UnitClassStats& stats,
                                          const RegularizerConfig& cfg, std::string source) {
  const auto si = selectivity_index(stats, cfg);
  SelectivityReport report;
  report.source = std::move(source);
  for (std::size_t l = 0; l < si.size(); ++l) {
    require(!si[l].empty(), ErrorCode::kInvalidArgument, "layer without units");
    report.layers.push_back({stats.layer_ids.at(l), si[l], mean_of(si[l])});
  }
  report.network_si = network_selectivity(si);
  return report;
}

void to_json(nlohmann::json& j, const SelectivityReport& r) {
  j = nlohmann::json::object();
  j["layers"] = nlohmann::json::array();
  for (const auto& l : r.layers)
    j["layers"].push_back({{"layer_id", l.layer_id}, {"unit_si", l.unit_si}, {"mean_si", l.mean_si}});
  j["network_si"] = r.network_si;
  j["source"] = r.source;
}

void from_json(const nlohmann::json& j, SelectivityReport& r) {
  r.layers.clear();
  for (const auto& l : j.at("layers"))
    r.layers.push_back({l.at("layer_id").get<std::string>(),
                        l.at("unit_si").get<std::vector<double>>(),
                        l.at("mean_si").get<double>()});
  r.network_si = j.at("network_si").get<double>();
  r.source = j.at("source").get<std::string>();
}

template <class T>
CrossEntropyResult<T> cross_entropy(const Mat<T>& logits, std::span<const int> labels,
                                    bool with_grad) {
  const Eigen::Index n = logits.rows();
  const Eigen::Index c = logits.cols();
  require(n > 0 && static_cast<std::size_t>(n) == labels.size(), ErrorCode::kShapeMismatch,
          "logit rows do not match label count");
  CrossEntropyResult<T> out;
  if (with_grad) out.dlogits.resize(n, c);
  T total = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[i];
    require(y >= 0 && y < c, ErrorCode::kInvalidArgument, "label out of range");
    const T m = logits.row(i).maxCoeff();
    T z = 0;
    for (Eigen::Index k = 0; k < c; ++k) z += std::exp(logits(i, k) - m);
    const T log_z = std::log(z) + m;
    total += log_z - logits(i, y);
    if (with_grad) {
      for (Eigen::Index k = 0; k < c; ++k)
        out.dlogits(i, k) = std::exp(logits(i, k) - log_z) / static_cast<T>(n);
      out.dlogits(i, y) -= T(1) / static_cast<T>(n);
    }
  }
  out.loss = total / static_cast<T>(n);
  return out;
}

template <class T>
RegularizedLoss<T> regularized_loss(const Mat<T>& logits, std::span<const int> labels,
                                    const LayerActivations<T>& acts,
                                    const RegularizerConfig& cfg, bool with_grads) {
  auto ce = cross_entropy(logits, labels, with_grads);
  RegularizedLoss<T> out;
  out.cross_entropy = ce.loss;
  out.dlogits = std::move(ce.dlogits);
  out.network_si = std::numeric_limits<T>::quiet_NaN();

  const int classes = static_cast<int>(logits.cols());
  std::vector<std::size_t> counts(classes, 0);
  for (int y : labels) ++counts[y];
  std::vector<int> present;
  for (int c = 0; c < classes; ++c)
    if (counts[c] > 0) present.push_back(c);

  if (static_cast<int>(present.size()) < cfg.min_classes_for_si || acts.layers() == 0) {
    out.regularizer_skipped = true;
    out.loss = out.cross_entropy;
    spdlog::debug("selectivity regularizer skipped: {} classes present in minibatch",
                  present.size());
    return out;
  }

  const std::size_t num_layers = acts.layers();
  const Eigen::Index k = static_cast<Eigen::Index>(present.size());
  const T alpha = static_cast<T>(cfg.alpha);
  const bool need_dacts = with_grads && cfg.alpha != 0.0;
  T si_sum = 0;
  for (std::size_t l = 0; l < num_layers; ++l) {
    const Mat<T>& a = acts.values[l];
    const Eigen::Index units = a.cols();
    require(static_cast<std::size_t>(a.rows()) == labels.size(), ErrorCode::kShapeMismatch,
            "activation rows do not match label count");
    require(units > 0, ErrorCode::kInvalidArgument, "layer without units");

    // units x present-classes table of means
    Mat<T> mu = Mat<T>::Zero(units, k);
    std::vector<Eigen::Index> slot(classes, -1);
    for (Eigen::Index j = 0; j < k; ++j) slot[present[j]] = j;
    for (Eigen::Index n = 0; n < a.rows(); ++n) mu.col(slot[labels[n]]) += a.row(n).transpose();
    for (Eigen::Index j = 0; j < k; ++j) mu.col(j) /= static_cast<T>(counts[present[j]]);

    // Gradient of the layer's mean SI with respect to each class mean.
    Mat<T> dmu;
    if (need_dacts) dmu = Mat<T>::Zero(units, k);
    T layer_sum = 0;
    for (Eigen::Index u = 0; u < units; ++u) {
      Eigen::Index best = 0;
      for (Eigen::Index j = 0; j < k; ++j)
        if (mu(u, j) > mu(u, best)) best = j;
      const T mu_max = mu(u, best);
      T floor = mu_max;
      for (Eigen::Index j = 0; j < k; ++j)
        if (j != best) floor = std::min(floor, mu(u, j));
      T offset = 0;
      for (Eigen::Index j = 0; j < k; ++j)
        if (j != best) offset += mu(u, j) - floor;
      const T mu_rest = floor + offset / static_cast<T>(k - 1);
      const T denom = mu_max + mu_rest;
      if (denom < static_cast<T>(cfg.dead_unit_epsilon)) continue;
      layer_sum += (mu_max - mu_rest) / denom;
      if (need_dacts) {
        const T g_max = T(2) * mu_rest / (denom * denom);
        const T g_rest = -T(2) * mu_max / (denom * denom) / static_cast<T>(k - 1);
        for (Eigen::Index j = 0; j < k; ++j) dmu(u, j) = (j == best) ? g_max : g_rest;
      }
    }
    si_sum += layer_sum / static_cast<T>(units);

    if (need_dacts) {
      // d loss / d SI_lu = -alpha / (L * U_l); spread each class-mean gradient
      // evenly over that class's samples.
      const T scale = -alpha / (static_cast<T>(num_layers) * static_cast<T>(units));
      Mat<T> da(a.rows(), units);
      for (Eigen::Index n = 0; n < a.rows(); ++n) {
        const Eigen::Index j = slot[labels[n]];
        da.row(n) = dmu.col(j).transpose() * (scale / static_cast<T>(counts[labels[n]]));
      }
      out.dacts.push_back(std::move(da));
    }
  }
  out.network_si = si_sum / static_cast<T>(num_layers);
  out.loss = out.cross_entropy - alpha * out.network_si;
  require(std::isfinite(static_cast<double>(out.loss)), ErrorCode::kNonFinite,
          "regularized loss is not finite");
  return out;
}

template UnitClassStats class_conditional_means(const LayerActivations<float>&,
                                                std::span<const int>, int);
template UnitClassStats class_conditional_means(const LayerActivations<double>&,
                                                std::span<const int>, int);
template void ClassMeanAccumulator::add(const LayerActivations<float>&, std::span<const int>);
template void ClassMeanAccumulator::add(const LayerActivations<double>&, std::span<const int>);
template CrossEntropyResult<float> cross_entropy(const Mat<float>&, std::span<const int>, bool);
template CrossEntropyResult<double> cross_entropy(const Mat<double>&, std::span<const int>, bool);
template RegularizedLoss<float> regularized_loss(const Mat<float>&, std::span<const int>,
                                                 const LayerActivations<float>&,
                                                 const RegularizerConfig&, bool);
template RegularizedLoss<double> regularized_loss(const Mat<double>&, std::span<const int>,
                                                  const LayerActivations<double>&,
                                                  const RegularizerConfig&, bool);

}  // namespace selekt
