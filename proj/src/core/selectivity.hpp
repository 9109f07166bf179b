#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tensor.hpp"

namespace selekt {

struct RegularizerConfig {
  // Scale of the selectivity term. Negative values push units toward
  // class-agnostic responses, positive values toward single-class responses.
  double alpha = 0.0;
  int min_classes_for_si = 2;
  // Units whose max + rest mean falls below this are treated as dead (SI = 0).
  double dead_unit_epsilon = 1e-12;

  void validate() const;
};

// Class-conditional mean activations for every unit of every layer.
// Columns of classes absent from the data hold NaN and are flagged in
// class_present; they never enter any selectivity computation.
struct UnitClassStats {
  std::vector<std::string> layer_ids;
  std::vector<Eigen::MatrixXd> means;  // units x classes
  std::vector<bool> class_present;
  std::vector<std::size_t> class_counts;

  int classes() const { return static_cast<int>(class_present.size()); }
  int present_count() const;
};

template <class T>
UnitClassStats class_conditional_means(const LayerActivations<T>& acts,
                                       std::span<const int> labels,
                                       int classes);

// Streams activation batches and accumulates per-class sums so that a
// whole-dataset report never needs the full activation table in memory.
class ClassMeanAccumulator {
 public:
  explicit ClassMeanAccumulator(int classes) : classes_(classes) {}

  template <class T>
  void add(const LayerActivations<T>& acts, std::span<const int> labels);

  UnitClassStats finish() const;

 private:
  int classes_;
  std::vector<std::string> layer_ids_;
  std::vector<Eigen::MatrixXd> sums_;
  std::vector<std::size_t> counts_;
};

// Per-unit selectivity index for one layer's units x classes mean table.
std::vector<double> selectivity_index(const Eigen::MatrixXd& means,
                                      const std::vector<bool>& class_present,
                                      const RegularizerConfig& cfg);

std::vector<std::vector<double>> selectivity_index(const UnitClassStats& stats,
                                                   const RegularizerConfig& cfg);

// Mean over layers of the within-layer mean SI.
double network_selectivity(const std::vector<std::vector<double>>& per_layer_si);

struct SelectivityReport {
  struct Layer {
    std::string layer_id;
    std::vector<double> unit_si;
    double mean_si = 0.0;
  };
  std::vector<Layer> layers;
  double network_si = 0.0;
  std::string source;
};

SelectivityReport make_selectivity_report(const UnitClassStats& stats,
                                          const RegularizerConfig& cfg,
                                          std::string source);

void to_json(nlohmann::json& j, const SelectivityReport& r);
void from_json(const nlohmann::json& j, SelectivityReport& r);

template <class T>
struct CrossEntropyResult {
  T loss{};
  Mat<T> dlogits;  // samples x classes, already divided by the batch size
};

// Mean softmax cross-entropy over the batch.
template <class T>
CrossEntropyResult<T> cross_entropy(const Mat<T>& logits, std::span<const int> labels,
                                    bool with_grad);

template <class T>
struct RegularizedLoss {
  T loss{};
  T cross_entropy{};
  T network_si{};  // NaN when the regularizer was skipped
  bool regularizer_skipped = false;
  Mat<T> dlogits;
  std::vector<Mat<T>> dacts;  // one per layer, empty when skipped or alpha = 0
};

// Cross-entropy minus alpha times the minibatch network selectivity. The
// selectivity term is differentiated through the per-class means and the max;
// ties for the max route the gradient to the lowest class index.
template <class T>
RegularizedLoss<T> regularized_loss(const Mat<T>& logits, std::span<const int> labels,
                                    const LayerActivations<T>& acts,
                                    const RegularizerConfig& cfg, bool with_grads);

}  // namespace selekt
