#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "selectivity.hpp"
#include "tensor.hpp"

namespace selekt {

// Architecture descriptor. "small_cnn" is a stack of 3x3 conv (+ batchnorm)
// + ReLU layers followed by global average pooling and a linear head. "linear" is a bare
// linear map from flattened pixels to logits (no ReLU layers); it exists as a
// probe model for attack and Jacobian checks.
struct ArchConfig {
  std::string family = "small_cnn";
  int in_channels = 3;
  int image_size = 32;
  int classes = 10;
  std::vector<int> widths{16, 32, 32, 64};
  std::vector<int> strides{1, 2, 1, 2};
  int kernel = 3;
  // Conv layers drop their bias and are followed by a per-channel batchnorm
  // with learned scale and shift.
  bool batchnorm = true;

  void validate() const;
  ImageShape input_shape() const { return {in_channels, image_size, image_size}; }
  std::size_t parameter_count() const;
  std::size_t running_count() const;  // batchnorm running statistics
  std::size_t relu_layers() const;
  bool operator==(const ArchConfig&) const = default;
};

void to_json(nlohmann::json& j, const ArchConfig& a);
void from_json(const nlohmann::json& j, ArchConfig& a);

template <class T>
struct Gradients {
  Buffer<T> params;  // aligned with Network::parameters(); empty if not requested
  Buffer<T> inputs;  // NCHW, same layout as the pixels; empty if not requested
};

template <class T>
class Network {
 public:
  // Intermediate state kept by forward() for a later backward() call.
  struct Trace {
    std::size_t batch = 0;
    std::vector<Mat<T>> cols;    // im2col input of each conv layer
    std::vector<Mat<T>> pre;     // ReLU input of each conv layer
    std::vector<Mat<T>> normed;  // batchnorm: normalized conv output
    std::vector<Vec<T>> inv_std;  // batchnorm: 1 / sqrt(var + eps) per channel
    std::vector<Vec<T>> mean;     // batchnorm: statistics used per channel
    std::vector<Vec<T>> var;
    bool batch_stats = false;
    std::vector<int> out_hw;     // spatial size of each conv output
    Mat<T> head_input;           // units x batch (pooled) or pixels x batch
  };

  struct Output {
    Mat<T> logits;  // samples x classes
    LayerActivations<T> acts;
    Trace trace;
  };

  static constexpr double kNormEpsilon = 1e-5;
  static constexpr double kNormMomentum = 0.1;

  // `running` holds, per conv layer, the batchnorm running means followed by
  // the running variances; empty means mean 0 and variance 1.
  Network(ArchConfig arch, std::vector<T> params, std::vector<T> running = {});

  // Fan-in scaled uniform initialization; deterministic per seed.
  static Network build(const ArchConfig& arch, std::uint64_t seed);

  const ArchConfig& arch() const { return arch_; }
  std::span<T> parameters() { return params_; }
  std::span<const T> parameters() const { return params_; }
  std::span<T> running_stats() { return running_; }
  std::span<const T> running_stats() const { return running_; }
  std::size_t input_size() const { return arch_.input_shape().pixels(); }

  // batch_stats selects training-mode batchnorm (statistics of this batch);
  // otherwise the running statistics are used.
  Output forward(std::span<const T> pixels, std::size_t batch, bool batch_stats = false) const;

  // Folds the batch statistics of a training-mode forward pass into the
  // running statistics (unbiased variance, momentum kNormMomentum).
  void update_running_stats(const Trace& trace);

  // Backpropagates dlogits (samples x classes) and optional per-layer
  // activation gradients (samples x units, aligned with Output::acts).
  Gradients<T> backward(const Output& out, const Mat<T>& dlogits,
                        const std::vector<Mat<T>>& dacts, bool param_grads,
                        bool input_grads) const;

  template <class U>
  Network<U> cast() const {
    return Network<U>(arch_, std::vector<U>(params_.begin(), params_.end()),
                      std::vector<U>(running_.begin(), running_.end()));
  }

  // Offsets of each parameter block: conv weights and biases (or batchnorm
  // scale and shift), then the head.
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  struct Block {
    std::size_t weight = 0;
    std::size_t bias = 0;   // additive bias, or the batchnorm shift
    std::size_t scale = kNone;  // batchnorm scale
    int out = 0;
    int in = 0;  // fan-in per output (Cin * k * k for conv)
  };
  const std::vector<Block>& blocks() const { return blocks_; }

 private:
  ArchConfig arch_;
  Buffer<T> params_;
  Buffer<T> running_;
  std::vector<Block> blocks_;
};

using Model = Network<float>;

struct LossSpec {
  enum class Kind { kCrossEntropy, kRegularized };
  Kind kind = Kind::kCrossEntropy;
  RegularizerConfig regularizer;

  static LossSpec plain() { return {}; }
  static LossSpec regularized(RegularizerConfig cfg) { return {Kind::kRegularized, cfg}; }
};

template <class T>
struct LossAndGrads {
  T loss{};
  T cross_entropy{};
  T network_si{};  // NaN unless the selectivity term was evaluated
  bool regularizer_skipped = false;
  Mat<T> logits;
  Gradients<T> grads;
  typename Network<T>::Trace trace;  // kept only for batch-statistics passes
};

// Evaluates the loss on a batch and returns gradients with respect to the
// parameters and/or the input pixels. Throws ErrorCode::kNonFinite when the
// loss diverges.
template <class T>
LossAndGrads<T> loss_and_grads(const Network<T>& model, std::span<const T> pixels,
                               std::span<const int> labels, const LossSpec& spec,
                               bool param_grads = true, bool input_grads = false,
                               bool batch_stats = false);

LossAndGrads<float> loss_and_grads(const Model& model, const ImageBatch& batch,
                                   const LossSpec& spec, bool param_grads = true,
                                   bool input_grads = false, bool batch_stats = false);

// Convenience forward over an ImageBatch.
Model::Output forward_with_activations(const Model& model, const ImageBatch& batch);

// Predicted class per sample, evaluated in chunks.
std::vector<int> predict(const Model& model, const ImageBatch& batch,
                         std::size_t chunk = 256);
double accuracy(const Model& model, const ImageBatch& batch, std::size_t chunk = 256);

// Binary checkpoint: "SLKT1", u32-le length + UTF-8 architecture JSON,
// u64-le parameter count, little-endian float32 parameters, then u64-le
// running-statistic count and those values as float32. Conv weights are laid
// out [out][ky][kx][in], followed by biases or batchnorm shift and scale; the
// linear head is [class][unit] then biases.
void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace selekt
