#include "backbone.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "error.hpp"

namespace selekt {

// ---------------------------------------------------------------------------
// ImageBatch

ImageBatch ImageBatch::slice(std::size_t begin, std::size_t end) const {
  require(begin <= end && end <= size(), ErrorCode::kInvalidArgument, "slice out of range");
  ImageBatch out;
  out.shape = shape;
  const std::size_t d = shape.pixels();
  out.pixels.assign(pixels.begin() + begin * d, pixels.begin() + end * d);
  out.labels.assign(labels.begin() + begin, labels.begin() + end);
  return out;
}

ImageBatch ImageBatch::gather(std::span<const std::size_t> indices) const {
  ImageBatch out;
  out.shape = shape;
  const std::size_t d = shape.pixels();
  out.pixels.resize(indices.size() * d);
  out.labels.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] < size(), ErrorCode::kInvalidArgument, "gather index out of range");
    std::memcpy(out.pixels.data() + i * d, pixels.data() + indices[i] * d, d * sizeof(float));
    out.labels[i] = labels[indices[i]];
  }
  return out;
}

void ImageBatch::validate(int classes) const {
  require(pixels.size() == labels.size() * shape.pixels(), ErrorCode::kShapeMismatch,
          "pixel count does not match label count times image size");
  for (float p : pixels)
    require(p >= 0.0f && p <= 1.0f, ErrorCode::kInvalidArgument, "pixel outside [0,1]");
  for (int y : labels)
    require(y >= 0 && y < classes, ErrorCode::kInvalidArgument,
            "label " + std::to_string(y) + " outside [0," + std::to_string(classes) + ")");
}

// ---------------------------------------------------------------------------
// ArchConfig

namespace {

#if defined(__GLIBC__)
// glibc hands large blocks back to the kernel on free, so every batch would
// page-fault its im2col buffers afresh. Keep them in the heap instead.
const bool kHeapTuned = [] {
  mallopt(M_MMAP_THRESHOLD, 512 * 1024 * 1024);
  mallopt(M_TRIM_THRESHOLD, 1024 * 1024 * 1024);
  return true;
}();
#endif

int conv_out(int in, int kernel, int stride) {
  const int pad = kernel / 2;
  return (in + 2 * pad - kernel) / stride + 1;
}

}  // namespace

void ArchConfig::validate() const {
  require(family == "small_cnn" || family == "linear", ErrorCode::kInvalidArgument,
          "unknown architecture family '" + family + "'", "arch.family");
  require(classes >= 2, ErrorCode::kInvalidArgument, "class count must be >= 2", "arch.classes");
  require(in_channels >= 1, ErrorCode::kInvalidArgument, "in_channels must be >= 1",
          "arch.in_channels");
  require(image_size >= 1, ErrorCode::kInvalidArgument, "image_size must be >= 1",
          "arch.image_size");
  if (family == "linear") return;
  require(widths.size() >= 2, ErrorCode::kInvalidArgument,
          "small_cnn needs at least 2 ReLU layers", "arch.widths");
  require(strides.size() == widths.size(), ErrorCode::kInvalidArgument,
          "strides and widths must have equal length", "arch.strides");
  require(kernel >= 1 && kernel % 2 == 1, ErrorCode::kInvalidArgument,
          "kernel must be odd and positive", "arch.kernel");
  int hw = image_size;
  for (std::size_t l = 0; l < widths.size(); ++l) {
    require(widths[l] >= 1, ErrorCode::kInvalidArgument, "widths must be positive", "arch.widths");
    require(strides[l] >= 1, ErrorCode::kInvalidArgument, "strides must be positive",
            "arch.strides");
    hw = conv_out(hw, kernel, strides[l]);
    require(hw >= 1, ErrorCode::kInvalidArgument, "image too small for the stride stack",
            "arch.image_size");
  }
}

std::size_t ArchConfig::parameter_count() const {
  if (family == "linear") {
    const std::size_t d = input_shape().pixels();
    return classes * d + classes;
  }
  std::size_t n = 0;
  int cin = in_channels;
  for (int w : widths) {
    n += static_cast<std::size_t>(w) * cin * kernel * kernel + w + (batchnorm ? w : 0);
    cin = w;
  }
  return n + static_cast<std::size_t>(classes) * cin + classes;
}

std::size_t ArchConfig::running_count() const {
  if (family == "linear" || !batchnorm) return 0;
  std::size_t n = 0;
  for (int w : widths) n += 2 * static_cast<std::size_t>(w);
  return n;
}

std::size_t ArchConfig::relu_layers() const { return family == "linear" ? 0 : widths.size(); }

void to_json(nlohmann::json& j, const ArchConfig& a) {
  j = {{"family", a.family},   {"in_channels", a.in_channels}, {"image_size", a.image_size},
       {"classes", a.classes}, {"widths", a.widths},           {"strides", a.strides},
       {"kernel", a.kernel},   {"batchnorm", a.batchnorm}};
}

void from_json(const nlohmann::json& j, ArchConfig& a) {
  ArchConfig d;
  a.family = j.value("family", d.family);
  a.in_channels = j.value("in_channels", d.in_channels);
  a.image_size = j.value("image_size", d.image_size);
  a.classes = j.value("classes", d.classes);
  a.widths = j.value("widths", d.widths);
  a.strides = j.value("strides", d.strides);
  a.kernel = j.value("kernel", d.kernel);
  a.batchnorm = j.value("batchnorm", d.batchnorm);
}

// ---------------------------------------------------------------------------
// Network

template <class T>
Network<T>::Network(ArchConfig arch, std::vector<T> params, std::vector<T> running)
    : arch_(std::move(arch)), params_(params.begin(), params.end()), running_(running.begin(), running.end()) {
  arch_.validate();
  require(params_.size() == arch_.parameter_count(), ErrorCode::kShapeMismatch,
          "parameter count " + std::to_string(params_.size()) + " does not match architecture (" +
              std::to_string(arch_.parameter_count()) + ")");
  if (running_.empty()) {
    running_.assign(arch_.running_count(), T(0));
    if (!running_.empty()) {
      std::size_t off = 0;
      for (int w : arch_.widths) {
        std::fill_n(running_.begin() + off + w, w, T(1));
        off += 2 * static_cast<std::size_t>(w);
      }
    }
  }
  require(running_.size() == arch_.running_count(), ErrorCode::kShapeMismatch,
          "running statistic count " + std::to_string(running_.size()) +
              " does not match architecture (" + std::to_string(arch_.running_count()) + ")");
  std::size_t off = 0;
  auto add = [&](int out, int in, bool norm) {
    Block b;
    b.weight = off;
    b.bias = off + static_cast<std::size_t>(out) * in;
    b.out = out;
    b.in = in;
    off = b.bias + out;
    if (norm) {
      b.scale = off;
      off += out;
    }
    blocks_.push_back(b);
  };
  if (arch_.family == "linear") {
    add(arch_.classes, static_cast<int>(input_size()), false);
    return;
  }
  int cin = arch_.in_channels;
  for (int w : arch_.widths) {
    add(w, cin * arch_.kernel * arch_.kernel, arch_.batchnorm);
    cin = w;
  }
  add(arch_.classes, cin, false);
}

template <class T>
Network<T> Network<T>::build(const ArchConfig& arch, std::uint64_t seed) {
  arch.validate();
  std::vector<T> params(arch.parameter_count(), T(0));
  Network net(arch, std::move(params));
  std::mt19937_64 rng(seed);
  const std::size_t relu = arch.relu_layers();
  for (std::size_t b = 0; b < net.blocks_.size(); ++b) {
    const auto& blk = net.blocks_[b];
    // He-uniform for ReLU layers, 1/sqrt(fan_in) for the head.
    const double bound = b < relu ? std::sqrt(6.0 / blk.in) : 1.0 / std::sqrt(blk.in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    const std::size_t n = static_cast<std::size_t>(blk.out) * blk.in;
    for (std::size_t i = 0; i < n; ++i) net.params_[blk.weight + i] = static_cast<T>(dist(rng));
    if (blk.scale != kNone) std::fill_n(net.params_.begin() + blk.scale, blk.out, T(1));
  }
  return net;
}

namespace {

// X is Cin x (N * H * W) with column index n*H*W + y*W + x. Patch rows are
// ordered (ky, kx, channel) so each tap copies one contiguous channel vector.
template <class T>
void im2col(const Mat<T>& x, int cin, int hw_in, int hw_out, int kernel, int stride,
            std::size_t batch, Mat<T>& cols) {
  const int pad = kernel / 2;
  const Eigen::Index k = static_cast<Eigen::Index>(cin) * kernel * kernel;
  const std::size_t p_in = static_cast<std::size_t>(hw_in) * hw_in;
  const std::size_t p_out = static_cast<std::size_t>(hw_out) * hw_out;
  cols.resize(k, static_cast<Eigen::Index>(batch * p_out));
  const T* src = x.data();
  for (std::size_t n = 0; n < batch; ++n) {
    for (int oy = 0; oy < hw_out; ++oy) {
      for (int ox = 0; ox < hw_out; ++ox) {
        T* dst = cols.data() + (n * p_out + oy * hw_out + ox) * k;
        for (int ky = 0; ky < kernel; ++ky) {
          const int iy = oy * stride - pad + ky;
          for (int kx = 0; kx < kernel; ++kx, dst += cin) {
            const int ix = ox * stride - pad + kx;
            if (iy >= 0 && iy < hw_in && ix >= 0 && ix < hw_in)
              std::memcpy(dst, src + (n * p_in + iy * hw_in + ix) * cin, cin * sizeof(T));
            else
              std::fill(dst, dst + cin, T(0));
          }
        }
      }
    }
  }
}

template <class T>
void col2im(const Mat<T>& cols, int cin, int hw_in, int hw_out, int kernel, int stride,
            std::size_t batch, Mat<T>& x) {
  const int pad = kernel / 2;
  const Eigen::Index k = static_cast<Eigen::Index>(cin) * kernel * kernel;
  const std::size_t p_in = static_cast<std::size_t>(hw_in) * hw_in;
  const std::size_t p_out = static_cast<std::size_t>(hw_out) * hw_out;
  x = Mat<T>::Zero(cin, static_cast<Eigen::Index>(batch * p_in));
  T* dst = x.data();
  for (std::size_t n = 0; n < batch; ++n) {
    for (int oy = 0; oy < hw_out; ++oy) {
      for (int ox = 0; ox < hw_out; ++ox) {
        const T* src = cols.data() + (n * p_out + oy * hw_out + ox) * k;
        for (int ky = 0; ky < kernel; ++ky) {
          const int iy = oy * stride - pad + ky;
          for (int kx = 0; kx < kernel; ++kx, src += cin) {
            const int ix = ox * stride - pad + kx;
            if (iy < 0 || iy >= hw_in || ix < 0 || ix >= hw_in) continue;
            Eigen::Map<Vec<T>>(dst + (n * p_in + iy * hw_in + ix) * cin, cin) +=
                Eigen::Map<const Vec<T>>(src, cin);
          }
        }
      }
    }
  }
}

// NCHW pixels -> C x (N*H*W).
template <class T>
Mat<T> to_channel_major(std::span<const T> pixels, const ImageShape& s, std::size_t batch) {
  const std::size_t p = static_cast<std::size_t>(s.height) * s.width;
  Mat<T> x(s.channels, static_cast<Eigen::Index>(batch * p));
  for (std::size_t n = 0; n < batch; ++n)
    for (int c = 0; c < s.channels; ++c)
      for (std::size_t i = 0; i < p; ++i)
        x(c, static_cast<Eigen::Index>(n * p + i)) = pixels[(n * s.channels + c) * p + i];
  return x;
}

template <class T>
Buffer<T> to_nchw(const Mat<T>& x, const ImageShape& s, std::size_t batch) {
  const std::size_t p = static_cast<std::size_t>(s.height) * s.width;
  Buffer<T> out(batch * s.pixels());
  for (std::size_t n = 0; n < batch; ++n)
    for (int c = 0; c < s.channels; ++c)
      for (std::size_t i = 0; i < p; ++i)
        out[(n * s.channels + c) * p + i] = x(c, static_cast<Eigen::Index>(n * p + i));
  return out;
}

}  // namespace

template <class T>
typename Network<T>::Output Network<T>::forward(std::span<const T> pixels,
                                                std::size_t batch, bool batch_stats) const {
  require(batch > 0, ErrorCode::kInvalidArgument, "empty batch");
  require(pixels.size() == batch * input_size(), ErrorCode::kShapeMismatch,
          "pixel count " + std::to_string(pixels.size()) + " does not match batch of " +
              std::to_string(batch) + " images of " + std::to_string(input_size()) + " values");
  Output out;
  out.trace.batch = batch;
  out.trace.batch_stats = batch_stats && arch_.batchnorm;
  const Eigen::Index n = static_cast<Eigen::Index>(batch);
  const T* p = params_.data();

  if (arch_.family == "linear") {
    const auto& h = blocks_.back();
    out.trace.head_input = Eigen::Map<const Mat<T>>(pixels.data(), input_size(), n);
    Eigen::Map<const RowMat<T>> w(p + h.weight, h.out, h.in);
    Eigen::Map<const Vec<T>> b(p + h.bias, h.out);
    out.logits = ((w * out.trace.head_input).colwise() + b).transpose();
    return out;
  }

  Mat<T> x = to_channel_major(pixels, arch_.input_shape(), batch);
  int hw = arch_.image_size;
  int cin = arch_.in_channels;
  const std::size_t layers = arch_.widths.size();
  std::size_t stat_off = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto& blk = blocks_[l];
    const int hw_out = conv_out(hw, arch_.kernel, arch_.strides[l]);
    Mat<T> cols;
    im2col(x, cin, hw, hw_out, arch_.kernel, arch_.strides[l], batch, cols);
    Eigen::Map<const RowMat<T>> w(p + blk.weight, blk.out, blk.in);
    Eigen::Map<const Vec<T>> b(p + blk.bias, blk.out);
    Mat<T> z = w * cols;
    if (blk.scale != kNone) {
      Vec<T> mean, var;
      if (out.trace.batch_stats) {
        mean = z.rowwise().mean();
        var = (z.colwise() - mean).array().square().rowwise().mean();
      } else {
        mean = Eigen::Map<const Vec<T>>(running_.data() + stat_off, blk.out);
        var = Eigen::Map<const Vec<T>>(running_.data() + stat_off + blk.out, blk.out);
      }
      const Vec<T> inv_std = (var.array() + static_cast<T>(kNormEpsilon)).rsqrt();
      Mat<T> normed = (z.colwise() - mean).array().colwise() * inv_std.array();
      Eigen::Map<const Vec<T>> g(p + blk.scale, blk.out);
      z = normed.array().colwise() * g.array();
      out.trace.normed.push_back(std::move(normed));
      out.trace.inv_std.push_back(inv_std);
      out.trace.mean.push_back(std::move(mean));
      out.trace.var.push_back(std::move(var));
      stat_off += 2 * static_cast<std::size_t>(blk.out);
    }
    z.colwise() += b;
    x = z.cwiseMax(T(0));

    const Eigen::Index pix = static_cast<Eigen::Index>(hw_out) * hw_out;
    Mat<T> act(n, blk.out);
    for (Eigen::Index i = 0; i < n; ++i)
      act.row(i) = x.middleCols(i * pix, pix).rowwise().mean().transpose();
    out.acts.layer_ids.push_back("conv" + std::to_string(l + 1));
    out.acts.values.push_back(std::move(act));

    out.trace.cols.push_back(std::move(cols));
    out.trace.pre.push_back(std::move(z));
    out.trace.out_hw.push_back(hw_out);
    hw = hw_out;
    cin = blk.out;
  }

  const auto& h = blocks_.back();
  out.trace.head_input = out.acts.values.back().transpose();
  Eigen::Map<const RowMat<T>> w(p + h.weight, h.out, h.in);
  Eigen::Map<const Vec<T>> b(p + h.bias, h.out);
  out.logits = ((w * out.trace.head_input).colwise() + b).transpose();
  return out;
}

template <class T>
void Network<T>::update_running_stats(const Trace& trace) {
  if (!trace.batch_stats) return;
  require(trace.mean.size() == arch_.widths.size(), ErrorCode::kShapeMismatch,
          "trace does not match the architecture");
  const T m = static_cast<T>(kNormMomentum);
  std::size_t off = 0;
  for (std::size_t l = 0; l < trace.mean.size(); ++l) {
    const Eigen::Index c = trace.mean[l].size();
    const double count = static_cast<double>(trace.normed[l].cols());
    const T unbias = count > 1 ? static_cast<T>(count / (count - 1)) : T(1);
    Eigen::Map<Vec<T>> rm(running_.data() + off, c);
    Eigen::Map<Vec<T>> rv(running_.data() + off + c, c);
    rm = (T(1) - m) * rm + m * trace.mean[l];
    rv = (T(1) - m) * rv + m * unbias * trace.var[l];
    off += 2 * static_cast<std::size_t>(c);
  }
}

template <class T>
Gradients<T> Network<T>::backward(const Output& out, const Mat<T>& dlogits,
                                  const std::vector<Mat<T>>& dacts, bool param_grads,
                                  bool input_grads) const {
  const std::size_t batch = out.trace.batch;
  const Eigen::Index n = static_cast<Eigen::Index>(batch);
  require(dlogits.rows() == n && dlogits.cols() == arch_.classes, ErrorCode::kShapeMismatch,
          "dlogits shape mismatch");
  require(dacts.empty() || dacts.size() == out.acts.layers(), ErrorCode::kShapeMismatch,
          "activation gradient count mismatch");
  Gradients<T> g;
  if (param_grads) g.params.assign(params_.size(), T(0));
  const T* p = params_.data();

  const auto& h = blocks_.back();
  const Mat<T> dlt = dlogits.transpose();  // classes x batch
  if (param_grads) {
    Eigen::Map<RowMat<T>> dw(g.params.data() + h.weight, h.out, h.in);
    Eigen::Map<Vec<T>> db(g.params.data() + h.bias, h.out);
    dw.noalias() = dlt * out.trace.head_input.transpose();
    db = dlt.rowwise().sum();
  }
  Eigen::Map<const RowMat<T>> wh(p + h.weight, h.out, h.in);
  Mat<T> dhead = wh.transpose() * dlt;  // head inputs x batch

  if (arch_.family == "linear") {
    if (input_grads) {
      g.inputs.resize(batch * input_size());
      Eigen::Map<Mat<T>>(g.inputs.data(), input_size(), n) = dhead;
    }
    return g;
  }

  const std::size_t layers = arch_.widths.size();
  // Gradient with respect to the spatial-mean activations of a layer; spread
  // uniformly over that layer's feature map.
  auto spread = [&](std::size_t l, const Mat<T>& dunit /* units x batch */, Mat<T>& da) {
    const int hw = out.trace.out_hw[l];
    const Eigen::Index pix = static_cast<Eigen::Index>(hw) * hw;
    const T inv = T(1) / static_cast<T>(pix);
    for (Eigen::Index i = 0; i < n; ++i)
      da.middleCols(i * pix, pix).colwise() += dunit.col(i) * inv;
  };

  Mat<T> da = Mat<T>::Zero(out.trace.pre[layers - 1].rows(), out.trace.pre[layers - 1].cols());
  {
    Mat<T> dunit = dhead;
    if (!dacts.empty()) dunit += dacts[layers - 1].transpose();
    spread(layers - 1, dunit, da);
  }
  for (std::size_t li = layers; li-- > 0;) {
    const auto& blk = blocks_[li];
    const Mat<T>& z = out.trace.pre[li];
    Mat<T> dz = (z.array() > T(0)).select(da, T(0));
    if (param_grads) {
      Eigen::Map<Vec<T>> db(g.params.data() + blk.bias, blk.out);
      db = dz.rowwise().sum();
    }
    if (blk.scale != kNone) {
      const Mat<T>& xh = out.trace.normed[li];
      Eigen::Map<const Vec<T>> gamma(p + blk.scale, blk.out);
      if (param_grads) {
        Eigen::Map<Vec<T>> dg(g.params.data() + blk.scale, blk.out);
        dg = (dz.array() * xh.array()).rowwise().sum();
      }
      Mat<T> dxh = dz.array().colwise() * gamma.array();
      const Vec<T>& inv_std = out.trace.inv_std[li];
      if (out.trace.batch_stats) {
        const T inv_m = T(1) / static_cast<T>(xh.cols());
        const Vec<T> sum_d = dxh.rowwise().sum();
        const Vec<T> sum_dx = (dxh.array() * xh.array()).rowwise().sum();
        dxh -= (xh.array().colwise() * (sum_dx * inv_m).array()).matrix();
        dxh.colwise() -= sum_d * inv_m;
      }
      dz = dxh.array().colwise() * inv_std.array();
    }
    if (param_grads) {
      Eigen::Map<RowMat<T>> dw(g.params.data() + blk.weight, blk.out, blk.in);
      dw.noalias() = dz * out.trace.cols[li].transpose();
    }
    if (li == 0 && !input_grads) break;
    Eigen::Map<const RowMat<T>> w(p + blk.weight, blk.out, blk.in);
    Mat<T> dcols = w.transpose() * dz;
    const int hw_in = li == 0 ? arch_.image_size : out.trace.out_hw[li - 1];
    const int cin = li == 0 ? arch_.in_channels : blocks_[li - 1].out;
    Mat<T> dx;
    col2im(dcols, cin, hw_in, out.trace.out_hw[li], arch_.kernel, arch_.strides[li], batch, dx);
    if (li == 0) {
      g.inputs = to_nchw(dx, arch_.input_shape(), batch);
      break;
    }
    if (!dacts.empty()) spread(li - 1, dacts[li - 1].transpose(), dx);
    da = std::move(dx);
  }
  return g;
}

template class Network<float>;
template class Network<double>;

// ---------------------------------------------------------------------------
// Loss

template <class T>
LossAndGrads<T> loss_and_grads(const Network<T>& model, std::span<const T> pixels,
                               std::span<const int> labels, const LossSpec& spec,
                               bool param_grads, bool input_grads, bool batch_stats) {
  require(!labels.empty(), ErrorCode::kInvalidArgument, "empty batch");
  auto fwd = model.forward(pixels, labels.size(), batch_stats);
  LossAndGrads<T> r;
  const bool any_grad = param_grads || input_grads;
  Mat<T> dlogits;
  std::vector<Mat<T>> dacts;
  if (spec.kind == LossSpec::Kind::kRegularized) {
    auto reg = regularized_loss(fwd.logits, labels, fwd.acts, spec.regularizer, any_grad);
    r.loss = reg.loss;
    r.cross_entropy = reg.cross_entropy;
    r.network_si = reg.network_si;
    r.regularizer_skipped = reg.regularizer_skipped;
    dlogits = std::move(reg.dlogits);
    dacts = std::move(reg.dacts);
  } else {
    auto ce = cross_entropy(fwd.logits, labels, any_grad);
    r.loss = r.cross_entropy = ce.loss;
    r.network_si = std::numeric_limits<T>::quiet_NaN();
    dlogits = std::move(ce.dlogits);
  }
  require(std::isfinite(static_cast<double>(r.loss)), ErrorCode::kNonFinite,
          "loss is not finite");
  if (any_grad) r.grads = model.backward(fwd, dlogits, dacts, param_grads, input_grads);
  r.logits = std::move(fwd.logits);
  if (fwd.trace.batch_stats) r.trace = std::move(fwd.trace);
  return r;
}

template LossAndGrads<float> loss_and_grads(const Network<float>&, std::span<const float>,
                                            std::span<const int>, const LossSpec&, bool, bool,
                                            bool);
template LossAndGrads<double> loss_and_grads(const Network<double>&, std::span<const double>,
                                             std::span<const int>, const LossSpec&, bool, bool,
                                             bool);

LossAndGrads<float> loss_and_grads(const Model& model, const ImageBatch& batch,
                                   const LossSpec& spec, bool param_grads, bool input_grads,
                                   bool batch_stats) {
  require(batch.shape == model.arch().input_shape(), ErrorCode::kShapeMismatch,
          "batch image shape does not match the architecture");
  return loss_and_grads<float>(model, batch.pixels, batch.labels, spec, param_grads,
                               input_grads, batch_stats);
}

Model::Output forward_with_activations(const Model& model, const ImageBatch& batch) {
  require(batch.shape == model.arch().input_shape(), ErrorCode::kShapeMismatch,
          "batch image shape does not match the architecture");
  return model.forward(batch.pixels, batch.size());
}

std::vector<int> predict(const Model& model, const ImageBatch& batch, std::size_t chunk) {
  require(batch.shape == model.arch().input_shape(), ErrorCode::kShapeMismatch,
          "batch image shape does not match the architecture");
  std::vector<int> out(batch.size());
  const std::size_t d = batch.shape.pixels();
  for (std::size_t begin = 0; begin < batch.size(); begin += chunk) {
    const std::size_t count = std::min(chunk, batch.size() - begin);
    auto fwd = model.forward({batch.pixels.data() + begin * d, count * d}, count);
    for (std::size_t i = 0; i < count; ++i) {
      Eigen::Index arg;
      fwd.logits.row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
      out[begin + i] = static_cast<int>(arg);
    }
  }
  return out;
}

double accuracy(const Model& model, const ImageBatch& batch, std::size_t chunk) {
  require(batch.size() > 0, ErrorCode::kInvalidArgument, "accuracy of an empty batch");
  const auto pred = predict(model, batch, chunk);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == batch.labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[5] = {'S', 'L', 'K', 'T', '1'};

void put_le(std::ostream& os, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(std::istream& is, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = is.get();
    require(c != std::char_traits<char>::eof(), ErrorCode::kIo, "truncated checkpoint");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(os), ErrorCode::kIo, "cannot write checkpoint " + path.string());
  os.write(kMagic, sizeof(kMagic));
  const std::string arch = nlohmann::json(model.arch()).dump();
  put_le(os, arch.size(), 4);
  os.write(arch.data(), static_cast<std::streamsize>(arch.size()));
  const auto params = model.parameters();
  put_le(os, params.size(), 8);
  for (float f : params) put_le(os, std::bit_cast<std::uint32_t>(f), 4);
  const auto running = model.running_stats();
  put_le(os, running.size(), 8);
  for (float f : running) put_le(os, std::bit_cast<std::uint32_t>(f), 4);
  require(static_cast<bool>(os), ErrorCode::kIo, "failed writing checkpoint " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::kNotFound, "missing checkpoint " + path.string());
  char magic[5];
  is.read(magic, sizeof(magic));
  require(is.gcount() == 5 && std::memcmp(magic, kMagic, 5) == 0, ErrorCode::kIo,
          "bad checkpoint magic in " + path.string());
  const std::uint64_t len = get_le(is, 4);
  require(len < (1u << 24), ErrorCode::kIo, "implausible architecture length");
  std::string arch_text(len, '\0');
  is.read(arch_text.data(), static_cast<std::streamsize>(len));
  require(static_cast<std::uint64_t>(is.gcount()) == len, ErrorCode::kIo, "truncated checkpoint");
  ArchConfig arch;
  try {
    arch = nlohmann::json::parse(arch_text).get<ArchConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIo, std::string("bad architecture descriptor: ") + e.what());
  }
  const std::uint64_t count = get_le(is, 8);
  require(count == arch.parameter_count(), ErrorCode::kIo,
          "checkpoint parameter count does not match its architecture");
  std::vector<float> params(count);
  for (auto& f : params) f = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(is, 4)));
  const std::uint64_t stats = get_le(is, 8);
  require(stats == arch.running_count(), ErrorCode::kIo,
          "checkpoint running statistics do not match its architecture");
  std::vector<float> running(stats);
  for (auto& f : running) f = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(is, 4)));
  return Model(arch, std::move(params), std::move(running));
}

}  // namespace selekt
