#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace selekt {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// Heap storage that Eigen maps over. A fixed base alignment keeps vectorized
// reductions in the same order from run to run.
template <class T>
using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

struct ImageShape {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t pixels() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  bool operator==(const ImageShape&) const = default;
};

// A batch of images in NCHW order with values in [0,1], plus one class label
// per image.
struct ImageBatch {
  ImageShape shape;
  Buffer<float> pixels;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const float> sample(std::size_t i) const {
    return {pixels.data() + i * shape.pixels(), shape.pixels()};
  }
  std::span<float> sample(std::size_t i) {
    return {pixels.data() + i * shape.pixels(), shape.pixels()};
  }

  ImageBatch slice(std::size_t begin, std::size_t end) const;
  ImageBatch gather(std::span<const std::size_t> indices) const;

  // Throws on pixel/label count mismatch, out-of-range pixels, or labels
  // outside [0, classes).
  void validate(int classes) const;
};

// Per-layer (samples x units) activation tables, ordered by depth. Each unit
// value is the spatial mean of one post-ReLU feature map.
template <class T>
struct LayerActivations {
  std::vector<std::string> layer_ids;
  std::vector<Mat<T>> values;

  std::size_t layers() const { return values.size(); }
};

}  // namespace selekt
