#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tensor.hpp"

namespace selekt {

struct DatasetDescriptor {
  std::string source = "synthetic";  // synthetic | local_cifar_style
  int classes = 10;
  int image_size = 32;
  int channels = 3;
  // synthetic: images per class in each split
  std::size_t train_per_class = 600;
  std::size_t test_per_class = 100;
  std::uint64_t seed = 1234;
  // local_cifar_style: directory and optional leading-subset limits (0 = all)
  std::string root;
  std::size_t train_count = 0;
  std::size_t test_count = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const DatasetDescriptor& d);
void from_json(const nlohmann::json& j, DatasetDescriptor& d);

// A train pool (validation is carved out of it per run) and an untouched test
// set, in file order.
struct Dataset {
  int classes = 0;
  ImageBatch train_pool;
  ImageBatch test;
};

// Procedurally rendered shapes. Class fixes shape and orientation; the seed
// fixes position, scale, colors and background noise. Classes are balanced
// and interleaved (sample i has class i mod C).
Dataset generate_synthetic(const DatasetDescriptor& desc);

// Local layout: {train,test}_images.npy (N x H x W x 3, uint8) and
// {train,test}_labels.npy (N integers) under desc.root.
Dataset load_local(const DatasetDescriptor& desc);

Dataset load_dataset(const DatasetDescriptor& desc);

// Writes a dataset to the local layout (pixels quantized to uint8).
void materialize(const Dataset& data, const std::filesystem::path& root);

// N x H x W x C uint8 <-> NCHW float in [0,1].
ImageBatch from_hwc_u8(std::span<const std::uint8_t> bytes, std::size_t n, int height, int width,
                       int channels, std::vector<int> labels);
std::vector<std::uint8_t> to_hwc_u8(const ImageBatch& batch);

// Reads one images/labels pair in the local layout.
ImageBatch read_image_file(const std::filesystem::path& images,
                           const std::filesystem::path& labels);
void write_image_file(const ImageBatch& batch, const std::filesystem::path& images,
                      const std::filesystem::path& labels);

}  // namespace selekt
