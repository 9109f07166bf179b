#include "data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "error.hpp"
#include "npy.hpp"
#include "stats.hpp"

namespace selekt {

void DatasetDescriptor::validate() const {
  require(source == "synthetic" || source == "local_cifar_style", ErrorCode::kInvalidArgument,
          "unknown dataset source '" + source + "'", "dataset.source");
  require(classes >= 2, ErrorCode::kInvalidArgument, "class count must be >= 2",
          "dataset.classes");
  if (source == "synthetic") {
    require(image_size >= 16, ErrorCode::kInvalidArgument,
            "synthetic images must be at least 16 pixels wide", "dataset.image_size");
    require(classes <= 20, ErrorCode::kInvalidArgument,
            "synthetic dataset supports at most 20 classes", "dataset.classes");
    require(channels == 3, ErrorCode::kInvalidArgument, "synthetic images have 3 channels",
            "dataset.channels");
    require(train_per_class > 0 && test_per_class > 0, ErrorCode::kInvalidArgument,
            "per-class counts must be positive", "dataset.train_per_class");
  } else {
    require(!root.empty(), ErrorCode::kInvalidArgument, "local dataset needs a root",
            "dataset.root");
  }
}

void to_json(nlohmann::json& j, const DatasetDescriptor& d) {
  j = {{"source", d.source}, {"classes", d.classes}, {"image_size", d.image_size},
       {"channels", d.channels}};
  if (d.source == "synthetic") {
    j["train_per_class"] = d.train_per_class;
    j["test_per_class"] = d.test_per_class;
    j["seed"] = d.seed;
  } else {
    j["root"] = d.root;
    j["train_count"] = d.train_count;
    j["test_count"] = d.test_count;
  }
}

void from_json(const nlohmann::json& j, DatasetDescriptor& d) {
  DatasetDescriptor def;
  d.source = j.value("source", def.source);
  d.classes = j.value("classes", def.classes);
  d.image_size = j.value("image_size", def.image_size);
  d.channels = j.value("channels", def.channels);
  d.train_per_class = j.value("train_per_class", def.train_per_class);
  d.test_per_class = j.value("test_per_class", def.test_per_class);
  d.seed = j.value("seed", def.seed);
  d.root = j.value("root", def.root);
  d.train_count = j.value("train_count", def.train_count);
  d.test_count = j.value("test_count", def.test_count);
}

// ---------------------------------------------------------------------------
// Synthetic shapes

namespace {

enum class Shape { kDisk, kSquare, kTriangle, kPlus, kRing, kBar, kEll };

struct ClassStyle {
  Shape shape;
  double angle_deg;
};

// The first ten classes; classes 10..19 reuse them as hollow outlines.
constexpr ClassStyle kStyles[10] = {
    {Shape::kDisk, 0},   {Shape::kSquare, 0}, {Shape::kTriangle, 0}, {Shape::kTriangle, 180},
    {Shape::kPlus, 0},   {Shape::kPlus, 45},  {Shape::kRing, 0},     {Shape::kBar, 0},
    {Shape::kBar, 90},   {Shape::kEll, 0},
};

bool inside(Shape s, double u, double v) {
  switch (s) {
    case Shape::kDisk:
      return u * u + v * v <= 1.0;
    case Shape::kSquare:
      return std::abs(u) <= 0.8 && std::abs(v) <= 0.8;
    case Shape::kTriangle:  // apex at v = -1, base at v = 0.8
      return v <= 0.8 && v >= -1.0 && std::abs(u) <= 0.9 * (v + 1.0) / 1.8;
    case Shape::kPlus:
      return (std::abs(u) <= 0.3 && std::abs(v) <= 1.0) ||
             (std::abs(v) <= 0.3 && std::abs(u) <= 1.0);
    case Shape::kRing: {
      const double r2 = u * u + v * v;
      return r2 <= 1.0 && r2 >= 0.55 * 0.55;
    }
    case Shape::kBar:
      return std::abs(v) <= 0.3 && std::abs(u) <= 1.0;
    case Shape::kEll:
      return (u >= -0.8 && u <= -0.3 && std::abs(v) <= 0.9) ||
             (v >= 0.4 && v <= 0.9 && u >= -0.8 && u <= 0.8);
  }
  return false;
}

void render(std::span<float> out, int size, int label, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.06);
  const ClassStyle style = kStyles[label % 10];
  const bool hollow = label >= 10;
  const double s = static_cast<double>(size);
  const double cx = s / 2.0 + (unit(rng) - 0.5) * 0.3 * s;
  const double cy = s / 2.0 + (unit(rng) - 0.5) * 0.3 * s;
  const double radius = (0.28 + 0.12 * unit(rng)) * s;
  const double theta = (style.angle_deg + (unit(rng) - 0.5) * 16.0) * std::numbers::pi / 180.0;
  const double ct = std::cos(theta);
  const double st = std::sin(theta);
  double bg[3];
  double fg[3];
  for (int c = 0; c < 3; ++c) bg[c] = 0.05 + 0.4 * unit(rng);
  for (int c = 0; c < 3; ++c) fg[c] = 0.55 + 0.45 * unit(rng);

  auto covered = [&](double x, double y) {
    const double dx = (x - cx) / radius;
    const double dy = (y - cy) / radius;
    const double u = ct * dx + st * dy;
    const double v = -st * dx + ct * dy;
    if (!inside(style.shape, u, v)) return false;
    // Hollow variants keep only a band near the outline.
    return !hollow || !inside(style.shape, u / 0.6, v / 0.6);
  };

  const std::size_t plane = static_cast<std::size_t>(size) * size;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      int hits = 0;
      for (int sy = 0; sy < 3; ++sy)
        for (int sx = 0; sx < 3; ++sx)
          hits += covered(x + (sx + 0.5) / 3.0, y + (sy + 0.5) / 3.0) ? 1 : 0;
      const double a = hits / 9.0;
      for (int c = 0; c < 3; ++c) {
        const double v = bg[c] * (1.0 - a) + fg[c] * a + noise(rng);
        out[c * plane + y * size + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
}

ImageBatch render_split(const DatasetDescriptor& desc, std::size_t per_class,
                        std::uint64_t stream) {
  ImageBatch b;
  b.shape = {3, desc.image_size, desc.image_size};
  const std::size_t n = per_class * desc.classes;
  b.pixels.resize(n * b.shape.pixels());
  b.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % desc.classes);
    b.labels[i] = label;
    std::mt19937_64 rng(mix_seed(mix_seed(desc.seed, stream), i));
    render(b.sample(i), desc.image_size, label, rng);
  }
  return b;
}

}  // namespace

Dataset generate_synthetic(const DatasetDescriptor& desc) {
  desc.validate();
  require(desc.source == "synthetic", ErrorCode::kInvalidArgument,
          "generate_synthetic needs a synthetic descriptor", "dataset.source");
  Dataset d;
  d.classes = desc.classes;
  d.train_pool = render_split(desc, desc.train_per_class, 1);
  d.test = render_split(desc, desc.test_per_class, 2);
  return d;
}

// ---------------------------------------------------------------------------
// Local layout

ImageBatch from_hwc_u8(std::span<const std::uint8_t> bytes, std::size_t n, int height, int width,
                       int channels, std::vector<int> labels) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  const std::size_t per = plane * channels;
  require(bytes.size() == n * per, ErrorCode::kShapeMismatch, "image byte count mismatch");
  require(labels.size() == n, ErrorCode::kShapeMismatch,
          "label count " + std::to_string(labels.size()) + " does not match image count " +
              std::to_string(n));
  ImageBatch b;
  b.shape = {channels, height, width};
  b.pixels.resize(n * per);
  b.labels = std::move(labels);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < plane; ++p)
      for (int c = 0; c < channels; ++c)
        b.pixels[i * per + c * plane + p] = bytes[i * per + p * channels + c] / 255.0f;
  return b;
}

std::vector<std::uint8_t> to_hwc_u8(const ImageBatch& batch) {
  const std::size_t plane = static_cast<std::size_t>(batch.shape.height) * batch.shape.width;
  const int channels = batch.shape.channels;
  const std::size_t per = plane * channels;
  std::vector<std::uint8_t> out(batch.size() * per);
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (std::size_t p = 0; p < plane; ++p)
      for (int c = 0; c < channels; ++c) {
        const float v = std::clamp(batch.pixels[i * per + c * plane + p], 0.0f, 1.0f);
        out[i * per + p * channels + c] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
  return out;
}

ImageBatch read_image_file(const std::filesystem::path& images,
                           const std::filesystem::path& labels) {
  const auto img = npy::read(images);
  require(img.item_size() == 1 && img.descr.find('u') != std::string::npos, ErrorCode::kIo,
          images.string() + " must hold uint8 pixels");
  require(img.shape.size() == 4, ErrorCode::kShapeMismatch,
          images.string() + " must be N x H x W x C");
  const auto lab = npy::read(labels).as_int64();
  std::vector<int> y(lab.begin(), lab.end());
  return from_hwc_u8(img.bytes, img.shape[0], static_cast<int>(img.shape[1]),
                     static_cast<int>(img.shape[2]), static_cast<int>(img.shape[3]), std::move(y));
}

void write_image_file(const ImageBatch& batch, const std::filesystem::path& images,
                      const std::filesystem::path& labels) {
  npy::write_u8(images,
                {batch.size(), static_cast<std::size_t>(batch.shape.height),
                 static_cast<std::size_t>(batch.shape.width),
                 static_cast<std::size_t>(batch.shape.channels)},
                to_hwc_u8(batch));
  npy::write_i64(labels, std::vector<std::int64_t>(batch.labels.begin(), batch.labels.end()));
}

Dataset load_local(const DatasetDescriptor& desc) {
  desc.validate();
  const std::filesystem::path root(desc.root);
  Dataset d;
  d.classes = desc.classes;
  d.train_pool = read_image_file(root / "train_images.npy", root / "train_labels.npy");
  d.test = read_image_file(root / "test_images.npy", root / "test_labels.npy");
  if (desc.train_count > 0 && desc.train_count < d.train_pool.size())
    d.train_pool = d.train_pool.slice(0, desc.train_count);
  if (desc.test_count > 0 && desc.test_count < d.test.size())
    d.test = d.test.slice(0, desc.test_count);
  d.train_pool.validate(d.classes);
  d.test.validate(d.classes);
  const ImageShape expect{desc.channels, desc.image_size, desc.image_size};
  require(d.train_pool.shape == expect && d.test.shape == expect, ErrorCode::kShapeMismatch,
          "local images do not match the descriptor's image size/channels", "dataset.image_size");
  return d;
}

Dataset load_dataset(const DatasetDescriptor& desc) {
  return desc.source == "synthetic" ? generate_synthetic(desc) : load_local(desc);
}

void materialize(const Dataset& data, const std::filesystem::path& root) {
  std::filesystem::create_directories(root);
  write_image_file(data.train_pool, root / "train_images.npy", root / "train_labels.npy");
  write_image_file(data.test, root / "test_images.npy", root / "test_labels.npy");
}

}  // namespace selekt
