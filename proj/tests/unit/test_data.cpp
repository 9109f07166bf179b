#include <doctest.h>

#include <cstring>
#include <fstream>
#include <random>

#include "common/oracles.hpp"
#include "core/data.hpp"
#include "core/error.hpp"
#include "core/npy.hpp"

using namespace selekt;

namespace {

DatasetDescriptor small_desc() {
  DatasetDescriptor d;
  d.classes = 4;
  d.image_size = 16;
  d.train_per_class = 25;
  d.test_per_class = 5;
  return d;
}

// Writes a version 1.0 .npy file byte by byte.
void write_raw_npy(const std::filesystem::path& path, const std::string& dict,
                   const std::vector<std::uint8_t>& data) {
  std::string header = dict;
  const std::size_t total = 10 + header.size() + 1;
  header.append((64 - total % 64) % 64, ' ');
  header.push_back('\n');
  std::ofstream os(path, std::ios::binary);
  os.write("\x93NUMPY\x01\x00", 8);
  const std::uint16_t len = static_cast<std::uint16_t>(header.size());
  const char le[2] = {static_cast<char>(len & 0xff), static_cast<char>(len >> 8)};
  os.write(le, 2);
  os << header;
  os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

}  // namespace

TEST_CASE("synthetic dataset counts, balance and range") {
  const auto d = generate_synthetic(small_desc());
  CHECK(d.classes == 4);
  CHECK(d.train_pool.size() == 100);
  CHECK(d.test.size() == 20);
  CHECK(d.train_pool.shape == ImageShape{3, 16, 16});
  for (std::size_t i = 0; i < d.train_pool.size(); ++i)
    CHECK(d.train_pool.labels[i] == static_cast<int>(i % 4));
  CHECK_NOTHROW(d.train_pool.validate(4));
  CHECK_NOTHROW(d.test.validate(4));
}

TEST_CASE("synthetic dataset is deterministic per seed") {
  const auto a = generate_synthetic(small_desc());
  const auto b = generate_synthetic(small_desc());
  CHECK(a.train_pool.pixels == b.train_pool.pixels);
  CHECK(a.test.pixels == b.test.pixels);
  auto other = small_desc();
  other.seed = 99;
  CHECK(generate_synthetic(other).train_pool.pixels != a.train_pool.pixels);
  // Train and test images are distinct draws.
  CHECK(!std::equal(a.test.pixels.begin(), a.test.pixels.end(), a.train_pool.pixels.begin()));
}

TEST_CASE("class-conditional structure is present") {
  // Mean images of different classes differ more than two halves of one class.
  auto desc = small_desc();
  desc.train_per_class = 200;
  const auto d = generate_synthetic(desc);
  const std::size_t px = d.train_pool.shape.pixels();
  auto class_mean = [&](int c, int half) {
    std::vector<double> m(px, 0.0);
    int n = 0;
    for (std::size_t i = 0; i < d.train_pool.size(); ++i) {
      if (d.train_pool.labels[i] != c || static_cast<int>(i / 4 % 2) != half) continue;
      const auto s = d.train_pool.sample(i);
      for (std::size_t k = 0; k < px; ++k) m[k] += s[k];
      ++n;
    }
    for (auto& v : m) v /= n;
    return m;
  };
  auto dist = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  };
  const double within = dist(class_mean(0, 0), class_mean(0, 1));
  const double between = dist(class_mean(0, 0), class_mean(1, 0));
  CHECK(between > 1.5 * within);
}

TEST_CASE("descriptor validation") {
  auto d = small_desc();
  d.image_size = 15;
  try {
    d.validate();
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.field() == "dataset.image_size");
  }
  d = small_desc();
  d.classes = 21;
  CHECK_THROWS_AS(d.validate(), Error);
  d = small_desc();
  d.source = "web";
  CHECK_THROWS_AS(d.validate(), Error);
  d = small_desc();
  d.source = "local_cifar_style";
  CHECK_THROWS_AS(d.validate(), Error);
}

TEST_CASE("local layout round trip") {
  oracle::TempDir dir("local");
  auto desc = small_desc();
  const auto d = generate_synthetic(desc);
  materialize(d, dir.path);
  desc.source = "local_cifar_style";
  desc.root = dir.path.string();
  const auto back = load_local(desc);
  CHECK(back.train_pool.labels == d.train_pool.labels);
  CHECK(back.test.labels == d.test.labels);
  REQUIRE(back.train_pool.pixels.size() == d.train_pool.pixels.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < d.train_pool.pixels.size(); ++i)
    worst = std::max(worst, static_cast<double>(
                                std::abs(back.train_pool.pixels[i] - d.train_pool.pixels[i])));
  CHECK(worst <= 0.5 / 255.0 + 1e-7);

  desc.train_count = 10;
  desc.test_count = 3;
  const auto sub = load_local(desc);
  CHECK(sub.train_pool.size() == 10);
  CHECK(sub.test.size() == 3);
}

TEST_CASE("hundred-image file round trip is exact for uint8 values") {
  oracle::TempDir dir("hundred");
  std::mt19937_64 rng(3);
  std::vector<std::uint8_t> bytes(100 * 8 * 8 * 3);
  for (auto& b : bytes) b = static_cast<std::uint8_t>(rng() % 256);
  std::vector<int> labels(100);
  for (int i = 0; i < 100; ++i) labels[i] = i % 10;
  const auto batch = from_hwc_u8(bytes, 100, 8, 8, 3, labels);
  CHECK(to_hwc_u8(batch) == bytes);
  write_image_file(batch, dir.path / "x.npy", dir.path / "y.npy");
  const auto back = read_image_file(dir.path / "x.npy", dir.path / "y.npy");
  CHECK(back.pixels == batch.pixels);
  CHECK(back.labels == labels);
  // Channel planes come from interleaved bytes.
  CHECK(batch.pixels[64] == bytes[1] / 255.0f);
}

TEST_CASE("label count must match image count") {
  oracle::TempDir dir("labels");
  std::vector<std::uint8_t> bytes(100 * 4 * 4 * 3, 7);
  npy::write_u8(dir.path / "x.npy", {100, 4, 4, 3}, bytes);
  npy::write_i64(dir.path / "y.npy", std::vector<std::int64_t>(99, 0));
  try {
    read_image_file(dir.path / "x.npy", dir.path / "y.npy");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kShapeMismatch);
  }
}

TEST_CASE("npy reader against hand-written files") {
  oracle::TempDir dir("npy");
  SUBCASE("little-endian int32") {
    std::vector<std::uint8_t> data;
    for (std::int32_t v : {1, -2, 300}) {
      std::uint8_t b[4];
      std::memcpy(b, &v, 4);
      data.insert(data.end(), b, b + 4);
    }
    write_raw_npy(dir.path / "a.npy", "{'descr': '<i4', 'fortran_order': False, 'shape': (3,), }",
                  data);
    const auto a = npy::read(dir.path / "a.npy");
    CHECK(a.shape == std::vector<std::size_t>{3});
    CHECK(a.as_int64() == std::vector<std::int64_t>{1, -2, 300});
  }
  SUBCASE("uint8 image block") {
    std::vector<std::uint8_t> data(2 * 2 * 2 * 3);
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<std::uint8_t>(i);
    write_raw_npy(dir.path / "b.npy",
                  "{'descr': '|u1', 'fortran_order': False, 'shape': (2, 2, 2, 3), }", data);
    const auto b = npy::read(dir.path / "b.npy");
    CHECK(b.shape == std::vector<std::size_t>{2, 2, 2, 3});
    CHECK(b.bytes == data);
  }
  SUBCASE("fortran order is rejected") {
    write_raw_npy(dir.path / "c.npy", "{'descr': '|u1', 'fortran_order': True, 'shape': (2,), }",
                  {1, 2});
    CHECK_THROWS_AS(npy::read(dir.path / "c.npy"), Error);
  }
  SUBCASE("float dtype is rejected") {
    write_raw_npy(dir.path / "d.npy", "{'descr': '<f4', 'fortran_order': False, 'shape': (1,), }",
                  {0, 0, 0, 0});
    CHECK_THROWS_AS(npy::read(dir.path / "d.npy").as_int64(), Error);
  }
  SUBCASE("truncated data") {
    write_raw_npy(dir.path / "e.npy", "{'descr': '|u1', 'fortran_order': False, 'shape': (8,), }",
                  {1, 2, 3});
    CHECK_THROWS_AS(npy::read(dir.path / "e.npy"), Error);
  }
  SUBCASE("missing file") {
    try {
      npy::read(dir.path / "none.npy");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kNotFound);
    }
  }
}

TEST_CASE("descriptor json round trip") {
  auto d = small_desc();
  nlohmann::json j = d;
  CHECK_FALSE(j.contains("root"));
  auto back = j.get<DatasetDescriptor>();
  CHECK(back.classes == d.classes);
  CHECK(back.train_per_class == d.train_per_class);
  d.source = "local_cifar_style";
  d.root = "/data";
  d.test_count = 7;
  j = d;
  CHECK_FALSE(j.contains("seed"));
  back = j.get<DatasetDescriptor>();
  CHECK(back.root == d.root);
  CHECK(back.test_count == 7);
}
