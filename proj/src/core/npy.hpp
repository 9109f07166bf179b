#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace selekt::npy {

// A C-order array read from a .npy file. Only integer dtypes are supported.
struct Array {
  std::string descr;  // e.g. "|u1", "<i8"
  std::vector<std::size_t> shape;
  std::vector<std::uint8_t> bytes;

  std::size_t count() const;
  std::size_t item_size() const;
  // Widens any supported integer dtype to int64.
  std::vector<std::int64_t> as_int64() const;
};

Array read(const std::filesystem::path& path);
// Reads only the header; returns the array with empty bytes.
Array read_header(const std::filesystem::path& path);

void write_u8(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
              const std::vector<std::uint8_t>& data);
void write_i64(const std::filesystem::path& path, const std::vector<std::int64_t>& data);

}  // namespace selekt::npy
