#include "npy.hpp"

#include <cstring>
#include <fstream>
#include <regex>

#include "error.hpp"

namespace selekt::npy {

namespace {

constexpr char kMagic[] = "\x93NUMPY";

struct Header {
  std::string descr;
  std::vector<std::size_t> shape;
  std::size_t data_offset = 0;
};

Header parse_header(std::istream& is, const std::filesystem::path& path) {
  char magic[6];
  is.read(magic, 6);
  require(is.gcount() == 6 && std::memcmp(magic, kMagic, 6) == 0, ErrorCode::kIo,
          path.string() + " is not a .npy file");
  const int major = is.get();
  is.get();  // minor
  std::size_t len = 0;
  std::size_t prefix = 0;
  if (major == 1) {
    len = static_cast<std::size_t>(is.get()) | (static_cast<std::size_t>(is.get()) << 8);
    prefix = 10;
  } else if (major == 2 || major == 3) {
    for (int i = 0; i < 4; ++i) len |= static_cast<std::size_t>(is.get()) << (8 * i);
    prefix = 12;
  } else {
    throw Error(ErrorCode::kIo, "unsupported .npy version in " + path.string());
  }
  std::string dict(len, '\0');
  is.read(dict.data(), static_cast<std::streamsize>(len));
  require(static_cast<std::size_t>(is.gcount()) == len, ErrorCode::kIo,
          "truncated .npy header in " + path.string());

  Header h;
  h.data_offset = prefix + len;
  std::smatch m;
  static const std::regex descr_re(R"('descr'\s*:\s*'([^']+)')");
  static const std::regex order_re(R"('fortran_order'\s*:\s*(True|False))");
  static const std::regex shape_re(R"('shape'\s*:\s*\(([^)]*)\))");
  require(std::regex_search(dict, m, descr_re), ErrorCode::kIo, "no descr in " + path.string());
  h.descr = m[1];
  require(std::regex_search(dict, m, order_re) && m[1] == "False", ErrorCode::kIo,
          "fortran-order arrays are not supported: " + path.string());
  require(std::regex_search(dict, m, shape_re), ErrorCode::kIo, "no shape in " + path.string());
  const std::string dims = m[1];
  static const std::regex num_re(R"(\d+)");
  for (auto it = std::sregex_iterator(dims.begin(), dims.end(), num_re);
       it != std::sregex_iterator(); ++it)
    h.shape.push_back(std::stoull(it->str()));
  return h;
}

std::size_t item_size_of(const std::string& descr) {
  static const std::regex re(R"([<>|=]?[iu]([1248]))");
  std::smatch m;
  require(std::regex_match(descr, m, re), ErrorCode::kIo, "unsupported .npy dtype " + descr);
  require(descr[0] != '>' || m[1] == "1", ErrorCode::kIo, "big-endian .npy data is not supported");
  return std::stoul(m[1]);
}

void write_array(const std::filesystem::path& path, const std::string& descr,
                 const std::vector<std::size_t>& shape, const void* data, std::size_t bytes) {
  std::string dims;
  for (std::size_t i = 0; i < shape.size(); ++i) dims += std::to_string(shape[i]) + ", ";
  if (shape.size() > 1) dims.erase(dims.size() - 2);  // "(n,)" keeps its comma
  else if (shape.size() == 1) dims.pop_back();
  std::string dict = "{'descr': '" + descr + "', 'fortran_order': False, 'shape': (" + dims + "), }";
  // Pad so the data starts on a 64-byte boundary; the header ends in '\n'.
  const std::size_t total = 10 + dict.size() + 1;
  dict.append((64 - total % 64) % 64, ' ');
  dict.push_back('\n');
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(os), ErrorCode::kIo, "cannot write " + path.string());
  os.write(kMagic, 6);
  os.put(1);
  os.put(0);
  os.put(static_cast<char>(dict.size() & 0xff));
  os.put(static_cast<char>((dict.size() >> 8) & 0xff));
  os.write(dict.data(), static_cast<std::streamsize>(dict.size()));
  os.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  require(static_cast<bool>(os), ErrorCode::kIo, "failed writing " + path.string());
}

}  // namespace

std::size_t Array::count() const {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::size_t Array::item_size() const { return item_size_of(descr); }

std::vector<std::int64_t> Array::as_int64() const {
  const std::size_t sz = item_size();
  const bool is_signed = descr.find('i') != std::string::npos;
  std::vector<std::int64_t> out(count());
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t v = 0;
    for (std::size_t b = 0; b < sz; ++b)
      v |= static_cast<std::uint64_t>(bytes[i * sz + b]) << (8 * b);
    if (is_signed && sz < 8 && (v >> (8 * sz - 1)) & 1) v |= ~0ULL << (8 * sz);
    out[i] = static_cast<std::int64_t>(v);
  }
  return out;
}

Array read_header(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::kNotFound, "missing file " + path.string());
  auto h = parse_header(is, path);
  Array a;
  a.descr = h.descr;
  a.shape = h.shape;
  item_size_of(a.descr);
  return a;
}

Array read(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::kNotFound, "missing file " + path.string());
  auto h = parse_header(is, path);
  Array a;
  a.descr = h.descr;
  a.shape = h.shape;
  const std::size_t bytes = a.count() * a.item_size();
  a.bytes.resize(bytes);
  is.read(reinterpret_cast<char*>(a.bytes.data()), static_cast<std::streamsize>(bytes));
  require(static_cast<std::size_t>(is.gcount()) == bytes, ErrorCode::kIo,
          "truncated .npy data in " + path.string());
  return a;
}

void write_u8(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
              const std::vector<std::uint8_t>& data) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  require(n == data.size(), ErrorCode::kShapeMismatch, "shape does not match data size");
  write_array(path, "|u1", shape, data.data(), data.size());
}

void write_i64(const std::filesystem::path& path, const std::vector<std::int64_t>& data) {
  std::vector<std::uint8_t> bytes(data.size() * 8);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto v = static_cast<std::uint64_t>(data[i]);
    for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<std::uint8_t>(v >> (8 * b));
  }
  write_array(path, "<i8", {data.size()}, bytes.data(), bytes.size());
}

}  // namespace selekt::npy
