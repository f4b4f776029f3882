#pragma once

// Field dumps. Binary layout, all little-endian:
//   "TMA1" | u32 d | d x u64 sizes | prod(sizes) x f64 values (row-major)
// plus a CSV flavour (coordinates then value) for plotting tools.

#include "torus_ma/grid.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace torus_ma {

class FieldIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::array<char, 4> kDumpMagic{'T', 'M', 'A', '1'};

namespace detail {

template <class T>
void put_le(std::string& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> b;
  std::memcpy(b.data(), &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
  out.append(b.data(), b.size());
}

template <class T>
T get_le(const std::string& in, std::size_t& at) {
  if (in.size() - at < sizeof(T)) throw FieldIoError("truncated field dump");
  std::array<char, sizeof(T)> b;
  std::memcpy(b.data(), in.data() + at, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
  at += sizeof(T);
  T v;
  std::memcpy(&v, b.data(), sizeof(T));
  return v;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FieldIoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FieldIoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FieldIoError("write failed for " + path.string());
}

}  // namespace detail

inline std::string encode_dump(const ScalarField& f) {
  const auto& sizes = f.grid().sizes();
  std::string out(kDumpMagic.begin(), kDumpMagic.end());
  out.reserve(8 + 8 * sizes.size() + 8 * f.size());
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(sizes.size()));
  for (int n : sizes) detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(n));
  for (double v : f.values()) detail::put_le<double>(out, v);
  return out;
}

inline ScalarField decode_dump(const std::string& bytes) {
  if (bytes.size() < 8 || !std::equal(kDumpMagic.begin(), kDumpMagic.end(), bytes.begin()))
    throw FieldIoError("not a TMA1 field dump");
  std::size_t at = 4;
  const auto d = detail::get_le<std::uint32_t>(bytes, at);
  if (d < 1 || d > static_cast<std::uint32_t>(TorusGrid::kMaxDim))
    throw FieldIoError("field dump dimension out of range: " + std::to_string(d));
  std::vector<int> sizes;
  for (std::uint32_t a = 0; a < d; ++a) {
    const auto n = detail::get_le<std::uint64_t>(bytes, at);
    if (n > static_cast<std::uint64_t>(std::numeric_limits<int>::max()))
      throw FieldIoError("field dump size out of range");
    sizes.push_back(static_cast<int>(n));
  }
  TorusGrid g = [&] {
    try {
      return TorusGrid(sizes);
    } catch (const GridError& e) {
      throw FieldIoError(std::string("field dump has an invalid grid: ") + e.what());
    }
  }();
  if (bytes.size() - at != 8 * g.total())
    throw FieldIoError("field dump payload length does not match its header");
  ScalarField f(g);
  for (std::size_t i = 0; i < g.total(); ++i) f[i] = detail::get_le<double>(bytes, at);
  return f;
}

inline void save_dump(const ScalarField& f, const std::filesystem::path& path) {
  detail::write_file(path, encode_dump(f));
}

inline ScalarField load_dump(const std::filesystem::path& path) { return decode_dump(detail::read_file(path)); }

/// One row per grid point: the d coordinates, then the value, at full
/// round-trip precision.
inline void save_csv(const ScalarField& f, const std::filesystem::path& path,
                     const std::vector<std::string>& coordinate_names = {}) {
  const TorusGrid& g = f.grid();
  std::ostringstream out;
  out << std::setprecision(17);
  for (int a = 0; a < g.dim(); ++a)
    out << (a < static_cast<int>(coordinate_names.size()) ? coordinate_names[a] : "x" + std::to_string(a))
        << ',';
  out << "value\n";
  for (std::size_t i = 0; i < g.total(); ++i) {
    for (int a = 0; a < g.dim(); ++a) out << g.coordinate(i, a) << ',';
    out << f[i] << '\n';
  }
  detail::write_file(path, out.str());
}

}  // namespace torus_ma
