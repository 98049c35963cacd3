#pragma once
// File containers. Dense matrices travel in a fixed binary layout:
//   bytes 0..7   magic "ROMXMAT1"
//   bytes 8..15  rows, little-endian uint64
//   bytes 16..23 cols, little-endian uint64
//   then rows*cols IEEE-754 doubles, column-major, little-endian
// CSV numbers are printed with 17 significant digits so a rerun with the same
// seeds reproduces the files byte for byte.

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace supgrom {

inline constexpr char kMatMagic[8] = {'R', 'O', 'M', 'X', 'M', 'A', 'T', '1'};

namespace detail {

inline void put_u64_le(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t get_u64_le(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void put_f64_le(std::ostream& os, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64_le(os, v);
}

inline double get_f64_le(std::istream& is) {
  std::uint64_t v = get_u64_le(is);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

}  // namespace detail

inline void write_mat(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_mat: cannot open " + path.string());
  os.write(kMatMagic, 8);
  detail::put_u64_le(os, static_cast<std::uint64_t>(m.rows()));
  detail::put_u64_le(os, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) detail::put_f64_le(os, m(i, j));
  if (!os) throw std::runtime_error("write_mat: write failed for " + path.string());
}

inline Eigen::MatrixXd read_mat(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_mat: cannot open " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMatMagic, 8) != 0)
    throw std::runtime_error("read_mat: bad magic in " + path.string());
  std::uint64_t rows = detail::get_u64_le(is);
  std::uint64_t cols = detail::get_u64_le(is);
  if (rows > (1u << 30) || cols > (1u << 30))
    throw std::runtime_error("read_mat: implausible dimensions in " + path.string());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = detail::get_f64_le(is);
  if (!is) throw std::runtime_error("read_mat: truncated file " + path.string());
  return m;
}

// shortest-faithful double formatting ("%.17g" round-trips exactly)
inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_text_file: cannot open " + path.string());
  os << text;
  if (!os) throw std::runtime_error("write_text_file: write failed for " + path.string());
}

}  // namespace supgrom
