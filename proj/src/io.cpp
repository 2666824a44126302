#include "sgm/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "sgm/error.hpp"

namespace sgm::io {

namespace {

template <typename U>
void put_le(std::ostream& out, U v) {
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), sizeof(U));
  if (!out) throw IoError("write failed");
}

template <typename U>
U get_le(std::istream& in) {
  unsigned char buf[sizeof(U)];
  in.read(reinterpret_cast<char*>(buf), sizeof(U));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(U))) throw IoError("unexpected end of file");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

constexpr std::uint64_t kMaxEntries = std::uint64_t{1} << 34;

}  // namespace

void write_u32(std::ostream& out, std::uint32_t v) { put_le(out, v); }
void write_u64(std::ostream& out, std::uint64_t v) { put_le(out, v); }
void write_f64(std::ostream& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }
std::uint32_t read_u32(std::istream& in) { return get_le<std::uint32_t>(in); }
std::uint64_t read_u64(std::istream& in) { return get_le<std::uint64_t>(in); }
double read_f64(std::istream& in) { return std::bit_cast<double>(get_le<std::uint64_t>(in)); }

void write_samples(const std::string& path, const RowMat& x) {
  auto out = open_out(path);
  write_u64(out, static_cast<std::uint64_t>(x.rows()));
  write_u64(out, static_cast<std::uint64_t>(x.cols()));
  for (Eigen::Index i = 0; i < x.size(); ++i) write_f64(out, x.data()[i]);
}

RowMat read_samples(const std::string& path) {
  auto in = open_in(path);
  const auto n = read_u64(in);
  const auto d = read_u64(in);
  if (n == 0 || d == 0 || n * d > kMaxEntries) throw IoError(path + ": bad sample header");
  RowMat x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = read_f64(in);
  return x;
}

void write_matrix(const std::string& path, const Mat& m) {
  if (m.rows() != m.cols()) throw ShapeError("matrix file holds square matrices only");
  auto out = open_out(path);
  write_u64(out, static_cast<std::uint64_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) write_f64(out, m(i, j));
}

Mat read_matrix(const std::string& path) {
  auto in = open_in(path);
  const auto d = read_u64(in);
  if (d == 0 || d * d > kMaxEntries) throw IoError(path + ": bad matrix header");
  Mat m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = read_f64(in);
  return m;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_text(const std::string& path, const std::string& content) {
  auto out = open_out(path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed: " + path);
}

std::string read_text(const std::string& path) {
  auto in = open_in(path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int Csv::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

Csv read_csv(const std::string& path) {
  std::istringstream in(read_text(path));
  Csv csv;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(s);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  if (!std::getline(in, line)) throw IoError(path + ": empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  csv.header = split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    std::vector<double> row(csv.header.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t j = 0; j < cells.size() && j < row.size(); ++j) {
      const auto& c = cells[j];
      if (c.empty() || c == "nan") continue;
      if (c == "inf" || c == "-inf") {
        row[j] = c[0] == '-' ? -std::numeric_limits<double>::infinity()
                             : std::numeric_limits<double>::infinity();
        continue;
      }
      double v = 0.0;
      auto res = std::from_chars(c.data(), c.data() + c.size(), v);
      if (res.ec != std::errc() || res.ptr != c.data() + c.size())
        throw IoError(path + ":" + std::to_string(lineno) + ": not a number: " + c);
      row[j] = v;
    }
    csv.rows.push_back(std::move(row));
  }
  return csv;
}

}  // namespace sgm::io
