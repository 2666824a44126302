#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sgm/types.hpp"

namespace sgm::io {

// Little-endian primitives used by every binary format.
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f64(std::ostream& out, double v);
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
double read_f64(std::istream& in);

// Sample file: u64 n, u64 d, then n*d row-major doubles.
void write_samples(const std::string& path, const RowMat& x);
RowMat read_samples(const std::string& path);

// Dense square matrix: u64 d, then d*d row-major doubles.
void write_matrix(const std::string& path, const Mat& m);
Mat read_matrix(const std::string& path);

// Shortest round-trip text for a double, 17 significant digits, '.' decimal
// separator regardless of the global locale.
std::string format_double(double v);

void write_text(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

// Minimal CSV reader: header row plus numeric columns ("" parses as NaN).
struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  // Index of a column by name, or -1.
  int column(const std::string& name) const;
};

Csv read_csv(const std::string& path);

}  // namespace sgm::io
