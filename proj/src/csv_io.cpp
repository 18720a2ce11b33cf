#include "amrf/csv_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "amrf/error.hpp"

namespace amrf::csv {

namespace {

double parse_field(std::string_view field, std::size_t line_no) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
    field.remove_suffix(1);
  if (field.empty()) throw IoError("csv: empty field on line " + std::to_string(line_no));
  // strtod accepts inf/nan spellings, from_chars for doubles is incomplete on older toolchains.
  std::string tmp(field);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size())
    throw IoError("csv: bad number '" + tmp + "' on line " + std::to_string(line_no));
  return v;
}

}  // namespace

Matrix read_matrix(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      row.push_back(parse_field(rest.substr(0, comma), line_no));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError("csv: ragged row on line " + std::to_string(line_no));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("csv: no data");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  return m;
}

Matrix read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_matrix(in);
}

Vector read_vector(const std::filesystem::path& path) {
  Matrix m = read_matrix(path);
  if (m.cols() != 1) {
    if (m.rows() == 1) return m.row(0).transpose();
    throw InvalidDimension(path.string() + ": expected a single-column vector");
  }
  return m.col(0);
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) throw IoError("format_double failed");
  return std::string(buf, ptr);
}

void write_matrix(std::ostream& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

void write_matrix(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_matrix(out, m);
}

void write_vector(std::ostream& out, const Vector& v) { write_matrix(out, Matrix(v)); }

void write_vector(const std::filesystem::path& path, const Vector& v) {
  write_matrix(path, Matrix(v));
}

}  // namespace amrf::csv
