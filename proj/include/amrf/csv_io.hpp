#pragma once

#include <filesystem>
#include <iosfwd>

#include "amrf/types.hpp"

// Plain ASCII matrices: one row per line, comma separated, no header.
// A vector is a single-column file.
namespace amrf::csv {

Matrix read_matrix(std::istream& in);
Matrix read_matrix(const std::filesystem::path& path);
Vector read_vector(const std::filesystem::path& path);

void write_matrix(std::ostream& out, const Matrix& m);
void write_matrix(const std::filesystem::path& path, const Matrix& m);
void write_vector(std::ostream& out, const Vector& v);
void write_vector(const std::filesystem::path& path, const Vector& v);

/// Shortest round-trippable decimal form ("inf"/"-inf"/"nan" for non-finite).
std::string format_double(double value);

}  // namespace amrf::csv
