#pragma once

#include <filesystem>
#include <iosfwd>

#include "amrf/types.hpp"

namespace amrf {

/// Grayscale image. `pixels` is height x width; vectorization is row-major
/// raster order: pixel (r, c) maps to index r * width + c.
struct ImageGrid {
  Matrix pixels;
  double peak = 255.0;

  Index height() const { return pixels.rows(); }
  Index width() const { return pixels.cols(); }
  Index size() const { return pixels.size(); }
};

Vector vectorize(const ImageGrid& img);
ImageGrid devectorize(const Vector& v, Index height, Index width, double peak = 255.0);

enum class Direction { forward, inverse };

// Orthonormal separable type-II DCT.
Vector dct2_forward(const ImageGrid& img);
ImageGrid dct2_inverse(const Vector& coeffs, Index height, Index width, double peak = 255.0);
/// Orthonormal DCT-II matrix of size n (rows are frequencies).
Matrix dct_matrix(Index n);

// Orthonormal multi-level 2-D Haar transform in the usual Mallat layout:
// each level transforms the current top-left approximation block, rows first.
Vector haar2_forward(const ImageGrid& img, int levels);
ImageGrid haar2_inverse(const Vector& coeffs, Index height, Index width, int levels,
                        double peak = 255.0);

enum class BasisKind { dct, haar, pca, identity };

/// Synthesis basis: signal = matrix * coefficients. Columns are orthonormal.
class Basis {
 public:
  static constexpr double kOrthonormalTol = 1e-8;

  /// Validates orthonormality; throws InvalidBasis on failure.
  Basis(Matrix matrix, BasisKind kind);

  static Basis identity(Index n);
  static Basis load_csv(const std::filesystem::path& path);

  const Matrix& matrix() const { return matrix_; }
  BasisKind kind() const { return kind_; }
  Index size() const { return matrix_.cols(); }

 private:
  Matrix matrix_;
  BasisKind kind_;
};

Vector pca_apply(const Vector& signal, const Basis& basis, Direction direction);

// PGM (P2 ascii or P5 binary) input; P5 output with pixels rounded and clamped to [0, maxval].
ImageGrid read_pgm(std::istream& in);
ImageGrid read_pgm(const std::filesystem::path& path);
void write_pgm(std::ostream& out, const ImageGrid& img, int maxval = 255);
void write_pgm(const std::filesystem::path& path, const ImageGrid& img, int maxval = 255);

}  // namespace amrf
