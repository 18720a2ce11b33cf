#include "amrf/transforms.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "amrf/csv_io.hpp"
#include "amrf/error.hpp"

namespace amrf {

Vector vectorize(const ImageGrid& img) {
  Vector v(img.size());
  for (Index r = 0; r < img.height(); ++r)
    for (Index c = 0; c < img.width(); ++c) v[r * img.width() + c] = img.pixels(r, c);
  return v;
}

ImageGrid devectorize(const Vector& v, Index height, Index width, double peak) {
  if (height < 1 || width < 1 || v.size() != height * width)
    throw InvalidDimension("devectorize: vector length " + std::to_string(v.size()) +
                           " does not match " + std::to_string(height) + "x" +
                           std::to_string(width));
  ImageGrid img{Matrix(height, width), peak};
  for (Index r = 0; r < height; ++r)
    for (Index c = 0; c < width; ++c) img.pixels(r, c) = v[r * width + c];
  return img;
}

Matrix dct_matrix(Index n) {
  Matrix d(n, n);
  const double pi = std::numbers::pi;
  for (Index k = 0; k < n; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
    for (Index i = 0; i < n; ++i)
      d(k, i) = scale * std::cos(pi * (2.0 * i + 1.0) * k / (2.0 * n));
  }
  return d;
}

Vector dct2_forward(const ImageGrid& img) {
  if (img.size() == 0) throw InvalidDimension("dct2: empty image");
  const Matrix coeffs = dct_matrix(img.height()) * img.pixels * dct_matrix(img.width()).transpose();
  return vectorize(ImageGrid{coeffs, img.peak});
}

ImageGrid dct2_inverse(const Vector& coeffs, Index height, Index width, double peak) {
  const ImageGrid c = devectorize(coeffs, height, width, peak);
  return ImageGrid{dct_matrix(height).transpose() * c.pixels * dct_matrix(width), peak};
}

namespace {

void check_haar_dims(Index height, Index width, int levels) {
  if (levels < 0) throw InvalidDimension("haar2: negative level count");
  const Index block = Index{1} << levels;
  if (height < block || width < block || height % block != 0 || width % block != 0)
    throw InvalidDimension("haar2: " + std::to_string(height) + "x" + std::to_string(width) +
                           " is not divisible by 2^" + std::to_string(levels));
}

// One analysis step on the first n entries of a strided line.
void haar_analyze(double* line, Index n, Index stride, std::vector<double>& tmp) {
  const double s = std::numbers::sqrt2 / 2.0;
  const Index half = n / 2;
  tmp.resize(n);
  for (Index k = 0; k < half; ++k) {
    const double a = line[2 * k * stride];
    const double b = line[(2 * k + 1) * stride];
    tmp[k] = (a + b) * s;
    tmp[half + k] = (a - b) * s;
  }
  for (Index k = 0; k < n; ++k) line[k * stride] = tmp[k];
}

void haar_synthesize(double* line, Index n, Index stride, std::vector<double>& tmp) {
  const double s = std::numbers::sqrt2 / 2.0;
  const Index half = n / 2;
  tmp.resize(n);
  for (Index k = 0; k < half; ++k) {
    const double lo = line[k * stride];
    const double hi = line[(half + k) * stride];
    tmp[2 * k] = (lo + hi) * s;
    tmp[2 * k + 1] = (lo - hi) * s;
  }
  for (Index k = 0; k < n; ++k) line[k * stride] = tmp[k];
}

}  // namespace

Vector haar2_forward(const ImageGrid& img, int levels) {
  check_haar_dims(img.height(), img.width(), levels);
  // Row-major copy so rows are contiguous.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m = img.pixels;
  const Index w = m.cols();
  std::vector<double> tmp;
  for (int l = 0; l < levels; ++l) {
    const Index bh = m.rows() >> l;
    const Index bw = w >> l;
    for (Index r = 0; r < bh; ++r) haar_analyze(m.data() + r * w, bw, 1, tmp);
    for (Index c = 0; c < bw; ++c) haar_analyze(m.data() + c, bh, w, tmp);
  }
  return Eigen::Map<const Vector>(m.data(), m.size());
}

ImageGrid haar2_inverse(const Vector& coeffs, Index height, Index width, int levels, double peak) {
  check_haar_dims(height, width, levels);
  if (coeffs.size() != height * width)
    throw InvalidDimension("haar2: coefficient count does not match image size");
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          coeffs.data(), height, width);
  std::vector<double> tmp;
  for (int l = levels - 1; l >= 0; --l) {
    const Index bh = height >> l;
    const Index bw = width >> l;
    for (Index c = 0; c < bw; ++c) haar_synthesize(m.data() + c, bh, width, tmp);
    for (Index r = 0; r < bh; ++r) haar_synthesize(m.data() + r * width, bw, 1, tmp);
  }
  return ImageGrid{Matrix(m), peak};
}

Basis::Basis(Matrix matrix, BasisKind kind) : matrix_(std::move(matrix)), kind_(kind) {
  if (matrix_.rows() != matrix_.cols() || matrix_.rows() == 0)
    throw InvalidBasis("basis must be a non-empty square matrix");
  const Matrix defect = matrix_.transpose() * matrix_ - Matrix::Identity(size(), size());
  const double err = defect.cwiseAbs().maxCoeff();
  if (!(err <= kOrthonormalTol))
    throw InvalidBasis("basis columns are not orthonormal (max |B^T B - I| = " +
                       std::to_string(err) + ")");
}

Basis Basis::identity(Index n) { return Basis(Matrix::Identity(n, n), BasisKind::identity); }

Basis Basis::load_csv(const std::filesystem::path& path) {
  return Basis(csv::read_matrix(path), BasisKind::pca);
}

Vector pca_apply(const Vector& signal, const Basis& basis, Direction direction) {
  if (signal.size() != basis.size())
    throw InvalidDimension("pca_apply: signal length " + std::to_string(signal.size()) +
                           " does not match basis size " + std::to_string(basis.size()));
  if (direction == Direction::forward) return basis.matrix().transpose() * signal;
  return basis.matrix() * signal;
}

namespace {

// Next header token, skipping whitespace and '#' comments.
std::string pgm_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

long pgm_int(std::istream& in) {
  const std::string tok = pgm_token(in);
  try {
    std::size_t used = 0;
    const long v = std::stol(tok, &used);
    if (used != tok.size() || v < 0) throw IoError("pgm: bad header value '" + tok + "'");
    return v;
  } catch (const std::logic_error&) {
    throw IoError("pgm: bad header value '" + tok + "'");
  }
}

}  // namespace

ImageGrid read_pgm(std::istream& in) {
  const std::string magic = pgm_token(in);
  if (magic != "P2" && magic != "P5") throw IoError("pgm: unsupported magic '" + magic + "'");
  const long width = pgm_int(in);
  const long height = pgm_int(in);
  const long maxval = pgm_int(in);
  if (width < 1 || height < 1 || maxval < 1 || maxval > 65535) throw IoError("pgm: bad header");
  ImageGrid img{Matrix(height, width), static_cast<double>(maxval)};
  for (long r = 0; r < height; ++r)
    for (long c = 0; c < width; ++c) {
      long v = 0;
      if (magic == "P2") {
        v = pgm_int(in);
      } else if (maxval < 256) {
        const int b = in.get();
        if (b == EOF) throw IoError("pgm: truncated raster");
        v = b;
      } else {
        const int hi = in.get();
        const int lo = in.get();
        if (lo == EOF) throw IoError("pgm: truncated raster");
        v = (hi << 8) | lo;
      }
      if (v > maxval) throw IoError("pgm: sample exceeds maxval");
      img.pixels(r, c) = static_cast<double>(v);
    }
  return img;
}

ImageGrid read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_pgm(in);
}

void write_pgm(std::ostream& out, const ImageGrid& img, int maxval) {
  if (maxval < 1 || maxval > 65535) throw IoError("pgm: maxval out of range");
  out << "P5\n" << img.width() << ' ' << img.height() << '\n' << maxval << '\n';
  for (Index r = 0; r < img.height(); ++r)
    for (Index c = 0; c < img.width(); ++c) {
      const double clamped = std::clamp(std::round(img.pixels(r, c)), 0.0, double(maxval));
      const int v = static_cast<int>(clamped);
      if (maxval < 256) {
        out.put(static_cast<char>(v));
      } else {
        out.put(static_cast<char>(v >> 8));
        out.put(static_cast<char>(v & 0xff));
      }
    }
}

void write_pgm(const std::filesystem::path& path, const ImageGrid& img, int maxval) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_pgm(out, img, maxval);
}

}  // namespace amrf
