#include "amrf/sensing.hpp"

#include <cmath>
#include <string>

#include "amrf/error.hpp"
#include "amrf/kernels.hpp"
#include "amrf/rng.hpp"

namespace amrf {

SensingMatrix::SensingMatrix(Matrix entries, Index gram_cap) : entries_(std::move(entries)) {
  if (entries_.rows() < 1 || entries_.cols() < 1)
    throw InvalidDimension("sensing matrix must have at least one row and one column");
  for (Index j = 0; j < entries_.cols(); ++j) {
    const double norm = entries_.col(j).norm();
    if (!(norm > 0.0) || !std::isfinite(norm))
      throw NumericError("sensing matrix column " + std::to_string(j) + " has zero or non-finite norm");
    entries_.col(j) /= norm;
  }
  gram_diag_ = kernels::column_sq_norms(entries_);
  if (entries_.cols() <= gram_cap) gram_ = kernels::gram(entries_);
}

const Matrix& SensingMatrix::gram() const {
  if (!gram_) throw CapacityError("Gram matrix not cached: N exceeds the cache cap");
  return *gram_;
}

Vector SensingMatrix::apply(const Vector& x) const {
  if (x.size() != cols())
    throw InvalidDimension("measure: x has length " + std::to_string(x.size()) + ", expected " +
                           std::to_string(cols()));
  return kernels::matvec(entries_, x);
}

Vector SensingMatrix::apply_transpose(const Vector& r) const {
  if (r.size() != rows())
    throw InvalidDimension("apply_transpose: r has length " + std::to_string(r.size()) +
                           ", expected " + std::to_string(rows()));
  return kernels::matvec_t(entries_, r);
}

SensingMatrix gen_bernoulli_matrix(Index m, Index n, std::uint64_t seed) {
  if (m < 1 || n < 1) throw InvalidDimension("gen_bernoulli_matrix: m and n must be >= 1");
  Rng rng = make_rng(seed);
  std::bernoulli_distribution coin(0.5);
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  Matrix a(m, n);
  // Column-major fill so that a prefix of columns does not depend on n.
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i) a(i, j) = coin(rng) ? scale : -scale;
  return SensingMatrix(std::move(a));
}

Vector measure(const SensingMatrix& a, const Vector& x) { return a.apply(x); }

Measurement add_noise_snr(const Vector& y, double snr_db, std::uint64_t seed) {
  Measurement out;
  out.snr_db = snr_db;
  if (snr_db == kNoiseless) {
    out.y = y;
    out.true_noise_variance = 0.0;
    return out;
  }
  if (std::isnan(snr_db) || snr_db == -kNoiseless)
    throw UndefinedSnr("add_noise_snr: snr_db must be finite or the noiseless sentinel");
  if (y.size() == 0) throw InvalidDimension("add_noise_snr: empty measurement");
  const double power = y.squaredNorm() / static_cast<double>(y.size());
  if (power == 0.0) throw UndefinedSnr("add_noise_snr: SNR is undefined for a zero signal");
  const double variance = power * std::pow(10.0, -snr_db / 10.0);
  Rng rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(variance));
  out.y = y;
  for (Index i = 0; i < out.y.size(); ++i) out.y[i] += gauss(rng);
  out.true_noise_variance = variance;
  return out;
}

CoherenceStats column_coherence(const SensingMatrix& a) {
  CoherenceStats stats;
  const Matrix g = a.has_gram() ? a.gram() : kernels::gram(a.entries());
  const Index n = g.cols();
  double sum = 0.0;
  std::size_t count = 0;
  for (Index q = 1; q < n; ++q)
    for (Index p = 0; p < q; ++p) {
      const double c = std::abs(g(p, q));
      stats.max_abs = std::max(stats.max_abs, c);
      sum += c;
      ++count;
    }
  stats.mean_abs = count ? sum / static_cast<double>(count) : 0.0;
  return stats;
}

}  // namespace amrf
