#pragma once

#include <cstdint>
#include <limits>
#include <optional>

#include "amrf/types.hpp"

namespace amrf {

/// Dense M x N measurement operator with unit-norm columns.
///
/// Construction normalizes every column, caches the diagonal of A^T A, and
/// caches the full Gram matrix when N does not exceed `gram_cap`.
class SensingMatrix {
 public:
  static constexpr Index kDefaultGramCap = 4096;

  explicit SensingMatrix(Matrix entries, Index gram_cap = kDefaultGramCap);

  Index rows() const { return entries_.rows(); }
  Index cols() const { return entries_.cols(); }
  const Matrix& entries() const { return entries_; }
  const Vector& gram_diag() const { return gram_diag_; }
  bool has_gram() const { return gram_.has_value(); }
  /// Cached A^T A. Throws CapacityError if N exceeded the cap.
  const Matrix& gram() const;

  Vector apply(const Vector& x) const;
  Vector apply_transpose(const Vector& r) const;

 private:
  Matrix entries_;
  Vector gram_diag_;
  std::optional<Matrix> gram_;
};

/// Noise-free sentinel for `Measurement::snr_db`.
inline constexpr double kNoiseless = std::numeric_limits<double>::infinity();

struct Measurement {
  Vector y;
  double snr_db = kNoiseless;
  double true_noise_variance = 0.0;

  bool noiseless() const { return snr_db == kNoiseless; }
};

/// i.i.d. +-1 entries with equal probability, columns scaled to unit norm.
SensingMatrix gen_bernoulli_matrix(Index m, Index n, std::uint64_t seed);

/// A x.
Vector measure(const SensingMatrix& a, const Vector& x);

/// y + n, n ~ N(0, s^2 I) with s^2 = (|y|^2 / M) 10^(-snr_db / 10).
Measurement add_noise_snr(const Vector& y, double snr_db, std::uint64_t seed);

/// Pairwise column coherence statistics: max and mean |<a_i, a_j>| over i != j.
struct CoherenceStats {
  double max_abs = 0.0;
  double mean_abs = 0.0;
};
CoherenceStats column_coherence(const SensingMatrix& a);

}  // namespace amrf
