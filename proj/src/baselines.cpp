#include "amrf/baselines.hpp"

#include <cmath>
#include <string>

#include "amrf/error.hpp"

namespace amrf {

OmpResult omp(const SensingMatrix& a, const Vector& y, Index k_max, double resid_tol) {
  if (y.size() != a.rows()) throw InvalidDimension("omp: measurement length does not match M");
  if (k_max < 1 || k_max > a.rows())
    throw CapacityError("omp: k_max = " + std::to_string(k_max) + " must lie in [1, M = " +
                        std::to_string(a.rows()) + "]");
  OmpResult out;
  out.x = Vector::Zero(a.cols());
  Vector r = y;
  Vector coef;
  std::vector<bool> used(static_cast<std::size_t>(a.cols()), false);
  out.residual_norms.push_back(r.norm());

  while (static_cast<Index>(out.atoms.size()) < k_max && r.norm() >= resid_tol) {
    const Vector corr = a.apply_transpose(r);
    Index best = -1;
    double best_val = 0.0;
    for (Index j = 0; j < corr.size(); ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      if (std::abs(corr[j]) > best_val) {
        best_val = std::abs(corr[j]);
        best = j;
      }
    }
    if (best < 0) break;  // residual orthogonal to every remaining atom
    used[static_cast<std::size_t>(best)] = true;
    out.atoms.push_back(best);

    Matrix as(a.rows(), static_cast<Index>(out.atoms.size()));
    for (std::size_t k = 0; k < out.atoms.size(); ++k) as.col(static_cast<Index>(k)) = a.entries().col(out.atoms[k]);
    coef = as.colPivHouseholderQr().solve(y);
    r = y - as * coef;
    out.residual_norms.push_back(r.norm());
  }
  for (std::size_t k = 0; k < out.atoms.size(); ++k) out.x[out.atoms[k]] = coef[static_cast<Index>(k)];
  return out;
}

}  // namespace amrf
