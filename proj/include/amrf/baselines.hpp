#pragma once

#include "amrf/sensing.hpp"

namespace amrf {

struct OmpResult {
  Vector x;
  std::vector<Index> atoms;  // in selection order
  std::vector<double> residual_norms;  // after each step, starting with |y|
};

/// Orthogonal matching pursuit: pick the column most correlated with the
/// residual (lowest index on ties), refit least squares on the active set,
/// stop after k_max atoms or once |residual| < resid_tol.
OmpResult omp(const SensingMatrix& a, const Vector& y, Index k_max, double resid_tol);

}  // namespace amrf
