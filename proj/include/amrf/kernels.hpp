#pragma once

#include <span>

#include "amrf/types.hpp"

// Dense kernels used by the recovery loop. Each kernel has a serial reference
// and an OpenMP version. Every output entry is accumulated by exactly one
// thread in a fixed order, so both versions are bitwise identical for any
// thread count.
namespace amrf::kernels {

namespace serial {
Vector matvec(const Matrix& a, const Vector& x);
Vector matvec_t(const Matrix& a, const Vector& r);
Matrix gram(const Matrix& a);
Vector column_sq_norms(const Matrix& a);
/// shift * I + sum_k w[k] * a.col(cols[k]) * a.col(cols[k])^T
Matrix shifted_outer(const Matrix& a, std::span<const Index> cols,
                     std::span<const double> w, double shift);
}  // namespace serial

namespace parallel {
Vector matvec(const Matrix& a, const Vector& x);
Vector matvec_t(const Matrix& a, const Vector& r);
Matrix gram(const Matrix& a);
Vector column_sq_norms(const Matrix& a);
Matrix shifted_outer(const Matrix& a, std::span<const Index> cols,
                     std::span<const double> w, double shift);
}  // namespace parallel

// Dispatching entry points: parallel above a work threshold, serial below.
Vector matvec(const Matrix& a, const Vector& x);
Vector matvec_t(const Matrix& a, const Vector& r);
Matrix gram(const Matrix& a);
Vector column_sq_norms(const Matrix& a);
Matrix shifted_outer(const Matrix& a, std::span<const Index> cols,
                     std::span<const double> w, double shift);

/// Work (multiply-adds) above which the dispatchers go parallel.
inline constexpr double kParallelWork = 1 << 16;

}  // namespace amrf::kernels
