#include "amrf/kernels.hpp"

#include <omp.h>

namespace amrf::kernels {

namespace {

inline double row_dot(const Matrix& a, Index row, const Vector& x) {
  double acc = 0.0;
  for (Index j = 0; j < a.cols(); ++j) acc += a(row, j) * x[j];
  return acc;
}

inline double col_dot(const Matrix& a, Index col, const Vector& r) {
  const double* c = a.col(col).data();
  double acc = 0.0;
  for (Index i = 0; i < a.rows(); ++i) acc += c[i] * r[i];
  return acc;
}

inline double col_col_dot(const Matrix& a, Index p, Index q) {
  const double* cp = a.col(p).data();
  const double* cq = a.col(q).data();
  double acc = 0.0;
  for (Index i = 0; i < a.rows(); ++i) acc += cp[i] * cq[i];
  return acc;
}

// Column q of the shifted outer product; the inner loop order over k is fixed.
inline void outer_column(const Matrix& a, std::span<const Index> cols,
                         std::span<const double> w, double shift, Index q,
                         Matrix& out) {
  double* o = out.col(q).data();
  const Index m = a.rows();
  for (Index p = 0; p < m; ++p) o[p] = 0.0;
  o[q] = shift;
  for (std::size_t k = 0; k < cols.size(); ++k) {
    const double* c = a.col(cols[k]).data();
    const double coef = w[k] * c[q];
    if (coef == 0.0) continue;
    for (Index p = 0; p < m; ++p) o[p] += coef * c[p];
  }
}

}  // namespace

namespace serial {

Vector matvec(const Matrix& a, const Vector& x) {
  Vector y(a.rows());
  for (Index i = 0; i < a.rows(); ++i) y[i] = row_dot(a, i, x);
  return y;
}

Vector matvec_t(const Matrix& a, const Vector& r) {
  Vector z(a.cols());
  for (Index j = 0; j < a.cols(); ++j) z[j] = col_dot(a, j, r);
  return z;
}

Matrix gram(const Matrix& a) {
  const Index n = a.cols();
  Matrix g(n, n);
  for (Index q = 0; q < n; ++q)
    for (Index p = 0; p <= q; ++p) g(p, q) = g(q, p) = col_col_dot(a, p, q);
  return g;
}

Vector column_sq_norms(const Matrix& a) {
  Vector out(a.cols());
  for (Index j = 0; j < a.cols(); ++j) out[j] = col_col_dot(a, j, j);
  return out;
}

Matrix shifted_outer(const Matrix& a, std::span<const Index> cols,
                     std::span<const double> w, double shift) {
  Matrix out(a.rows(), a.rows());
  for (Index q = 0; q < a.rows(); ++q) outer_column(a, cols, w, shift, q, out);
  return out;
}

}  // namespace serial

namespace parallel {

Vector matvec(const Matrix& a, const Vector& x) {
  Vector y(a.rows());
  const Index m = a.rows();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < m; ++i) y[i] = row_dot(a, i, x);
  return y;
}

Vector matvec_t(const Matrix& a, const Vector& r) {
  Vector z(a.cols());
  const Index n = a.cols();
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < n; ++j) z[j] = col_dot(a, j, r);
  return z;
}

Matrix gram(const Matrix& a) {
  const Index n = a.cols();
  Matrix g(n, n);
#pragma omp parallel for schedule(dynamic, 8)
  for (Index q = 0; q < n; ++q)
    for (Index p = 0; p <= q; ++p) g(p, q) = g(q, p) = col_col_dot(a, p, q);
  return g;
}

Vector column_sq_norms(const Matrix& a) {
  Vector out(a.cols());
  const Index n = a.cols();
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < n; ++j) out[j] = col_col_dot(a, j, j);
  return out;
}

Matrix shifted_outer(const Matrix& a, std::span<const Index> cols,
                     std::span<const double> w, double shift) {
  const Index m = a.rows();
  Matrix out(m, m);
#pragma omp parallel for schedule(static)
  for (Index q = 0; q < m; ++q) outer_column(a, cols, w, shift, q, out);
  return out;
}

}  // namespace parallel

namespace {
inline bool go_parallel(double work) {
  return work >= kParallelWork && omp_get_max_threads() > 1 && !omp_in_parallel();
}
}  // namespace

Vector matvec(const Matrix& a, const Vector& x) {
  const double work = static_cast<double>(a.rows()) * a.cols();
  return go_parallel(work) ? parallel::matvec(a, x) : serial::matvec(a, x);
}

Vector matvec_t(const Matrix& a, const Vector& r) {
  const double work = static_cast<double>(a.rows()) * a.cols();
  return go_parallel(work) ? parallel::matvec_t(a, r) : serial::matvec_t(a, r);
}

Matrix gram(const Matrix& a) {
  const double work = 0.5 * a.rows() * static_cast<double>(a.cols()) * a.cols();
  return go_parallel(work) ? parallel::gram(a) : serial::gram(a);
}

Vector column_sq_norms(const Matrix& a) {
  const double work = static_cast<double>(a.rows()) * a.cols();
  return go_parallel(work) ? parallel::column_sq_norms(a) : serial::column_sq_norms(a);
}

Matrix shifted_outer(const Matrix& a, std::span<const Index> cols,
                     std::span<const double> w, double shift) {
  const double work = static_cast<double>(a.rows()) * a.rows() * cols.size();
  return go_parallel(work) ? parallel::shifted_outer(a, cols, w, shift)
                           : serial::shifted_outer(a, cols, w, shift);
}

}  // namespace amrf::kernels
