#include "amrf/recovery.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "amrf/csv_io.hpp"
#include "amrf/error.hpp"
#include "amrf/kernels.hpp"

namespace amrf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_dims(const RecoveryState& state, const SensingMatrix& a) {
  const Index n = a.cols();
  if (state.x.size() != n || state.s.size() != n || state.nu.size() != n)
    throw InvalidDimension("recovery state does not match the sensing matrix (N = " +
                           std::to_string(n) + ")");
}

void check_y(const SensingMatrix& a, const Vector& y) {
  if (y.size() != a.rows())
    throw InvalidDimension("measurement has length " + std::to_string(y.size()) + ", expected " +
                           std::to_string(a.rows()));
}

std::vector<Index> mask_indices(const Vector& v_mask) {
  std::vector<Index> idx;
  for (Index i = 0; i < v_mask.size(); ++i) {
    if (v_mask[i] == 1.0)
      idx.push_back(i);
    else if (v_mask[i] != 0.0)
      throw InvalidDimension("support mask entries must be 0 or 1");
  }
  return idx;
}

std::vector<double> gather(const Vector& v, const std::vector<Index>& idx) {
  std::vector<double> out(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) out[k] = v[idx[k]];
  return out;
}

// Cholesky of sigma I + A_S diag(w) A_S^T.
Eigen::LLT<Matrix> factor_inner(const SensingMatrix& a, const std::vector<Index>& support,
                                const std::vector<double>& w, double sigma_n) {
  Eigen::LLT<Matrix> llt(kernels::shifted_outer(a.entries(), support, w, sigma_n));
  if (llt.info() != Eigen::Success)
    throw NumericError("inner M x M system is not positive definite (sigma_n = " +
                       std::to_string(sigma_n) + ")");
  return llt;
}

// A_S w for the columns in `support`.
Matrix support_columns(const SensingMatrix& a, const std::vector<Index>& support) {
  Matrix out(a.rows(), static_cast<Index>(support.size()));
  for (std::size_t k = 0; k < support.size(); ++k) out.col(static_cast<Index>(k)) = a.entries().col(support[k]);
  return out;
}

Vector residual(const RecoveryState& state, const SensingMatrix& a, const Vector& y) {
  Vector xs = state.x;
  for (Index i = 0; i < xs.size(); ++i)
    if (!state.s.active(i)) xs[i] = 0.0;
  return y - a.apply(xs);
}

}  // namespace

void InnerOptions::validate() const {
  if (max_iters < 1) throw ConfigError("inner max_iters must be >= 1");
  if (!(rel_tol > 0.0)) throw ConfigError("inner rel_tol must be > 0");
  if (!(nu_floor > 0.0) || !(sigma_floor > 0.0)) throw ConfigError("variance floors must be > 0");
}

RecoveryState RecoveryState::initial(Index n, Index m) {
  RecoveryState st;
  st.x = Vector::Zero(n);
  st.s = SpinVector(n, 1);
  st.nu = Vector::Ones(n);
  st.sigma_n = 1.0;
  st.alpha = Vector::Zero(n);
  st.eta = Vector::Zero(m);
  st.d = Vector::Zero(m);
  return st;
}

Matrix woodbury_inverse(const Vector& nu, const Vector& v_mask, const SensingMatrix& a,
                        double sigma_n) {
  const Index n = a.cols();
  if (nu.size() != n || v_mask.size() != n) throw InvalidDimension("woodbury_inverse: size mismatch");
  if (!(sigma_n > 0.0) || (nu.array() <= 0.0).any())
    throw NumericError("woodbury_inverse: variances must be positive");
  const auto support = mask_indices(v_mask);
  Matrix out = nu.asDiagonal();
  if (support.empty()) return out;
  const auto w = gather(nu, support);
  const auto llt = factor_inner(a, support, w, sigma_n);
  Matrix b = support_columns(a, support);  // A V Sigma' restricted to S
  for (std::size_t k = 0; k < support.size(); ++k) b.col(static_cast<Index>(k)) *= w[k];
  const Matrix correction = b.transpose() * llt.solve(b);
  for (std::size_t p = 0; p < support.size(); ++p)
    for (std::size_t q = 0; q < support.size(); ++q)
      out(support[p], support[q]) -= correction(static_cast<Index>(p), static_cast<Index>(q));
  return out;
}

Vector woodbury_diagonal(const Vector& nu, const Vector& v_mask, const SensingMatrix& a,
                         double sigma_n) {
  const Index n = a.cols();
  if (nu.size() != n || v_mask.size() != n) throw InvalidDimension("woodbury_diagonal: size mismatch");
  if (!(sigma_n > 0.0) || (nu.array() <= 0.0).any())
    throw NumericError("woodbury_diagonal: variances must be positive");
  const auto support = mask_indices(v_mask);
  Vector out = nu;
  if (support.empty()) return out;
  const auto w = gather(nu, support);
  const auto llt = factor_inner(a, support, w, sigma_n);
  const Matrix as = support_columns(a, support);
  const Matrix solved = llt.solve(as);
  for (std::size_t k = 0; k < support.size(); ++k) {
    const Index i = support[k];
    const double quad = as.col(static_cast<Index>(k)).dot(solved.col(static_cast<Index>(k)));
    out[i] = nu[i] - nu[i] * nu[i] * quad;
  }
  return out;
}

Vector support_surrogate_unary_aty(const RecoveryState& state, const SensingMatrix& a,
                                   const Vector& aty) {
  check_dims(state, a);
  if (aty.size() != a.cols()) throw InvalidDimension("support_surrogate_unary: A^T y size mismatch");
  const double sigma = state.sigma_n;
  const Vector& g = a.gram_diag();
  Vector u(a.cols());
  for (Index i = 0; i < u.size(); ++i) {
    const double x = state.x[i];
    const double nu = state.nu[i];
    const double r = x * x * (1.0 + sigma / nu);
    const double p = 0.5 * std::log(nu);
    const double q = 0.5 * std::log(sigma / nu + g[i]);
    u[i] = r / (2.0 * sigma) - x * aty[i] / sigma + p + q;
  }
  return u;
}

Vector support_surrogate_unary(const RecoveryState& state, const SensingMatrix& a, const Vector& y) {
  check_y(a, y);
  return support_surrogate_unary_aty(state, a, a.apply_transpose(y));
}

namespace {

SpinVector update_support_aty(RecoveryState& state, const SensingMatrix& a, const Vector& aty,
                              const BoltzmannMachine& bm, const InnerOptions& opts) {
  if (bm.size() != a.cols()) throw InvalidDimension("update_support: prior size does not match N");
  const Vector u = support_surrogate_unary_aty(state, a, aty);
  state.s = map_inference(u, bm, opts.map_mode, opts.loopy);
  for (Index i = 0; i < state.x.size(); ++i)
    if (!state.s.active(i)) state.x[i] = 0.0;
  state.residual_fresh = false;
  return state.s;
}

}  // namespace

SpinVector update_support(RecoveryState& state, const SensingMatrix& a, const Vector& y,
                          const BoltzmannMachine& bm, const InnerOptions& opts) {
  check_y(a, y);
  return update_support_aty(state, a, a.apply_transpose(y), bm, opts);
}

void update_signal_variance(RecoveryState& state, const SensingMatrix& a, const InnerOptions& opts) {
  check_dims(state, a);
  state.alpha = woodbury_diagonal(state.nu, state.s.mask(), a, state.sigma_n);
  for (Index i = 0; i < state.nu.size(); ++i)
    state.nu[i] = std::max(state.x[i] * state.x[i] + state.alpha[i], opts.nu_floor);
}

void update_noise_variance(RecoveryState& state, const SensingMatrix& a, const Vector& y,
                           const InnerOptions& opts) {
  check_dims(state, a);
  check_y(a, y);
  const auto support = state.s.active_indices();
  const auto w = gather(state.nu, support);
  const auto llt = factor_inner(a, support, w, state.sigma_n);
  const Matrix inv = llt.solve(Matrix::Identity(a.rows(), a.rows()));
  state.eta = inv.diagonal();
  state.d = residual(state, a, y);
  state.residual_fresh = true;
  const Index m = a.rows();
  double next = 0.0;
  if (opts.noise_rule == NoiseRule::pooled) {
    next = std::sqrt(state.d.squaredNorm() / state.eta.sum());
  } else {
    for (Index i = 0; i < m; ++i) next += std::abs(state.d[i]) / std::sqrt(state.eta[i]);
    next /= static_cast<double>(m);
  }
  if (!std::isfinite(next)) throw NumericError("noise variance update produced a non-finite value");
  state.sigma_n = std::max(next, opts.sigma_floor);
}

void update_sparse_signal(RecoveryState& state, const SensingMatrix& a, const Vector& y) {
  check_dims(state, a);
  check_y(a, y);
  const auto support = state.s.active_indices();
  state.x.setZero();
  if (!support.empty()) {
    const auto w = gather(state.nu, support);
    const auto llt = factor_inner(a, support, w, state.sigma_n);
    const Vector z = llt.solve(y);
    for (std::size_t k = 0; k < support.size(); ++k)
      state.x[support[k]] = w[k] * a.entries().col(support[k]).dot(z);
  }
  state.d = residual(state, a, y);
  state.residual_fresh = true;
}

double support_log_det(const Vector& nu, const SpinVector& s, const SensingMatrix& a,
                       double sigma_n) {
  const auto support = s.active_indices();
  const auto llt = factor_inner(a, support, gather(nu, support), sigma_n);
  const Matrix& l = llt.matrixLLT();
  double logdet = 0.0;
  for (Index i = 0; i < l.rows(); ++i) logdet += 2.0 * std::log(l(i, i));
  return logdet;
}

double latent_cost(const RecoveryState& state, const SensingMatrix& a, const Vector& y,
                   const BoltzmannMachine& bm) {
  check_dims(state, a);
  check_y(a, y);
  const Vector d = residual(state, a, y);
  double quad = 0.0;
  for (Index i = 0; i < state.x.size(); ++i)
    if (state.s.active(i)) quad += state.x[i] * state.x[i] / state.nu[i];
  const double logdet = support_log_det(state.nu, state.s, a, state.sigma_n);
  return d.squaredNorm() / (2.0 * state.sigma_n) + 0.5 * quad + 0.5 * logdet -
         bm_log_score(state.s, bm);
}

double relative_change(const Vector& prev, const Vector& next) {
  const double base = prev.norm();
  if (base > 0.0) return (prev - next).norm() / base;
  return next.norm() == 0.0 ? 0.0 : kNaN;
}

InnerResult estimate_sparse_signal(const SensingMatrix& a, const Vector& y,
                                   const BoltzmannMachine& bm, const InnerOptions& opts,
                                   const RecoveryState* warm, const StepObserver& observer) {
  opts.validate();
  check_y(a, y);
  if (bm.size() != a.cols()) throw InvalidDimension("estimate_sparse_signal: prior size does not match N");
  InnerResult result;
  RecoveryState& st = result.state;
  st = warm ? *warm : RecoveryState::initial(a.cols(), a.rows());
  check_dims(st, a);
  if (opts.fixed_support) st.s = SpinVector(a.cols(), 1);
  const Vector aty = a.apply_transpose(y);
  const int first_iter = st.iter;

  for (int k = 1; k <= opts.max_iters; ++k) {
    const Vector x_prev = st.x;
    if (!opts.fixed_support) {
      update_support_aty(st, a, aty, bm, opts);
      if (observer) observer(InnerStep::support, st);
    }
    update_signal_variance(st, a, opts);
    if (observer) observer(InnerStep::signal_variance, st);
    update_noise_variance(st, a, y, opts);
    if (observer) observer(InnerStep::noise_variance, st);
    update_sparse_signal(st, a, y);
    if (observer) observer(InnerStep::sparse_signal, st);
    st.iter = first_iter + k;

    // x starts at zero on a cold start, so the first check is meaningless.
    const double rel = (k == 1 && warm == nullptr) ? kNaN : relative_change(x_prev, st.x);
    st.last_rel_change = std::isnan(rel) ? 0.0 : rel;

    InnerTraceRow row;
    row.iter = k;
    row.cost = opts.record_cost ? latent_cost(st, a, y, bm) : kNaN;
    row.support_size = st.s.active_count();
    row.sigma_n = st.sigma_n;
    row.rel_change = rel;
    result.trace.push_back(row);

    if (!std::isnan(rel) && rel < opts.rel_tol) {
      result.converged = true;
      break;
    }
  }
  result.x = st.x;
  return result;
}

void write_inner_trace(std::ostream& out, const std::vector<InnerTraceRow>& trace) {
  out << "iter,L,k,sigma_n,rel_change\n";
  for (const auto& row : trace) {
    out << row.iter << ',' << (std::isnan(row.cost) ? "" : csv::format_double(row.cost)) << ','
        << row.support_size << ',' << csv::format_double(row.sigma_n) << ','
        << (std::isnan(row.rel_change) ? "" : csv::format_double(row.rel_change)) << '\n';
  }
}

}  // namespace amrf
