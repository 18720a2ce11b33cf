#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "amrf/mrf.hpp"
#include "amrf/sensing.hpp"
#include "amrf/types.hpp"

namespace amrf {

/// How the noise-variance step turns the bound coefficients eta and the
/// residual d into a new sigma_n.
enum class NoiseRule {
  /// sigma = |d| / sqrt(sum_i eta_i): exact minimizer of the linearized
  /// log-determinant bound under a shared variance. Never increases the cost.
  pooled,
  /// sigma = mean_i |d_i| / sqrt(eta_i): per-sample minimizers, averaged.
  mean_of_ratios,
};

struct InnerOptions {
  int max_iters = 200;
  double rel_tol = 1e-3;
  MapMode map_mode = MapMode::loopy;
  LoopyOptions loopy;
  double nu_floor = 1e-10;
  double sigma_floor = 1e-12;
  NoiseRule noise_rule = NoiseRule::pooled;
  /// Skip the support step and keep s = +1 everywhere (Bayesian ridge).
  bool fixed_support = false;
  /// Evaluate latent_cost after every sweep for the trace.
  bool record_cost = false;

  void validate() const;
};

/// Alternating-minimization state. `nu` holds the diagonal of Sigma_x; alpha,
/// eta and d are the workspaces of the variance, noise and residual updates.
struct RecoveryState {
  Vector x;
  SpinVector s;
  Vector nu;
  double sigma_n = 1.0;
  Vector alpha;
  Vector eta;
  Vector d;
  int iter = 0;
  double last_rel_change = 0.0;
  bool residual_fresh = false;

  /// Sigma_x = I, sigma_n = 1, x = 0, s = +1.
  static RecoveryState initial(Index n, Index m);
};

/// (diag(nu)^-1 + V^T A^T A V / sigma)^-1 through the M x M identity
/// diag(nu) - diag(nu) V^T A^T C^-1 A V diag(nu),  C = sigma I + A V diag(nu) V^T A^T.
/// `v_mask` entries must be 0 or 1.
Matrix woodbury_inverse(const Vector& nu, const Vector& v_mask, const SensingMatrix& a,
                        double sigma_n);
/// Diagonal of woodbury_inverse without forming the N x N matrix.
Vector woodbury_diagonal(const Vector& nu, const Vector& v_mask, const SensingMatrix& a,
                         double sigma_n);

/// Linear coefficient of v in the support subproblem:
/// u_i = r_i / (2 sigma) - x_i (A^T y)_i / sigma + log(nu_i) / 2 + log(sigma / nu_i + (A^T A)_ii) / 2,
/// r_i = x_i^2 (1 + sigma / nu_i).
Vector support_surrogate_unary(const RecoveryState& state, const SensingMatrix& a, const Vector& y);
Vector support_surrogate_unary_aty(const RecoveryState& state, const SensingMatrix& a,
                                   const Vector& aty);

SpinVector update_support(RecoveryState& state, const SensingMatrix& a, const Vector& y,
                          const BoltzmannMachine& bm, const InnerOptions& opts = {});
void update_signal_variance(RecoveryState& state, const SensingMatrix& a,
                            const InnerOptions& opts = {});
void update_noise_variance(RecoveryState& state, const SensingMatrix& a, const Vector& y,
                           const InnerOptions& opts = {});
void update_sparse_signal(RecoveryState& state, const SensingMatrix& a, const Vector& y);

/// |y - A_s x_s|^2 / (2 sigma) + x_s^T Sigma_s^-1 x_s / 2
///   + log|sigma I + A_s Sigma_s A_s^T| / 2 - bm_log_score(s).
double latent_cost(const RecoveryState& state, const SensingMatrix& a, const Vector& y,
                   const BoltzmannMachine& bm);

/// log|sigma I + A_s diag(nu_s) A_s^T| via Cholesky.
double support_log_det(const Vector& nu, const SpinVector& s, const SensingMatrix& a, double sigma_n);

enum class InnerStep { support, signal_variance, noise_variance, sparse_signal };
using StepObserver = std::function<void(InnerStep, const RecoveryState&)>;

struct InnerTraceRow {
  int iter = 0;
  double cost = 0.0;  // NaN unless InnerOptions::record_cost
  Index support_size = 0;
  double sigma_n = 0.0;
  double rel_change = 0.0;  // NaN when the check was skipped
};

struct InnerResult {
  Vector x;
  RecoveryState state;
  std::vector<InnerTraceRow> trace;
  bool converged = false;
};

/// Sweeps support -> Sigma -> sigma_n -> x until |x_prev - x| / |x_prev| < rel_tol
/// or max_iters. Starts from RecoveryState::initial unless `warm` is given.
InnerResult estimate_sparse_signal(const SensingMatrix& a, const Vector& y,
                                   const BoltzmannMachine& bm, const InnerOptions& opts = {},
                                   const RecoveryState* warm = nullptr,
                                   const StepObserver& observer = {});

/// Relative change used by both loops. Returns NaN when undefined (previous
/// iterate zero, new iterate nonzero) and 0 when both are zero.
double relative_change(const Vector& prev, const Vector& next);

void write_inner_trace(std::ostream& out, const std::vector<InnerTraceRow>& trace);

}  // namespace amrf
