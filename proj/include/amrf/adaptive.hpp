#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "amrf/mrf.hpp"
#include "amrf/recovery.hpp"
#include "amrf/sensing.hpp"

namespace amrf {

struct OuterOptions {
  int max_outer = 5;
  double outer_rel_tol = 1e-3;
  NeighborhoodSpec neighborhood;
  InnerOptions inner;
  PseudoLikelihoodOptions pl;
  /// Start each inner run from the previous outer iterate's state instead of
  /// the cold initialization.
  bool warm_start_inner = false;

  void validate(Index n) const;
};

/// b_i = +1 iff |x_i| > mean(|x|).
SpinVector threshold_support(const Vector& x);

struct OuterTraceRow {
  int outer_iter = 0;
  double mask_density = 0.0;
  Index n_edges = 0;
  int inner_iters = 0;
  double cost_final = 0.0;
  std::optional<double> psnr;
  double rel_change = 0.0;  // NaN when undefined
};

struct AdaptiveResult {
  Vector x;
  std::vector<OuterTraceRow> trace;
  /// Iterates x^(0) (fixed-support initialization), x^(1), ...
  std::vector<Vector> iterates;
  /// Mask and prior used at outer iteration t are masks[t-1], priors[t-1].
  std::vector<SpinVector> masks;
  std::vector<BoltzmannMachine> priors;
  int inner_iters_total = 0;
  bool converged = false;
};

/// Optional reference signal for per-iteration PSNR in the trace.
struct PsnrReference {
  Vector signal;
  double peak = 1.0;
};

/// Bootstrap with s fixed to +1, then alternate: threshold the estimate, update
/// the graph, learn the prior by pseudo-likelihood, re-run inner recovery.
AdaptiveResult adaptive_mrf_recover(const SensingMatrix& a, const Vector& y,
                                    const OuterOptions& opts,
                                    const std::optional<PsnrReference>& reference = std::nullopt);

/// Inner recovery under a prior that is never adapted. Starts from the same
/// fixed-support bootstrap as adaptive_mrf_recover.
InnerResult fixed_mrf_recover(const SensingMatrix& a, const Vector& y,
                              const BoltzmannMachine& bm_trained, const OuterOptions& opts);

/// Pools training masks into one prior: each mask gets its own
/// pseudo-likelihood fit on the full neighborhood graph, and the weights are
/// averaged entry-wise.
BoltzmannMachine train_fixed_mrf(const std::vector<SpinVector>& masks,
                                 const NeighborhoodSpec& spec,
                                 const PseudoLikelihoodOptions& pl = {});

/// Closed-form signal update evaluated once on a known support.
Vector oracle_estimate(const SensingMatrix& a, const Vector& y, const SpinVector& s_true,
                       double sigma_n, const Vector& nu);

void write_outer_trace(std::ostream& out, const std::vector<OuterTraceRow>& trace);

}  // namespace amrf
