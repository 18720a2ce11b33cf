#include "amrf/adaptive.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "amrf/csv_io.hpp"
#include "amrf/error.hpp"

namespace amrf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double psnr_against(const PsnrReference& ref, const Vector& x) {
  const double mse = (ref.signal - x).squaredNorm() / static_cast<double>(x.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(ref.peak * ref.peak / mse);
}

InnerResult fixed_support_bootstrap(const SensingMatrix& a, const Vector& y,
                                    const InnerOptions& inner) {
  InnerOptions boot = inner;
  boot.fixed_support = true;
  return estimate_sparse_signal(a, y, BoltzmannMachine::flat(a.cols()), boot);
}

}  // namespace

void OuterOptions::validate(Index n) const {
  if (max_outer < 1) throw ConfigError("max_outer must be >= 1");
  if (!(outer_rel_tol > 0.0)) throw ConfigError("outer_rel_tol must be > 0");
  if (neighborhood.size() != n)
    throw ConfigError("neighborhood covers " + std::to_string(neighborhood.size()) +
                      " nodes but the signal has " + std::to_string(n));
  inner.validate();
}

SpinVector threshold_support(const Vector& x) {
  SpinVector b(x.size(), -1);
  if (x.size() == 0) return b;
  const double mean_abs = x.cwiseAbs().mean();
  for (Index i = 0; i < x.size(); ++i)
    if (std::abs(x[i]) > mean_abs) b.set(i, 1);
  return b;
}

AdaptiveResult adaptive_mrf_recover(const SensingMatrix& a, const Vector& y,
                                    const OuterOptions& opts,
                                    const std::optional<PsnrReference>& reference) {
  opts.validate(a.cols());
  if (reference && reference->signal.size() != a.cols())
    throw InvalidDimension("adaptive_mrf_recover: reference signal length does not match N");
  AdaptiveResult result;

  InnerResult boot = fixed_support_bootstrap(a, y, opts.inner);
  result.inner_iters_total = static_cast<int>(boot.trace.size());
  result.iterates.push_back(boot.x);
  Vector x = boot.x;
  RecoveryState prev_state = std::move(boot.state);
  BoltzmannMachine prior = BoltzmannMachine::flat(a.cols());

  for (int t = 1; t <= opts.max_outer; ++t) {
    const SpinVector b = threshold_support(x);
    // An all-inactive mask carries no structure to learn; keep the last prior.
    if (b.active_count() > 0)
      prior = learn_pseudolikelihood(b, update_graph(b, opts.neighborhood), opts.pl);

    InnerResult run = estimate_sparse_signal(a, y, prior, opts.inner,
                                             opts.warm_start_inner ? &prev_state : nullptr);
    const double rel = relative_change(x, run.x);

    OuterTraceRow row;
    row.outer_iter = t;
    row.mask_density = static_cast<double>(b.active_count()) / static_cast<double>(b.size());
    row.n_edges = prior.graph.n_edges();
    row.inner_iters = static_cast<int>(run.trace.size());
    row.cost_final = latent_cost(run.state, a, y, prior);
    if (reference) row.psnr = psnr_against(*reference, run.x);
    row.rel_change = rel;
    result.trace.push_back(row);
    result.inner_iters_total += row.inner_iters;
    result.masks.push_back(b);
    result.priors.push_back(prior);
    result.iterates.push_back(run.x);

    x = run.x;
    prev_state = std::move(run.state);
    if (!std::isnan(rel) && rel < opts.outer_rel_tol) {
      result.converged = true;
      break;
    }
  }
  result.x = x;
  return result;
}

InnerResult fixed_mrf_recover(const SensingMatrix& a, const Vector& y,
                              const BoltzmannMachine& bm_trained, const OuterOptions& opts) {
  opts.validate(a.cols());
  if (bm_trained.size() != a.cols())
    throw InvalidDimension("fixed_mrf_recover: prior size does not match N");
  bm_trained.validate();
  const InnerResult boot = fixed_support_bootstrap(a, y, opts.inner);
  InnerResult run = estimate_sparse_signal(a, y, bm_trained, opts.inner, &boot.state);
  // Report the total work, bootstrap included.
  std::vector<InnerTraceRow> trace = boot.trace;
  trace.insert(trace.end(), run.trace.begin(), run.trace.end());
  run.trace = std::move(trace);
  return run;
}

BoltzmannMachine train_fixed_mrf(const std::vector<SpinVector>& masks, const NeighborhoodSpec& spec,
                                 const PseudoLikelihoodOptions& pl) {
  BoltzmannMachine pooled = BoltzmannMachine::flat(full_graph(spec));
  if (masks.empty()) return pooled;
  for (const auto& b : masks) {
    const BoltzmannMachine fit = learn_pseudolikelihood(b, pooled.graph, pl);
    pooled.unary += fit.unary;
    pooled.pairwise += fit.pairwise;
  }
  const double inv = 1.0 / static_cast<double>(masks.size());
  pooled.unary *= inv;
  pooled.pairwise *= inv;
  return pooled;
}

Vector oracle_estimate(const SensingMatrix& a, const Vector& y, const SpinVector& s_true,
                       double sigma_n, const Vector& nu) {
  if (s_true.size() != a.cols() || nu.size() != a.cols())
    throw InvalidDimension("oracle_estimate: support or variance length does not match N");
  if (sigma_n < 0.0 || (nu.array() <= 0.0).any())
    throw NumericError("oracle_estimate: variances must be positive");
  RecoveryState st = RecoveryState::initial(a.cols(), a.rows());
  st.s = s_true;
  st.nu = nu;
  st.sigma_n = std::max(sigma_n, InnerOptions{}.sigma_floor);
  update_sparse_signal(st, a, y);
  return st.x;
}

void write_outer_trace(std::ostream& out, const std::vector<OuterTraceRow>& trace) {
  out << "outer_iter,mask_density,n_edges,inner_iters,L_final,psnr\n";
  for (const auto& row : trace) {
    out << row.outer_iter << ',' << csv::format_double(row.mask_density) << ',' << row.n_edges
        << ',' << row.inner_iters << ',' << csv::format_double(row.cost_final) << ','
        << (row.psnr ? csv::format_double(*row.psnr) : "") << '\n';
  }
}

}  // namespace amrf
