#include <cmath>
#include <sstream>

#include "amrf/adaptive.hpp"
#include "amrf/error.hpp"
#include "amrf/experiment.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace amrf;

namespace {

struct Problem {
  Vector x;
  SensingMatrix a;
  Measurement m;
};

Problem clustered(Index n, Index k, Index m, double snr, std::uint64_t seed) {
  const Vector x = gen_synthetic_structured(n, k, 2, 1.0, seed);
  SensingMatrix a = gen_bernoulli_matrix(m, n, seed + 1);
  Measurement meas = add_noise_snr(measure(a, x), snr, seed + 2);
  return {x, std::move(a), std::move(meas)};
}

OuterOptions chain_opts(Index n) {
  OuterOptions o;
  o.neighborhood = NeighborhoodSpec::chain2(n);
  return o;
}

}  // namespace

TEST_SUITE("adaptive") {

TEST_CASE("threshold examples") {
  CHECK(threshold_support(Vector::Zero(4)) == SpinVector(4, -1));
  Vector x(4);
  x << 4, 0, 0, 0;
  CHECK(threshold_support(x) == SpinVector::from_values({1, -1, -1, -1}));
  CHECK(threshold_support(Vector::Ones(3)) == SpinVector(3, -1));
  Vector y(3);
  y << -3, 1, 0.5;
  CHECK(threshold_support(y) == SpinVector::from_values({1, -1, -1}));
}

TEST_CASE("zero data") {
  const SensingMatrix a = gen_bernoulli_matrix(8, 20, 1);
  const AdaptiveResult r = adaptive_mrf_recover(a, Vector::Zero(8), chain_opts(20));
  CHECK(r.iterates.front().isZero(0.0));
  CHECK(r.x.isZero(0.0));
  CHECK(r.trace.size() == 1);
  CHECK(r.converged);
}

TEST_CASE("outer loop bookkeeping") {
  for (int seed = 0; seed < 4; ++seed) {
    const Problem p = clustered(48, 8, 20, 25.0, 100 + 10 * seed);
    OuterOptions opts = chain_opts(48);
    const AdaptiveResult r = adaptive_mrf_recover(p.a, p.m.y, opts, PsnrReference{p.x, 1.0});
    CHECK(r.trace.size() <= 5);
    CHECK(r.trace.size() >= 1);
    CHECK(r.iterates.size() == r.trace.size() + 1);
    CHECK(r.masks.size() == r.trace.size());
    CHECK(r.x == r.iterates.back());

    BoltzmannMachine prior = BoltzmannMachine::flat(48);
    for (std::size_t t = 0; t < r.trace.size(); ++t) {
      // The prior at iteration t is a function of the previous iterate alone.
      const SpinVector b = threshold_support(r.iterates[t]);
      CHECK(b == r.masks[t]);
      if (b.active_count() > 0)
        prior = learn_pseudolikelihood(b, update_graph(b, opts.neighborhood), opts.pl);
      CHECK(prior.graph.edges() == r.priors[t].graph.edges());
      CHECK(prior.unary == r.priors[t].unary);
      CHECK(prior.pairwise == r.priors[t].pairwise);
      for (const auto& e : r.priors[t].graph.edges()) CHECK((b.active(e.i) || b.active(e.j)));

      const auto& row = r.trace[t];
      CHECK(row.outer_iter == static_cast<int>(t) + 1);
      CHECK(row.mask_density == doctest::Approx(b.active_count() / 48.0));
      CHECK(row.n_edges == r.priors[t].graph.n_edges());
      REQUIRE(row.psnr.has_value());
      CHECK(*row.psnr == doctest::Approx(psnr(p.x, r.iterates[t + 1], 1.0)));
    }
    if (r.converged) CHECK(r.trace.back().rel_change < opts.outer_rel_tol);
  }
}

TEST_CASE("outer loop is deterministic") {
  const Problem p = clustered(40, 6, 18, 20.0, 7);
  const AdaptiveResult a = adaptive_mrf_recover(p.a, p.m.y, chain_opts(40));
  const AdaptiveResult b = adaptive_mrf_recover(p.a, p.m.y, chain_opts(40));
  CHECK(a.x == b.x);
  CHECK(a.inner_iters_total == b.inner_iters_total);
}

TEST_CASE("a flat fixed prior is plain inner recovery") {
  const Problem p = clustered(40, 6, 18, 20.0, 9);
  const OuterOptions opts = chain_opts(40);
  const InnerResult fixed = fixed_mrf_recover(p.a, p.m.y, BoltzmannMachine::flat(40), opts);
  InnerOptions ridge = opts.inner;
  ridge.fixed_support = true;
  const InnerResult boot = estimate_sparse_signal(p.a, p.m.y, BoltzmannMachine::flat(40), ridge);
  const InnerResult plain =
      estimate_sparse_signal(p.a, p.m.y, BoltzmannMachine::flat(40), opts.inner, &boot.state);
  CHECK(fixed.x == plain.x);
  CHECK(fixed.trace.size() == boot.trace.size() + plain.trace.size());
}

TEST_CASE("fixed prior trained on the test mask agrees with adaptive") {
  const Vector x = gen_synthetic_structured(256, 26, 3, 1.0, 21, std::make_pair(16, 16));
  const SensingMatrix a = gen_bernoulli_matrix(77, 256, 22);
  const Measurement m = add_noise_snr(measure(a, x), 30.0, 23);
  OuterOptions opts;
  opts.neighborhood = NeighborhoodSpec::grid8(16, 16);
  const BoltzmannMachine bm = train_fixed_mrf({SpinVector::from_mask(x)}, opts.neighborhood);
  const double peak = x.cwiseAbs().maxCoeff();
  const double fixed = psnr(x, fixed_mrf_recover(a, m.y, bm, opts).x, peak);
  const double adaptive = psnr(x, adaptive_mrf_recover(a, m.y, opts).x, peak);
  CHECK(std::abs(fixed - adaptive) <= 0.5);
}

TEST_CASE("training averages per-mask fits") {
  const NeighborhoodSpec spec = NeighborhoodSpec::chain2(6);
  const SpinVector b1 = SpinVector::from_values({1, 1, -1, -1, -1, -1});
  const SpinVector b2 = SpinVector::from_values({-1, -1, -1, 1, 1, -1});
  const BoltzmannMachine pooled = train_fixed_mrf({b1, b2}, spec);
  const Graph g = full_graph(spec);
  const BoltzmannMachine f1 = learn_pseudolikelihood(b1, g), f2 = learn_pseudolikelihood(b2, g);
  CHECK((pooled.unary - 0.5 * (f1.unary + f2.unary)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((pooled.pairwise - 0.5 * (f1.pairwise + f2.pairwise)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(train_fixed_mrf({}, spec).unary.isZero(0.0));
}

TEST_CASE("oracle examples") {
  Rng rng = make_rng(30);
  Eigen::HouseholderQR<Matrix> qr(oracle::gaussian_matrix(12, 12, rng));
  const SensingMatrix a(Matrix(Matrix(qr.householderQ()).leftCols(12)));
  Vector x = Vector::Zero(12);
  x.segment(3, 4) << 1.0, -2.0, 0.5, 3.0;
  const SpinVector s = SpinVector::from_mask(x);
  const Vector est = oracle_estimate(a, measure(a, x), s, 0.0, Vector::Ones(12));
  CHECK((est - x).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(oracle_estimate(a, measure(a, x), SpinVector(12, -1), 0.1, Vector::Ones(12)).isZero(0.0));
}

TEST_CASE("oracle beats adaptive on average") {
  double oracle_sum = 0.0, adaptive_sum = 0.0;
  for (int seed = 0; seed < 20; ++seed) {
    const Problem p = clustered(32, 5, 14, 20.0, 400 + 10 * seed);
    const double peak = p.x.cwiseAbs().maxCoeff();
    oracle_sum += psnr(p.x, oracle_estimate(p.a, p.m.y, SpinVector::from_mask(p.x),
                                            p.m.true_noise_variance, Vector::Ones(32)),
                       peak);
    adaptive_sum += psnr(p.x, adaptive_mrf_recover(p.a, p.m.y, chain_opts(32)).x, peak);
  }
  CHECK(oracle_sum >= adaptive_sum);
}

TEST_CASE("outer options are validated") {
  const SensingMatrix a = gen_bernoulli_matrix(4, 9, 1);
  OuterOptions o;
  o.neighborhood = NeighborhoodSpec::grid8(3, 3);
  o.max_outer = 0;
  CHECK_THROWS_AS(adaptive_mrf_recover(a, Vector::Ones(4), o), ConfigError);
  o.max_outer = 5;
  o.neighborhood = NeighborhoodSpec::grid8(2, 4);
  CHECK_THROWS_AS(adaptive_mrf_recover(a, Vector::Ones(4), o), ConfigError);
}

TEST_CASE("outer trace csv") {
  std::vector<OuterTraceRow> rows(2);
  rows[0] = {1, 0.25, 7, 12, -3.5, 30.5, 0.1};
  rows[1] = {2, 0.25, 7, 3, -3.75, std::nullopt, 0.0};
  std::ostringstream out;
  write_outer_trace(out, rows);
  CHECK(out.str() ==
        "outer_iter,mask_density,n_edges,inner_iters,L_final,psnr\n"
        "1,0.25,7,12,-3.5,30.5\n"
        "2,0.25,7,3,-3.75,\n");
}

}  // TEST_SUITE
