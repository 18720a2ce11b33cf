#pragma once
// Independent reference computations shared by the unit and acceptance tests.
// Nothing here calls into the library's own update formulas.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "amrf/mrf.hpp"
#include "amrf/rng.hpp"
#include "amrf/sensing.hpp"

namespace oracle {

using amrf::Index;
using amrf::Matrix;
using amrf::Vector;

/// Golden-section minimization of a unimodal f on [lo, hi].
inline double golden_min(const std::function<double(double)>& f, double lo, double hi,
                         double tol = 1e-12) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol * (1.0 + std::abs(a) + std::abs(b))) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

inline Matrix gaussian_matrix(Index m, Index n, amrf::Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix a(m, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i) a(i, j) = g(rng);
  return a;
}

inline Vector gaussian_vector(Index n, amrf::Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

inline Vector uniform_vector(Index n, double lo, double hi, amrf::Rng& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

/// Random support with at least one active entry.
inline amrf::SpinVector random_support(Index n, double p, amrf::Rng& rng) {
  std::bernoulli_distribution on(p);
  std::vector<int> s(static_cast<std::size_t>(n));
  for (auto& si : s) si = on(rng) ? 1 : -1;
  std::uniform_int_distribution<Index> pick(0, n - 1);
  s[static_cast<std::size_t>(pick(rng))] = 1;
  return amrf::SpinVector::from_values(s);
}

/// A with only the active columns.
inline Matrix active_columns(const Matrix& a, const amrf::SpinVector& s) {
  std::vector<Index> idx;
  for (Index i = 0; i < s.size(); ++i)
    if (s[i] > 0) idx.push_back(i);
  Matrix as(a.rows(), static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) as.col(static_cast<Index>(k)) = a.col(idx[k]);
  return as;
}

/// log|sigma I + A_s diag(nu_s) A_s^T| from a dense LU on the full M x M matrix.
inline double log_det_c(const Matrix& a, const amrf::SpinVector& s, const Vector& nu,
                        double sigma) {
  Matrix c = sigma * Matrix::Identity(a.rows(), a.rows());
  for (Index i = 0; i < s.size(); ++i)
    if (s[i] > 0) c += nu[i] * a.col(i) * a.col(i).transpose();
  Eigen::PartialPivLU<Matrix> lu(c);
  double ld = 0.0;
  for (Index i = 0; i < c.rows(); ++i) ld += std::log(std::abs(lu.matrixLU()(i, i)));
  return ld;
}

/// Signal-variance subproblem: x^T Sigma^-1 x / 2 + log|sigma I + A V Sigma V^T A^T| / 2,
/// x zero off the support.
inline double variance_objective(const Matrix& a, const amrf::SpinVector& s, const Vector& x,
                                 const Vector& nu, double sigma) {
  double quad = 0.0;
  for (Index i = 0; i < s.size(); ++i)
    if (s[i] > 0) quad += x[i] * x[i] / nu[i];
  return 0.5 * quad + 0.5 * log_det_c(a, s, nu, sigma);
}

/// Noise subproblem: |y - A_s x_s|^2 / (2 sigma) + log|sigma I + A_s Sigma_s A_s^T| / 2.
inline double noise_objective(const Matrix& a, const amrf::SpinVector& s, const Vector& x,
                              const Vector& nu, const Vector& y, double sigma) {
  Vector xs = x;
  for (Index i = 0; i < s.size(); ++i)
    if (s[i] < 0) xs[i] = 0.0;
  const Vector d = y - a * xs;
  return d.squaredNorm() / (2.0 * sigma) + 0.5 * log_det_c(a, s, nu, sigma);
}

/// sum_i W_i s_i + sum_e W_e s_i s_j, written out from the edge list.
inline double log_score(const amrf::BoltzmannMachine& bm, const std::vector<int>& s) {
  double e = 0.0;
  for (Index i = 0; i < bm.size(); ++i) e += bm.unary[i] * s[static_cast<std::size_t>(i)];
  const auto& edges = bm.graph.edges();
  for (std::size_t k = 0; k < edges.size(); ++k)
    e += bm.pairwise[static_cast<Index>(k)] * s[static_cast<std::size_t>(edges[k].i)] *
         s[static_cast<std::size_t>(edges[k].j)];
  return e;
}

/// Brute-force minimizer of sum_i c_i v_i - log_score(s). Walks labelings by
/// recursion on the highest index first; keeps the smallest integer code
/// among exact ties.
inline std::vector<int> brute_force_map(const Vector& cost, const amrf::BoltzmannMachine& bm) {
  const Index n = bm.size();
  std::vector<int> s(static_cast<std::size_t>(n), -1), best;
  double best_e = INFINITY;
  unsigned long long best_code = ~0ULL;
  std::function<void(Index, unsigned long long)> rec = [&](Index i, unsigned long long code) {
    if (i < 0) {
      double e = -log_score(bm, s);
      for (Index k = 0; k < n; ++k)
        if (s[static_cast<std::size_t>(k)] > 0) e += cost[k];
      if (e < best_e || (e == best_e && code < best_code)) {
        best_e = e;
        best_code = code;
        best = s;
      }
      return;
    }
    for (int v : {-1, 1}) {
      s[static_cast<std::size_t>(i)] = v;
      rec(i - 1, code | (v > 0 ? 1ULL << i : 0ULL));
    }
    s[static_cast<std::size_t>(i)] = -1;
  };
  rec(n - 1, 0ULL);
  return best;
}

/// Random Boltzmann machine on a graph.
inline amrf::BoltzmannMachine random_bm(amrf::Graph g, double scale, amrf::Rng& rng) {
  amrf::BoltzmannMachine bm = amrf::BoltzmannMachine::flat(std::move(g));
  bm.unary = gaussian_vector(bm.size(), rng, scale);
  bm.pairwise = gaussian_vector(bm.graph.n_edges(), rng, scale);
  return bm;
}

/// Pseudo-log-likelihood minus l2 |Theta|^2, from the conditional of each spin.
inline double pl_objective(const amrf::SpinVector& b, const amrf::BoltzmannMachine& bm,
                           double l2) {
  double total = 0.0;
  for (Index i = 0; i < bm.size(); ++i) {
    double h = bm.unary[i];
    for (const auto& nb : bm.graph.neighbors(i)) h += bm.pairwise[nb.edge] * b[nb.node];
    const double z = 2.0 * b[i] * h;
    total += -std::log1p(std::exp(-z));
  }
  return total - l2 * (bm.unary.squaredNorm() + bm.pairwise.squaredNorm());
}

}  // namespace oracle
