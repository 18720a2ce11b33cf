#include "amrf/mrf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>
#include <omp.h>

#include "amrf/error.hpp"

namespace amrf {

// ---------------------------------------------------------------------------
// SpinVector

SpinVector::SpinVector(Index n, int value) {
  if (value != -1 && value != 1) throw InvalidDimension("spin value must be -1 or +1");
  if (n < 0) throw InvalidDimension("negative spin vector length");
  s_.assign(static_cast<std::size_t>(n), static_cast<std::int8_t>(value));
}

SpinVector SpinVector::from_values(const std::vector<int>& values) {
  SpinVector out;
  out.s_.reserve(values.size());
  for (int v : values) {
    if (v != -1 && v != 1) throw InvalidDimension("spin value must be -1 or +1");
    out.s_.push_back(static_cast<std::int8_t>(v));
  }
  return out;
}

SpinVector SpinVector::from_mask(const Vector& mask) {
  SpinVector out(mask.size(), -1);
  for (Index i = 0; i < mask.size(); ++i)
    if (mask[i] != 0.0) out.s_[static_cast<std::size_t>(i)] = 1;
  return out;
}

void SpinVector::set(Index i, int value) {
  if (value != -1 && value != 1) throw InvalidDimension("spin value must be -1 or +1");
  s_[static_cast<std::size_t>(i)] = static_cast<std::int8_t>(value);
}

Index SpinVector::active_count() const {
  return static_cast<Index>(std::count(s_.begin(), s_.end(), std::int8_t{1}));
}

Vector SpinVector::mask() const {
  Vector v(size());
  for (Index i = 0; i < size(); ++i) v[i] = active(i) ? 1.0 : 0.0;
  return v;
}

std::vector<Index> SpinVector::active_indices() const {
  std::vector<Index> out;
  for (Index i = 0; i < size(); ++i)
    if (active(i)) out.push_back(i);
  return out;
}

SpinVector SpinVector::flipped() const {
  SpinVector out = *this;
  for (auto& v : out.s_) v = static_cast<std::int8_t>(-v);
  return out;
}

// ---------------------------------------------------------------------------
// Graph

Graph::Graph(Index n_nodes) : n_nodes_(n_nodes), adjacency_(static_cast<std::size_t>(n_nodes)) {
  if (n_nodes < 0) throw InvalidDimension("negative node count");
}

Graph::Graph(Index n_nodes, std::vector<Edge> edges) : Graph(n_nodes) {
  for (auto& e : edges) {
    if (e.i == e.j) throw InvalidDimension("graph: self-loop on node " + std::to_string(e.i));
    if (e.i < 0 || e.j < 0 || e.i >= n_nodes || e.j >= n_nodes)
      throw InvalidDimension("graph: edge endpoint out of range");
    if (e.i > e.j) std::swap(e.i, e.j);
  }
  std::sort(edges.begin(), edges.end());
  if (std::adjacent_find(edges.begin(), edges.end()) != edges.end())
    throw InvalidDimension("graph: duplicate edge");
  edges_ = std::move(edges);
  for (Index e = 0; e < n_edges(); ++e) {
    const Edge& ed = edges_[static_cast<std::size_t>(e)];
    adjacency_[static_cast<std::size_t>(ed.i)].push_back({ed.j, e});
    adjacency_[static_cast<std::size_t>(ed.j)].push_back({ed.i, e});
  }
  for (auto& adj : adjacency_)
    std::sort(adj.begin(), adj.end(), [](const Neighbor& a, const Neighbor& b) { return a.node < b.node; });
}

Index Graph::edge_index(Index i, Index j) const {
  if (i > j) std::swap(i, j);
  const Edge key{i, j};
  auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
  if (it == edges_.end() || *it != key) return -1;
  return static_cast<Index>(it - edges_.begin());
}

std::vector<Index> NeighborhoodSpec::neighbors(Index i) const {
  std::vector<Index> out;
  if (kind == NeighborhoodKind::chain2) {
    if (i > 0) out.push_back(i - 1);
    if (i + 1 < size()) out.push_back(i + 1);
    return out;
  }
  const Index r = i / width;
  const Index c = i % width;
  for (Index dr = -1; dr <= 1; ++dr)
    for (Index dc = -1; dc <= 1; ++dc) {
      if (dr == 0 && dc == 0) continue;
      const Index rr = r + dr;
      const Index cc = c + dc;
      if (rr < 0 || cc < 0 || rr >= height || cc >= width) continue;
      out.push_back(rr * width + cc);
    }
  return out;
}

Graph update_graph(const SpinVector& b, const NeighborhoodSpec& spec) {
  if (b.size() != spec.size())
    throw InvalidDimension("update_graph: mask has " + std::to_string(b.size()) +
                           " entries, neighborhood has " + std::to_string(spec.size()));
  std::set<Edge> edges;
  for (Index i = 0; i < b.size(); ++i)
    for (Index j : spec.neighbors(i))
      if (b.active(j)) edges.insert(Edge{std::min(i, j), std::max(i, j)});
  return Graph(b.size(), std::vector<Edge>(edges.begin(), edges.end()));
}

Graph full_graph(const NeighborhoodSpec& spec) {
  return update_graph(SpinVector(spec.size(), 1), spec);
}

// ---------------------------------------------------------------------------
// BoltzmannMachine

BoltzmannMachine BoltzmannMachine::flat(Graph graph) {
  BoltzmannMachine bm;
  bm.unary = Vector::Zero(graph.n_nodes());
  bm.pairwise = Vector::Zero(graph.n_edges());
  bm.graph = std::move(graph);
  return bm;
}

void BoltzmannMachine::validate() const {
  if (unary.size() != graph.n_nodes())
    throw InvalidDimension("Boltzmann machine: unary size does not match node count");
  if (pairwise.size() != graph.n_edges())
    throw InvalidDimension("Boltzmann machine: pairwise size does not match edge count");
  if (!unary.allFinite() || !pairwise.allFinite())
    throw NumericError("Boltzmann machine: non-finite weight");
}

double bm_log_score(const SpinVector& s, const BoltzmannMachine& bm) {
  if (s.size() != bm.size())
    throw InvalidDimension("bm_log_score: labeling size does not match the machine");
  double score = 0.0;
  for (Index i = 0; i < s.size(); ++i) score += bm.unary[i] * s[i];
  const auto& edges = bm.graph.edges();
  for (std::size_t e = 0; e < edges.size(); ++e)
    score += bm.pairwise[static_cast<Index>(e)] * s[edges[e].i] * s[edges[e].j];
  return score;
}

// ---------------------------------------------------------------------------
// Pseudo-likelihood

namespace {

inline double log_sigmoid(double z) {
  return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Local field h_i = W_i + sum_j W_ij b_j.
Vector local_fields(const SpinVector& b, const BoltzmannMachine& bm) {
  Vector h = bm.unary;
  const auto& edges = bm.graph.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const double w = bm.pairwise[static_cast<Index>(e)];
    h[edges[e].i] += w * b[edges[e].j];
    h[edges[e].j] += w * b[edges[e].i];
  }
  return h;
}

void check_pl_inputs(const SpinVector& b, const BoltzmannMachine& bm) {
  if (b.size() != bm.size())
    throw InvalidDimension("pseudo-likelihood: mask size does not match the graph");
}

}  // namespace

double pseudo_log_likelihood(const SpinVector& b, const BoltzmannMachine& bm) {
  check_pl_inputs(b, bm);
  const Vector h = local_fields(b, bm);
  double ll = 0.0;
  for (Index i = 0; i < b.size(); ++i) ll += log_sigmoid(2.0 * b[i] * h[i]);
  return ll;
}

double pl_objective(const SpinVector& b, const BoltzmannMachine& bm, double l2) {
  return pseudo_log_likelihood(b, bm) - l2 * (bm.unary.squaredNorm() + bm.pairwise.squaredNorm());
}

PlGradient pl_gradient(const SpinVector& b, const BoltzmannMachine& bm, double l2) {
  check_pl_inputs(b, bm);
  const Vector h = local_fields(b, bm);
  // d/dh_i log sigmoid(2 b_i h_i) = 2 b_i sigmoid(-2 b_i h_i)
  Vector g(b.size());
  for (Index i = 0; i < b.size(); ++i) g[i] = 2.0 * b[i] * sigmoid(-2.0 * b[i] * h[i]);
  PlGradient grad;
  grad.unary = g - 2.0 * l2 * bm.unary;
  grad.pairwise.resize(bm.pairwise.size());
  const auto& edges = bm.graph.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const Index i = edges[e].i;
    const Index j = edges[e].j;
    grad.pairwise[static_cast<Index>(e)] =
        g[i] * b[j] + g[j] * b[i] - 2.0 * l2 * bm.pairwise[static_cast<Index>(e)];
  }
  return grad;
}

BoltzmannMachine learn_pseudolikelihood(const SpinVector& b, const Graph& graph,
                                        const PseudoLikelihoodOptions& opts,
                                        std::vector<double>* objective_trace) {
  if (b.size() != graph.n_nodes())
    throw InvalidDimension("learn_pseudolikelihood: mask size does not match the graph");
  if (opts.max_iters < 0 || !(opts.step > 0.0) || opts.l2 < 0.0)
    throw ConfigError("learn_pseudolikelihood: invalid options");
  BoltzmannMachine bm = BoltzmannMachine::flat(graph);
  double objective = pl_objective(b, bm, opts.l2);
  if (objective_trace) objective_trace->assign(1, objective);
  double step = opts.step;
  for (int it = 0; it < opts.max_iters; ++it) {
    const PlGradient grad = pl_gradient(b, bm, opts.l2);
    if (!grad.unary.allFinite() || !grad.pairwise.allFinite())
      throw NumericError("learn_pseudolikelihood: non-finite gradient");
    bool accepted = false;
    for (int halving = 0; halving <= opts.max_halvings; ++halving) {
      BoltzmannMachine trial = bm;
      trial.unary += step * grad.unary;
      trial.pairwise += step * grad.pairwise;
      const double next = pl_objective(b, trial, opts.l2);
      if (next >= objective) {
        bm = std::move(trial);
        objective = next;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // at a stationary point to working precision
    if (objective_trace) objective_trace->push_back(objective);
  }
  return bm;
}

// ---------------------------------------------------------------------------
// MAP inference

double map_objective(const Vector& unary_cost, const BoltzmannMachine& bm, const SpinVector& s) {
  if (unary_cost.size() != bm.size() || s.size() != bm.size())
    throw InvalidDimension("map_objective: size mismatch");
  double data = 0.0;
  for (Index i = 0; i < s.size(); ++i)
    if (s.active(i)) data += unary_cost[i];
  return data - bm_log_score(s, bm);
}

SpinVector map_exact(const Vector& unary_cost, const BoltzmannMachine& bm) {
  const Index n = bm.size();
  if (unary_cost.size() != n) throw InvalidDimension("map_exact: size mismatch");
  if (n > kExactMapLimit)
    throw CapacityError("map_exact: " + std::to_string(n) + " nodes exceeds the exhaustive limit of " +
                        std::to_string(kExactMapLimit));
  const auto& edges = bm.graph.edges();
  std::vector<int> s(static_cast<std::size_t>(n));
  std::uint64_t best_mask = 0;
  double best = std::numeric_limits<double>::infinity();
  const std::uint64_t count = std::uint64_t{1} << n;
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    double energy = 0.0;
    for (Index i = 0; i < n; ++i) {
      const bool on = (mask >> i) & 1U;
      s[static_cast<std::size_t>(i)] = on ? 1 : -1;
      if (on) energy += unary_cost[i];
      energy -= bm.unary[i] * s[static_cast<std::size_t>(i)];
    }
    for (std::size_t e = 0; e < edges.size(); ++e)
      energy -= bm.pairwise[static_cast<Index>(e)] * s[static_cast<std::size_t>(edges[e].i)] *
                s[static_cast<std::size_t>(edges[e].j)];
    if (energy < best) {
      best = energy;
      best_mask = mask;
    }
  }
  SpinVector out(n, -1);
  for (Index i = 0; i < n; ++i)
    if ((best_mask >> i) & 1U) out.set(i, 1);
  return out;
}

LoopyResult map_loopy(const Vector& unary_cost, const BoltzmannMachine& bm, const LoopyOptions& opts) {
  const Index n = bm.size();
  if (unary_cost.size() != n) throw InvalidDimension("map_loopy: size mismatch");
  const auto& edges = bm.graph.edges();
  const Index n_dir = 2 * bm.graph.n_edges();

  // Node potentials indexed [state], state 0 is s = -1, state 1 is s = +1.
  std::vector<double> theta(static_cast<std::size_t>(2 * n));
  for (Index i = 0; i < n; ++i) {
    theta[2 * i] = bm.unary[i];
    theta[2 * i + 1] = unary_cost[i] - bm.unary[i];
  }
  // Directed edge d = 2e runs edges[e].i -> edges[e].j, d = 2e + 1 the reverse.
  std::vector<double> msg(static_cast<std::size_t>(2 * n_dir), 0.0);
  std::vector<double> next(msg.size(), 0.0);
  std::vector<double> incoming(static_cast<std::size_t>(2 * n), 0.0);

  auto gather = [&](const std::vector<double>& m) {
#pragma omp parallel for schedule(static) if (n_dir > 4096)
    for (Index i = 0; i < n; ++i) {
      double lo = 0.0;
      double hi = 0.0;
      for (const auto& nb : bm.graph.neighbors(i)) {
        const Index d = 2 * nb.edge + (edges[static_cast<std::size_t>(nb.edge)].i == nb.node ? 0 : 1);
        lo += m[2 * d];
        hi += m[2 * d + 1];
      }
      incoming[2 * i] = lo;
      incoming[2 * i + 1] = hi;
    }
  };

  LoopyResult result;
  for (int sweep = 0; sweep < opts.max_sweeps && n_dir > 0; ++sweep) {
    gather(msg);
    double max_change = 0.0;
#pragma omp parallel for schedule(static) reduction(max : max_change) if (n_dir > 4096)
    for (Index d = 0; d < n_dir; ++d) {
      const Edge& e = edges[static_cast<std::size_t>(d / 2)];
      const Index from = (d % 2 == 0) ? e.i : e.j;
      const Index rev = d ^ 1;
      const double w = bm.pairwise[d / 2];
      const double h_lo = theta[2 * from] + incoming[2 * from] - msg[2 * rev];
      const double h_hi = theta[2 * from + 1] + incoming[2 * from + 1] - msg[2 * rev + 1];
      // pair cost -w * s_from * s_to
      double to_lo = std::min(h_lo - w, h_hi + w);
      double to_hi = std::min(h_lo + w, h_hi - w);
      const double floor = std::min(to_lo, to_hi);
      to_lo -= floor;
      to_hi -= floor;
      const double new_lo = opts.damping * msg[2 * d] + (1.0 - opts.damping) * to_lo;
      const double new_hi = opts.damping * msg[2 * d + 1] + (1.0 - opts.damping) * to_hi;
      max_change = std::max({max_change, std::abs(new_lo - msg[2 * d]), std::abs(new_hi - msg[2 * d + 1])});
      next[2 * d] = new_lo;
      next[2 * d + 1] = new_hi;
    }
    msg.swap(next);
    result.sweeps = sweep + 1;
    if (max_change < opts.tol) {
      result.converged = true;
      break;
    }
  }
  if (n_dir == 0) result.converged = true;

  gather(msg);
  SpinVector decoded(n, -1);
  for (Index i = 0; i < n; ++i) {
    const double b_lo = theta[2 * i] + incoming[2 * i];
    const double b_hi = theta[2 * i + 1] + incoming[2 * i + 1];
    if (b_hi < b_lo) decoded.set(i, 1);
  }
  const SpinVector inactive(n, -1);
  result.s = map_objective(unary_cost, bm, decoded) < map_objective(unary_cost, bm, inactive)
                 ? std::move(decoded)
                 : inactive;
  return result;
}

SpinVector map_inference(const Vector& unary_cost, const BoltzmannMachine& bm, MapMode mode,
                         const LoopyOptions& opts) {
  if (mode == MapMode::exact) return map_exact(unary_cost, bm);
  return map_loopy(unary_cost, bm, opts).s;
}

// ---------------------------------------------------------------------------
// JSON

std::string to_json(const BoltzmannMachine& bm) {
  bm.validate();
  nlohmann::json j;
  j["n_nodes"] = bm.graph.n_nodes();
  j["edges"] = nlohmann::json::array();
  j["pairwise"] = nlohmann::json::array();
  const auto& edges = bm.graph.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    j["edges"].push_back({edges[e].i, edges[e].j});
    j["pairwise"].push_back({edges[e].i, edges[e].j, bm.pairwise[static_cast<Index>(e)]});
  }
  j["unary"] = std::vector<double>(bm.unary.data(), bm.unary.data() + bm.unary.size());
  return j.dump();
}

BoltzmannMachine bm_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw IoError(std::string("Boltzmann machine JSON: ") + ex.what());
  }
  try {
    const Index n = j.at("n_nodes").get<Index>();
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) edges.push_back({e.at(0).get<Index>(), e.at(1).get<Index>()});
    BoltzmannMachine bm = BoltzmannMachine::flat(Graph(n, edges));
    const auto unary = j.at("unary").get<std::vector<double>>();
    if (static_cast<Index>(unary.size()) != n)
      throw InvalidDimension("Boltzmann machine JSON: unary length does not match n_nodes");
    for (Index i = 0; i < n; ++i) bm.unary[i] = unary[static_cast<std::size_t>(i)];
    std::vector<bool> seen(static_cast<std::size_t>(bm.graph.n_edges()), false);
    for (const auto& p : j.at("pairwise")) {
      const Index e = bm.graph.edge_index(p.at(0).get<Index>(), p.at(1).get<Index>());
      if (e < 0) throw InvalidDimension("Boltzmann machine JSON: pairwise weight on a missing edge");
      if (seen[static_cast<std::size_t>(e)])
        throw InvalidDimension("Boltzmann machine JSON: duplicate pairwise weight");
      seen[static_cast<std::size_t>(e)] = true;
      bm.pairwise[e] = p.at(2).get<double>();
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end())
      throw InvalidDimension("Boltzmann machine JSON: edge without a pairwise weight");
    bm.validate();
    return bm;
  } catch (const nlohmann::json::exception& ex) {
    throw IoError(std::string("Boltzmann machine JSON: ") + ex.what());
  }
}

void save_json(const std::filesystem::path& path, const BoltzmannMachine& bm) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(bm) << '\n';
}

BoltzmannMachine load_bm_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return bm_from_json(buf.str());
}

}  // namespace amrf
