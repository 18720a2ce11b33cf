#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "amrf/types.hpp"

namespace amrf {

/// Spin labeling s in {-1, +1}^N; v = (s + 1) / 2 marks the active entries.
class SpinVector {
 public:
  SpinVector() = default;
  /// All entries set to `value` (must be -1 or +1).
  SpinVector(Index n, int value);
  /// Entries must be exactly -1 or +1.
  static SpinVector from_values(const std::vector<int>& values);
  /// s_i = +1 where mask_i != 0.
  static SpinVector from_mask(const Vector& mask);

  Index size() const { return static_cast<Index>(s_.size()); }
  int operator[](Index i) const { return s_[static_cast<std::size_t>(i)]; }
  bool active(Index i) const { return s_[static_cast<std::size_t>(i)] > 0; }
  void set(Index i, int value);
  Index active_count() const;
  /// The {0,1} image v.
  Vector mask() const;
  /// Indices with s_i = +1, ascending.
  std::vector<Index> active_indices() const;
  SpinVector flipped() const;

  friend bool operator==(const SpinVector&, const SpinVector&) = default;

 private:
  std::vector<std::int8_t> s_;
};

struct Edge {
  Index i = 0;
  Index j = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Undirected simple graph with canonical (i < j) edges kept sorted.
class Graph {
 public:
  struct Neighbor {
    Index node;
    Index edge;
  };

  Graph() = default;
  explicit Graph(Index n_nodes);
  /// Edges may come in either orientation; self-loops, duplicates and
  /// out-of-range endpoints throw InvalidDimension.
  Graph(Index n_nodes, std::vector<Edge> edges);

  Index n_nodes() const { return n_nodes_; }
  Index n_edges() const { return static_cast<Index>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<Neighbor>& neighbors(Index i) const {
    return adjacency_[static_cast<std::size_t>(i)];
  }
  /// Index into edges() of {i, j}, or -1 if absent.
  Index edge_index(Index i, Index j) const;
  bool has_edge(Index i, Index j) const { return edge_index(i, j) >= 0; }

 private:
  Index n_nodes_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<Neighbor>> adjacency_;
};

enum class NeighborhoodKind { chain2, grid8 };

/// Candidate neighbor sets: chain2 links i to i-1 and i+1; grid8 links a
/// pixel of a height x width raster (row-major) to its 8 surrounding pixels.
struct NeighborhoodSpec {
  NeighborhoodKind kind = NeighborhoodKind::chain2;
  Index height = 1;
  Index width = 0;

  static NeighborhoodSpec chain2(Index n) { return {NeighborhoodKind::chain2, 1, n}; }
  static NeighborhoodSpec grid8(Index height, Index width) {
    return {NeighborhoodKind::grid8, height, width};
  }
  Index size() const { return height * width; }
  /// Sorted neighbor indices of node i.
  std::vector<Index> neighbors(Index i) const;
};

/// Graph update from a binary mask: {i, j} is an edge iff j is a candidate
/// neighbor of i and b_j = +1 (or vice versa).
Graph update_graph(const SpinVector& b, const NeighborhoodSpec& spec);

/// Every candidate edge of the neighborhood.
Graph full_graph(const NeighborhoodSpec& spec);

/// Pairwise MRF over spins with unary weights W_i and pairwise weights W_ij.
/// `pairwise[e]` belongs to `graph.edges()[e]`.
struct BoltzmannMachine {
  Graph graph;
  Vector unary;
  Vector pairwise;

  /// All weights zero.
  static BoltzmannMachine flat(Graph graph);
  static BoltzmannMachine flat(Index n_nodes) { return flat(Graph(n_nodes)); }

  Index size() const { return graph.n_nodes(); }
  /// Throws InvalidDimension / NumericError if sizes disagree or weights are not finite.
  void validate() const;
};

/// sum_i W_i s_i + sum_{(i,j)} W_ij s_i s_j, i.e. log p(s) + log Z.
double bm_log_score(const SpinVector& s, const BoltzmannMachine& bm);

// ---------------------------------------------------------------------------
// Pseudo-likelihood learning

struct PseudoLikelihoodOptions {
  int max_iters = 20;
  double step = 0.1;
  double l2 = 0.01;
  int max_halvings = 40;
};

/// sum_i log sigmoid(2 b_i (W_i + sum_{j ~ i} W_ij b_j)).
double pseudo_log_likelihood(const SpinVector& b, const BoltzmannMachine& bm);

/// Pseudo-log-likelihood minus l2 * |Theta|^2.
double pl_objective(const SpinVector& b, const BoltzmannMachine& bm, double l2);

/// Analytic gradient of pl_objective, laid out like the machine's weights.
struct PlGradient {
  Vector unary;
  Vector pairwise;
};
PlGradient pl_gradient(const SpinVector& b, const BoltzmannMachine& bm, double l2);

/// Gradient ascent on pl_objective from zero weights. Steps that would lower
/// the objective are retried with half the step size. If `objective_trace` is
/// given it receives the objective at the start and after each accepted step.
BoltzmannMachine learn_pseudolikelihood(const SpinVector& b, const Graph& graph,
                                        const PseudoLikelihoodOptions& opts = {},
                                        std::vector<double>* objective_trace = nullptr);

// ---------------------------------------------------------------------------
// MAP inference over  E(s) = sum_i c_i v_i - bm_log_score(s),  v = (s + 1) / 2

enum class MapMode { exact, loopy };

inline constexpr Index kExactMapLimit = 20;

struct LoopyOptions {
  double damping = 0.5;
  int max_sweeps = 200;
  double tol = 1e-6;
};

double map_objective(const Vector& unary_cost, const BoltzmannMachine& bm, const SpinVector& s);

/// Exhaustive search over all 2^N labelings (N <= kExactMapLimit). Labelings
/// are visited in increasing order of the integer whose bit i is v_i, and the
/// first minimum wins, so ties resolve towards fewer low-index actives.
SpinVector map_exact(const Vector& unary_cost, const BoltzmannMachine& bm);

struct LoopyResult {
  SpinVector s;
  int sweeps = 0;
  bool converged = false;
};

/// Damped synchronous min-sum (max-product) belief propagation. The decoded
/// labeling is compared with the all-inactive labeling and the better one
/// under map_objective is returned (ties go to all-inactive).
LoopyResult map_loopy(const Vector& unary_cost, const BoltzmannMachine& bm,
                      const LoopyOptions& opts = {});

SpinVector map_inference(const Vector& unary_cost, const BoltzmannMachine& bm, MapMode mode,
                         const LoopyOptions& opts = {});

// ---------------------------------------------------------------------------
// JSON: {"n_nodes": N, "edges": [[i,j],...], "unary": [...], "pairwise": [[i,j,w],...]}

std::string to_json(const BoltzmannMachine& bm);
BoltzmannMachine bm_from_json(const std::string& text);
void save_json(const std::filesystem::path& path, const BoltzmannMachine& bm);
BoltzmannMachine load_bm_json(const std::filesystem::path& path);

}  // namespace amrf
