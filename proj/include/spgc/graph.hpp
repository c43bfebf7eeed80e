#pragma once

#include "spgc/core.hpp"

#include <Eigen/SparseCore>
#include <nlohmann/json.hpp>

#include <cmath>
#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace spgc {

struct Edge {
  int i = 0;
  int j = 0;
};

// Directed pair (tail, head) of the companion symmetric digraph.
struct Arc {
  int tail = 0;
  int head = 0;
};

// One neighbour j of node i together with the two arcs (i,j) and (j,i).
struct Incidence {
  int neighbor = 0;
  int edge = 0;
  int out_arc = 0;  // (i, neighbor)
  int in_arc = 0;   // (neighbor, i)
};

/// Connected undirected graph and its companion symmetric digraph.
///
/// Arc q < E is edge q as given, (i, j); arc q + E is its reversal (j, i).
class GraphTopology {
 public:
  GraphTopology() = default;  // empty placeholder; real graphs come from build()

  /// Throws InvalidEdge on self-loops, out-of-range or duplicate edges and
  /// DisconnectedGraph when the edges do not span a single component.
  static GraphTopology build(int node_count, std::vector<Edge> edges);

  int node_count() const noexcept { return node_count_; }
  int edge_count() const noexcept { return static_cast<int>(edges_.size()); }
  int arc_count() const noexcept { return 2 * edge_count(); }

  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<Arc>& arcs() const noexcept { return arcs_; }
  const Arc& arc(int q) const { return arcs_.at(q); }

  /// Position of arc (i, j), or nullopt when i and j are not adjacent.
  std::optional<int> arc_index(int i, int j) const;

  int reverse_arc(int q) const noexcept { return q < edge_count() ? q + edge_count() : q - edge_count(); }
  int edge_of_arc(int q) const noexcept { return q < edge_count() ? q : q - edge_count(); }

  const std::vector<Incidence>& incident(int i) const { return incident_.at(i); }
  std::vector<int> neighbors(int i) const;
  int degree(int i) const { return static_cast<int>(incident_.at(i).size()); }
  int max_degree() const;

 private:
  int node_count_ = 0;
  std::vector<Edge> edges_;
  std::vector<Arc> arcs_;
  std::map<std::pair<int, int>, int> arc_index_;
  std::vector<std::vector<Incidence>> incident_;
};

bool is_connected(int node_count, const std::vector<Edge>& edges);

// ---------------------------------------------------------------------------
// Incidence matrices

/// A1, A2 (2EM x NM), stacked A and B, and the signed/signless factors
/// M+ = A1' + A2', M- = A1' - A2' (NM x 2EM), all sparse.
template <typename Scalar>
struct IncidenceSet {
  using Sparse = Eigen::SparseMatrix<Scalar>;

  int block_size = 1;
  Sparse A1;
  Sparse A2;
  Sparse A;
  Sparse B;
  Sparse M_plus;
  Sparse M_minus;
};

template <typename Scalar>
IncidenceSet<Scalar> incidence_matrices(const GraphTopology& topology, int block_size) {
  require(block_size >= 1, ErrorCode::InvalidArgument, "block size must be positive");
  using Triplet = Eigen::Triplet<Scalar>;
  const int m = block_size;
  const int n = topology.node_count();
  const int arcs = topology.arc_count();

  std::vector<Triplet> t1;
  std::vector<Triplet> t2;
  t1.reserve(static_cast<std::size_t>(arcs) * m);
  t2.reserve(static_cast<std::size_t>(arcs) * m);
  for (int q = 0; q < arcs; ++q) {
    const Arc& a = topology.arc(q);
    for (int k = 0; k < m; ++k) {
      t1.emplace_back(q * m + k, a.tail * m + k, Scalar(1));
      t2.emplace_back(q * m + k, a.head * m + k, Scalar(1));
    }
  }

  IncidenceSet<Scalar> out;
  out.block_size = m;
  out.A1.resize(arcs * m, n * m);
  out.A2.resize(arcs * m, n * m);
  out.A1.setFromTriplets(t1.begin(), t1.end());
  out.A2.setFromTriplets(t2.begin(), t2.end());

  std::vector<Triplet> ta(t1);
  for (const auto& t : t2) ta.emplace_back(t.row() + arcs * m, t.col(), t.value());
  out.A.resize(2 * arcs * m, n * m);
  out.A.setFromTriplets(ta.begin(), ta.end());

  std::vector<Triplet> tb;
  tb.reserve(2 * static_cast<std::size_t>(arcs) * m);
  for (int r = 0; r < arcs * m; ++r) {
    tb.emplace_back(r, r, Scalar(-1));
    tb.emplace_back(r + arcs * m, r, Scalar(-1));
  }
  out.B.resize(2 * arcs * m, arcs * m);
  out.B.setFromTriplets(tb.begin(), tb.end());

  typename IncidenceSet<Scalar>::Sparse a1t = out.A1.transpose();
  typename IncidenceSet<Scalar>::Sparse a2t = out.A2.transpose();
  out.M_plus = a1t + a2t;
  out.M_minus = a1t - a2t;
  return out;
}

// ---------------------------------------------------------------------------
// Random activation

/// Per-edge activation probabilities p_ij = p_ji in (0, 1].
class ActivationModel {
 public:
  static ActivationModel uniform(const GraphTopology& topology, double p);
  static ActivationModel per_edge(const GraphTopology& topology, std::vector<double> link_probs);
  static ActivationModel always_on(const GraphTopology& topology) { return uniform(topology, 1.0); }

  const std::vector<double>& link_probs() const noexcept { return link_probs_; }
  const std::vector<double>& node_probs() const noexcept { return node_probs_; }
  double arc_prob(const GraphTopology& topology, int q) const { return link_probs_.at(topology.edge_of_arc(q)); }
  bool is_static() const noexcept;

 private:
  std::vector<double> link_probs_;
  std::vector<double> node_probs_;
};

/// Realized G^r: active arcs closed under reversal, active nodes = arc endpoints.
struct ActivationDraw {
  std::vector<char> arc_active;
  std::vector<char> node_active;
  int active_arcs = 0;
  int active_nodes = 0;

  static ActivationDraw full(const GraphTopology& topology);
  static ActivationDraw from_edges(const GraphTopology& topology, const std::vector<char>& edge_active);

  bool arc(int q) const { return arc_active[q] != 0; }
  bool node(int i) const { return node_active[i] != 0; }
  int active_edges() const noexcept { return active_arcs / 2; }
  bool is_full() const noexcept {
    return active_arcs == static_cast<int>(arc_active.size()) &&
           active_nodes == static_cast<int>(node_active.size());
  }
};

template <typename URBG>
ActivationDraw sample_activation(const GraphTopology& topology, const ActivationModel& model, URBG& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<char> edge_active(topology.edge_count(), 0);
  for (int e = 0; e < topology.edge_count(); ++e) edge_active[e] = unit(rng) < model.link_probs()[e] ? 1 : 0;
  return ActivationDraw::from_edges(topology, edge_active);
}

/// Psi = diag{alpha_i} over nodes and Phi = diag{p_ij} over arcs.
template <typename Scalar>
std::pair<Eigen::DiagonalMatrix<Scalar, Eigen::Dynamic>, Eigen::DiagonalMatrix<Scalar, Eigen::Dynamic>>
activation_statistics(const GraphTopology& topology, const ActivationModel& model) {
  Vector<Scalar> alpha(topology.node_count());
  for (int i = 0; i < topology.node_count(); ++i) alpha(i) = static_cast<Scalar>(model.node_probs()[i]);
  Vector<Scalar> p(topology.arc_count());
  for (int q = 0; q < topology.arc_count(); ++q) p(q) = static_cast<Scalar>(model.arc_prob(topology, q));
  return {Eigen::DiagonalMatrix<Scalar, Eigen::Dynamic>(alpha), Eigen::DiagonalMatrix<Scalar, Eigen::Dynamic>(p)};
}

// ---------------------------------------------------------------------------
// Generators and serialization

inline constexpr int kGeometricRetryCap = 1000;

/// Unit-square random geometric graph, resampled until connected.
GraphTopology random_geometric_graph(int node_count, double radius, Rng& rng, int max_retries = kGeometricRetryCap);

nlohmann::json topology_to_json(const GraphTopology& topology, const ActivationModel* model = nullptr);
GraphTopology topology_from_json(const nlohmann::json& j);
/// Reads the "p" object; edges absent from it default to probability 1.
ActivationModel activation_from_json(const GraphTopology& topology, const nlohmann::json& j);

}  // namespace spgc
