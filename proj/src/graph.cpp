#include "spgc/graph.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

namespace spgc {

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(int n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  int find(int v) {
    while (parent_[v] != v) {
      parent_[v] = parent_[parent_[v]];
      v = parent_[v];
    }
    return v;
  }

  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[b] = a;
    return true;
  }

 private:
  std::vector<int> parent_;
};

}  // namespace

bool is_connected(int node_count, const std::vector<Edge>& edges) {
  if (node_count <= 1) return true;
  DisjointSets sets(node_count);
  int components = node_count;
  for (const Edge& e : edges)
    if (sets.unite(e.i, e.j)) --components;
  return components == 1;
}

GraphTopology GraphTopology::build(int node_count, std::vector<Edge> edges) {
  require(node_count >= 1, ErrorCode::InvalidArgument, "node count must be positive");
  std::set<std::pair<int, int>> seen;
  for (const Edge& e : edges) {
    std::ostringstream os;
    os << "{" << e.i << "," << e.j << "}";
    require(e.i >= 0 && e.j >= 0 && e.i < node_count && e.j < node_count, ErrorCode::InvalidEdge,
            "edge " + os.str() + " out of range");
    require(e.i != e.j, ErrorCode::InvalidEdge, "self-loop " + os.str());
    require(seen.insert(std::minmax(e.i, e.j)).second, ErrorCode::InvalidEdge, "duplicate edge " + os.str());
  }
  require(is_connected(node_count, edges), ErrorCode::DisconnectedGraph, "edge set does not connect all nodes");

  GraphTopology g;
  g.node_count_ = node_count;
  g.edges_ = std::move(edges);
  const int e_count = g.edge_count();
  g.arcs_.reserve(2 * g.edges_.size());
  for (const Edge& e : g.edges_) g.arcs_.push_back({e.i, e.j});
  for (const Edge& e : g.edges_) g.arcs_.push_back({e.j, e.i});
  for (int q = 0; q < g.arc_count(); ++q) g.arc_index_[{g.arcs_[q].tail, g.arcs_[q].head}] = q;

  g.incident_.assign(node_count, {});
  for (int e = 0; e < e_count; ++e) {
    const Edge& ed = g.edges_[e];
    g.incident_[ed.i].push_back({ed.j, e, e, e + e_count});
    g.incident_[ed.j].push_back({ed.i, e, e + e_count, e});
  }
  return g;
}

std::optional<int> GraphTopology::arc_index(int i, int j) const {
  auto it = arc_index_.find({i, j});
  if (it == arc_index_.end()) return std::nullopt;
  return it->second;
}

std::vector<int> GraphTopology::neighbors(int i) const {
  std::vector<int> out;
  for (const Incidence& inc : incident_.at(i)) out.push_back(inc.neighbor);
  return out;
}

int GraphTopology::max_degree() const {
  int d = 0;
  for (const auto& inc : incident_) d = std::max(d, static_cast<int>(inc.size()));
  return d;
}

// ---------------------------------------------------------------------------

ActivationModel ActivationModel::uniform(const GraphTopology& topology, double p) {
  return per_edge(topology, std::vector<double>(topology.edge_count(), p));
}

ActivationModel ActivationModel::per_edge(const GraphTopology& topology, std::vector<double> link_probs) {
  require(static_cast<int>(link_probs.size()) == topology.edge_count(), ErrorCode::DimensionMismatch,
          "one activation probability per edge expected");
  for (double p : link_probs)
    require(p > 0.0 && p <= 1.0, ErrorCode::InvalidProbability,
            "link probability " + std::to_string(p) + " outside (0, 1]");
  ActivationModel m;
  m.link_probs_ = std::move(link_probs);
  m.node_probs_.assign(topology.node_count(), 0.0);
  for (int i = 0; i < topology.node_count(); ++i) {
    double all_off = 1.0;
    for (const Incidence& inc : topology.incident(i)) all_off *= 1.0 - m.link_probs_[inc.edge];
    m.node_probs_[i] = 1.0 - all_off;
  }
  return m;
}

bool ActivationModel::is_static() const noexcept {
  return std::all_of(link_probs_.begin(), link_probs_.end(), [](double p) { return p == 1.0; });
}

ActivationDraw ActivationDraw::full(const GraphTopology& topology) {
  return from_edges(topology, std::vector<char>(topology.edge_count(), 1));
}

ActivationDraw ActivationDraw::from_edges(const GraphTopology& topology, const std::vector<char>& edge_active) {
  ActivationDraw d;
  const int e_count = topology.edge_count();
  d.arc_active.assign(topology.arc_count(), 0);
  d.node_active.assign(topology.node_count(), 0);
  for (int e = 0; e < e_count; ++e) {
    if (!edge_active[e]) continue;
    d.arc_active[e] = d.arc_active[e + e_count] = 1;
    d.node_active[topology.edges()[e].i] = 1;
    d.node_active[topology.edges()[e].j] = 1;
    d.active_arcs += 2;
  }
  // A single node with no edges has no arcs yet is the whole (static) graph.
  if (topology.node_count() == 1 && e_count == 0) d.node_active[0] = 1;
  d.active_nodes = static_cast<int>(std::count(d.node_active.begin(), d.node_active.end(), 1));
  return d;
}

// ---------------------------------------------------------------------------

GraphTopology random_geometric_graph(int node_count, double radius, Rng& rng, int max_retries) {
  require(node_count >= 1, ErrorCode::InvalidArgument, "node count must be positive");
  require(radius > 0.0 && radius <= std::sqrt(2.0), ErrorCode::InvalidArgument, "radius must lie in (0, sqrt 2]");
  require(max_retries >= 1, ErrorCode::InvalidArgument, "retry cap must be positive");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> px(node_count), py(node_count);
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    for (int i = 0; i < node_count; ++i) {
      px[i] = unit(rng);
      py[i] = unit(rng);
    }
    std::vector<Edge> edges;
    for (int i = 0; i < node_count; ++i)
      for (int j = i + 1; j < node_count; ++j)
        if (std::hypot(px[i] - px[j], py[i] - py[j]) <= radius) edges.push_back({i, j});
    if (is_connected(node_count, edges)) return GraphTopology::build(node_count, std::move(edges));
  }
  throw Error(ErrorCode::GenerationFailed,
              "no connected geometric graph after " + std::to_string(max_retries) + " draws");
}

nlohmann::json topology_to_json(const GraphTopology& topology, const ActivationModel* model) {
  nlohmann::json j;
  j["n"] = topology.node_count();
  j["edges"] = nlohmann::json::array();
  for (const Edge& e : topology.edges()) j["edges"].push_back({e.i, e.j});
  if (model != nullptr) {
    nlohmann::json p = nlohmann::json::object();
    for (int e = 0; e < topology.edge_count(); ++e) {
      const Edge& ed = topology.edges()[e];
      p[std::to_string(ed.i) + "-" + std::to_string(ed.j)] = model->link_probs()[e];
    }
    j["p"] = p;
  }
  return j;
}

GraphTopology topology_from_json(const nlohmann::json& j) {
  try {
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
    return GraphTopology::build(j.at("n").get<int>(), std::move(edges));
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::ConfigError, std::string("topology: ") + ex.what());
  }
}

ActivationModel activation_from_json(const GraphTopology& topology, const nlohmann::json& j) {
  std::vector<double> probs(topology.edge_count(), 1.0);
  if (!j.contains("p")) return ActivationModel::per_edge(topology, probs);
  const auto& p = j.at("p");
  if (p.is_number()) return ActivationModel::uniform(topology, p.get<double>());
  require(p.is_object(), ErrorCode::ConfigError, "topology: \"p\" must be a number or an object");
  for (auto it = p.begin(); it != p.end(); ++it) {
    const std::string& key = it.key();
    const auto dash = key.find('-');
    require(dash != std::string::npos, ErrorCode::ConfigError, "topology: bad edge key \"" + key + "\"");
    int a = 0, b = 0;
    try {
      a = std::stoi(key.substr(0, dash));
      b = std::stoi(key.substr(dash + 1));
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError, "topology: bad edge key \"" + key + "\"");
    }
    auto q = topology.arc_index(a, b);
    require(q.has_value(), ErrorCode::ConfigError, "topology: \"" + key + "\" is not an edge");
    probs[topology.edge_of_arc(*q)] = it.value().get<double>();
  }
  return ActivationModel::per_edge(topology, probs);
}

}  // namespace spgc
