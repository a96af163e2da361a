#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "vesselplan/skeleton.hpp"

namespace vplan {

enum class NodeKind { endpoint, bifurcation, anchor };
enum class EdgeLabel { traversable, non_traversable };

struct EdgeGeometry {
  double turning_angle = 0.0;  // radians, mean over successive tangent pairs
  double arc_length = 0.0;     // physical units
  double diameter = 0.0;       // physical units
  bool operator==(const EdgeGeometry&) const = default;
};

struct KeyNode {
  int id = -1;
  Pixel position;
  NodeKind kind = NodeKind::endpoint;
  int degree = 0;                // incident edge endpoints; self-loops count twice
  std::vector<Pixel> pixels;     // cluster pixels, sorted; singleton for endpoints/anchors
};

struct VesselEdge {
  int id = -1;
  int node_a = -1;
  int node_b = -1;               // node_a <= node_b after normalization
  std::vector<Pixel> chain;      // interior pixels only; never contains node pixels
  std::optional<EdgeGeometry> geometry;
  std::optional<double> probability;
  std::optional<EdgeLabel> label;
};

class VesselGraph {
 public:
  std::vector<KeyNode> nodes;
  std::vector<VesselEdge> edges;
  int width = 0;
  int height = 0;
  Spacing spacing;
  std::string provenance;
  std::vector<std::string> warnings;

  const KeyNode& node(int id) const { return nodes.at(id); }
  KeyNode& node(int id) { return nodes.at(id); }
  const VesselEdge& edge(int id) const { return edges.at(id); }
  VesselEdge& edge(int id) { return edges.at(id); }

  // Edge ids incident to a node; a self-loop appears once.
  const std::vector<int>& incident_edges(int node_id) const { return incident_.at(node_id); }

  // Sorted unique ids of nodes sharing an edge with node_id (excluding itself).
  const std::vector<int>& neighbors(int node_id) const { return neighbors_.at(node_id); }

  int other_end(int edge_id, int node_id) const {
    const VesselEdge& e = edges.at(edge_id);
    return e.node_a == node_id ? e.node_b : e.node_a;
  }

  struct IdMaps {
    std::vector<int> node_map;  // old id -> new id
    std::vector<int> edge_map;
  };

  // Sort nodes by position, canonicalize edge orientation, renumber ids,
  // recompute degrees, rebuild the adjacency index. Returns the id remapping.
  IdMaps normalize() {
    std::vector<int> order(nodes.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return nodes[a].position < nodes[b].position;
    });
    std::vector<int> new_id(nodes.size());
    std::vector<KeyNode> sorted;
    sorted.reserve(nodes.size());
    for (size_t i = 0; i < order.size(); ++i) {
      new_id[order[i]] = static_cast<int>(i);
      sorted.push_back(nodes[order[i]]);
      sorted.back().id = static_cast<int>(i);
    }
    nodes = std::move(sorted);

    for (VesselEdge& e : edges) {
      e.node_a = new_id.at(e.node_a);
      e.node_b = new_id.at(e.node_b);
      if (e.node_a > e.node_b) {
        std::swap(e.node_a, e.node_b);
        std::reverse(e.chain.begin(), e.chain.end());
      } else if (e.node_a == e.node_b && !e.chain.empty() && e.chain.back() < e.chain.front()) {
        std::reverse(e.chain.begin(), e.chain.end());
      }
    }
    auto key = [](const VesselEdge& e) {
      Pixel front = e.chain.empty() ? Pixel{-1, -1} : e.chain.front();
      return std::tuple(e.node_a, e.node_b, front);
    };
    std::vector<int> edge_order(edges.size());
    for (size_t i = 0; i < edge_order.size(); ++i) edge_order[i] = static_cast<int>(i);
    std::sort(edge_order.begin(), edge_order.end(),
              [&](int x, int y) { return key(edges[x]) < key(edges[y]); });
    std::vector<int> edge_map(edges.size());
    std::vector<VesselEdge> sorted_edges;
    sorted_edges.reserve(edges.size());
    for (size_t i = 0; i < edge_order.size(); ++i) {
      edge_map[edge_order[i]] = static_cast<int>(i);
      sorted_edges.push_back(std::move(edges[edge_order[i]]));
      sorted_edges.back().id = static_cast<int>(i);
    }
    edges = std::move(sorted_edges);
    rebuild_index();
    return {std::move(new_id), std::move(edge_map)};
  }

  void rebuild_index() {
    for (KeyNode& n : nodes) n.degree = 0;
    incident_.assign(nodes.size(), {});
    neighbors_.assign(nodes.size(), {});
    for (const VesselEdge& e : edges) {
      nodes.at(e.node_a).degree += 1;
      nodes.at(e.node_b).degree += 1;
      incident_[e.node_a].push_back(e.id);
      if (e.node_b != e.node_a) incident_[e.node_b].push_back(e.id);
      neighbors_[e.node_a].push_back(e.node_b);
      neighbors_[e.node_b].push_back(e.node_a);
    }
    for (auto& v : neighbors_) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
  }

 private:
  std::vector<std::vector<int>> incident_;
  std::vector<std::vector<int>> neighbors_;
};

namespace detail {

inline Pixel centroid_pixel(const std::vector<Pixel>& pixels) {
  double mr = 0.0, mc = 0.0;
  for (const Pixel& p : pixels) { mr += p.r; mc += p.c; }
  mr /= static_cast<double>(pixels.size());
  mc /= static_cast<double>(pixels.size());
  Pixel best = pixels.front();
  double best_d2 = 1e300;
  for (const Pixel& p : pixels) {
    double d2 = (p.r - mr) * (p.r - mr) + (p.c - mc) * (p.c - mc);
    if (d2 < best_d2 - 1e-12 || (std::abs(d2 - best_d2) <= 1e-12 && p < best)) {
      best_d2 = d2;
      best = p;
    }
  }
  return best;
}

}  // namespace detail

// Endpoints (exactly one 8-neighbor), junction clusters (8-connected groups of
// pixels with >= 3 neighbors, one node per cluster at the centroid-nearest
// cluster pixel), and isolated pixels as anchors. Sorted by position.
inline std::vector<KeyNode> detect_key_nodes(const Skeleton& skeleton) {
  std::vector<KeyNode> nodes;
  std::vector<Pixel> pixels = skeleton.pixels();
  std::set<Pixel> junction;
  for (const Pixel& p : pixels) {
    int n = skeleton.neighbor_count(p);
    if (n == 1) {
      nodes.push_back({-1, p, NodeKind::endpoint, 0, {p}});
    } else if (n == 0) {
      nodes.push_back({-1, p, NodeKind::anchor, 0, {p}});
    } else if (n >= 3) {
      junction.insert(p);
    }
  }
  // Cluster junction pixels with 8-connectivity.
  std::set<Pixel> seen;
  for (const Pixel& p : junction) {
    if (seen.count(p)) continue;
    std::vector<Pixel> cluster, stack{p};
    seen.insert(p);
    while (!stack.empty()) {
      Pixel q = stack.back();
      stack.pop_back();
      cluster.push_back(q);
      for (const Pixel& d : kNeighbors8) {
        Pixel t{q.r + d.r, q.c + d.c};
        if (junction.count(t) && !seen.count(t)) {
          seen.insert(t);
          stack.push_back(t);
        }
      }
    }
    std::sort(cluster.begin(), cluster.end());
    nodes.push_back({-1, detail::centroid_pixel(cluster), NodeKind::bifurcation, 0, cluster});
  }
  std::sort(nodes.begin(), nodes.end(),
            [](const KeyNode& a, const KeyNode& b) { return a.position < b.position; });
  for (size_t i = 0; i < nodes.size(); ++i) nodes[i].id = static_cast<int>(i);
  return nodes;
}

// One edge per maximal degree-2 chain between node clusters. Parallel chains
// stay distinct edges; a chain leaving and re-entering the same cluster is a
// self-loop. Components with no key node at all (pure cycles) get a synthetic
// anchor node so the loop stays representable.
inline VesselGraph trace_edges(const Skeleton& skeleton, const std::vector<KeyNode>& nodes) {
  VesselGraph g;
  g.width = skeleton.width();
  g.height = skeleton.height();
  g.spacing = skeleton.spacing();
  g.nodes = nodes;

  std::map<Pixel, int> node_of;
  for (const KeyNode& n : g.nodes)
    for (const Pixel& p : n.pixels) {
      if (!skeleton.contains(p))
        throw IntegrityError("trace_edges: node pixel not on skeleton");
      node_of[p] = n.id;
    }
  // Every endpoint/junction pixel must belong to some node.
  for (const Pixel& p : skeleton.pixels()) {
    int n = skeleton.neighbor_count(p);
    if ((n == 1 || n == 0 || n >= 3) && !node_of.count(p))
      throw IntegrityError("trace_edges: skeleton key pixel missing from node list");
  }

  std::set<Pixel> consumed;
  auto walk = [&](Pixel from, Pixel first) {
    // Returns (terminal node id, interior chain). `from` is a node pixel.
    std::vector<Pixel> chain;
    Pixel prev = from, cur = first;
    while (true) {
      auto it = node_of.find(cur);
      if (it != node_of.end()) return std::pair(it->second, chain);
      if (skeleton.neighbor_count(cur) != 2)
        throw IntegrityError("trace_edges: chain pixel with degree != 2; node list inconsistent");
      chain.push_back(cur);
      consumed.insert(cur);
      Pixel next{};
      for (const Pixel& q : skeleton.neighbors(cur))
        if (!(q == prev)) { next = q; break; }
      prev = cur;
      cur = next;
    }
  };

  for (const KeyNode& n : g.nodes) {
    for (const Pixel& p : n.pixels) {
      for (const Pixel& d : kNeighbors8) {
        Pixel q{p.r + d.r, p.c + d.c};
        if (!skeleton.contains(q)) continue;
        auto it = node_of.find(q);
        if (it != node_of.end()) {
          // Direct node-to-node adjacency: empty chain, emitted from the
          // lower-id side only.
          if (it->second != n.id && n.id < it->second)
            g.edges.push_back({-1, n.id, it->second, {}, {}, {}, {}});
          continue;
        }
        if (consumed.count(q)) continue;
        consumed.insert(q);
        std::vector<Pixel> chain{q};
        auto [end_node, rest] = walk(q, [&] {
          // First step away from the cluster: q's neighbor that is not p.
          Pixel next{};
          for (const Pixel& t : skeleton.neighbors(q))
            if (!(t == p)) { next = t; break; }
          return next;
        }());
        chain.insert(chain.end(), rest.begin(), rest.end());
        g.edges.push_back({-1, n.id, end_node, chain, {}, {}, {}});
      }
    }
  }

  // Pure cycles: every pixel degree 2, no node anywhere on the component.
  for (const Pixel& p : skeleton.pixels()) {
    if (consumed.count(p) || node_of.count(p)) continue;
    if (skeleton.neighbor_count(p) != 2)
      throw IntegrityError("trace_edges: unreachable pixel with degree != 2");
    int anchor_id = static_cast<int>(g.nodes.size());
    g.nodes.push_back({anchor_id, p, NodeKind::anchor, 0, {p}});
    node_of[p] = anchor_id;
    g.warnings.push_back("pure cycle with no key node: synthesized anchor at (" +
                         std::to_string(p.r) + "," + std::to_string(p.c) + ")");
    Pixel first = skeleton.neighbors(p)[0];
    consumed.insert(first);
    std::vector<Pixel> chain{first};
    auto [end_node, rest] = walk(first, [&] {
      Pixel next{};
      for (const Pixel& t : skeleton.neighbors(first))
        if (!(t == p)) { next = t; break; }
      return next;
    }());
    chain.insert(chain.end(), rest.begin(), rest.end());
    g.edges.push_back({-1, anchor_id, end_node, chain, {}, {}, {}});
  }

  g.normalize();
  return g;
}

namespace detail {

inline double chain_metric_length(const VesselGraph& g, const VesselEdge& e) {
  std::vector<Pixel> path;
  path.push_back(g.node(e.node_a).position);
  path.insert(path.end(), e.chain.begin(), e.chain.end());
  path.push_back(g.node(e.node_b).position);
  double len = 0.0;
  for (size_t i = 0; i + 1 < path.size(); ++i)
    len += metric_step(path[i + 1].r - path[i].r, path[i + 1].c - path[i].c, g.spacing);
  return len;
}

}  // namespace detail

// Collapse pairs of degree-3 bifurcations joined by a single short segment
// into one degree-4 crossing node. Thinning a projection-induced crossing at a
// shallow angle yields two nearby 3-way junctions with a merged run between
// them; the crossing is modeled as a single node scoring all four arms.
inline VesselGraph consolidate_crossings(VesselGraph graph, double max_len) {
  if (max_len < 0.0) throw InvalidParameter("consolidate_crossings: max_len must be >= 0");
  while (true) {
    int best_edge = -1;
    double best_len = 0.0;
    for (const VesselEdge& e : graph.edges) {
      if (e.node_a == e.node_b) continue;
      const KeyNode& a = graph.node(e.node_a);
      const KeyNode& b = graph.node(e.node_b);
      if (a.kind != NodeKind::bifurcation || b.kind != NodeKind::bifurcation) continue;
      if (a.degree != 3 || b.degree != 3) continue;
      // A parallel pair between the same two junctions is a loop, not a crossing.
      int between = 0;
      for (int eid : graph.incident_edges(e.node_a)) {
        int other = graph.other_end(eid, e.node_a);
        if (other == e.node_b) ++between;
      }
      if (between != 1) continue;
      double len = detail::chain_metric_length(graph, e);
      if (len > max_len) continue;
      if (best_edge < 0 || len < best_len - 1e-12 ||
          (std::abs(len - best_len) <= 1e-12 && e.id < best_edge)) {
        best_edge = e.id;
        best_len = len;
      }
    }
    if (best_edge < 0) break;

    const VesselEdge merged_edge = graph.edge(best_edge);
    int ia = merged_edge.node_a, ib = merged_edge.node_b;
    KeyNode merged;
    merged.kind = NodeKind::bifurcation;
    merged.pixels = graph.node(ia).pixels;
    merged.pixels.insert(merged.pixels.end(), merged_edge.chain.begin(), merged_edge.chain.end());
    merged.pixels.insert(merged.pixels.end(), graph.node(ib).pixels.begin(),
                         graph.node(ib).pixels.end());
    std::sort(merged.pixels.begin(), merged.pixels.end());
    merged.position = detail::centroid_pixel(merged.pixels);

    VesselGraph next;
    next.width = graph.width;
    next.height = graph.height;
    next.spacing = graph.spacing;
    next.provenance = graph.provenance;
    next.warnings = graph.warnings;
    // Old node ids, with ia replaced by the merged node and ib dropped.
    std::vector<int> remap(graph.nodes.size(), -1);
    for (const KeyNode& n : graph.nodes) {
      if (n.id == ib) continue;
      KeyNode copy = n.id == ia ? merged : n;
      copy.id = static_cast<int>(next.nodes.size());
      remap[n.id] = copy.id;
      next.nodes.push_back(std::move(copy));
    }
    remap[ib] = remap[ia];
    for (const VesselEdge& e : graph.edges) {
      if (e.id == best_edge) continue;
      VesselEdge copy = e;
      copy.node_a = remap[e.node_a];
      copy.node_b = remap[e.node_b];
      next.edges.push_back(std::move(copy));
    }
    next.normalize();
    graph = std::move(next);
  }
  return graph;
}

struct GraphBuildOptions {
  double crossing_merge_len = 18.0;  // physical units; 0 disables consolidation
};

inline VesselGraph build_vessel_graph(const Skeleton& skeleton,
                                      const GraphBuildOptions& opts = {}) {
  VesselGraph g = trace_edges(skeleton, detect_key_nodes(skeleton));
  if (opts.crossing_merge_len > 0.0) g = consolidate_crossings(std::move(g), opts.crossing_merge_len);
  return g;
}

}  // namespace vplan
