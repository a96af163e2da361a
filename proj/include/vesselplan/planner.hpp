#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "vesselplan/features.hpp"
#include "vesselplan/graph.hpp"

namespace vplan {

struct PriorWeights {
  double lambda_theta = 0.0;     // curvature prior
  double lambda_diameter = 0.0;  // thin-branch penalty, applied as 1/d
};

struct PlanRequest {
  int source = -1;
  int target = -1;
  PriorWeights priors;
};

enum class PlannerKind { proposed, shortest, heuristic };

inline const char* planner_name(PlannerKind k) {
  switch (k) {
    case PlannerKind::proposed: return "proposed";
    case PlannerKind::shortest: return "shortest";
    case PlannerKind::heuristic: return "heuristic";
  }
  return "proposed";
}

struct PlanResult {
  std::vector<int> nodes;
  std::vector<int> edges;
  std::vector<double> probabilities;  // NaN where the edge carries none
  double total_cost = 0.0;
  std::vector<std::array<double, 2>> polyline;  // smoothed, (r, c)
  PlannerKind planner = PlannerKind::proposed;
};

// Negative log-likelihood cost with optional additive geometric priors:
// w = -log p + lambda_theta * theta + lambda_d * (1 / d). Indexed by edge id.
inline std::vector<double> edge_costs(const VesselGraph& g, const PriorWeights& priors = {}) {
  std::vector<double> costs(g.edges.size());
  const bool needs_geometry = priors.lambda_theta != 0.0 || priors.lambda_diameter != 0.0;
  for (const VesselEdge& e : g.edges) {
    if (!e.probability) throw IntegrityError("edge_costs: edge " + std::to_string(e.id) +
                                             " carries no probability");
    double p = std::clamp(*e.probability, 1e-6, 1.0 - 1e-6);
    double w = -std::log(p);
    if (needs_geometry) {
      if (!e.geometry) throw IntegrityError("edge_costs: priors require edge geometry");
      w += priors.lambda_theta * e.geometry->turning_angle;
      w += priors.lambda_diameter / e.geometry->diameter;
    }
    costs[e.id] = w;
  }
  return costs;
}

namespace detail {

struct SearchPath {
  double cost = 0.0;
  std::vector<int> nodes;
  std::vector<int> edges;
};

// Least-cost search with full lexicographic tie-breaking: labels ordered by
// (cost, node sequence, edge sequence). With strictly positive costs the
// optimum is a simple path, matching the best-simple-path formulation, and
// the result is unique and deterministic.
inline SearchPath dijkstra_lex(const VesselGraph& g, const std::vector<double>& cost_of_edge,
                               int source, int target) {
  const int n = static_cast<int>(g.nodes.size());
  if (source < 0 || source >= n || target < 0 || target >= n)
    throw InvalidParameter("plan: source/target node id out of range");
  if (source == target) throw InvalidParameter("plan: source and target must differ");
  for (double w : cost_of_edge)
    if (!(w > 0.0) || !std::isfinite(w))
      throw IntegrityError("plan: edge costs must be finite and positive");

  std::vector<std::optional<SearchPath>> label(n);
  std::vector<char> done(n, 0);
  label[source] = SearchPath{0.0, {source}, {}};

  auto better = [](const SearchPath& a, const SearchPath& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    if (a.nodes != b.nodes) return a.nodes < b.nodes;
    return a.edges < b.edges;
  };

  while (true) {
    int u = -1;
    for (int i = 0; i < n; ++i) {
      if (done[i] || !label[i]) continue;
      if (u < 0 || better(*label[i], *label[u])) u = i;
    }
    if (u < 0) throw NoPathError("plan: no path between source and target");
    if (u == target) return *label[u];
    done[u] = 1;
    for (int eid : g.incident_edges(u)) {
      const VesselEdge& e = g.edge(eid);
      int v = e.node_a == u ? e.node_b : e.node_a;
      if (v == u || done[v]) continue;  // self-loops never improve a path
      SearchPath cand = *label[u];
      cand.cost += cost_of_edge[eid];
      cand.nodes.push_back(v);
      cand.edges.push_back(eid);
      if (!label[v] || better(cand, *label[v])) label[v] = std::move(cand);
    }
  }
}

inline std::vector<double> path_probabilities(const VesselGraph& g, const std::vector<int>& edges) {
  std::vector<double> probs;
  probs.reserve(edges.size());
  for (int eid : edges)
    probs.push_back(g.edge(eid).probability ? *g.edge(eid).probability
                                            : std::numeric_limits<double>::quiet_NaN());
  return probs;
}

}  // namespace detail

// Concatenated pixel path of a planned route, as floating-point points, plus
// the indices that must stay pinned during smoothing (key-node positions).
inline std::pair<std::vector<std::array<double, 2>>, std::vector<size_t>> raw_polyline(
    const VesselGraph& g, const std::vector<int>& nodes, const std::vector<int>& edges) {
  std::vector<std::array<double, 2>> points;
  std::vector<size_t> pinned;
  auto push_node = [&](int id) {
    pinned.push_back(points.size());
    Pixel p = g.node(id).position;
    points.push_back({static_cast<double>(p.r), static_cast<double>(p.c)});
  };
  if (nodes.empty()) return {points, pinned};
  push_node(nodes.front());
  for (size_t i = 0; i < edges.size(); ++i) {
    const VesselEdge& e = g.edge(edges[i]);
    bool forward = e.node_a == nodes[i];
    const std::vector<Pixel>& chain = e.chain;
    if (forward)
      for (const Pixel& p : chain)
        points.push_back({static_cast<double>(p.r), static_cast<double>(p.c)});
    else
      for (auto it = chain.rbegin(); it != chain.rend(); ++it)
        points.push_back({static_cast<double>(it->r), static_cast<double>(it->c)});
    push_node(nodes[i + 1]);
  }
  return {points, pinned};
}

// Two passes of a centered moving average (window 5) over interior points.
// Pinned points (route endpoints and key nodes) are kept exactly; every point
// stays within 2 px (Chebyshev) of its original position. Polylines shorter
// than the window are returned unchanged.
inline std::vector<std::array<double, 2>> smooth_polyline(
    std::vector<std::array<double, 2>> points, const std::vector<size_t>& pinned_indices) {
  constexpr size_t kWindow = 5;
  constexpr int kPasses = 2;
  constexpr double kMaxDrift = 2.0;
  const size_t n = points.size();
  if (n < kWindow) return points;

  std::vector<char> pinned(n, 0);
  for (size_t i : pinned_indices)
    if (i < n) pinned[i] = 1;
  const std::vector<std::array<double, 2>> original = points;

  for (int pass = 0; pass < kPasses; ++pass) {
    std::vector<std::array<double, 2>> next = points;
    for (size_t i = 2; i + 2 < n; ++i) {
      if (pinned[i]) continue;
      double r = 0.0, c = 0.0;
      for (size_t k = i - 2; k <= i + 2; ++k) {
        r += points[k][0];
        c += points[k][1];
      }
      next[i] = {r / 5.0, c / 5.0};
    }
    points = std::move(next);
  }
  for (size_t i = 0; i < n; ++i) {
    points[i][0] = std::clamp(points[i][0], original[i][0] - kMaxDrift, original[i][0] + kMaxDrift);
    points[i][1] = std::clamp(points[i][1], original[i][1] - kMaxDrift, original[i][1] + kMaxDrift);
  }
  return points;
}

inline std::vector<std::array<double, 2>> smooth_path(const VesselGraph& g,
                                                      const std::vector<int>& nodes,
                                                      const std::vector<int>& edges) {
  auto [points, pinned] = raw_polyline(g, nodes, edges);
  return smooth_polyline(std::move(points), pinned);
}

// Minimum negative-log-likelihood route on a scored graph.
inline PlanResult plan(const VesselGraph& g, const PlanRequest& req) {
  detail::SearchPath best = detail::dijkstra_lex(g, edge_costs(g, req.priors), req.source, req.target);
  PlanResult result;
  result.planner = PlannerKind::proposed;
  result.nodes = best.nodes;
  result.edges = best.edges;
  result.total_cost = best.cost;
  result.probabilities = detail::path_probabilities(g, best.edges);
  result.polyline = smooth_path(g, best.nodes, best.edges);
  return result;
}

// Dijkstra on skeleton arc length, ignoring probabilities entirely.
inline PlanResult shortest_path_baseline(const VesselGraph& g, const PlanRequest& req) {
  std::vector<double> lengths(g.edges.size());
  for (const VesselEdge& e : g.edges) {
    if (!e.geometry) throw IntegrityError("shortest_path_baseline: edge missing geometry");
    lengths[e.id] = e.geometry->arc_length;
  }
  detail::SearchPath best = detail::dijkstra_lex(g, lengths, req.source, req.target);
  PlanResult result;
  result.planner = PlannerKind::shortest;
  result.nodes = best.nodes;
  result.edges = best.edges;
  result.total_cost = best.cost;
  result.probabilities = detail::path_probabilities(g, best.edges);
  result.polyline = smooth_path(g, best.nodes, best.edges);
  return result;
}

namespace detail {

// Departure direction of an edge at one of its endpoint nodes, estimated over
// up to 5 steps of the pixel path.
inline std::array<double, 2> edge_direction_at(const VesselGraph& g, const VesselEdge& e,
                                               int node) {
  std::vector<Pixel> path;
  path.push_back(g.node(e.node_a).position);
  path.insert(path.end(), e.chain.begin(), e.chain.end());
  path.push_back(g.node(e.node_b).position);
  if (e.node_b == node && e.node_a != node) std::reverse(path.begin(), path.end());
  size_t k = std::min<size_t>(5, path.size() - 1);
  double dr = path[k].r - path[0].r;
  double dc = path[k].c - path[0].c;
  double norm = std::hypot(dr, dc);
  if (norm <= 0.0) return {0.0, 0.0};
  return {dr / norm, dc / norm};
}

inline double angle_between(const std::array<double, 2>& u, const std::array<double, 2>& v) {
  double dot = std::clamp(u[0] * v[0] + u[1] * v[1], -1.0, 1.0);
  return std::acos(dot);
}

}  // namespace detail

// Greedy walk with backtracking. At each node it takes the untried incident
// edge minimizing
//   1.0 * |direction change| + 0.5 * |d_in - d_out| / max(d_in, d_out),
// mirroring a rule-based planner driven by continuation angle and caliber
// matching. Dead ends backtrack; visited nodes are never re-entered.
inline PlanResult heuristic_baseline(const VesselGraph& g, const PlanRequest& req) {
  const int n = static_cast<int>(g.nodes.size());
  if (req.source < 0 || req.source >= n || req.target < 0 || req.target >= n)
    throw InvalidParameter("plan: source/target node id out of range");
  if (req.source == req.target) throw InvalidParameter("plan: source and target must differ");
  for (const VesselEdge& e : g.edges)
    if (!e.geometry) throw IntegrityError("heuristic_baseline: edge missing geometry");

  struct Frame {
    int node;
    int incoming_edge;  // -1 at the source
    std::vector<int> order;
    size_t next = 0;
  };

  auto ranked_candidates = [&](int node, int incoming_edge, const std::vector<char>& visited) {
    std::vector<std::pair<double, int>> scored;
    for (int eid : g.incident_edges(node)) {
      const VesselEdge& e = g.edge(eid);
      int other = e.node_a == node ? e.node_b : e.node_a;
      if (other == node || visited[other]) continue;
      double score = 0.0;
      if (incoming_edge >= 0) {
        const VesselEdge& in = g.edge(incoming_edge);
        // Arrival direction: negative of the departure direction back along
        // the incoming edge.
        auto back = detail::edge_direction_at(g, in, node);
        std::array<double, 2> arrive{-back[0], -back[1]};
        auto depart = detail::edge_direction_at(g, e, node);
        score += 1.0 * detail::angle_between(arrive, depart);
        double d_in = in.geometry->diameter;
        double d_out = e.geometry->diameter;
        double d_max = std::max(d_in, d_out);
        if (d_max > 0.0) score += 0.5 * std::abs(d_in - d_out) / d_max;
      }
      scored.emplace_back(score, eid);
    }
    std::sort(scored.begin(), scored.end());
    std::vector<int> order;
    order.reserve(scored.size());
    for (auto& [s, eid] : scored) order.push_back(eid);
    return order;
  };

  std::vector<char> visited(n, 0);
  std::vector<Frame> stack;
  std::vector<int> path_nodes{req.source};
  std::vector<int> path_edges;
  visited[req.source] = 1;
  stack.push_back({req.source, -1, ranked_candidates(req.source, -1, visited), 0});

  while (!stack.empty()) {
    Frame& top = stack.back();
    if (top.node == req.target) break;
    if (top.next >= top.order.size()) {
      stack.pop_back();
      path_nodes.pop_back();
      if (!path_edges.empty()) path_edges.pop_back();
      continue;
    }
    int eid = top.order[top.next++];
    const VesselEdge& e = g.edge(eid);
    int v = e.node_a == top.node ? e.node_b : e.node_a;
    if (visited[v]) continue;
    visited[v] = 1;
    path_nodes.push_back(v);
    path_edges.push_back(eid);
    stack.push_back({v, eid, ranked_candidates(v, eid, visited), 0});
  }
  if (stack.empty()) throw NoPathError("heuristic: no path between source and target");

  PlanResult result;
  result.planner = PlannerKind::heuristic;
  result.nodes = path_nodes;
  result.edges = path_edges;
  for (int eid : path_edges) result.total_cost += g.edge(eid).geometry->arc_length;
  result.probabilities = detail::path_probabilities(g, path_edges);
  result.polyline = smooth_path(g, path_nodes, path_edges);
  return result;
}

}  // namespace vplan
