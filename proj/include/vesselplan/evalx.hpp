#pragma once

#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "vesselplan/gat.hpp"
#include "vesselplan/phantom.hpp"
#include "vesselplan/pipeline.hpp"
#include "vesselplan/planner.hpp"

namespace vplan {

// Truth-to-extracted correspondence: node i of the truth graph is node
// node_map[i] of the extracted graph, likewise for edges.
struct GraphMatch {
  std::vector<int> node_map;
  std::vector<int> edge_map;
};

// Degree-preserving nearest-position matching. Succeeds only when the two
// graphs have the same node and edge counts, every truth node has a unique
// extracted partner within `tol` pixels of equal degree, and the edge sets
// coincide under that node mapping.
inline std::optional<GraphMatch> match_graphs(const VesselGraph& truth,
                                              const VesselGraph& extracted, double tol = 3.0) {
  if (truth.nodes.size() != extracted.nodes.size()) return std::nullopt;
  if (truth.edges.size() != extracted.edges.size()) return std::nullopt;

  GraphMatch match;
  match.node_map.assign(truth.nodes.size(), -1);
  std::vector<char> used(extracted.nodes.size(), 0);
  for (const KeyNode& tn : truth.nodes) {
    int best = -1;
    double best_d2 = 0.0;
    for (const KeyNode& en : extracted.nodes) {
      if (used[en.id] || en.degree != tn.degree) continue;
      double dr = en.position.r - tn.position.r;
      double dc = en.position.c - tn.position.c;
      double d2 = dr * dr + dc * dc;
      if (d2 > tol * tol) continue;
      if (best < 0 || d2 < best_d2) {
        best = en.id;
        best_d2 = d2;
      }
    }
    if (best < 0) return std::nullopt;
    used[best] = 1;
    match.node_map[tn.id] = best;
  }

  // Edge correspondence under the node mapping; parallel groups are consumed
  // in id order.
  std::map<std::pair<int, int>, std::vector<int>> extracted_by_pair;
  for (const VesselEdge& e : extracted.edges) {
    std::pair<int, int> key{std::min(e.node_a, e.node_b), std::max(e.node_a, e.node_b)};
    extracted_by_pair[key].push_back(e.id);
  }
  match.edge_map.assign(truth.edges.size(), -1);
  for (const VesselEdge& te : truth.edges) {
    int a = match.node_map[te.node_a], b = match.node_map[te.node_b];
    std::pair<int, int> key{std::min(a, b), std::max(a, b)};
    auto it = extracted_by_pair.find(key);
    if (it == extracted_by_pair.end() || it->second.empty()) return std::nullopt;
    match.edge_map[te.id] = it->second.front();
    it->second.erase(it->second.begin());
  }
  return match;
}

struct Verdict {
  bool disambiguation = false;
  bool arrival = false;
};

// Arrival: the route ends at the target and every traversed edge maps to a
// traversable truth edge. Disambiguation: at every crossing the route visits,
// its in/out pairing equals the planted one; vacuously true when the route
// meets no crossing.
inline Verdict judge_scene(const PhantomScene& scene, const GraphMatch& match,
                           const PlanResult& plan) {
  std::map<int, int> truth_edge_of;  // extracted edge id -> truth edge id
  for (size_t t = 0; t < match.edge_map.size(); ++t)
    truth_edge_of[match.edge_map[t]] = static_cast<int>(t);

  Verdict v;
  bool edges_traversable = true;
  for (int eid : plan.edges) {
    auto it = truth_edge_of.find(eid);
    if (it == truth_edge_of.end()) {
      edges_traversable = false;
      break;
    }
    const VesselEdge& te = scene.truth.edge(it->second);
    if (!te.label || *te.label != EdgeLabel::traversable) {
      edges_traversable = false;
      break;
    }
  }
  v.arrival = !plan.nodes.empty() && plan.nodes.back() == match.node_map[scene.target] &&
              edges_traversable;

  v.disambiguation = true;
  for (const CrossingTruth& cross : scene.crossings) {
    int ex_node = match.node_map[cross.node];
    for (size_t i = 0; i < plan.nodes.size(); ++i) {
      if (plan.nodes[i] != ex_node) continue;
      if (i == 0 || i + 1 == plan.nodes.size()) break;  // crossing at an endpoint: no pairing
      auto in_it = truth_edge_of.find(plan.edges[i - 1]);
      auto out_it = truth_edge_of.find(plan.edges[i]);
      if (in_it == truth_edge_of.end() || out_it == truth_edge_of.end()) {
        v.disambiguation = false;
        break;
      }
      std::set<int> got{in_it->second, out_it->second};
      std::set<int> want{cross.in_edge, cross.out_edge};
      if (got != want) v.disambiguation = false;
      break;
    }
    if (!v.disambiguation) break;
  }
  return v;
}

struct MetricCounts {
  int successes = 0;
  int total = 0;
  double rate() const { return total > 0 ? static_cast<double>(successes) / total : 0.0; }
};

struct PlannerReport {
  MetricCounts disambiguation;
  MetricCounts arrival;
};

struct SceneVerdict {
  int index = -1;
  bool excluded = false;
  std::string error;
  std::map<std::string, Verdict> by_planner;
};

struct EvalReport {
  std::map<std::string, PlannerReport> planners;
  std::vector<SceneVerdict> per_scene;
  int suite_size = 0;
  int excluded = 0;
};

inline const std::vector<PlannerKind> kAllPlanners{PlannerKind::proposed, PlannerKind::shortest,
                                                   PlannerKind::heuristic};

// Full pipeline on one scene: extract, match to truth, feature + score, then
// one route per planner.
struct ScenePipeline {
  ExtractedGraph extracted;
  GraphMatch match;
  std::vector<NodeFeatures> features;
};

inline ScenePipeline run_scene_pipeline(const PhantomScene& scene, const PipelineConfig& cfg) {
  ScenePipeline out;
  out.extracted = extract_graph(scene.mask, cfg);
  std::optional<GraphMatch> match = match_graphs(scene.truth, out.extracted.graph);
  if (!match)
    throw IntegrityError("scene: extracted graph does not match the ground-truth topology");
  out.match = std::move(*match);
  out.features = compute_node_features(out.extracted.graph, scene.intensity, cfg.descriptor);
  return out;
}

inline EvalReport run_comparison(std::span<const PhantomScene> scenes, const GatModel& model,
                                 const PipelineConfig& cfg = {}, int jobs = 1) {
  EvalReport report;
  report.suite_size = static_cast<int>(scenes.size());
  for (PlannerKind k : kAllPlanners) report.planners[planner_name(k)] = {};
  std::vector<SceneVerdict> verdicts(scenes.size());

  auto work = [&](size_t i) {
    SceneVerdict& sv = verdicts[i];
    sv.index = static_cast<int>(i);
    try {
      ScenePipeline pipe = run_scene_pipeline(scenes[i], cfg);
      ScoredGraph scored = score_edges(model, pipe.extracted.graph, pipe.features);
      PlanRequest req;
      req.source = pipe.match.node_map[scenes[i].source];
      req.target = pipe.match.node_map[scenes[i].target];
      req.priors = cfg.priors;
      for (PlannerKind kind : kAllPlanners) {
        Verdict v{false, false};
        try {
          PlanResult res;
          switch (kind) {
            case PlannerKind::proposed: res = plan(scored.graph, req); break;
            case PlannerKind::shortest: res = shortest_path_baseline(scored.graph, req); break;
            case PlannerKind::heuristic: res = heuristic_baseline(scored.graph, req); break;
          }
          v = judge_scene(scenes[i], pipe.match, res);
        } catch (const NoPathError&) {
          // counted as failure on both metrics
        }
        sv.by_planner[planner_name(kind)] = v;
      }
    } catch (const Error& e) {
      sv.excluded = true;
      sv.error = e.what();
    }
  };

  int threads = std::max(1, jobs);
  if (threads == 1) {
    for (size_t i = 0; i < scenes.size(); ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (size_t i = t; i < scenes.size(); i += threads) work(i);
      });
    for (auto& th : pool) th.join();
  }

  for (SceneVerdict& sv : verdicts) {
    if (sv.excluded) {
      ++report.excluded;
    } else {
      for (auto& [name, verdict] : sv.by_planner) {
        PlannerReport& pr = report.planners[name];
        pr.disambiguation.total += 1;
        pr.disambiguation.successes += verdict.disambiguation;
        pr.arrival.total += 1;
        pr.arrival.successes += verdict.arrival;
      }
    }
    report.per_scene.push_back(std::move(sv));
  }
  return report;
}

inline nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["suite_size"] = report.suite_size;
  j["excluded"] = report.excluded;
  nlohmann::json planners;
  for (const auto& [name, pr] : report.planners) {
    planners[name] = {{"disambiguation",
                       {{"successes", pr.disambiguation.successes},
                        {"total", pr.disambiguation.total},
                        {"rate", pr.disambiguation.rate()}}},
                      {"arrival",
                       {{"successes", pr.arrival.successes},
                        {"total", pr.arrival.total},
                        {"rate", pr.arrival.rate()}}}};
  }
  j["planners"] = std::move(planners);
  nlohmann::json scenes = nlohmann::json::array();
  for (const SceneVerdict& sv : report.per_scene) {
    nlohmann::json js{{"index", sv.index}, {"excluded", sv.excluded}};
    if (sv.excluded) js["error"] = sv.error;
    for (const auto& [name, v] : sv.by_planner)
      js[name] = {{"disambiguation", v.disambiguation}, {"arrival", v.arrival}};
    scenes.push_back(std::move(js));
  }
  j["per_scene"] = std::move(scenes);
  return j;
}

inline std::string report_to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "planner,metric,successes,total,rate\n";
  for (const auto& [name, pr] : report.planners) {
    out << name << ",disambiguation," << pr.disambiguation.successes << ','
        << pr.disambiguation.total << ',' << pr.disambiguation.rate() << "\n";
    out << name << ",arrival," << pr.arrival.successes << ',' << pr.arrival.total << ','
        << pr.arrival.rate() << "\n";
  }
  return out.str();
}

inline std::string report_to_table(const EvalReport& report) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-44s %-26s %-26s\n", "Method", "Disambiguation Success",
                "Target Arrival");
  out << line;
  out << std::string(96, '-') << "\n";
  const std::map<std::string, std::string> titles{
      {"shortest", "Shortest Path (arc length on skeleton)"},
      {"heuristic", "Heuristic (continuation angle + caliber)"},
      {"proposed", "Proposed (GAT edge scores)"}};
  for (const std::string key : {"shortest", "heuristic", "proposed"}) {
    const PlannerReport& pr = report.planners.at(key);
    char disamb[32], arrive[32];
    std::snprintf(disamb, sizeof(disamb), "%d / %d (%.1f%%)", pr.disambiguation.successes,
                  pr.disambiguation.total, 100.0 * pr.disambiguation.rate());
    std::snprintf(arrive, sizeof(arrive), "%d / %d (%.1f%%)", pr.arrival.successes,
                  pr.arrival.total, 100.0 * pr.arrival.rate());
    std::snprintf(line, sizeof(line), "%-44s %-26s %-26s\n", titles.at(key).c_str(), disamb,
                  arrive);
    out << line;
  }
  if (report.excluded > 0)
    out << "excluded scenes: " << report.excluded << " of " << report.suite_size << "\n";
  return out.str();
}

}  // namespace vplan
