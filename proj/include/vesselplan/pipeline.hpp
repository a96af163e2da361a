#pragma once

#include <fstream>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "vesselplan/distance_transform.hpp"
#include "vesselplan/features.hpp"
#include "vesselplan/gat.hpp"
#include "vesselplan/gat_train.hpp"
#include "vesselplan/graph.hpp"
#include "vesselplan/morphology.hpp"
#include "vesselplan/planner.hpp"
#include "vesselplan/skeleton.hpp"

namespace vplan {

inline constexpr int kConfigSchemaVersion = 1;

// Every knob of the mask-to-route pipeline in one document. Flags override
// file values, file values override defaults.
struct PipelineConfig {
  double tau = 0.5;
  int closing_kernel = 3;
  std::optional<double> l_min;               // default: 10 x min spacing
  std::optional<double> crossing_merge_len;  // default: 18 x min spacing
  Spacing spacing;
  PatchDescriptorSpec descriptor;
  GatConfig gat;
  TrainOptions train;
  uint64_t train_seed = 1;
  PriorWeights priors;

  double effective_l_min() const {
    return l_min ? *l_min : 10.0 * std::min(spacing.sx, spacing.sy);
  }
  double effective_merge_len() const {
    return crossing_merge_len ? *crossing_merge_len : 18.0 * std::min(spacing.sx, spacing.sy);
  }

  void validate() const {
    if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidParameter("config: tau must lie in [0,1]");
    if (closing_kernel < 1 || closing_kernel % 2 == 0)
      throw InvalidParameter("config: closing kernel must be odd and >= 1");
    if (effective_l_min() < 0) throw InvalidParameter("config: l_min must be >= 0");
    if (effective_merge_len() < 0) throw InvalidParameter("config: crossing_merge_len must be >= 0");
    spacing.validate();
    if (!(gat.leaky_slope > 0)) throw InvalidParameter("config: leaky_relu slope must be > 0");
    if (train.learning_rate < 0) throw InvalidParameter("config: learning rate must be >= 0");
    if (train.epochs < 0) throw InvalidParameter("config: epochs must be >= 0");
  }
};

inline nlohmann::json config_to_json(const PipelineConfig& cfg) {
  nlohmann::json j;
  j["version"] = kConfigSchemaVersion;
  j["tau"] = cfg.tau;
  j["closing_kernel"] = cfg.closing_kernel;
  if (cfg.l_min) j["l_min"] = *cfg.l_min;
  if (cfg.crossing_merge_len) j["crossing_merge_len"] = *cfg.crossing_merge_len;
  j["spacing"] = {cfg.spacing.sx, cfg.spacing.sy};
  j["descriptor"] = {
      {"kind", cfg.descriptor.kind == PatchDescriptorSpec::Kind::builtin ? "builtin" : "external"},
      {"scales", cfg.descriptor.scales},
      {"external_dims", cfg.descriptor.external_dims}};
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : cfg.gat.layers) layers.push_back({{"heads", l.heads}, {"dim", l.dim}});
  j["gat"] = {{"input_dim", cfg.gat.input_dim},
              {"layers", std::move(layers)},
              {"leaky_relu_slope", cfg.gat.leaky_slope}};
  j["train"] = {{"learning_rate", cfg.train.learning_rate},
                {"epochs", cfg.train.epochs},
                {"seed", cfg.train_seed}};
  j["priors"] = {{"lambda_theta", cfg.priors.lambda_theta},
                 {"lambda_diameter", cfg.priors.lambda_diameter}};
  return j;
}

inline PipelineConfig config_from_json(const nlohmann::json& j) {
  if (j.value("version", -1) != kConfigSchemaVersion)
    throw ParseError("config: unsupported or missing version");
  PipelineConfig cfg;
  cfg.tau = j.value("tau", cfg.tau);
  cfg.closing_kernel = j.value("closing_kernel", cfg.closing_kernel);
  if (j.contains("l_min")) cfg.l_min = j.at("l_min").get<double>();
  if (j.contains("crossing_merge_len"))
    cfg.crossing_merge_len = j.at("crossing_merge_len").get<double>();
  if (j.contains("spacing")) {
    auto s = j.at("spacing").get<std::vector<double>>();
    if (s.size() != 2) throw ParseError("config: spacing must be [sx, sy]");
    cfg.spacing = {s[0], s[1]};
  }
  if (j.contains("descriptor")) {
    const auto& d = j.at("descriptor");
    std::string kind = d.value("kind", "builtin");
    if (kind == "builtin") cfg.descriptor.kind = PatchDescriptorSpec::Kind::builtin;
    else if (kind == "external") cfg.descriptor.kind = PatchDescriptorSpec::Kind::external;
    else throw ParseError("config: descriptor kind must be 'builtin' or 'external'");
    if (d.contains("scales")) cfg.descriptor.scales = d.at("scales").get<std::vector<int>>();
    if (d.contains("external_dims"))
      cfg.descriptor.external_dims = d.at("external_dims").get<std::vector<int>>();
  }
  if (j.contains("gat")) {
    const auto& g = j.at("gat");
    cfg.gat.input_dim = g.value("input_dim", cfg.gat.input_dim);
    cfg.gat.leaky_slope = g.value("leaky_relu_slope", cfg.gat.leaky_slope);
    if (g.contains("layers")) {
      cfg.gat.layers.clear();
      for (const auto& l : g.at("layers"))
        cfg.gat.layers.push_back({l.value("heads", 4), l.value("dim", 16)});
    }
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
    cfg.train.epochs = t.value("epochs", cfg.train.epochs);
    cfg.train_seed = t.value("seed", cfg.train_seed);
  }
  if (j.contains("priors")) {
    const auto& p = j.at("priors");
    cfg.priors.lambda_theta = p.value("lambda_theta", 0.0);
    cfg.priors.lambda_diameter = p.value("lambda_diameter", 0.0);
  }
  cfg.validate();
  return cfg;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config file '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

struct ExtractedGraph {
  VesselGraph graph;  // geometry filled on every edge
  Skeleton skeleton;  // pruned
  BinaryMask closed;
  DistanceMap dmap;
};

// Mask -> closed mask -> skeleton -> pruned skeleton -> vessel graph with
// geometry. The shared path under every planner and command.
inline ExtractedGraph extract_graph(const BinaryMask& mask, const PipelineConfig& cfg = {}) {
  cfg.validate();
  ExtractedGraph out;
  out.closed = morphological_close(mask, cfg.closing_kernel);
  out.skeleton = prune_spurs(skeletonize(out.closed), cfg.effective_l_min());
  out.graph = build_vessel_graph(out.skeleton, {cfg.effective_merge_len()});
  out.dmap = distance_transform(out.closed);
  compute_edge_geometry(out.graph, out.dmap);
  return out;
}

// Nearest key node to a pixel position; ties resolved toward the lower id.
inline int snap_to_node(const VesselGraph& g, Pixel p) {
  if (g.nodes.empty()) throw InvalidInput("snap_to_node: graph has no nodes");
  int best = -1;
  double best_d2 = 0.0;
  for (const KeyNode& n : g.nodes) {
    double d2 = static_cast<double>(n.position.r - p.r) * (n.position.r - p.r) +
                static_cast<double>(n.position.c - p.c) * (n.position.c - p.c);
    if (best < 0 || d2 < best_d2) {
      best = n.id;
      best_d2 = d2;
    }
  }
  return best;
}

}  // namespace vplan
