#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vesselplan/graph.hpp"

namespace vplan {

// Mean angle between successive tangent steps along an ordered chain.
// Chains with fewer than 3 points have no curvature; they return 0.
inline double turning_angle(std::span<const Pixel> chain) {
  if (chain.empty()) throw InvalidInput("turning_angle: empty chain");
  if (chain.size() < 3) return 0.0;
  double sum = 0.0;
  size_t terms = 0;
  for (size_t k = 0; k + 2 < chain.size(); ++k) {
    double ur = chain[k + 1].r - chain[k].r, uc = chain[k + 1].c - chain[k].c;
    double vr = chain[k + 2].r - chain[k + 1].r, vc = chain[k + 2].c - chain[k + 1].c;
    double dot = (ur * vr + uc * vc) / (std::hypot(ur, uc) * std::hypot(vr, vc));
    dot = std::clamp(dot, -1.0, 1.0);
    sum += std::acos(dot);
    ++terms;
  }
  return sum / static_cast<double>(terms);
}

// Discrete arc length in physical units under M = diag(sx, sy).
inline double arc_length(std::span<const Pixel> chain, const Spacing& spacing) {
  spacing.validate();
  if (chain.empty()) throw InvalidInput("arc_length: empty chain");
  double len = 0.0;
  for (size_t k = 0; k + 1 < chain.size(); ++k)
    len += metric_step(chain[k + 1].r - chain[k].r, chain[k + 1].c - chain[k].c, spacing);
  return len;
}

// Twice the mean radius estimate along the chain. The raw distance transform
// measures center-to-center distance and overestimates the radius by half a
// pixel; the floor keeps 1-pixel vessels at diameter 1.
inline double edge_diameter(std::span<const Pixel> chain, const DistanceMap& dmap) {
  if (chain.empty()) throw InvalidInput("edge_diameter: empty chain");
  const double half = 0.5 * std::min(dmap.spacing().sx, dmap.spacing().sy);
  double sum = 0.0;
  for (const Pixel& p : chain) {
    if (!dmap.in_bounds(p) || dmap.at(p) <= 0.0)
      throw IntegrityError("edge_diameter: chain pixel lies on background");
    sum += std::max(dmap.at(p) - half, half);
  }
  return 2.0 * sum / static_cast<double>(chain.size());
}

// Node-to-node pixel path of an edge: node_a position, interior chain,
// node_b position. Geometry is computed over this full path so that empty
// chains (directly adjacent nodes) still carry length and diameter.
inline std::vector<Pixel> edge_path(const VesselGraph& g, const VesselEdge& e) {
  std::vector<Pixel> path;
  path.reserve(e.chain.size() + 2);
  path.push_back(g.node(e.node_a).position);
  path.insert(path.end(), e.chain.begin(), e.chain.end());
  path.push_back(g.node(e.node_b).position);
  return path;
}

inline void compute_edge_geometry(VesselGraph& g, const DistanceMap& dmap) {
  for (VesselEdge& e : g.edges) {
    std::vector<Pixel> path = edge_path(g, e);
    EdgeGeometry geo;
    geo.turning_angle = turning_angle(path);
    geo.arc_length = arc_length(path, g.spacing);
    geo.diameter = edge_diameter(path, dmap);
    e.geometry = geo;
  }
}

struct NodeAggregates {
  double theta = 0.0;     // mean incident turning angle
  double diameter = 0.0;  // max incident diameter
  double length = 0.0;    // mean incident arc length
};

inline NodeAggregates aggregate_node(const VesselGraph& g, int node_id) {
  const std::vector<int>& incident = g.incident_edges(node_id);
  if (incident.empty()) throw InvalidInput("aggregate_node: node has no incident edges");
  NodeAggregates agg;
  for (int eid : incident) {
    const VesselEdge& e = g.edge(eid);
    if (!e.geometry) throw IntegrityError("aggregate_node: incident edge missing geometry");
    agg.theta += e.geometry->turning_angle;
    agg.length += e.geometry->arc_length;
    agg.diameter = std::max(agg.diameter, e.geometry->diameter);
  }
  agg.theta /= static_cast<double>(incident.size());
  agg.length /= static_cast<double>(incident.size());
  return agg;
}

struct Patch {
  int scale = 0;
  std::vector<double> raw;         // scale x scale crop, edge-replicated
  std::vector<double> normalized;  // zero mean, unit variance; zeros if constant
};

// Square crops centered at `center`, replicated at the borders, normalized to
// zero mean and unit variance per scale.
inline std::vector<Patch> extract_patches(const Grid& image, Pixel center,
                                          const std::vector<int>& scales = {32, 64, 96}) {
  std::vector<Patch> out;
  out.reserve(scales.size());
  for (int s : scales) {
    if (s < 1) throw InvalidParameter("extract_patches: scale must be >= 1");
    Patch patch;
    patch.scale = s;
    patch.raw.resize(static_cast<size_t>(s) * s);
    const int off = s / 2;
    for (int r = 0; r < s; ++r)
      for (int c = 0; c < s; ++c) {
        int ir = std::clamp(center.r - off + r, 0, image.height() - 1);
        int ic = std::clamp(center.c - off + c, 0, image.width() - 1);
        patch.raw[static_cast<size_t>(r) * s + c] = image.at(ir, ic);
      }
    double mean = std::accumulate(patch.raw.begin(), patch.raw.end(), 0.0) / patch.raw.size();
    double var = 0.0;
    for (double v : patch.raw) var += (v - mean) * (v - mean);
    var /= static_cast<double>(patch.raw.size());
    patch.normalized.resize(patch.raw.size(), 0.0);
    if (var > 1e-24) {
      double inv = 1.0 / std::sqrt(var);
      for (size_t i = 0; i < patch.raw.size(); ++i)
        patch.normalized[i] = (patch.raw[i] - mean) * inv;
    }
    out.push_back(std::move(patch));
  }
  return out;
}

struct PatchDescriptorSpec {
  enum class Kind { builtin, external };
  Kind kind = Kind::builtin;
  std::vector<int> scales{32, 64, 96};
  std::vector<int> external_dims;  // per-scale dims declared by the sidecar

  static constexpr int kBuiltinPerScale = 10;

  int descriptor_dim() const {
    if (kind == Kind::builtin) return kBuiltinPerScale * static_cast<int>(scales.size());
    return std::accumulate(external_dims.begin(), external_dims.end(), 0);
  }
  int phi_dim() const { return 3 + descriptor_dim(); }
};

// Builtin handcrafted descriptor, 10 values per scale: raw-intensity mean and
// variance plus an L1-normalized 8-bin gradient-orientation histogram of the
// normalized patch.
inline std::vector<double> patch_descriptor(const Patch& patch) {
  const int s = patch.scale;
  double mean = std::accumulate(patch.raw.begin(), patch.raw.end(), 0.0) / patch.raw.size();
  double var = 0.0;
  for (double v : patch.raw) var += (v - mean) * (v - mean);
  var /= static_cast<double>(patch.raw.size());

  std::vector<double> hist(8, 0.0);
  auto at = [&](int r, int c) { return patch.normalized[static_cast<size_t>(r) * s + c]; };
  for (int r = 1; r + 1 < s; ++r)
    for (int c = 1; c + 1 < s; ++c) {
      double gx = 0.5 * (at(r, c + 1) - at(r, c - 1));
      double gy = 0.5 * (at(r + 1, c) - at(r - 1, c));
      double mag = std::hypot(gx, gy);
      if (mag <= 0.0) continue;
      int bin = static_cast<int>(std::lround(std::atan2(gy, gx) / (M_PI / 4.0)));
      hist[((bin % 8) + 8) % 8] += mag;
    }
  double total = std::accumulate(hist.begin(), hist.end(), 0.0);
  if (total > 1e-12)
    for (double& h : hist) h /= total;

  std::vector<double> desc{mean, var};
  desc.insert(desc.end(), hist.begin(), hist.end());
  return desc;
}

// Precomputed per-node embeddings, keyed by node id.
class ExternalEmbeddings {
 public:
  ExternalEmbeddings() = default;
  ExternalEmbeddings(std::vector<int> dims, std::map<int, std::vector<double>> vectors)
      : dims_(std::move(dims)), vectors_(std::move(vectors)) {
    int total = std::accumulate(dims_.begin(), dims_.end(), 0);
    for (const auto& [id, vec] : vectors_)
      if (static_cast<int>(vec.size()) != total)
        throw ParseError("external embeddings: vector for node " + std::to_string(id) +
                         " has dimension " + std::to_string(vec.size()) + ", header declares " +
                         std::to_string(total));
  }

  const std::vector<int>& dims() const { return dims_; }

  const std::vector<double>& get(int node_id) const {
    auto it = vectors_.find(node_id);
    if (it == vectors_.end())
      throw LookupError("external embeddings: no vector for node " + std::to_string(node_id));
    return it->second;
  }

  static ExternalEmbeddings load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file: " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("external embeddings '" + path + "': " + e.what());
    }
    if (!j.contains("dims")) throw ParseError("external embeddings: missing 'dims' header");
    std::vector<int> dims = j.at("dims").get<std::vector<int>>();
    std::map<int, std::vector<double>> vectors;
    if (!j.contains("embeddings")) throw ParseError("external embeddings: missing 'embeddings'");
    for (const auto& [key, value] : j.at("embeddings").items())
      vectors[std::stoi(key)] = value.get<std::vector<double>>();
    return ExternalEmbeddings(std::move(dims), std::move(vectors));
  }

 private:
  std::vector<int> dims_;
  std::map<int, std::vector<double>> vectors_;
};

struct NodeFeatures {
  NodeAggregates aggregates;           // raw, pre-standardization
  std::vector<double> descriptor;      // concatenated patch descriptors
  std::vector<double> phi;             // standardized geometry + descriptor
};

// Concatenate standardized geometric aggregates with patch descriptors.
// Geometry is z-scored per graph: angles, diameters and lengths live on
// incomparable scales and would otherwise dominate the attention logits.
inline std::vector<NodeFeatures> assemble_phi(const std::vector<NodeAggregates>& aggregates,
                                              const std::vector<std::vector<double>>& descriptors) {
  if (aggregates.size() != descriptors.size())
    throw IntegrityError("assemble_phi: aggregate/descriptor count mismatch");
  const size_t n = aggregates.size();
  std::vector<NodeFeatures> out(n);
  if (n == 0) return out;
  for (size_t i = 1; i < n; ++i)
    if (descriptors[i].size() != descriptors[0].size())
      throw IntegrityError("assemble_phi: descriptor dimension differs across nodes");

  auto standardize = [&](auto&& get) {
    std::vector<double> v(n);
    double mean = 0.0;
    for (size_t i = 0; i < n; ++i) mean += get(aggregates[i]);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double d = get(aggregates[i]) - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    double inv = var > 1e-24 ? 1.0 / std::sqrt(var) : 0.0;
    for (size_t i = 0; i < n; ++i) v[i] = (get(aggregates[i]) - mean) * inv;
    return v;
  };
  std::vector<double> z_theta = standardize([](const NodeAggregates& a) { return a.theta; });
  std::vector<double> z_diam = standardize([](const NodeAggregates& a) { return a.diameter; });
  std::vector<double> z_len = standardize([](const NodeAggregates& a) { return a.length; });

  for (size_t i = 0; i < n; ++i) {
    out[i].aggregates = aggregates[i];
    out[i].descriptor = descriptors[i];
    out[i].phi = {z_theta[i], z_diam[i], z_len[i]};
    out[i].phi.insert(out[i].phi.end(), descriptors[i].begin(), descriptors[i].end());
  }
  return out;
}

// Full node feature assembly over a graph with computed edge geometry.
// Degree-0 nodes (stray anchors) get zero aggregates; the planner never
// routes through them.
inline std::vector<NodeFeatures> compute_node_features(
    const VesselGraph& g, const Grid& image, const PatchDescriptorSpec& spec,
    const ExternalEmbeddings* external = nullptr) {
  std::vector<NodeAggregates> aggregates;
  std::vector<std::vector<double>> descriptors;
  aggregates.reserve(g.nodes.size());
  descriptors.reserve(g.nodes.size());
  for (const KeyNode& node : g.nodes) {
    aggregates.push_back(node.degree > 0 ? aggregate_node(g, node.id) : NodeAggregates{});
    if (spec.kind == PatchDescriptorSpec::Kind::builtin) {
      std::vector<double> desc;
      for (const Patch& patch : extract_patches(image, node.position, spec.scales)) {
        std::vector<double> d = patch_descriptor(patch);
        desc.insert(desc.end(), d.begin(), d.end());
      }
      descriptors.push_back(std::move(desc));
    } else {
      if (!external) throw IntegrityError("compute_node_features: external embeddings not loaded");
      descriptors.push_back(external->get(node.id));
    }
  }
  return assemble_phi(aggregates, descriptors);
}

}  // namespace vplan
