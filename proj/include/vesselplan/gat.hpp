#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "vesselplan/features.hpp"
#include "vesselplan/graph.hpp"
#include "vesselplan/rng.hpp"

namespace vplan {

inline constexpr double kProbClampLo = 1e-6;
inline constexpr double kProbClampHi = 1.0 - 1e-6;

enum class HeadCombine { concat, average };

struct GatHead {
  Eigen::MatrixXd W;  // out_dim x in_dim
  Eigen::VectorXd a;  // 2 * out_dim: first half scores the center, second the neighbor
};

struct GatLayer {
  std::vector<GatHead> heads;
  HeadCombine combine = HeadCombine::concat;

  int in_dim() const { return static_cast<int>(heads.at(0).W.cols()); }
  int head_dim() const { return static_cast<int>(heads.at(0).W.rows()); }
  int out_dim() const {
    return combine == HeadCombine::concat ? head_dim() * static_cast<int>(heads.size())
                                          : head_dim();
  }
};

struct GatModel {
  std::vector<GatLayer> layers;
  Eigen::MatrixXd edge_w;  // bilinear scorer, d x d over final embeddings
  double edge_b = 0.0;
  double leaky_slope = 0.2;

  int input_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
  int embedding_dim() const {
    return layers.empty() ? 0 : layers.back().out_dim();
  }

  void validate() const {
    if (layers.empty()) throw IntegrityError("gat model: no layers");
    if (!(leaky_slope > 0)) throw IntegrityError("gat model: leaky_relu slope must be > 0");
    for (size_t l = 0; l < layers.size(); ++l) {
      const GatLayer& layer = layers[l];
      if (layer.heads.empty()) throw IntegrityError("gat model: layer without heads");
      for (const GatHead& h : layer.heads) {
        if (h.W.rows() != layer.head_dim() || h.W.cols() != layer.in_dim())
          throw IntegrityError("gat model: head weight dims differ within a layer");
        if (h.a.size() != 2 * layer.head_dim())
          throw IntegrityError("gat model: attention vector must have dimension 2 x head dim");
      }
      if (l > 0 && layers[l - 1].out_dim() != layer.in_dim())
        throw IntegrityError("gat model: layer " + std::to_string(l) +
                             " input dim does not match previous output dim");
    }
    int d = embedding_dim();
    if (edge_w.rows() != d || edge_w.cols() != d)
      throw IntegrityError("gat model: edge scorer dim does not match final embedding dim");
  }
};

struct GatConfig {
  struct LayerSpec {
    int heads = 4;
    int dim = 16;
  };
  int input_dim = 33;
  std::vector<LayerSpec> layers{{4, 16}, {4, 16}};
  double leaky_slope = 0.2;
};

// Seed-deterministic initialization, uniform in +-1/sqrt(fan_in). Hidden
// layers concatenate heads; the final layer averages them.
inline GatModel init_model(const GatConfig& cfg, uint64_t seed) {
  if (cfg.layers.empty()) throw InvalidParameter("gat config: at least one layer required");
  Rng rng(splitmix64(seed ^ 0x6a7f1543c0fe21b9ULL));
  auto uniform_fill = [&rng](auto& m, int fan_in) {
    double bound = 1.0 / std::sqrt(static_cast<double>(std::max(fan_in, 1)));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-bound, bound);
  };
  GatModel model;
  model.leaky_slope = cfg.leaky_slope;
  int in_dim = cfg.input_dim;
  for (size_t l = 0; l < cfg.layers.size(); ++l) {
    GatLayer layer;
    layer.combine = l + 1 == cfg.layers.size() ? HeadCombine::average : HeadCombine::concat;
    for (int h = 0; h < cfg.layers[l].heads; ++h) {
      GatHead head;
      head.W.resize(cfg.layers[l].dim, in_dim);
      uniform_fill(head.W, in_dim);
      head.a.resize(2 * cfg.layers[l].dim);
      uniform_fill(head.a, 2 * cfg.layers[l].dim);
      layer.heads.push_back(std::move(head));
    }
    in_dim = layer.out_dim();
    model.layers.push_back(std::move(layer));
  }
  model.edge_w.resize(in_dim, in_dim);
  uniform_fill(model.edge_w, in_dim);
  model.edge_b = 0.0;
  model.validate();
  return model;
}

// Attention neighborhoods: adjacent nodes plus the node itself, sorted.
inline std::vector<std::vector<int>> attention_neighborhoods(const VesselGraph& g) {
  std::vector<std::vector<int>> nbrs(g.nodes.size());
  for (const KeyNode& n : g.nodes) {
    std::vector<int> v = g.neighbors(n.id);
    v.push_back(n.id);
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    nbrs[n.id] = std::move(v);
  }
  return nbrs;
}

namespace detail {

inline double leaky_relu(double x, double slope) { return x > 0 ? x : slope * x; }

struct HeadTrace {
  Eigen::MatrixXd Z;                          // n x out
  std::vector<std::vector<double>> logits;    // pre-activation attention logits u_ij
  std::vector<std::vector<double>> alpha;     // softmax over LeakyReLU(u_ij)
  Eigen::MatrixXd agg;                        // n x out, pre-combine
};

struct LayerTrace {
  Eigen::MatrixXd input;     // n x in
  std::vector<HeadTrace> heads;
  Eigen::MatrixXd combined;  // n x out, pre-ReLU
  Eigen::MatrixXd output;    // n x out
};

inline HeadTrace head_forward(const GatHead& head, const Eigen::MatrixXd& X,
                              const std::vector<std::vector<int>>& nbrs, double slope) {
  const int n = static_cast<int>(X.rows());
  HeadTrace t;
  t.Z = X * head.W.transpose();
  const int out = static_cast<int>(t.Z.cols());
  Eigen::VectorXd a_src = head.a.head(out);
  Eigen::VectorXd a_dst = head.a.tail(out);
  Eigen::VectorXd src_score = t.Z * a_src;
  Eigen::VectorXd dst_score = t.Z * a_dst;
  t.logits.resize(n);
  t.alpha.resize(n);
  t.agg = Eigen::MatrixXd::Zero(n, out);
  for (int i = 0; i < n; ++i) {
    const std::vector<int>& nb = nbrs[i];
    if (nb.empty())
      throw InvalidInput("gat forward: node " + std::to_string(i) + " has empty neighborhood");
    t.logits[i].resize(nb.size());
    t.alpha[i].resize(nb.size());
    double max_e = -1e300;
    for (size_t k = 0; k < nb.size(); ++k) {
      double u = src_score[i] + dst_score[nb[k]];
      t.logits[i][k] = u;
      max_e = std::max(max_e, leaky_relu(u, slope));
    }
    double denom = 0.0;
    for (size_t k = 0; k < nb.size(); ++k) {
      double e = std::exp(leaky_relu(t.logits[i][k], slope) - max_e);
      t.alpha[i][k] = e;
      denom += e;
    }
    for (size_t k = 0; k < nb.size(); ++k) {
      t.alpha[i][k] /= denom;
      t.agg.row(i) += t.alpha[i][k] * t.Z.row(nb[k]);
    }
  }
  return t;
}

inline LayerTrace layer_forward_trace(const GatLayer& layer, const Eigen::MatrixXd& X,
                                      const std::vector<std::vector<int>>& nbrs, double slope) {
  LayerTrace t;
  t.input = X;
  for (const GatHead& head : layer.heads) t.heads.push_back(head_forward(head, X, nbrs, slope));
  const int n = static_cast<int>(X.rows());
  if (layer.combine == HeadCombine::concat) {
    t.combined.resize(n, layer.out_dim());
    int col = 0;
    for (const HeadTrace& h : t.heads) {
      t.combined.middleCols(col, layer.head_dim()) = h.agg;
      col += layer.head_dim();
    }
  } else {
    t.combined = Eigen::MatrixXd::Zero(n, layer.head_dim());
    for (const HeadTrace& h : t.heads) t.combined += h.agg;
    t.combined /= static_cast<double>(t.heads.size());
  }
  t.output = t.combined.cwiseMax(0.0);
  return t;
}

}  // namespace detail

struct ForwardTrace {
  std::vector<detail::LayerTrace> layers;
  const Eigen::MatrixXd& embeddings() const { return layers.back().output; }
};

inline ForwardTrace gat_forward(const GatModel& model, const Eigen::MatrixXd& features,
                                const std::vector<std::vector<int>>& neighborhoods) {
  if (features.cols() != model.input_dim())
    throw IntegrityError("gat forward: feature dim " + std::to_string(features.cols()) +
                         " does not match model input dim " + std::to_string(model.input_dim()));
  if (features.rows() != static_cast<Eigen::Index>(neighborhoods.size()))
    throw IntegrityError("gat forward: feature rows do not match neighborhood count");
  ForwardTrace trace;
  const Eigen::MatrixXd* x = &features;
  for (const GatLayer& layer : model.layers) {
    trace.layers.push_back(detail::layer_forward_trace(layer, *x, neighborhoods, model.leaky_slope));
    x = &trace.layers.back().output;
  }
  return trace;
}

// One attention row of one head: coefficients over `neighbors` for node i.
// Strictly positive, sums to 1.
inline std::vector<double> attention_coefficients(const GatLayer& layer, size_t head_index,
                                                  const Eigen::MatrixXd& features, int node,
                                                  const std::vector<int>& neighbors,
                                                  double slope = 0.2) {
  if (neighbors.empty())
    throw InvalidInput("attention_coefficients: node " + std::to_string(node) +
                       " has no neighbors");
  const GatHead& head = layer.heads.at(head_index);
  Eigen::MatrixXd Z = features * head.W.transpose();
  const int out = static_cast<int>(Z.cols());
  Eigen::VectorXd a_src = head.a.head(out);
  Eigen::VectorXd a_dst = head.a.tail(out);
  double src = Z.row(node).dot(a_src);
  std::vector<double> alpha(neighbors.size());
  double max_e = -1e300;
  for (size_t k = 0; k < neighbors.size(); ++k) {
    alpha[k] = detail::leaky_relu(src + Z.row(neighbors[k]).dot(a_dst), slope);
    max_e = std::max(max_e, alpha[k]);
  }
  double denom = 0.0;
  for (double& v : alpha) {
    v = std::exp(v - max_e);
    denom += v;
  }
  for (double& v : alpha) v /= denom;
  return alpha;
}

// Convenience wrapper matching the layer contract (concat/average + ReLU).
inline Eigen::MatrixXd layer_forward(const GatLayer& layer, const Eigen::MatrixXd& features,
                                     const std::vector<std::vector<int>>& neighborhoods,
                                     double slope = 0.2) {
  return detail::layer_forward_trace(layer, features, neighborhoods, slope).output;
}

// Symmetrized bilinear edge score. Eq-style h_a' W h_b is order dependent;
// averaging both orientations makes the probability well defined on
// undirected edges.
inline double edge_score_raw(const GatModel& model, const Eigen::MatrixXd& embeddings, int a,
                             int b) {
  double s_ab = embeddings.row(a) * model.edge_w * embeddings.row(b).transpose();
  double s_ba = embeddings.row(b) * model.edge_w * embeddings.row(a).transpose();
  return 0.5 * (s_ab + s_ba) + model.edge_b;
}

inline double clamp_probability(double p) {
  return std::clamp(p, kProbClampLo, kProbClampHi);
}

inline double edge_probability(const GatModel& model, const Eigen::MatrixXd& embeddings, int a,
                               int b) {
  return clamp_probability(1.0 / (1.0 + std::exp(-edge_score_raw(model, embeddings, a, b))));
}

inline Eigen::MatrixXd features_matrix(const std::vector<NodeFeatures>& features) {
  if (features.empty()) throw InvalidInput("features_matrix: no nodes");
  Eigen::MatrixXd X(features.size(), features[0].phi.size());
  for (size_t i = 0; i < features.size(); ++i) {
    if (features[i].phi.size() != features[0].phi.size())
      throw IntegrityError("features_matrix: phi dimension differs across nodes");
    for (size_t j = 0; j < features[i].phi.size(); ++j) X(i, j) = features[i].phi[j];
  }
  return X;
}

struct ScoredGraph {
  VesselGraph graph;            // edges carry probability
  Eigen::MatrixXd embeddings;   // final per-node embeddings
};

inline ScoredGraph score_edges(const GatModel& model, VesselGraph graph,
                               const Eigen::MatrixXd& features) {
  model.validate();
  ForwardTrace trace = gat_forward(model, features, attention_neighborhoods(graph));
  const Eigen::MatrixXd& emb = trace.embeddings();
  for (VesselEdge& e : graph.edges)
    e.probability = edge_probability(model, emb, e.node_a, e.node_b);
  return {std::move(graph), emb};
}

inline ScoredGraph score_edges(const GatModel& model, VesselGraph graph,
                               const std::vector<NodeFeatures>& features) {
  return score_edges(model, std::move(graph), features_matrix(features));
}

}  // namespace vplan
