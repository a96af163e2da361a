#pragma once

#include <span>
#include <tuple>
#include <utility>

#include "vesselplan/gat.hpp"

namespace vplan {

struct GatGrads {
  std::vector<std::vector<Eigen::MatrixXd>> dW;  // [layer][head]
  std::vector<std::vector<Eigen::VectorXd>> da;
  Eigen::MatrixXd d_edge_w;
  double d_edge_b = 0.0;

  static GatGrads zeros_like(const GatModel& m) {
    GatGrads g;
    g.dW.resize(m.layers.size());
    g.da.resize(m.layers.size());
    for (size_t l = 0; l < m.layers.size(); ++l)
      for (const GatHead& h : m.layers[l].heads) {
        g.dW[l].push_back(Eigen::MatrixXd::Zero(h.W.rows(), h.W.cols()));
        g.da[l].push_back(Eigen::VectorXd::Zero(h.a.size()));
      }
    g.d_edge_w = Eigen::MatrixXd::Zero(m.edge_w.rows(), m.edge_w.cols());
    return g;
  }
};

// Visit every parameter in a fixed order (layers, heads, W row-major, a,
// then the edge scorer). Shared by the optimizer and the gradient checks.
template <typename F>
void for_each_param(GatModel& m, F&& f) {
  for (GatLayer& layer : m.layers)
    for (GatHead& h : layer.heads) {
      for (Eigen::Index i = 0; i < h.W.size(); ++i) f(h.W.data()[i]);
      for (Eigen::Index i = 0; i < h.a.size(); ++i) f(h.a.data()[i]);
    }
  for (Eigen::Index i = 0; i < m.edge_w.size(); ++i) f(m.edge_w.data()[i]);
  f(m.edge_b);
}

template <typename F>
void for_each_param_grad(GatModel& m, GatGrads& g, F&& f) {
  for (size_t l = 0; l < m.layers.size(); ++l)
    for (size_t h = 0; h < m.layers[l].heads.size(); ++h) {
      GatHead& head = m.layers[l].heads[h];
      for (Eigen::Index i = 0; i < head.W.size(); ++i) f(head.W.data()[i], g.dW[l][h].data()[i]);
      for (Eigen::Index i = 0; i < head.a.size(); ++i) f(head.a.data()[i], g.da[l][h].data()[i]);
    }
  for (Eigen::Index i = 0; i < m.edge_w.size(); ++i) f(m.edge_w.data()[i], g.d_edge_w.data()[i]);
  f(m.edge_b, g.d_edge_b);
}

// One scene prepared for supervision: neighborhoods, node features, and the
// labeled undirected edges (1 = traversable).
struct TrainItem {
  std::vector<std::vector<int>> neighborhoods;
  Eigen::MatrixXd features;
  std::vector<std::tuple<int, int, double>> labeled_edges;
};

inline TrainItem make_train_item(const VesselGraph& g, const std::vector<NodeFeatures>& features) {
  TrainItem item;
  item.neighborhoods = attention_neighborhoods(g);
  item.features = features_matrix(features);
  for (const VesselEdge& e : g.edges)
    if (e.label)
      item.labeled_edges.emplace_back(e.node_a, e.node_b,
                                      *e.label == EdgeLabel::traversable ? 1.0 : 0.0);
  return item;
}

namespace detail {

inline size_t count_labeled(std::span<const TrainItem> items) {
  size_t n = 0;
  for (const TrainItem& item : items) n += item.labeled_edges.size();
  return n;
}

}  // namespace detail

// Mean binary cross-entropy of clamped edge probabilities against labels.
inline double gat_loss(const GatModel& model, std::span<const TrainItem> items) {
  size_t count = detail::count_labeled(items);
  if (count == 0) throw InvalidInput("gat_loss: no labeled edges");
  double loss = 0.0;
  for (const TrainItem& item : items) {
    ForwardTrace trace = gat_forward(model, item.features, item.neighborhoods);
    const Eigen::MatrixXd& emb = trace.embeddings();
    for (const auto& [a, b, y] : item.labeled_edges) {
      double p = edge_probability(model, emb, a, b);
      loss += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    }
  }
  return loss / static_cast<double>(count);
}

// Analytic gradients of the mean BCE objective for every parameter.
inline std::pair<double, GatGrads> gat_loss_and_grads(const GatModel& model,
                                                      std::span<const TrainItem> items) {
  size_t count = detail::count_labeled(items);
  if (count == 0) throw InvalidInput("gat_loss_and_grads: no labeled edges");
  const double inv_count = 1.0 / static_cast<double>(count);
  double loss = 0.0;
  GatGrads grads = GatGrads::zeros_like(model);
  const Eigen::MatrixXd sym = 0.5 * (model.edge_w + model.edge_w.transpose());

  for (const TrainItem& item : items) {
    ForwardTrace trace = gat_forward(model, item.features, item.neighborhoods);
    const Eigen::MatrixXd& emb = trace.embeddings();
    const int n = static_cast<int>(emb.rows());

    Eigen::MatrixXd d_emb = Eigen::MatrixXd::Zero(n, emb.cols());
    for (const auto& [a, b, y] : item.labeled_edges) {
      double s = edge_score_raw(model, emb, a, b);
      double p_raw = 1.0 / (1.0 + std::exp(-s));
      double p = clamp_probability(p_raw);
      loss += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p)) * inv_count;
      if (p_raw <= kProbClampLo || p_raw >= kProbClampHi) continue;  // flat under clamp
      double g_s = (p_raw - y) * inv_count;
      d_emb.row(a) += g_s * (sym * emb.row(b).transpose()).transpose();
      d_emb.row(b) += g_s * (sym * emb.row(a).transpose()).transpose();
      grads.d_edge_w += g_s * 0.5 *
                        (emb.row(a).transpose() * emb.row(b) + emb.row(b).transpose() * emb.row(a));
      grads.d_edge_b += g_s;
    }

    // Backprop through the layers.
    Eigen::MatrixXd g_out = d_emb;
    for (int l = static_cast<int>(model.layers.size()) - 1; l >= 0; --l) {
      const GatLayer& layer = model.layers[l];
      const detail::LayerTrace& t = trace.layers[l];
      const int head_dim = layer.head_dim();
      const int num_heads = static_cast<int>(layer.heads.size());

      Eigen::MatrixXd d_combined =
          (t.combined.array() > 0.0).cast<double>().matrix().cwiseProduct(g_out);
      Eigen::MatrixXd d_input = Eigen::MatrixXd::Zero(t.input.rows(), t.input.cols());

      for (int h = 0; h < num_heads; ++h) {
        const GatHead& head = layer.heads[h];
        const detail::HeadTrace& ht = t.heads[h];
        Eigen::MatrixXd d_agg =
            layer.combine == HeadCombine::concat
                ? Eigen::MatrixXd(d_combined.middleCols(h * head_dim, head_dim))
                : Eigen::MatrixXd(d_combined / static_cast<double>(num_heads));

        Eigen::VectorXd a_src = head.a.head(head_dim);
        Eigen::VectorXd a_dst = head.a.tail(head_dim);
        Eigen::MatrixXd d_z = Eigen::MatrixXd::Zero(n, head_dim);
        Eigen::VectorXd d_a_src = Eigen::VectorXd::Zero(head_dim);
        Eigen::VectorXd d_a_dst = Eigen::VectorXd::Zero(head_dim);

        for (int i = 0; i < n; ++i) {
          const std::vector<int>& nb = item.neighborhoods[i];
          const size_t deg = nb.size();
          double weighted = 0.0;
          std::vector<double> d_alpha(deg);
          for (size_t k = 0; k < deg; ++k) {
            d_alpha[k] = d_agg.row(i).dot(ht.Z.row(nb[k]));
            weighted += ht.alpha[i][k] * d_alpha[k];
          }
          for (size_t k = 0; k < deg; ++k) {
            double d_e = ht.alpha[i][k] * (d_alpha[k] - weighted);
            double u = ht.logits[i][k];
            double d_u = d_e * (u > 0.0 ? 1.0 : model.leaky_slope);
            d_a_src += d_u * ht.Z.row(i).transpose();
            d_a_dst += d_u * ht.Z.row(nb[k]).transpose();
            d_z.row(i) += d_u * a_src.transpose();
            d_z.row(nb[k]) += d_u * a_dst.transpose();
            d_z.row(nb[k]) += ht.alpha[i][k] * d_agg.row(i);
          }
        }
        grads.dW[l][h] += d_z.transpose() * t.input;
        grads.da[l][h].head(head_dim) += d_a_src;
        grads.da[l][h].tail(head_dim) += d_a_dst;
        d_input += d_z * head.W;
      }
      g_out = std::move(d_input);
    }
  }
  return {loss, std::move(grads)};
}

// Fraction of labeled edges whose thresholded probability matches the label.
inline double edge_accuracy(const GatModel& model, std::span<const TrainItem> items) {
  size_t count = detail::count_labeled(items);
  if (count == 0) return 0.0;
  size_t correct = 0;
  for (const TrainItem& item : items) {
    ForwardTrace trace = gat_forward(model, item.features, item.neighborhoods);
    for (const auto& [a, b, y] : item.labeled_edges) {
      double p = edge_probability(model, trace.embeddings(), a, b);
      correct += ((p >= 0.5) == (y >= 0.5));
    }
  }
  return static_cast<double>(correct) / static_cast<double>(count);
}

struct TrainOptions {
  double learning_rate = 1e-2;
  int epochs = 500;
};

struct TrainRecord {
  int epoch = 0;
  double loss = 0.0;      // mean BCE before this epoch's update
  double accuracy = 0.0;  // held-out edge classification accuracy (train set if none)
};

struct TrainResult {
  std::vector<TrainRecord> records;
  int loss_increase_count = 0;  // epochs where the loss rose; step size too large
};

// Full-batch gradient descent with a fixed step. Deterministic given the
// initialized model and item order.
inline TrainResult train(GatModel& model, std::span<const TrainItem> train_items,
                         std::span<const TrainItem> holdout_items, const TrainOptions& opts = {}) {
  if (detail::count_labeled(train_items) == 0)
    throw InvalidInput("train: no labeled edges in training set");
  if (opts.epochs < 0) throw InvalidParameter("train: epochs must be >= 0");
  model.validate();

  TrainResult result;
  double prev_loss = 0.0;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    auto [loss, grads] = gat_loss_and_grads(model, train_items);
    double acc = edge_accuracy(model, holdout_items.empty() ? train_items : holdout_items);
    result.records.push_back({epoch, loss, acc});
    if (epoch > 0 && loss > prev_loss + 1e-12) ++result.loss_increase_count;
    prev_loss = loss;
    for_each_param_grad(model, grads,
                        [&](double& p, double& g) { p -= opts.learning_rate * g; });
  }
  return result;
}

}  // namespace vplan
