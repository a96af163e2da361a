#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include "oracles.hpp"
#include "vesselplan/gat.hpp"
#include "vesselplan/gat_train.hpp"
#include "vesselplan/model_io.hpp"

using namespace vplan;

namespace {

GatModel small_random_model(Rng& rng, int input_dim, int layers, int heads, int dim) {
  GatConfig cfg;
  cfg.input_dim = input_dim;
  cfg.layers.clear();
  for (int l = 0; l < layers; ++l) cfg.layers.push_back({heads, dim});
  return init_model(cfg, rng.next_u64());
}

// Random connected graph as a training item: a spanning chain plus random
// extra edges, every edge labeled.
TrainItem random_item(Rng& rng, int n, int input_dim) {
  TrainItem item;
  item.features.resize(n, input_dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < input_dim; ++j) item.features(i, j) = rng.uniform(-1.0, 1.0);
  std::set<std::pair<int, int>> edges;
  for (int i = 0; i + 1 < n; ++i) edges.insert({i, i + 1});
  int extra = rng.uniform_int(0, n);
  for (int k = 0; k < extra; ++k) {
    int a = rng.uniform_int(0, n - 1), b = rng.uniform_int(0, n - 1);
    if (a == b) continue;
    edges.insert({std::min(a, b), std::max(a, b)});
  }
  item.neighborhoods.assign(n, {});
  for (int i = 0; i < n; ++i) item.neighborhoods[i].push_back(i);
  for (auto [a, b] : edges) {
    item.neighborhoods[a].push_back(b);
    item.neighborhoods[b].push_back(a);
    item.labeled_edges.emplace_back(a, b, rng.bernoulli(0.5) ? 1.0 : 0.0);
  }
  for (auto& nb : item.neighborhoods) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  return item;
}

}  // namespace

TEST_CASE("attention coefficients: hand-evaluated toy and degenerate cases") {
  GatLayer layer;
  layer.heads.push_back({Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::VectorXd::Constant(2, 1.0)});

  Eigen::MatrixXd X(3, 1);
  X << 0.0, 1.0, 0.0;

  // Single neighbor: softmax of one logit.
  auto single = attention_coefficients(layer, 0, X, 0, {1});
  REQUIRE(single.size() == 1);
  REQUIRE(single[0] == Catch::Approx(1.0).margin(1e-12));

  // Identical features: uniform attention.
  Eigen::MatrixXd Xsame = Eigen::MatrixXd::Constant(4, 1, 0.7);
  auto uniform = attention_coefficients(layer, 0, Xsame, 0, {1, 2, 3});
  for (double a : uniform) REQUIRE(a == Catch::Approx(1.0 / 3.0).margin(1e-12));

  // Hand evaluation: logits {1, 0} give {e/(e+1), 1/(e+1)}.
  auto toy = attention_coefficients(layer, 0, X, 0, {1, 2});
  REQUIRE(toy[0] == Catch::Approx(0.731059).margin(1e-6));
  REQUIRE(toy[1] == Catch::Approx(0.268941).margin(1e-6));

  REQUIRE_THROWS_AS(attention_coefficients(layer, 0, X, 0, {}), InvalidInput);
}

TEST_CASE("attention rows sum to one on random graphs") {
  Rng rng(211);
  for (int trial = 0; trial < 30; ++trial) {
    int n = rng.uniform_int(2, 12);
    TrainItem item = random_item(rng, n, 5);
    GatModel model = small_random_model(rng, 5, 2, 2, 4);
    for (size_t l = 0; l < model.layers.size(); ++l) {
      Eigen::MatrixXd X = item.features;
      if (l == 1) X = layer_forward(model.layers[0], item.features, item.neighborhoods);
      for (int i = 0; i < n; ++i)
        for (size_t h = 0; h < model.layers[l].heads.size(); ++h) {
          auto alpha =
              attention_coefficients(model.layers[l], h, X, i, item.neighborhoods[i], 0.2);
          double sum = 0.0;
          for (double a : alpha) {
            REQUIRE(a > 0.0);
            sum += a;
          }
          REQUIRE(sum == Catch::Approx(1.0).margin(1e-9));
        }
    }
  }
}

TEST_CASE("layer_forward: zeros, hand evaluation, concat dims") {
  // All-zero weights give all-zero embeddings.
  GatLayer zero_layer;
  zero_layer.heads.push_back({Eigen::MatrixXd::Zero(3, 2), Eigen::VectorXd::Zero(6)});
  Eigen::MatrixXd X(2, 2);
  X << 0.3, -0.4, 0.9, 0.1;
  std::vector<std::vector<int>> nbrs{{0, 1}, {0, 1}};
  Eigen::MatrixXd out = layer_forward(zero_layer, X, nbrs);
  REQUIRE(out.norm() == 0.0);

  // Single head, 1-dim: embedding = ReLU(alpha_self * z_i + alpha_nb * z_j).
  GatLayer l1;
  Eigen::VectorXd a(2);
  a << 0.25, -0.5;
  l1.heads.push_back({Eigen::MatrixXd::Constant(1, 1, 2.0), a});
  Eigen::MatrixXd X1(2, 1);
  X1 << 0.8, -0.3;
  Eigen::MatrixXd out1 = layer_forward(l1, X1, nbrs, 0.2);
  double z0 = 2.0 * 0.8, z1 = 2.0 * -0.3;
  auto lrelu = [](double v) { return v > 0 ? v : 0.2 * v; };
  double e00 = lrelu(0.25 * z0 + -0.5 * z0), e01 = lrelu(0.25 * z0 + -0.5 * z1);
  double denom = std::exp(e00) + std::exp(e01);
  double alpha00 = std::exp(e00) / denom, alpha01 = std::exp(e01) / denom;
  double expected = std::max(0.0, alpha00 * z0 + alpha01 * z1);
  REQUIRE(out1(0, 0) == Catch::Approx(expected).margin(1e-12));

  // Two heads in concat mode double the output dimension.
  GatLayer two;
  two.combine = HeadCombine::concat;
  two.heads.push_back({Eigen::MatrixXd::Random(4, 2), Eigen::VectorXd::Random(8)});
  two.heads.push_back({Eigen::MatrixXd::Random(4, 2), Eigen::VectorXd::Random(8)});
  REQUIRE(layer_forward(two, X, nbrs).cols() == 8);
}

TEST_CASE("edge scoring: sigmoid, symmetry, clamping") {
  GatModel model;
  model.layers.push_back(
      {{GatHead{Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(2)}}, HeadCombine::average});
  model.edge_w = Eigen::MatrixXd::Zero(1, 1);
  model.edge_b = 0.0;

  Eigen::MatrixXd emb(2, 1);
  emb << 1.0, 1.0;
  REQUIRE(edge_probability(model, emb, 0, 1) == Catch::Approx(0.5).margin(1e-12));

  model.edge_w(0, 0) = 1.0;
  REQUIRE(edge_probability(model, emb, 0, 1) == Catch::Approx(0.731059).margin(1e-6));

  model.edge_w(0, 0) = 0.0;
  model.edge_b = -20.0;
  REQUIRE(edge_probability(model, emb, 0, 1) == kProbClampLo);

  // Asymmetric scorer matrix still yields order-independent probabilities.
  Rng rng(223);
  GatModel m2 = small_random_model(rng, 3, 1, 2, 3);
  Eigen::MatrixXd emb2(4, 3);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) emb2(i, j) = rng.uniform(-2.0, 2.0);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      REQUIRE(edge_probability(m2, emb2, a, b) == edge_probability(m2, emb2, b, a));
}

TEST_CASE("permutation of node ids leaves edge probabilities unchanged") {
  Rng rng(227);
  for (int trial = 0; trial < 10; ++trial) {
    int n = rng.uniform_int(3, 10);
    TrainItem item = random_item(rng, n, 4);
    GatModel model = small_random_model(rng, 4, 2, 2, 4);

    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(0, i)]);

    TrainItem permuted;
    permuted.features.resize(n, 4);
    permuted.neighborhoods.assign(n, {});
    for (int i = 0; i < n; ++i) {
      permuted.features.row(perm[i]) = item.features.row(i);
      for (int j : item.neighborhoods[i]) permuted.neighborhoods[perm[i]].push_back(perm[j]);
    }
    for (auto& nb : permuted.neighborhoods) std::sort(nb.begin(), nb.end());

    ForwardTrace t1 = gat_forward(model, item.features, item.neighborhoods);
    ForwardTrace t2 = gat_forward(model, permuted.features, permuted.neighborhoods);
    for (const auto& [a, b, y] : item.labeled_edges) {
      double p1 = edge_probability(model, t1.embeddings(), a, b);
      double p2 = edge_probability(model, t2.embeddings(), perm[a], perm[b]);
      REQUIRE(p1 == Catch::Approx(p2).margin(1e-12));
    }
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  Rng rng(229);
  for (int trial = 0; trial < 5; ++trial) {
    int n = rng.uniform_int(3, 7);
    std::vector<TrainItem> items{random_item(rng, n, 4)};
    GatModel model = small_random_model(rng, 4, 2, 2, 3);

    auto [loss, grads] = gat_loss_and_grads(model, items);
    REQUIRE(loss >= 0.0);

    const double h = 1e-5;
    for_each_param_grad(model, grads, [&](double& p, double& g) {
      double saved = p;
      p = saved + h;
      double up = gat_loss(model, items);
      p = saved - h;
      double down = gat_loss(model, items);
      p = saved;
      double numeric = (up - down) / (2.0 * h);
      double denom = std::max({std::abs(g), std::abs(numeric), 1e-6});
      REQUIRE(std::abs(g - numeric) / denom < 1e-4);
    });
  }
}

TEST_CASE("training drives a separable toy scene to perfect accuracy") {
  // Two bright nodes joined by a traversable edge, two faint nodes joined by
  // a non-traversable one, bridged in the middle. Features stay positive so
  // the ReLU keeps both clusters distinguishable.
  TrainItem item;
  item.features.resize(4, 2);
  item.features << 1.0, 0.8, 0.9, 1.0, 0.12, 0.05, 0.08, 0.1;
  item.neighborhoods = {{0, 1}, {0, 1, 2}, {1, 2, 3}, {2, 3}};
  item.labeled_edges = {{0, 1, 1.0}, {1, 2, 0.0}, {2, 3, 0.0}};
  std::vector<TrainItem> items{item};

  GatConfig cfg;
  cfg.input_dim = 2;
  cfg.layers = {{2, 4}};
  GatModel model = init_model(cfg, 99);
  TrainOptions opts;
  opts.learning_rate = 0.3;
  opts.epochs = 300;
  TrainResult result = train(model, items, {}, opts);
  REQUIRE(result.records.size() == 300);
  REQUIRE(edge_accuracy(model, items) == 1.0);
  REQUIRE(result.records.back().loss < result.records.front().loss);
}

TEST_CASE("zero learning rate leaves the model unchanged with constant loss") {
  Rng rng(233);
  std::vector<TrainItem> items{random_item(rng, 5, 3)};
  GatModel model = small_random_model(rng, 3, 1, 2, 3);

  std::vector<double> before;
  for_each_param(model, [&](double& p) { before.push_back(p); });

  TrainOptions opts;
  opts.learning_rate = 0.0;
  opts.epochs = 10;
  TrainResult result = train(model, items, {}, opts);

  std::vector<double> after;
  for_each_param(model, [&](double& p) { after.push_back(p); });
  REQUIRE(before == after);
  for (const TrainRecord& r : result.records)
    REQUIRE(r.loss == Catch::Approx(result.records.front().loss).margin(0.0));
}

TEST_CASE("train requires labeled edges") {
  Rng rng(239);
  TrainItem bare = random_item(rng, 4, 3);
  bare.labeled_edges.clear();
  std::vector<TrainItem> items{bare};
  GatModel model = small_random_model(rng, 3, 1, 1, 3);
  REQUIRE_THROWS_AS(train(model, items, {}, {}), InvalidInput);
}

TEST_CASE("model save/load round-trips forward outputs exactly") {
  Rng rng(241);
  GatModel model = small_random_model(rng, 4, 2, 3, 4);
  TrainItem item = random_item(rng, 6, 4);

  std::string path = "gat_model_test.json";
  save_model(path, model);
  GatModel loaded = load_model(path);

  ForwardTrace t1 = gat_forward(model, item.features, item.neighborhoods);
  ForwardTrace t2 = gat_forward(loaded, item.features, item.neighborhoods);
  REQUIRE((t1.embeddings() - t2.embeddings()).norm() == 0.0);
  for (const auto& [a, b, y] : item.labeled_edges)
    REQUIRE(edge_probability(model, t1.embeddings(), a, b) ==
            edge_probability(loaded, t2.embeddings(), a, b));
  std::remove(path.c_str());
}

TEST_CASE("model load rejects truncated and inconsistent files") {
  Rng rng(251);
  GatModel model = small_random_model(rng, 4, 1, 2, 3);
  std::string path = "gat_model_bad.json";
  save_model(path, model);

  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  {
    std::ofstream out(path);
    out << text.substr(0, text.size() / 2);
  }
  REQUIRE_THROWS_AS(load_model(path), ParseError);

  nlohmann::json doc = serialize_model(model);
  doc["layers"][0]["in_dim"] = 7;  // declared dims disagree with the arrays
  {
    std::ofstream out(path);
    out << doc.dump();
  }
  REQUIRE_THROWS_AS(load_model(path), ParseError);
  std::remove(path.c_str());
}
