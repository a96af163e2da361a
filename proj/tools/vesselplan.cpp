// vesselplan: vessel-mask graph extraction and topology-aware route planning.
//
// Subcommands: gen-phantom, graph build/dump, losses, train, plan, eval,
// render. Every command is deterministic given its flags and seeds.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "vesselplan/evalx.hpp"
#include "vesselplan/gat_train.hpp"
#include "vesselplan/graph_io.hpp"
#include "vesselplan/image_io.hpp"
#include "vesselplan/model_io.hpp"
#include "vesselplan/phantom_io.hpp"
#include "vesselplan/pipeline.hpp"
#include "vesselplan/planner.hpp"
#include "vesselplan/seg_losses.hpp"

namespace {

using namespace vplan;

struct CliError {
  int code;
  std::string message;
};

// flags > config file > defaults. The file (if any) is loaded first and then
// every flag the user actually passed is re-applied on top.
struct ConfigOpts {
  std::string config_path;

  double tau = 0.5;
  int kernel = 3;
  double l_min = -1.0;      // <0: keep config/default
  double merge_len = -1.0;  // <0: keep config/default
  std::string spacing;      // "sx,sy"
  double lambda_theta = -1.0;
  double lambda_diameter = -1.0;
  int epochs = -1;
  double lr = -1.0;
  uint64_t train_seed = 0;
  bool train_seed_set = false;

  void add_flags(CLI::App* cmd) {
    cmd->add_option("--config", config_path,
                    "pipeline config JSON (default: $VESSELPLAN_CONFIG if set)");
    cmd->add_option("--tau", tau, "binarization threshold in [0,1]");
    cmd->add_option("--kernel", kernel, "closing structuring element size (odd)");
    cmd->add_option("--lmin", l_min, "spur pruning length (physical units)");
    cmd->add_option("--merge-len", merge_len, "crossing consolidation length (physical units)");
    cmd->add_option("--spacing", spacing, "pixel spacing as sx,sy");
    cmd->add_option("--lambda-theta", lambda_theta, "curvature prior weight");
    cmd->add_option("--lambda-d", lambda_diameter, "diameter prior weight");
  }

  void add_train_flags(CLI::App* cmd) {
    cmd->add_option("--epochs", epochs, "training epochs");
    cmd->add_option("--lr", lr, "learning rate");
    auto* opt = cmd->add_option("--seed", train_seed, "training/init seed");
    opt->each([this](const std::string&) { train_seed_set = true; });
  }

  PipelineConfig resolve(const CLI::App* cmd) const {
    PipelineConfig cfg;
    std::string path = config_path;
    if (path.empty())
      if (const char* env = std::getenv("VESSELPLAN_CONFIG")) path = env;
    if (!path.empty()) cfg = load_config(path);

    if (cmd->count("--tau")) cfg.tau = tau;
    if (cmd->count("--kernel")) cfg.closing_kernel = kernel;
    if (cmd->count("--lmin")) cfg.l_min = l_min;
    if (cmd->count("--merge-len")) cfg.crossing_merge_len = merge_len;
    if (cmd->count("--spacing")) {
      double sx, sy;
      if (std::sscanf(spacing.c_str(), "%lf,%lf", &sx, &sy) != 2)
        throw InvalidParameter("--spacing expects sx,sy");
      cfg.spacing = {sx, sy};
    }
    if (cmd->count("--lambda-theta")) cfg.priors.lambda_theta = lambda_theta;
    if (cmd->count("--lambda-d")) cfg.priors.lambda_diameter = lambda_diameter;
    if (cmd->count("--epochs")) cfg.train.epochs = epochs;
    if (cmd->count("--lr")) cfg.train.learning_rate = lr;
    if (train_seed_set) cfg.train_seed = train_seed;
    cfg.validate();
    return cfg;
  }
};

int parse_node_ref(const std::string& ref, const VesselGraph& g) {
  if (ref.find(',') != std::string::npos) {
    int r, c;
    if (std::sscanf(ref.c_str(), "%d,%d", &r, &c) != 2)
      throw InvalidParameter("node reference must be an id or r,c: " + ref);
    return snap_to_node(g, {r, c});
  }
  try {
    size_t pos = 0;
    int id = std::stoi(ref, &pos);
    if (pos != ref.size()) throw std::invalid_argument(ref);
    if (id < 0 || id >= static_cast<int>(g.nodes.size()))
      throw InvalidParameter("node id out of range: " + ref);
    return id;
  } catch (const std::logic_error&) {
    throw InvalidParameter("node reference must be an id or r,c: " + ref);
  }
}

nlohmann::json plan_to_json(const PlanResult& res) {
  nlohmann::json j;
  j["planner"] = planner_name(res.planner);
  j["nodes"] = res.nodes;
  j["edges"] = res.edges;
  nlohmann::json probs = nlohmann::json::array();
  for (double p : res.probabilities) {
    if (std::isnan(p)) probs.push_back(nullptr);
    else probs.push_back(p);
  }
  j["probabilities"] = std::move(probs);
  j["total_cost"] = res.total_cost;
  nlohmann::json poly = nlohmann::json::array();
  for (const auto& p : res.polyline) poly.push_back({p[0], p[1]});
  j["polyline"] = std::move(poly);
  return j;
}

void draw_polyline_overlay(std::vector<uint8_t>& img, int width, int height,
                           const nlohmann::json& polyline) {
  auto put = [&](int r, int c) {
    if (r >= 0 && r < height && c >= 0 && c < width)
      img[static_cast<size_t>(r) * width + c] = 255;
  };
  int pr = 0, pc = 0;
  bool first = true;
  for (const auto& pt : polyline) {
    int r = static_cast<int>(std::lround(pt[0].get<double>()));
    int c = static_cast<int>(std::lround(pt[1].get<double>()));
    if (first) {
      put(r, c);
      first = false;
    } else {
      int dr = std::abs(r - pr), dc = std::abs(c - pc);
      int steps = std::max({dr, dc, 1});
      for (int s = 0; s <= steps; ++s)
        put(pr + (r - pr) * s / steps, pc + (c - pc) * s / steps);
    }
    pr = r;
    pc = c;
  }
}

void write_overlay(const std::string& path, const BinaryMask& mask,
                   const nlohmann::json& polyline) {
  std::vector<uint8_t> img(static_cast<size_t>(mask.width()) * mask.height(), 0);
  for (int r = 0; r < mask.height(); ++r)
    for (int c = 0; c < mask.width(); ++c)
      if (mask.at(r, c)) img[static_cast<size_t>(r) * mask.width() + c] = 100;
  draw_polyline_overlay(img, mask.width(), mask.height(), polyline);
  write_png_gray8(path, mask.width(), mask.height(), img);
}

// ---- subcommand bodies ----------------------------------------------------

struct GenPhantomArgs {
  uint64_t seed = 1;
  int scenes = 1;
  std::string out;
  int size = 256;
  int crossings = 2;
  double angle_min = 20.0, angle_max = 90.0;
  double width = 5.0;
  double shortcut_fraction = 0.5;
  double hard_fraction = 0.35;
  double noise = 0.02;
  int jobs = 1;
};

int cmd_gen_phantom(const GenPhantomArgs& a) {
  PhantomConfig cfg;
  cfg.size = a.size;
  cfg.n_crossings = a.crossings;
  cfg.angle_min_deg = a.angle_min;
  cfg.angle_max_deg = a.angle_max;
  cfg.main_width = a.width;
  cfg.shortcut_fraction = a.shortcut_fraction;
  cfg.hard_fraction = a.hard_fraction;
  cfg.noise = a.noise;
  auto [scenes, manifest] = generate_suite(a.seed, a.scenes, cfg, a.jobs);
  save_suite(a.out, scenes, manifest);
  std::cout << "wrote " << scenes.size() << " scenes to " << a.out
            << " (false route shorter in " << manifest.fraction_false_shorter * 100.0
            << "% of scenes)\n";
  return 0;
}

struct TrainArgs {
  std::string suite;
  std::string out;
  std::string log;
};

int cmd_train(const TrainArgs& a, const PipelineConfig& cfg) {
  LoadedSuite suite = load_suite(a.suite);
  std::vector<TrainItem> items;
  int skipped = 0;
  for (size_t i = 0; i < suite.scenes.size(); ++i) {
    const PhantomScene& scene = suite.scenes[i];
    try {
      ScenePipeline pipe = run_scene_pipeline(scene, cfg);
      // Transfer truth labels onto the extracted graph through the match.
      VesselGraph labeled = pipe.extracted.graph;
      for (size_t t = 0; t < pipe.match.edge_map.size(); ++t)
        labeled.edge(pipe.match.edge_map[t]).label = scene.truth.edge(static_cast<int>(t)).label;
      items.push_back(make_train_item(labeled, pipe.features));
    } catch (const Error& e) {
      ++skipped;
      std::cerr << "warning: scene " << i << " skipped: " << e.what() << "\n";
    }
  }
  if (items.empty()) throw InvalidInput("train: no usable labeled scenes in suite");

  GatConfig gat_cfg = cfg.gat;
  gat_cfg.input_dim = cfg.descriptor.phi_dim();
  GatModel model = init_model(gat_cfg, cfg.train_seed);
  TrainResult result = train(model, items, {}, cfg.train);
  save_model(a.out, model);

  if (!a.log.empty()) {
    std::ofstream log(a.log);
    if (!log) throw IoError("cannot write training log: " + a.log);
    log << "epoch,loss,accuracy\n";
    for (const TrainRecord& r : result.records)
      log << r.epoch << ',' << r.loss << ',' << r.accuracy << "\n";
  }
  if (result.loss_increase_count > 0)
    std::cerr << "warning: loss increased in " << result.loss_increase_count
              << " epochs (step size may be too large)\n";
  if (!result.records.empty())
    std::cout << "trained on " << items.size() << " scenes (" << skipped
              << " skipped), final loss " << result.records.back().loss << ", accuracy "
              << result.records.back().accuracy << "\n";
  else
    std::cout << "wrote initialized model (0 epochs)\n";
  return 0;
}

struct PlanArgs {
  std::string mask;
  std::string image;
  std::string model;
  std::string src, tgt;
  std::string planner = "proposed";
  std::string out;
  std::string render;
};

int cmd_plan(const PlanArgs& a, const PipelineConfig& cfg) {
  BinaryMask mask = load_mask(a.mask, cfg.spacing);
  ExtractedGraph extracted = extract_graph(mask, cfg);
  VesselGraph graph = extracted.graph;

  PlanRequest req;
  req.source = parse_node_ref(a.src, graph);
  req.target = parse_node_ref(a.tgt, graph);
  req.priors = cfg.priors;

  PlanResult result;
  if (a.planner == "proposed") {
    if (a.model.empty()) throw InvalidParameter("--model is required for --planner proposed");
    GatModel model = load_model(a.model);
    // Patch features come from the intensity image; the mask stands in when
    // none is given.
    Grid image;
    if (!a.image.empty()) {
      image = load_image(a.image, cfg.spacing);
    } else {
      image = Grid(mask.width(), mask.height(), cfg.spacing);
      for (int r = 0; r < mask.height(); ++r)
        for (int c = 0; c < mask.width(); ++c) image.at(r, c) = mask.at(r, c);
    }
    std::vector<NodeFeatures> features = compute_node_features(graph, image, cfg.descriptor);
    ScoredGraph scored = score_edges(model, std::move(graph), features);
    result = plan(scored.graph, req);
  } else if (a.planner == "shortest") {
    result = shortest_path_baseline(graph, req);
  } else if (a.planner == "heuristic") {
    result = heuristic_baseline(graph, req);
  } else {
    throw InvalidParameter("unknown planner: " + a.planner);
  }

  nlohmann::json j = plan_to_json(result);
  j["source"] = req.source;
  j["target"] = req.target;
  if (!a.out.empty()) {
    std::ofstream out(a.out);
    if (!out) throw IoError("cannot write plan: " + a.out);
    out << j.dump(2) << "\n";
  } else {
    std::cout << j.dump(2) << "\n";
  }
  if (!a.render.empty()) write_overlay(a.render, mask, j["polyline"]);
  std::cerr << "path: " << result.nodes.size() << " nodes, " << result.edges.size()
            << " edges, cost " << result.total_cost << "\n";
  return 0;
}

struct EvalArgs {
  std::string suite;
  std::string model;
  std::string out_prefix;
  bool json_only = false;
  int jobs = 1;
};

int cmd_eval(const EvalArgs& a, const PipelineConfig& cfg) {
  LoadedSuite suite = load_suite(a.suite);
  GatModel model = load_model(a.model);
  EvalReport report = run_comparison(suite.scenes, model, cfg, a.jobs);
  if (!a.out_prefix.empty()) {
    std::ofstream csv(a.out_prefix + ".csv");
    if (!csv) throw IoError("cannot write report: " + a.out_prefix + ".csv");
    csv << report_to_csv(report);
    std::ofstream js(a.out_prefix + ".json");
    if (!js) throw IoError("cannot write report: " + a.out_prefix + ".json");
    js << report_to_json(report).dump(2) << "\n";
  }
  if (!a.json_only) std::cout << report_to_table(report);
  else std::cout << report_to_json(report).dump(2) << "\n";
  return 0;
}

struct LossArgs {
  std::string pred;
  std::string target;
  std::string aux;
  double alpha = 0.7, beta = 0.3, gamma = 0.75, epsilon = 1e-6;
  double w1 = 1.0, w2 = 0.5, w3 = 1.0, w4 = 0.5;
};

int cmd_losses(const LossArgs& a) {
  Grid pred = load_image(a.pred);
  Grid target_img = load_image(a.target);
  BinaryMask target(target_img.width(), target_img.height());
  for (int r = 0; r < target_img.height(); ++r)
    for (int c = 0; c < target_img.width(); ++c)
      target.at(r, c) = target_img.at(r, c) > 0.5 ? 1 : 0;
  Grid aux = a.aux.empty() ? pred : load_image(a.aux);

  LossConfig cfg{a.w1, a.w2, a.w3, a.w4, a.alpha, a.beta, a.gamma, a.epsilon};
  cfg.validate();
  double dice = dice_loss(pred, target, cfg.epsilon);
  double ft = focal_tversky_loss(pred, target, cfg.alpha, cfg.beta, cfg.gamma, cfg.epsilon);
  double hybrid = hybrid_total_loss(pred, aux, target, cfg);
  std::cout << "dice_loss " << dice << "\n";
  std::cout << "focal_tversky_loss " << ft << "\n";
  std::cout << "hybrid_total_loss " << hybrid << "\n";
  return 0;
}

struct GraphArgs {
  std::string mask;
  std::string out;
  std::string graph_path;
};

int cmd_graph_build(const GraphArgs& a, const PipelineConfig& cfg) {
  BinaryMask mask = load_mask(a.mask, cfg.spacing);
  ExtractedGraph extracted = extract_graph(mask, cfg);
  extracted.graph.provenance = a.mask;
  for (const std::string& w : extracted.graph.warnings) std::cerr << "warning: " << w << "\n";
  if (!a.out.empty()) {
    save_graph(a.out, extracted.graph);
    std::cout << "wrote " << a.out << "\n";
  } else {
    std::cout << serialize_graph(extracted.graph).dump(2) << "\n";
  }
  return 0;
}

int cmd_graph_dump(const GraphArgs& a) {
  VesselGraph g = load_graph(a.graph_path);
  int endpoints = 0, bifurcations = 0, anchors = 0;
  for (const KeyNode& n : g.nodes) {
    if (n.kind == NodeKind::endpoint) ++endpoints;
    else if (n.kind == NodeKind::bifurcation) ++bifurcations;
    else ++anchors;
  }
  std::cout << "nodes: " << g.nodes.size() << " (" << endpoints << " endpoints, " << bifurcations
            << " bifurcations, " << anchors << " anchors)\n";
  std::cout << "edges: " << g.edges.size() << "\n";
  for (const KeyNode& n : g.nodes)
    std::cout << "  node " << n.id << " (" << n.position.r << "," << n.position.c << ") degree "
              << n.degree << "\n";
  for (const VesselEdge& e : g.edges) {
    std::cout << "  edge " << e.id << " " << e.node_a << "-" << e.node_b << " chain "
              << e.chain.size();
    if (e.geometry)
      std::cout << " len " << e.geometry->arc_length << " diam " << e.geometry->diameter;
    if (e.probability) std::cout << " p " << *e.probability;
    std::cout << "\n";
  }
  return 0;
}

struct RenderArgs {
  std::string mask;
  std::string plan;
  std::string out;
};

int cmd_render(const RenderArgs& a, const PipelineConfig& cfg) {
  BinaryMask mask = load_mask(a.mask, cfg.spacing);
  std::ifstream in(a.plan);
  if (!in) throw IoError("cannot open plan: " + a.plan);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("plan file '" + a.plan + "': " + e.what());
  }
  if (!j.contains("polyline")) throw ParseError("plan file: missing 'polyline'");
  write_overlay(a.out, mask, j.at("polyline"));
  std::cout << "wrote " << a.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vessel-mask graph extraction and topology-aware route planning"};
  app.require_subcommand(1);

  GenPhantomArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-phantom", "generate a synthetic phantom suite");
  gen_cmd->add_option("--seed", gen.seed, "suite seed");
  gen_cmd->add_option("--scenes", gen.scenes, "number of scenes");
  gen_cmd->add_option("--out", gen.out, "output directory")->required();
  gen_cmd->add_option("--size", gen.size, "image size (>= 128)");
  gen_cmd->add_option("--crossings", gen.crossings, "crossings per scene");
  gen_cmd->add_option("--angle-min", gen.angle_min, "min crossing angle (deg)");
  gen_cmd->add_option("--angle-max", gen.angle_max, "max crossing angle (deg)");
  gen_cmd->add_option("--width", gen.width, "main vessel width (px)");
  gen_cmd->add_option("--shortcut-fraction", gen.shortcut_fraction,
                      "fraction of scenes where the decoy is the shorter route");
  gen_cmd->add_option("--hard-fraction", gen.hard_fraction,
                      "fraction of scenes with a heuristic-adversarial crossing");
  gen_cmd->add_option("--noise", gen.noise, "intensity noise amplitude");
  gen_cmd->add_option("--jobs", gen.jobs, "parallel scene generation");

  ConfigOpts train_cfg;
  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train the edge scorer on a labeled suite");
  train_cmd->add_option("--suite", train_args.suite, "suite directory")->required();
  train_cmd->add_option("--out", train_args.out, "output model file")->required();
  train_cmd->add_option("--log", train_args.log, "training log CSV");
  train_cfg.add_flags(train_cmd);
  train_cfg.add_train_flags(train_cmd);

  ConfigOpts plan_cfg;
  PlanArgs plan_args;
  auto* plan_cmd = app.add_subcommand("plan", "plan a route on a vessel mask");
  plan_cmd->add_option("--mask", plan_args.mask, "binary mask (PNG or PGM)")->required();
  plan_cmd->add_option("--image", plan_args.image, "intensity image for patch features");
  plan_cmd->add_option("--model", plan_args.model, "trained model file");
  plan_cmd->add_option("--src", plan_args.src, "source node id or r,c")->required();
  plan_cmd->add_option("--tgt", plan_args.tgt, "target node id or r,c")->required();
  plan_cmd->add_option("--planner", plan_args.planner, "proposed | shortest | heuristic");
  plan_cmd->add_option("--out", plan_args.out, "plan JSON output (stdout if omitted)");
  plan_cmd->add_option("--render", plan_args.render, "overlay PNG output");
  plan_cfg.add_flags(plan_cmd);

  ConfigOpts eval_cfg;
  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "compare planners on a suite");
  eval_cmd->add_option("--suite", eval_args.suite, "suite directory")->required();
  eval_cmd->add_option("--model", eval_args.model, "trained model file")->required();
  eval_cmd->add_option("--out-prefix", eval_args.out_prefix, "write <prefix>.csv and <prefix>.json");
  eval_cmd->add_flag("--json-only", eval_args.json_only, "suppress the console table");
  eval_cmd->add_option("--jobs", eval_args.jobs, "parallel scene evaluation");
  eval_cfg.add_flags(eval_cmd);

  LossArgs loss_args;
  auto* loss_cmd = app.add_subcommand("losses", "evaluate segmentation losses on two images");
  loss_cmd->add_option("--pred", loss_args.pred, "prediction image")->required();
  loss_cmd->add_option("--target", loss_args.target, "target mask image")->required();
  loss_cmd->add_option("--aux", loss_args.aux, "auxiliary prediction (defaults to --pred)");
  loss_cmd->add_option("--alpha", loss_args.alpha, "Tversky false-positive penalty");
  loss_cmd->add_option("--beta", loss_args.beta, "Tversky false-negative penalty");
  loss_cmd->add_option("--gamma", loss_args.gamma, "focal exponent");
  loss_cmd->add_option("--epsilon", loss_args.epsilon, "stability constant");
  loss_cmd->add_option("--w1", loss_args.w1, "Dice weight (main)");
  loss_cmd->add_option("--w2", loss_args.w2, "Focal Tversky weight (main)");
  loss_cmd->add_option("--w3", loss_args.w3, "Dice weight (aux)");
  loss_cmd->add_option("--w4", loss_args.w4, "Focal Tversky weight (aux)");

  ConfigOpts graph_cfg;
  GraphArgs graph_args;
  auto* graph_cmd = app.add_subcommand("graph", "vessel graph utilities");
  graph_cmd->require_subcommand(1);
  auto* graph_build = graph_cmd->add_subcommand("build", "extract a graph from a mask");
  graph_build->add_option("--mask", graph_args.mask, "binary mask")->required();
  graph_build->add_option("--out", graph_args.out, "graph JSON output (stdout if omitted)");
  graph_cfg.add_flags(graph_build);
  auto* graph_dump = graph_cmd->add_subcommand("dump", "summarize a graph document");
  graph_dump->add_option("--graph", graph_args.graph_path, "graph JSON")->required();

  ConfigOpts render_cfg;
  RenderArgs render_args;
  auto* render_cmd = app.add_subcommand("render", "overlay a plan onto its mask");
  render_cmd->add_option("--mask", render_args.mask, "binary mask")->required();
  render_cmd->add_option("--plan", render_args.plan, "plan JSON")->required();
  render_cmd->add_option("--out", render_args.out, "overlay PNG")->required();
  render_cfg.add_flags(render_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_phantom(gen);
    if (train_cmd->parsed()) return cmd_train(train_args, train_cfg.resolve(train_cmd));
    if (plan_cmd->parsed()) return cmd_plan(plan_args, plan_cfg.resolve(plan_cmd));
    if (eval_cmd->parsed()) return cmd_eval(eval_args, eval_cfg.resolve(eval_cmd));
    if (loss_cmd->parsed()) return cmd_losses(loss_args);
    if (graph_cmd->parsed()) {
      if (graph_build->parsed()) return cmd_graph_build(graph_args, graph_cfg.resolve(graph_build));
      return cmd_graph_dump(graph_args);
    }
    if (render_cmd->parsed()) return cmd_render(render_args, render_cfg.resolve(render_cmd));
  } catch (const NoPathError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const GenerationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
