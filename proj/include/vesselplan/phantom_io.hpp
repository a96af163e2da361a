#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "vesselplan/graph_io.hpp"
#include "vesselplan/image_io.hpp"
#include "vesselplan/phantom.hpp"

namespace vplan {

inline constexpr int kSceneSchemaVersion = 1;

inline nlohmann::json phantom_config_to_json(const PhantomConfig& cfg) {
  return {{"size", cfg.size},
          {"n_crossings", cfg.n_crossings},
          {"angle_min_deg", cfg.angle_min_deg},
          {"angle_max_deg", cfg.angle_max_deg},
          {"main_width", cfg.main_width},
          {"decoy_width_jitter", cfg.decoy_width_jitter},
          {"shortcut_fraction", cfg.shortcut_fraction},
          {"hard_fraction", cfg.hard_fraction},
          {"noise", cfg.noise},
          {"blur_sigma", cfg.blur_sigma},
          {"spacing", {cfg.spacing.sx, cfg.spacing.sy}}};
}

inline PhantomConfig phantom_config_from_json(const nlohmann::json& j) {
  PhantomConfig cfg;
  cfg.size = j.value("size", cfg.size);
  cfg.n_crossings = j.value("n_crossings", cfg.n_crossings);
  cfg.angle_min_deg = j.value("angle_min_deg", cfg.angle_min_deg);
  cfg.angle_max_deg = j.value("angle_max_deg", cfg.angle_max_deg);
  cfg.main_width = j.value("main_width", cfg.main_width);
  cfg.decoy_width_jitter = j.value("decoy_width_jitter", cfg.decoy_width_jitter);
  cfg.shortcut_fraction = j.value("shortcut_fraction", cfg.shortcut_fraction);
  cfg.hard_fraction = j.value("hard_fraction", cfg.hard_fraction);
  cfg.noise = j.value("noise", cfg.noise);
  cfg.blur_sigma = j.value("blur_sigma", cfg.blur_sigma);
  if (j.contains("spacing")) {
    auto s = j.at("spacing").get<std::vector<double>>();
    if (s.size() != 2) throw ParseError("phantom config: spacing must be [sx, sy]");
    cfg.spacing = {s[0], s[1]};
  }
  cfg.validate();
  return cfg;
}

inline void save_scene(const std::string& dir, const PhantomScene& scene) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  save_png(dir + "/mask.png", scene.mask);
  save_png(dir + "/intensity.png", scene.intensity);

  nlohmann::json j;
  j["schema_version"] = kSceneSchemaVersion;
  j["seed"] = scene.seed;
  j["source"] = scene.source;
  j["target"] = scene.target;
  j["true_path"] = scene.true_path;
  nlohmann::json cross = nlohmann::json::array();
  for (const CrossingTruth& c : scene.crossings)
    cross.push_back({{"node", c.node}, {"in_edge", c.in_edge}, {"out_edge", c.out_edge}});
  j["crossings"] = std::move(cross);
  j["has_shortcut"] = scene.has_shortcut;
  j["hard_crossing"] = scene.hard_crossing;
  j["main_route_len"] = scene.main_route_len;
  j["decoy_route_len"] = scene.decoy_route_len;
  j["graph"] = serialize_graph(scene.truth);

  std::ofstream out(dir + "/truth.json");
  if (!out) throw IoError("cannot write scene truth: " + dir);
  out << j.dump(2) << "\n";
}

inline PhantomScene load_scene(const std::string& dir) {
  PhantomScene scene;
  Grid mask_img = load_image(dir + "/mask.png");
  scene.intensity = load_image(dir + "/intensity.png");

  std::ifstream in(dir + "/truth.json");
  if (!in) throw IoError("cannot open scene truth: " + dir + "/truth.json");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("scene truth '" + dir + "': " + e.what());
  }
  if (j.value("schema_version", -1) != kSceneSchemaVersion)
    throw ParseError("scene truth: unsupported schema_version");
  scene.truth = deserialize_graph(j.at("graph"));
  scene.seed = j.value("seed", 0ULL);
  scene.source = j.at("source").get<int>();
  scene.target = j.at("target").get<int>();
  scene.true_path = j.at("true_path").get<std::vector<int>>();
  for (const auto& c : j.at("crossings"))
    scene.crossings.push_back({c.at("node").get<int>(), c.at("in_edge").get<int>(),
                               c.at("out_edge").get<int>()});
  scene.has_shortcut = j.value("has_shortcut", false);
  scene.hard_crossing = j.value("hard_crossing", false);
  scene.main_route_len = j.value("main_route_len", 0.0);
  scene.decoy_route_len = j.value("decoy_route_len", 0.0);

  scene.mask = BinaryMask(mask_img.width(), mask_img.height(), scene.truth.spacing);
  for (int r = 0; r < mask_img.height(); ++r)
    for (int c = 0; c < mask_img.width(); ++c)
      scene.mask.at(r, c) = mask_img.at(r, c) > 0.5 ? 1 : 0;
  scene.intensity.set_spacing(scene.truth.spacing);
  return scene;
}

struct SceneSummary {
  int index = 0;
  uint64_t seed = 0;
  std::string dir;
  int n_crossings = 0;
  bool has_shortcut = false;
  bool hard_crossing = false;
  bool false_route_shorter = false;
};

struct SuiteManifest {
  uint64_t suite_seed = 0;
  int n_scenes = 0;
  PhantomConfig config;
  std::vector<SceneSummary> scenes;
  double fraction_false_shorter = 0.0;
};

inline nlohmann::json manifest_to_json(const SuiteManifest& m) {
  nlohmann::json j;
  j["schema_version"] = kSceneSchemaVersion;
  j["suite_seed"] = m.suite_seed;
  j["n_scenes"] = m.n_scenes;
  j["config"] = phantom_config_to_json(m.config);
  nlohmann::json scenes = nlohmann::json::array();
  for (const SceneSummary& s : m.scenes)
    scenes.push_back({{"index", s.index},
                      {"seed", s.seed},
                      {"dir", s.dir},
                      {"n_crossings", s.n_crossings},
                      {"has_shortcut", s.has_shortcut},
                      {"hard_crossing", s.hard_crossing},
                      {"false_route_shorter", s.false_route_shorter}});
  j["scenes"] = std::move(scenes);
  j["fraction_false_route_shorter"] = m.fraction_false_shorter;
  return j;
}

// Deterministic per-scene seeds. Shortcut and hard flags are assigned by
// fractional quota so a 50-scene suite at shortcut_fraction 0.5 always
// contains exactly 25 shortcut scenes.
inline std::pair<std::vector<PhantomScene>, SuiteManifest> generate_suite(
    uint64_t seed, int n_scenes, const PhantomConfig& cfg = {}, int jobs = 1) {
  if (n_scenes < 1) throw InvalidParameter("generate_suite: n_scenes must be >= 1");
  cfg.validate();
  std::vector<PhantomScene> scenes(n_scenes);
  std::vector<std::string> errors(n_scenes);

  auto quota = [](int i, double f) {
    return static_cast<int>(std::floor((i + 1) * f)) - static_cast<int>(std::floor(i * f)) == 1;
  };
  auto work = [&](int i) {
    PhantomConfig scene_cfg = cfg;
    if (cfg.n_crossings >= 2) {
      scene_cfg.force_shortcut = quota(i, cfg.shortcut_fraction);
      scene_cfg.force_hard = quota(i, cfg.hard_fraction);
    }
    try {
      scenes[i] = generate_scene(derive_seed(seed, static_cast<uint64_t>(i)), scene_cfg);
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  };

  int threads = std::max(1, jobs);
  if (threads == 1) {
    for (int i = 0; i < n_scenes; ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (int i = t; i < n_scenes; i += threads) work(i);
      });
    for (auto& th : pool) th.join();
  }
  for (int i = 0; i < n_scenes; ++i)
    if (!errors[i].empty())
      throw GenerationError("scene " + std::to_string(i) + ": " + errors[i]);

  SuiteManifest manifest;
  manifest.suite_seed = seed;
  manifest.n_scenes = n_scenes;
  manifest.config = cfg;
  int shorter = 0;
  for (int i = 0; i < n_scenes; ++i) {
    const PhantomScene& s = scenes[i];
    bool false_shorter = s.decoy_route_len > 0.0 && s.decoy_route_len < s.main_route_len;
    shorter += false_shorter;
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%03d", i);
    manifest.scenes.push_back({i, s.seed, name, static_cast<int>(s.crossings.size()),
                               s.has_shortcut, s.hard_crossing, false_shorter});
  }
  manifest.fraction_false_shorter = static_cast<double>(shorter) / n_scenes;
  return {std::move(scenes), std::move(manifest)};
}

inline void save_suite(const std::string& dir, const std::vector<PhantomScene>& scenes,
                       const SuiteManifest& manifest) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (size_t i = 0; i < scenes.size(); ++i)
    save_scene(dir + "/" + manifest.scenes[i].dir, scenes[i]);
  std::ofstream out(dir + "/manifest.json");
  if (!out) throw IoError("cannot write manifest: " + dir);
  out << manifest_to_json(manifest).dump(2) << "\n";
}

struct LoadedSuite {
  std::vector<PhantomScene> scenes;
  nlohmann::json manifest;
};

inline LoadedSuite load_suite(const std::string& dir) {
  std::ifstream in(dir + "/manifest.json");
  if (!in) throw IoError("cannot open suite manifest: " + dir + "/manifest.json");
  LoadedSuite suite;
  try {
    in >> suite.manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("suite manifest '" + dir + "': " + e.what());
  }
  for (const auto& s : suite.manifest.at("scenes")) {
    std::string scene_dir = dir + "/" + s.at("dir").get<std::string>();
    try {
      suite.scenes.push_back(load_scene(scene_dir));
    } catch (const Error& e) {
      throw Error("scene bundle '" + scene_dir + "': " + e.what());
    }
  }
  return suite;
}

}  // namespace vplan
