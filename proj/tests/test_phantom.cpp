#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "oracles.hpp"
#include "vesselplan/evalx.hpp"
#include "vesselplan/phantom.hpp"
#include "vesselplan/phantom_io.hpp"
#include "vesselplan/pipeline.hpp"

using namespace vplan;

TEST_CASE("scene generation is deterministic per seed") {
  PhantomConfig cfg;
  PhantomScene a = generate_scene(1234, cfg);
  PhantomScene b = generate_scene(1234, cfg);
  REQUIRE(a.mask == b.mask);
  REQUIRE(a.intensity.values() == b.intensity.values());
  REQUIRE(serialize_graph(a.truth).dump() == serialize_graph(b.truth).dump());
  REQUIRE(a.true_path == b.true_path);
  REQUIRE(a.source == b.source);
  REQUIRE(a.target == b.target);

  PhantomScene c = generate_scene(1235, cfg);
  REQUIRE_FALSE(a.mask == c.mask);
}

TEST_CASE("n_crossings=0 yields a single chain") {
  PhantomConfig cfg;
  cfg.n_crossings = 0;
  PhantomScene scene = generate_scene(77, cfg);
  REQUIRE(scene.truth.nodes.size() == 2);
  REQUIRE(scene.truth.edges.size() == 1);
  REQUIRE(scene.true_path.size() == 1);
  REQUIRE(scene.crossings.empty());
  REQUIRE(*scene.truth.edges[0].label == EdgeLabel::traversable);
}

TEST_CASE("n_crossings=1 plants exactly one degree-4 node") {
  PhantomConfig cfg;
  cfg.n_crossings = 1;
  PhantomScene scene = generate_scene(42, cfg);
  int deg4 = 0;
  for (const KeyNode& n : scene.truth.nodes) deg4 += (n.degree == 4);
  REQUIRE(deg4 == 1);
  REQUIRE(scene.crossings.size() == 1);
  REQUIRE(scene.truth.node(scene.crossings[0].node).degree == 4);
}

TEST_CASE("truth invariants: path connects source to target on traversable edges") {
  PhantomConfig cfg;
  for (uint64_t seed : {5ULL, 6ULL, 7ULL, 8ULL}) {
    PhantomScene scene = generate_scene(seed, cfg);
    REQUIRE_FALSE(scene.true_path.empty());
    int at = scene.source;
    for (int eid : scene.true_path) {
      const VesselEdge& e = scene.truth.edge(eid);
      REQUIRE(*e.label == EdgeLabel::traversable);
      REQUIRE((e.node_a == at || e.node_b == at));
      at = e.node_a == at ? e.node_b : e.node_a;
    }
    REQUIRE(at == scene.target);
    for (const CrossingTruth& c : scene.crossings)
      REQUIRE(scene.truth.node(c.node).degree == 4);
  }
}

TEST_CASE("suite generation: quota-stable manifest, deterministic rerun") {
  PhantomConfig cfg;
  auto [scenes, manifest] = generate_suite(99, 20, cfg);
  REQUIRE(scenes.size() == 20);
  REQUIRE(manifest.fraction_false_shorter >= cfg.shortcut_fraction - 0.1);

  auto [scenes2, manifest2] = generate_suite(99, 20, cfg, 4);  // parallel
  REQUIRE(manifest_to_json(manifest).dump() == manifest_to_json(manifest2).dump());
  for (size_t i = 0; i < scenes.size(); ++i) {
    REQUIRE(scenes[i].mask == scenes2[i].mask);
    REQUIRE(scenes[i].intensity.values() == scenes2[i].intensity.values());
  }
}

TEST_CASE("scene bundles round-trip through disk") {
  namespace fs = std::filesystem;
  PhantomConfig cfg;
  PhantomScene scene = generate_scene(321, cfg);
  std::string dir = "phantom_scene_roundtrip";
  save_scene(dir, scene);
  PhantomScene back = load_scene(dir);
  REQUIRE(back.mask == scene.mask);
  REQUIRE(back.intensity.values() == scene.intensity.values());
  REQUIRE(serialize_graph(back.truth).dump() == serialize_graph(scene.truth).dump());
  REQUIRE(back.true_path == scene.true_path);
  REQUIRE(back.source == scene.source);
  REQUIRE(back.target == scene.target);
  REQUIRE(back.crossings.size() == scene.crossings.size());
  fs::remove_all(dir);
}

TEST_CASE("extraction recovers the planted topology on most scenes") {
  PhantomConfig cfg;
  PipelineConfig pipe_cfg;
  auto [scenes, manifest] = generate_suite(2024, 20, cfg);
  int matched = 0;
  for (const PhantomScene& scene : scenes) {
    ExtractedGraph ex = extract_graph(scene.mask, pipe_cfg);
    if (match_graphs(scene.truth, ex.graph)) ++matched;
  }
  REQUIRE(matched >= 19);  // >= 95%
}

TEST_CASE("unsatisfiable geometry raises a generation error naming the constraint") {
  PhantomConfig cfg;
  cfg.size = 128;
  cfg.n_crossings = 12;  // cannot thread 10 extra transversals into 128 px
  REQUIRE_THROWS_AS(generate_scene(5, cfg), GenerationError);
  try {
    generate_scene(5, cfg);
  } catch (const GenerationError& e) {
    REQUIRE(std::string(e.what()).find("constraint") != std::string::npos);
  }
  REQUIRE_THROWS_AS(generate_scene(1, [] {
                      PhantomConfig c;
                      c.size = 100;
                      return c;
                    }()),
                    InvalidParameter);
}
