#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "vesselplan/graph.hpp"
#include "vesselplan/graph_io.hpp"
#include "vesselplan/skeleton.hpp"

using namespace vplan;

namespace {

Skeleton straight_chain(int len) {
  Skeleton s(len + 20, 21);
  for (int i = 0; i < len; ++i) s.add({10, 10 + i});
  return s;
}

Skeleton make_y(int west_len, int ne_len, int se_len) {
  Skeleton s(160, 160);
  s.add({80, 80});
  for (int i = 1; i <= west_len; ++i) s.add({80, 80 - i});
  for (int i = 1; i <= ne_len; ++i) s.add({80 - i, 80 + i});
  for (int i = 1; i <= se_len; ++i) s.add({80 + i, 80 + i});
  return s;
}

// Four diagonal arms through one center pixel.
Skeleton make_x(int arm) {
  Skeleton s(160, 160);
  s.add({80, 80});
  for (int i = 1; i <= arm; ++i) {
    s.add({80 - i, 80 - i});
    s.add({80 - i, 80 + i});
    s.add({80 + i, 80 - i});
    s.add({80 + i, 80 + i});
  }
  return s;
}

// Diamond ring |dr| + |dc| == radius: every pixel has exactly two neighbors.
Skeleton make_ring(int radius) {
  Skeleton s(100, 100);
  for (int dr = -radius; dr <= radius; ++dr) {
    int dc = radius - std::abs(dr);
    s.add({50 + dr, 50 + dc});
    if (dc != 0) s.add({50 + dr, 50 - dc});
  }
  return s;
}

}  // namespace

TEST_CASE("detect_key_nodes on chains, Ys and Xs") {
  auto chain_nodes = detect_key_nodes(straight_chain(30));
  REQUIRE(chain_nodes.size() == 2);
  for (const KeyNode& n : chain_nodes) REQUIRE(n.kind == NodeKind::endpoint);

  auto y_nodes = detect_key_nodes(make_y(40, 40, 40));
  int endpoints = 0, bifurcations = 0;
  for (const KeyNode& n : y_nodes) {
    if (n.kind == NodeKind::endpoint) ++endpoints;
    if (n.kind == NodeKind::bifurcation) ++bifurcations;
  }
  REQUIRE(endpoints == 3);
  REQUIRE(bifurcations == 1);

  auto x_nodes = detect_key_nodes(make_x(40));
  endpoints = 0;
  bifurcations = 0;
  for (const KeyNode& n : x_nodes) {
    if (n.kind == NodeKind::endpoint) ++endpoints;
    if (n.kind == NodeKind::bifurcation) ++bifurcations;
  }
  REQUIRE(endpoints == 4);
  REQUIRE(bifurcations == 1);

  REQUIRE(detect_key_nodes(Skeleton(10, 10)).empty());
}

TEST_CASE("trace_edges builds the expected topology") {
  Skeleton y = make_y(40, 40, 40);
  VesselGraph g = trace_edges(y, detect_key_nodes(y));
  REQUIRE(g.nodes.size() == 4);
  REQUIRE(g.edges.size() == 3);
  for (const KeyNode& n : g.nodes) {
    if (n.kind == NodeKind::bifurcation) REQUIRE(n.degree == 3);
    else REQUIRE(n.degree == 1);
  }

  Skeleton x = make_x(40);
  VesselGraph gx = trace_edges(x, detect_key_nodes(x));
  REQUIRE(gx.nodes.size() == 5);
  REQUIRE(gx.edges.size() == 4);
  int deg4 = 0;
  for (const KeyNode& n : gx.nodes) deg4 += (n.degree == 4);
  REQUIRE(deg4 == 1);
}

TEST_CASE("trace_edges synthesizes an anchor for pure cycles") {
  Skeleton ring = make_ring(8);
  VesselGraph g = trace_edges(ring, detect_key_nodes(ring));
  REQUIRE(g.nodes.size() == 1);
  REQUIRE(g.nodes[0].kind == NodeKind::anchor);
  REQUIRE(g.edges.size() == 1);
  REQUIRE(g.edges[0].node_a == g.edges[0].node_b);
  REQUIRE_FALSE(g.warnings.empty());
  // Partition: anchor pixel + chain pixels cover the ring.
  REQUIRE(g.edges[0].chain.size() + 1 == ring.size());
}

TEST_CASE("trace_edges rejects inconsistent node lists") {
  Skeleton y = make_y(20, 20, 20);
  Skeleton other = make_y(10, 10, 10);
  auto wrong_nodes = detect_key_nodes(other);
  REQUIRE_THROWS_AS(trace_edges(y, wrong_nodes), IntegrityError);
}

TEST_CASE("graph construction partitions the skeleton and keeps degrees consistent") {
  Rng rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    BinaryMask m = oracle::random_mask(rng, 48);
    Skeleton s = prune_spurs(skeletonize(m), 4.0);
    VesselGraph g = trace_edges(s, detect_key_nodes(s));

    size_t node_px = 0, chain_px = 0;
    for (const KeyNode& n : g.nodes) node_px += n.pixels.size();
    for (const VesselEdge& e : g.edges) chain_px += e.chain.size();
    REQUIRE(node_px + chain_px == s.size());

    std::vector<int> degree(g.nodes.size(), 0);
    for (const VesselEdge& e : g.edges) {
      degree[e.node_a] += 1;
      degree[e.node_b] += 1;
    }
    for (const KeyNode& n : g.nodes) REQUIRE(n.degree == degree[n.id]);

    // Chains stay off node pixels and are 8-connected in order.
    std::set<Pixel> node_pixels;
    for (const KeyNode& n : g.nodes) node_pixels.insert(n.pixels.begin(), n.pixels.end());
    for (const VesselEdge& e : g.edges) {
      for (size_t i = 0; i < e.chain.size(); ++i) {
        REQUIRE(node_pixels.count(e.chain[i]) == 0);
        if (i + 1 < e.chain.size()) REQUIRE(adjacent8(e.chain[i], e.chain[i + 1]));
      }
    }
  }
}

TEST_CASE("trace_edges is deterministic") {
  Rng rng(37);
  BinaryMask m = oracle::random_mask(rng, 48);
  Skeleton s = prune_spurs(skeletonize(m), 4.0);
  VesselGraph a = trace_edges(s, detect_key_nodes(s));
  VesselGraph b = trace_edges(s, detect_key_nodes(s));
  REQUIRE(a.nodes.size() == b.nodes.size());
  REQUIRE(a.edges.size() == b.edges.size());
  for (size_t i = 0; i < a.nodes.size(); ++i) {
    REQUIRE(a.nodes[i].position == b.nodes[i].position);
    REQUIRE(a.nodes[i].degree == b.nodes[i].degree);
  }
  for (size_t i = 0; i < a.edges.size(); ++i) {
    REQUIRE(a.edges[i].node_a == b.edges[i].node_a);
    REQUIRE(a.edges[i].node_b == b.edges[i].node_b);
    REQUIRE(a.edges[i].chain == b.edges[i].chain);
  }
}

TEST_CASE("consolidate_crossings merges close junction pairs into one crossing") {
  // Two degree-3 junctions 6 px apart: an X thinned at a shallow angle.
  Skeleton s(200, 200);
  Pixel j1{100, 97}, j2{100, 103};
  for (int c = 98; c <= 102; ++c) s.add({100, c});  // merged middle run
  s.add(j1);
  s.add(j2);
  for (int i = 1; i <= 30; ++i) {
    s.add({100 - i, 97 - i});  // two arms into j1
    s.add({100 + i, 97 - i});
    s.add({100 - i, 103 + i});  // two arms out of j2
    s.add({100 + i, 103 + i});
  }
  VesselGraph g = trace_edges(s, detect_key_nodes(s));
  REQUIRE(g.nodes.size() == 6);

  VesselGraph merged = consolidate_crossings(g, 18.0);
  REQUIRE(merged.nodes.size() == 5);
  int deg4 = 0;
  for (const KeyNode& n : merged.nodes) deg4 += (n.degree == 4);
  REQUIRE(deg4 == 1);

  // Far junctions stay distinct.
  VesselGraph untouched = consolidate_crossings(g, 3.0);
  REQUIRE(untouched.nodes.size() == 6);
}

TEST_CASE("graph serialization round-trips every field") {
  Skeleton y = make_y(25, 25, 25);
  VesselGraph g = trace_edges(y, detect_key_nodes(y));
  g.edges[0].geometry = EdgeGeometry{0.123456789, 42.5e-3, 3.999999999};
  g.edges[0].probability = 0.731058578630004;
  g.edges[0].label = EdgeLabel::traversable;
  g.edges[1].label = EdgeLabel::non_traversable;
  g.provenance = "unit-test";

  nlohmann::json doc = serialize_graph(g);
  VesselGraph back = deserialize_graph(doc);
  REQUIRE(back.nodes.size() == g.nodes.size());
  REQUIRE(back.edges.size() == g.edges.size());
  for (size_t i = 0; i < g.nodes.size(); ++i) {
    REQUIRE(back.nodes[i].position == g.nodes[i].position);
    REQUIRE(back.nodes[i].kind == g.nodes[i].kind);
    REQUIRE(back.nodes[i].degree == g.nodes[i].degree);
    REQUIRE(back.nodes[i].pixels == g.nodes[i].pixels);
  }
  for (size_t i = 0; i < g.edges.size(); ++i) {
    REQUIRE(back.edges[i].node_a == g.edges[i].node_a);
    REQUIRE(back.edges[i].node_b == g.edges[i].node_b);
    REQUIRE(back.edges[i].chain == g.edges[i].chain);
    REQUIRE(back.edges[i].probability == g.edges[i].probability);
    REQUIRE(back.edges[i].label == g.edges[i].label);
    if (g.edges[i].geometry) {
      REQUIRE(back.edges[i].geometry.has_value());
      REQUIRE(back.edges[i].geometry->turning_angle == g.edges[i].geometry->turning_angle);
      REQUIRE(back.edges[i].geometry->arc_length == g.edges[i].geometry->arc_length);
      REQUIRE(back.edges[i].geometry->diameter == g.edges[i].geometry->diameter);
    }
  }
  REQUIRE(back.provenance == g.provenance);

  // Serialized again, the document is byte-identical.
  REQUIRE(serialize_graph(back).dump() == doc.dump());
}

TEST_CASE("deserialize_graph names the missing field") {
  Skeleton y = make_y(10, 10, 10);
  VesselGraph g = trace_edges(y, detect_key_nodes(y));
  nlohmann::json doc = serialize_graph(g);

  nlohmann::json no_nodes = doc;
  no_nodes.erase("nodes");
  REQUIRE_THROWS_WITH(deserialize_graph(no_nodes), Catch::Matchers::ContainsSubstring("nodes"));

  nlohmann::json bad_node = doc;
  bad_node["nodes"][0].erase("position");
  REQUIRE_THROWS_WITH(deserialize_graph(bad_node),
                      Catch::Matchers::ContainsSubstring("position"));

  nlohmann::json bad_version = doc;
  bad_version["schema_version"] = 99;
  REQUIRE_THROWS_AS(deserialize_graph(bad_version), ParseError);
}
