#pragma once

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "vesselplan/graph.hpp"

namespace vplan {

inline constexpr int kGraphSchemaVersion = 1;

namespace detail {

inline const char* node_kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::endpoint: return "endpoint";
    case NodeKind::bifurcation: return "bifurcation";
    case NodeKind::anchor: return "anchor";
  }
  return "endpoint";
}

inline NodeKind node_kind_from(const std::string& s) {
  if (s == "endpoint") return NodeKind::endpoint;
  if (s == "bifurcation") return NodeKind::bifurcation;
  if (s == "anchor") return NodeKind::anchor;
  throw ParseError("graph document: unknown node kind '" + s + "'");
}

template <typename T>
T require(const nlohmann::json& j, const char* field) {
  if (!j.contains(field))
    throw ParseError(std::string("graph document: missing required field '") + field + "'");
  try {
    return j.at(field).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("graph document: invalid field '") + field + "': " + e.what());
  }
}

inline nlohmann::json pixels_to_json(const std::vector<Pixel>& pixels) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Pixel& p : pixels) arr.push_back({p.r, p.c});
  return arr;
}

inline std::vector<Pixel> pixels_from_json(const nlohmann::json& arr, const char* field) {
  if (!arr.is_array()) throw ParseError(std::string("graph document: '") + field + "' must be an array");
  std::vector<Pixel> out;
  out.reserve(arr.size());
  for (const auto& item : arr) {
    if (!item.is_array() || item.size() != 2)
      throw ParseError(std::string("graph document: '") + field + "' entries must be [r,c]");
    out.push_back({item[0].get<int>(), item[1].get<int>()});
  }
  return out;
}

}  // namespace detail

inline nlohmann::json serialize_graph(const VesselGraph& g) {
  nlohmann::json j;
  j["schema_version"] = kGraphSchemaVersion;
  j["width"] = g.width;
  j["height"] = g.height;
  j["spacing"] = {{"sx", g.spacing.sx}, {"sy", g.spacing.sy}};
  j["provenance"] = g.provenance;

  nlohmann::json nodes = nlohmann::json::array();
  for (const KeyNode& n : g.nodes) {
    nlohmann::json jn;
    jn["id"] = n.id;
    jn["kind"] = detail::node_kind_name(n.kind);
    jn["position"] = {n.position.r, n.position.c};
    jn["degree"] = n.degree;
    jn["pixels"] = detail::pixels_to_json(n.pixels);
    nodes.push_back(std::move(jn));
  }
  j["nodes"] = std::move(nodes);

  nlohmann::json edges = nlohmann::json::array();
  for (const VesselEdge& e : g.edges) {
    nlohmann::json je;
    je["id"] = e.id;
    je["nodes"] = {e.node_a, e.node_b};
    je["chain"] = detail::pixels_to_json(e.chain);
    if (e.geometry) {
      je["geometry"] = {{"turning_angle", e.geometry->turning_angle},
                        {"arc_length", e.geometry->arc_length},
                        {"diameter", e.geometry->diameter}};
    }
    if (e.probability) je["probability"] = *e.probability;
    if (e.label)
      je["label"] = *e.label == EdgeLabel::traversable ? "traversable" : "non_traversable";
    edges.push_back(std::move(je));
  }
  j["edges"] = std::move(edges);
  return j;
}

inline VesselGraph deserialize_graph(const nlohmann::json& j) {
  using detail::require;
  int version = require<int>(j, "schema_version");
  if (version != kGraphSchemaVersion)
    throw ParseError("graph document: unsupported schema_version " + std::to_string(version));

  VesselGraph g;
  g.width = require<int>(j, "width");
  g.height = require<int>(j, "height");
  if (!j.contains("spacing")) throw ParseError("graph document: missing required field 'spacing'");
  g.spacing.sx = require<double>(j.at("spacing"), "sx");
  g.spacing.sy = require<double>(j.at("spacing"), "sy");
  g.provenance = j.value("provenance", std::string{});

  if (!j.contains("nodes")) throw ParseError("graph document: missing required field 'nodes'");
  for (const auto& jn : j.at("nodes")) {
    KeyNode n;
    n.id = require<int>(jn, "id");
    n.kind = detail::node_kind_from(require<std::string>(jn, "kind"));
    if (!jn.contains("position")) throw ParseError("graph document: missing required field 'position'");
    const auto& jp = jn.at("position");
    if (!jp.is_array() || jp.size() != 2) throw ParseError("graph document: 'position' must be [r,c]");
    n.position = {jp[0].get<int>(), jp[1].get<int>()};
    n.degree = require<int>(jn, "degree");
    n.pixels = detail::pixels_from_json(require<nlohmann::json>(jn, "pixels"), "pixels");
    g.nodes.push_back(std::move(n));
  }
  for (size_t i = 0; i < g.nodes.size(); ++i)
    if (g.nodes[i].id != static_cast<int>(i))
      throw ParseError("graph document: node ids must be dense and ordered");

  if (!j.contains("edges")) throw ParseError("graph document: missing required field 'edges'");
  for (const auto& je : j.at("edges")) {
    VesselEdge e;
    e.id = require<int>(je, "id");
    auto ends = require<std::vector<int>>(je, "nodes");
    if (ends.size() != 2) throw ParseError("graph document: edge 'nodes' must have 2 entries");
    e.node_a = ends[0];
    e.node_b = ends[1];
    if (e.node_a < 0 || e.node_b < 0 || e.node_a >= static_cast<int>(g.nodes.size()) ||
        e.node_b >= static_cast<int>(g.nodes.size()))
      throw ParseError("graph document: edge endpoint out of range");
    e.chain = detail::pixels_from_json(require<nlohmann::json>(je, "chain"), "chain");
    if (je.contains("geometry")) {
      const auto& jg = je.at("geometry");
      e.geometry = EdgeGeometry{require<double>(jg, "turning_angle"),
                                require<double>(jg, "arc_length"),
                                require<double>(jg, "diameter")};
    }
    if (je.contains("probability")) e.probability = je.at("probability").get<double>();
    if (je.contains("label")) {
      std::string s = je.at("label").get<std::string>();
      if (s == "traversable") e.label = EdgeLabel::traversable;
      else if (s == "non_traversable") e.label = EdgeLabel::non_traversable;
      else throw ParseError("graph document: unknown edge label '" + s + "'");
    }
    g.edges.push_back(std::move(e));
  }
  for (size_t i = 0; i < g.edges.size(); ++i)
    if (g.edges[i].id != static_cast<int>(i))
      throw ParseError("graph document: edge ids must be dense and ordered");

  g.rebuild_index();
  return g;
}

inline void save_graph(const std::string& path, const VesselGraph& g) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open file for writing: " + path);
  out << serialize_graph(g).dump(2) << "\n";
}

inline VesselGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("graph document '" + path + "': " + e.what());
  }
  return deserialize_graph(j);
}

}  // namespace vplan
