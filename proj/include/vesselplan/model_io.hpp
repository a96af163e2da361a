#pragma once

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "vesselplan/gat.hpp"

namespace vplan {

inline constexpr int kModelSchemaVersion = 1;

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const char* field) {
  if (!j.is_array() || j.empty())
    throw ParseError(std::string("model file: '") + field + "' must be a non-empty array");
  const size_t cols = j[0].size();
  Eigen::MatrixXd m(j.size(), cols);
  for (size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw ParseError(std::string("model file: ragged rows in '") + field + "'");
    for (size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

}  // namespace detail

inline nlohmann::json serialize_model(const GatModel& model) {
  model.validate();
  nlohmann::json j;
  j["format"] = "vesselplan-gat";
  j["schema_version"] = kModelSchemaVersion;
  j["leaky_relu_slope"] = model.leaky_slope;
  nlohmann::json layers = nlohmann::json::array();
  for (const GatLayer& layer : model.layers) {
    nlohmann::json jl;
    jl["combine"] = layer.combine == HeadCombine::concat ? "concat" : "average";
    jl["in_dim"] = layer.in_dim();
    jl["head_dim"] = layer.head_dim();
    nlohmann::json heads = nlohmann::json::array();
    for (const GatHead& h : layer.heads) {
      nlohmann::json jh;
      jh["W"] = detail::matrix_to_json(h.W);
      nlohmann::json a = nlohmann::json::array();
      for (Eigen::Index i = 0; i < h.a.size(); ++i) a.push_back(h.a[i]);
      jh["a"] = std::move(a);
      heads.push_back(std::move(jh));
    }
    jl["heads"] = std::move(heads);
    layers.push_back(std::move(jl));
  }
  j["layers"] = std::move(layers);
  j["edge_scorer"] = {{"W", detail::matrix_to_json(model.edge_w)}, {"b", model.edge_b}};
  return j;
}

inline GatModel deserialize_model(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != "vesselplan-gat")
    throw ParseError("model file: unrecognized format tag");
  if (j.value("schema_version", -1) != kModelSchemaVersion)
    throw ParseError("model file: unsupported schema_version");
  GatModel model;
  model.leaky_slope = j.value("leaky_relu_slope", 0.2);
  if (!j.contains("layers")) throw ParseError("model file: missing 'layers'");
  for (const auto& jl : j.at("layers")) {
    GatLayer layer;
    std::string combine = jl.value("combine", std::string{});
    if (combine == "concat") layer.combine = HeadCombine::concat;
    else if (combine == "average") layer.combine = HeadCombine::average;
    else throw ParseError("model file: layer combine must be 'concat' or 'average'");
    if (!jl.contains("heads") || jl.at("heads").empty())
      throw ParseError("model file: layer without heads");
    for (const auto& jh : jl.at("heads")) {
      GatHead head;
      if (!jh.contains("W") || !jh.contains("a"))
        throw ParseError("model file: head missing 'W' or 'a'");
      head.W = detail::matrix_from_json(jh.at("W"), "W");
      auto av = jh.at("a").get<std::vector<double>>();
      head.a = Eigen::Map<Eigen::VectorXd>(av.data(), static_cast<Eigen::Index>(av.size()));
      layer.heads.push_back(std::move(head));
    }
    int declared_in = jl.value("in_dim", -1);
    int declared_head = jl.value("head_dim", -1);
    if (declared_in != layer.in_dim() || declared_head != layer.head_dim())
      throw ParseError("model file: declared layer dims do not match parameter shapes");
    model.layers.push_back(std::move(layer));
  }
  if (!j.contains("edge_scorer")) throw ParseError("model file: missing 'edge_scorer'");
  model.edge_w = detail::matrix_from_json(j.at("edge_scorer").at("W"), "edge_scorer.W");
  model.edge_b = j.at("edge_scorer").value("b", 0.0);
  try {
    model.validate();
  } catch (const IntegrityError& e) {
    throw ParseError(std::string("model file: ") + e.what());
  }
  return model;
}

inline void save_model(const std::string& path, const GatModel& model) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open file for writing: " + path);
  out << serialize_model(model).dump(2) << "\n";
}

inline GatModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("model file '" + path + "': " + e.what());
  }
  return deserialize_model(j);
}

}  // namespace vplan
