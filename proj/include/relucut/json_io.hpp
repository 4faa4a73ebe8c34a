#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <tuple>

#include <json.hpp>

#include "relucut/model.hpp"

namespace relucut {

using nlohmann::json;

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string line_of_offset(const std::string& text, size_t byte) {
  size_t line = 1, col = 1;
  for (size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline json parse_document(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": parse error at " + line_of_offset(text, e.byte) + ": " + e.what());
  } catch (const json::exception& e) {
    throw ParseError(path + ": parse error: " + e.what());
  }
}

inline double to_finite_double(const json& v, const std::string& where) {
  if (!v.is_number()) throw ParseError(where + ": expected a number");
  double d = v.get<double>();
  if (!std::isfinite(d)) throw ParseError(where + ": non-finite value");
  return d;
}

inline Vec to_vector(const json& v, const std::string& where) {
  if (!v.is_array()) throw ParseError(where + ": expected an array");
  Vec out(v.size());
  for (size_t i = 0; i < v.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = to_finite_double(v[i], where + "[" + std::to_string(i) + "]");
  return out;
}

}  // namespace detail

/// Network file: {"layers": [{"weights": [[...]], "bias": [...]}, ...]}
inline ReluNetwork load_network(const std::string& path) {
  json doc = detail::parse_document(path);
  if (!doc.is_object() || !doc.contains("layers") || !doc["layers"].is_array() ||
      doc["layers"].empty())
    throw ParseError(path + ": expected an object with a nonempty \"layers\" array");
  std::vector<Layer> layers;
  for (size_t li = 0; li < doc["layers"].size(); ++li) {
    const json& jl = doc["layers"][li];
    const std::string where = path + ": layers[" + std::to_string(li) + "]";
    if (!jl.is_object() || !jl.contains("weights") || !jl.contains("bias"))
      throw ParseError(where + ": expected {\"weights\", \"bias\"}");
    const json& jw = jl["weights"];
    if (!jw.is_array() || jw.empty()) throw ParseError(where + ".weights: expected a nonempty array of rows");
    const size_t rows = jw.size();
    size_t cols = 0;
    Mat W;
    for (size_t r = 0; r < rows; ++r) {
      Vec row = detail::to_vector(jw[r], where + ".weights[" + std::to_string(r) + "]");
      if (r == 0) {
        cols = static_cast<size_t>(row.size());
        if (cols == 0) throw ParseError(where + ".weights: empty row");
        W.resize(rows, cols);
      } else if (static_cast<size_t>(row.size()) != cols) {
        throw ParseError(where + ".weights[" + std::to_string(r) + "]: ragged row (expected " +
                         std::to_string(cols) + " entries)");
      }
      W.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    Vec b = detail::to_vector(jl["bias"], where + ".bias");
    layers.push_back(Layer{std::move(W), std::move(b)});
  }
  return ReluNetwork(std::move(layers));
}

/// Spec file: {"x0": [...], "eps": r, "c": [...], "c0": r}
inline std::pair<InputSpec, PropertySpec> load_spec(const std::string& path) {
  json doc = detail::parse_document(path);
  for (const char* key : {"x0", "eps", "c", "c0"})
    if (!doc.is_object() || !doc.contains(key))
      throw ParseError(path + ": missing field \"" + std::string(key) + "\"");
  InputSpec in;
  in.center = detail::to_vector(doc["x0"], path + ": x0");
  in.radius = detail::to_finite_double(doc["eps"], path + ": eps");
  if (in.radius < 0) throw ParseError(path + ": eps must be nonnegative");
  PropertySpec prop;
  prop.c = detail::to_vector(doc["c"], path + ": c");
  prop.c0 = detail::to_finite_double(doc["c0"], path + ": c0");
  return {std::move(in), std::move(prop)};
}

/// Loads and cross-validates a full instance.
inline std::tuple<ReluNetwork, InputSpec, PropertySpec> load_instance(
    const std::string& network_path, const std::string& spec_path) {
  ReluNetwork net = load_network(network_path);
  auto [in, prop] = load_spec(spec_path);
  in.validate(net);
  prop.validate(net);
  return {std::move(net), std::move(in), std::move(prop)};
}

inline json network_to_json(const ReluNetwork& net) {
  json layers = json::array();
  for (int i = 1; i <= net.layer_count(); ++i) {
    const Layer& l = net.layer(i);
    json rows = json::array();
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) row.push_back(l.weights(r, c));
      rows.push_back(std::move(row));
    }
    json bias = json::array();
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) bias.push_back(l.bias(r));
    layers.push_back(json{{"weights", std::move(rows)}, {"bias", std::move(bias)}});
  }
  return json{{"layers", std::move(layers)}};
}

inline json spec_to_json(const InputSpec& in, const PropertySpec& prop) {
  json x0 = json::array(), c = json::array();
  for (Eigen::Index i = 0; i < in.center.size(); ++i) x0.push_back(in.center(i));
  for (Eigen::Index i = 0; i < prop.c.size(); ++i) c.push_back(prop.c(i));
  return json{{"x0", std::move(x0)}, {"eps", in.radius}, {"c", std::move(c)}, {"c0", prop.c0}};
}

inline void write_json_file(const std::string& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path);
  out << doc.dump(2) << "\n";
}

}  // namespace relucut
