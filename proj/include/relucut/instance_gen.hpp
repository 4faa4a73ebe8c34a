#pragma once

#include <filesystem>

#include "relucut/json_io.hpp"
#include "relucut/milp.hpp"
#include "relucut/rng.hpp"

namespace relucut {

/// Dense random network with symmetric weights scaled by fan-in.
inline ReluNetwork random_network(const std::vector<int>& shape, Rng& rng) {
  if (shape.size() < 2) throw std::invalid_argument("shape needs at least input and output widths");
  std::vector<Layer> layers;
  for (size_t i = 1; i < shape.size(); ++i) {
    const int rows = shape[i], cols = shape[i - 1];
    const double scale = 2.0 / std::sqrt(static_cast<double>(cols));
    Layer l;
    l.weights.resize(rows, cols);
    l.bias.resize(rows);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) l.weights(r, c) = rng.uniform(-scale, scale);
      l.bias(r) = rng.uniform(-0.2, 0.2);
    }
    layers.push_back(std::move(l));
  }
  return ReluNetwork(std::move(layers));
}

struct GenConfig {
  std::uint64_t seed = 11;
  int count = 50;
  std::vector<int> shape = {3, 16, 16, 1};
  double margin_lo = 1.5e-3;
  double margin_hi = 3e-2;
  double unstable_frac_lo = 0.30;
  double unstable_frac_hi = 0.60;
  int max_unstable = 12;
  std::string out_dir;
  std::string prefix = "inst";
};

struct GeneratedInstance {
  ReluNetwork net;
  InputSpec input;
  PropertySpec prop;
  bool unsat_label = false;  // calibrated verdict
  double exact_value = 0.0;  // exact minimum of the calibrated instance
  int unstable = 0;
};

/// Draws networks until the pre-activation instability lands in the target
/// window, then calibrates c0 from the exact minimum so the instance has the
/// requested margin on the requested side of zero. Fully deterministic in
/// the seed.
inline std::vector<GeneratedInstance> generate_instances(const GenConfig& cfg) {
  if (cfg.shape.back() != 1 && cfg.shape.back() != 2)
    throw std::invalid_argument("generator supports 1 or 2 output neurons");
  if (cfg.max_unstable > kEnumerationCap)
    throw std::invalid_argument("calibration requires at most " +
                                std::to_string(kEnumerationCap) + " unstable neurons");
  Rng rng(cfg.seed);
  std::vector<GeneratedInstance> out;
  const double eps_ladder[] = {0.05, 0.08, 0.12, 0.18, 0.27, 0.4, 0.6};
  int hidden_total = 0;
  for (size_t i = 1; i + 1 < cfg.shape.size(); ++i) hidden_total += cfg.shape[i];

  while (static_cast<int>(out.size()) < cfg.count) {
    ReluNetwork net = random_network(cfg.shape, rng);
    InputSpec in;
    in.center.resize(cfg.shape.front());
    for (Eigen::Index j = 0; j < in.center.size(); ++j) in.center(j) = rng.uniform(-0.3, 0.3);

    PropertySpec prop;
    prop.c = cfg.shape.back() == 1 ? Vec::Constant(1, 1.0) : (Vec(2) << 1.0, -1.0).finished();
    prop.c0 = 0.0;
    const ReluNetwork canon = canonicalize(net, prop);

    int unstable = -1;
    for (double eps : eps_ladder) {
      in.radius = eps;
      PreActBounds b = compute_preact_bounds(canon, in);
      const int u = b.count_unstable();
      const double frac = static_cast<double>(u) / hidden_total;
      if (frac >= cfg.unstable_frac_lo && frac <= cfg.unstable_frac_hi && u <= cfg.max_unstable) {
        unstable = u;
        break;
      }
    }
    if (unstable <= 0) continue;  // draw again

    const PreActBounds bounds = compute_preact_bounds(canon, in);
    const ExactMin base = exact_min(canon, in, bounds);
    const double margin =
        cfg.margin_lo * std::pow(cfg.margin_hi / cfg.margin_lo, rng.uniform());
    const bool unsat = out.size() % 2 == 0;
    prop.c0 = unsat ? -base.value + margin : -base.value - margin;

    GeneratedInstance inst{std::move(net), in, prop, unsat, unsat ? margin : -margin, unstable};
    out.push_back(std::move(inst));
  }
  return out;
}

/// Writes instance file pairs plus a manifest usable by the suite runner.
inline json gen_instances(const GenConfig& cfg) {
  if (cfg.out_dir.empty()) throw std::invalid_argument("gen_instances needs an output directory");
  std::filesystem::create_directories(cfg.out_dir);
  const std::vector<GeneratedInstance> instances = generate_instances(cfg);
  json manifest;
  manifest["instances"] = json::array();
  for (size_t k = 0; k < instances.size(); ++k) {
    const GeneratedInstance& inst = instances[k];
    const std::string name = cfg.prefix + "_" + std::to_string(k);
    const std::string net_path = (std::filesystem::path(cfg.out_dir) / (name + "_net.json")).string();
    const std::string spec_path = (std::filesystem::path(cfg.out_dir) / (name + "_spec.json")).string();
    write_json_file(net_path, network_to_json(inst.net));
    write_json_file(spec_path, spec_to_json(inst.input, inst.prop));
    manifest["instances"].push_back(json{{"name", name},
                                         {"network", net_path},
                                         {"spec", spec_path},
                                         {"label", inst.unsat_label ? "UNSAT" : "falsifiable"},
                                         {"exact_min", inst.exact_value},
                                         {"unstable", inst.unstable}});
  }
  manifest["seed"] = cfg.seed;
  json shape = json::array();
  for (int d : cfg.shape) shape.push_back(d);
  manifest["shape"] = std::move(shape);
  return manifest;
}

}  // namespace relucut
