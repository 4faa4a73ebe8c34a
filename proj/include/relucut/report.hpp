#pragma once

#include <fstream>
#include <mutex>
#include <thread>

#include "relucut/bab.hpp"
#include "relucut/instance_gen.hpp"
#include "relucut/json_io.hpp"

namespace relucut {

/// CLI-level configuration; defaults mirror the reference experiment
/// settings (timeout 200 s, 20 ascent iterations at 0.1/0.02 with 0.98
/// decay, drop 0.5, presolve 5/50/400).
struct RunConfig {
  std::string mode = "auto";  // plain | biccos-base | biccos-mts | auto
  double timeout_s = 200.0;
  int batch_size = 64;
  double drop_percentage = 0.5;
  bool strengthen_recursive = false;
  int strengthen_iteration_cap = 40;
  int presolve_iters = 5;
  int presolve_pick = 50;
  int presolve_gen = 400;
  int presolve_trees = 4;
  int opt_iters = 20;
  double lr_alpha = 0.1;
  double lr_beta = 0.02;
  double lr_decay = 0.98;
  long pool_cap = 1000;
  std::uint64_t seed = 0;
  int workers = 1;
  int auto_mts_threshold = 64;
  std::string queue_order = "bfs";

  void validate() const {
    auto bad = [](const std::string& m) { return std::invalid_argument(m); };
    if (mode != "plain" && mode != "biccos-base" && mode != "biccos-mts" && mode != "auto")
      throw bad("mode must be plain, biccos-base, biccos-mts or auto");
    if (timeout_s < 0) throw bad("timeout must be nonnegative");
    if (batch_size < 1) throw bad("batch size must be positive");
    if (drop_percentage < 0.0 || drop_percentage >= 1.0) throw bad("drop percentage must lie in [0,1)");
    if (opt_iters < 0) throw bad("optimizer iterations must be nonnegative");
    if (lr_alpha <= 0 || lr_beta <= 0 || lr_decay <= 0 || lr_decay > 1)
      throw bad("learning rates must be positive and decay in (0,1]");
    if (pool_cap < 1) throw bad("pool cap must be positive");
    if (workers < 1) throw bad("workers must be positive");
    if (presolve_iters < 0 || presolve_pick < 1 || presolve_gen < 2 || presolve_trees < 1)
      throw bad("presolve parameters out of range");
    if (queue_order != "bfs" && queue_order != "dfs") throw bad("queue order must be bfs or dfs");
  }
};

inline std::string resolve_mode(const RunConfig& cfg, int unstable_count) {
  if (cfg.mode != "auto") return cfg.mode;
  return unstable_count > cfg.auto_mts_threshold ? "biccos-mts" : "biccos-base";
}

inline BabConfig to_bab_config(const RunConfig& cfg, const std::string& resolved_mode) {
  BabConfig b;
  b.mode = resolved_mode == "plain" ? Mode::plain
           : resolved_mode == "biccos-mts" ? Mode::cuts_mts
                                           : Mode::cuts;
  b.timeout_s = cfg.timeout_s;
  b.batch_size = cfg.batch_size;
  b.optimizer.iterations = cfg.opt_iters;
  b.optimizer.lr_alpha = cfg.lr_alpha;
  b.optimizer.lr_beta = cfg.lr_beta;
  b.optimizer.lr_decay = cfg.lr_decay;
  b.strengthen.drop_percentage = cfg.drop_percentage;
  b.strengthen.recursive = cfg.strengthen_recursive;
  b.strengthen_iteration_cap = cfg.strengthen_iteration_cap;
  b.presolve_iterations = cfg.presolve_iters;
  b.presolve_pick = cfg.presolve_pick;
  b.presolve_gen = cfg.presolve_gen;
  b.presolve_trees = cfg.presolve_trees;
  b.pool_cap = static_cast<size_t>(cfg.pool_cap);
  b.workers = cfg.workers;
  b.queue_order = cfg.queue_order == "dfs" ? QueueOrder::dfs : QueueOrder::bfs;
  b.seed = cfg.seed;
  return b;
}

struct VerifyRun {
  VerdictReport verdict;
  SearchStats stats;
  CutPool pool;
  std::string resolved_mode;
  json report;
  int exit_code = 0;
};

inline json run_report_json(const std::string& network_path, const std::string& spec_path,
                            const std::string& mode, const VerdictReport& v,
                            const SearchStats& s, std::uint64_t seed) {
  json r;
  r["network"] = network_path;
  r["spec"] = spec_path;
  r["mode"] = mode;
  r["seed"] = seed;
  r["status"] = status_name(v.status);
  r["bound"] = std::isfinite(v.bound) ? json(v.bound) : json(nullptr);
  r["domains_visited"] = s.domains_visited;
  r["cuts_generated"] = s.cuts_generated;
  r["strengthen_attempts"] = s.strengthen_attempts;
  r["strengthen_successes"] = s.strengthen_successes;
  r["time_s"] = s.wall_time_s;
  if (v.witness) {
    json w = json::array();
    for (Eigen::Index i = 0; i < v.witness->size(); ++i) w.push_back((*v.witness)(i));
    r["witness"] = std::move(w);
  } else {
    r["witness"] = nullptr;
  }
  return r;
}

inline json cut_pool_json(const CutPool& pool) {
  json out = json::array();
  for (size_t i = 0; i < pool.size(); ++i) {
    const Cut& c = pool.at(i);
    json pos = json::array(), neg = json::array();
    for (int id : c.pos) pos.push_back(id);
    for (int id : c.neg) neg.push_back(id);
    const char* prov = c.provenance == Cut::Provenance::inferred ? "inferred"
                       : c.provenance == Cut::Provenance::strengthened ? "strengthened"
                                                                       : "merged";
    out.push_back(json{
        {"pos", std::move(pos)}, {"neg", std::move(neg)}, {"rhs", c.rhs}, {"provenance", prov}});
  }
  return out;
}

/// Verifies one instance end to end. Exit codes: 0 UNSAT, 1 unknown,
/// 2 falsified-candidate.
inline VerifyRun run_verify(const std::string& network_path, const std::string& spec_path,
                            const RunConfig& cfg, std::ostream* stats_stream = nullptr) {
  cfg.validate();
  auto [net, in, prop] = load_instance(network_path, spec_path);
  const ReluNetwork canon = canonicalize(net, prop);
  const PreActBounds bounds = compute_preact_bounds(canon, in);
  const std::string mode = resolve_mode(cfg, bounds.count_unstable());
  BabConfig bab_cfg = to_bab_config(cfg, mode);
  bab_cfg.stats_stream = stats_stream;
  BabResult res = bab_verify(canon, in, bab_cfg);

  VerifyRun run{std::move(res.verdict), res.stats, std::move(res.pool), mode, {}, 0};
  run.report = run_report_json(network_path, spec_path, mode, run.verdict, run.stats, cfg.seed);
  run.exit_code = run.verdict.status == Status::unsat ? 0
                  : run.verdict.status == Status::unknown ? 1
                                                          : 2;
  return run;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Runs every (instance, mode) pair of a manifest. Failures become error
/// rows and the suite keeps going. Aggregates are recomputable from rows.
inline json run_suite(const json& manifest, RunConfig base_cfg, int jobs = 1) {
  if (manifest.contains("config")) {
    const json& c = manifest["config"];
    if (c.contains("timeout_s")) base_cfg.timeout_s = c["timeout_s"].get<double>();
    if (c.contains("seed")) base_cfg.seed = c["seed"].get<std::uint64_t>();
    if (c.contains("batch_size")) base_cfg.batch_size = c["batch_size"].get<int>();
    if (c.contains("opt_iters")) base_cfg.opt_iters = c["opt_iters"].get<int>();
    if (c.contains("drop_percentage")) base_cfg.drop_percentage = c["drop_percentage"].get<double>();
  }
  std::vector<std::string> modes;
  if (manifest.contains("modes"))
    for (const auto& m : manifest["modes"]) modes.push_back(m.get<std::string>());
  if (modes.empty()) modes.push_back(base_cfg.mode);

  struct Task {
    std::string name, network, spec, mode;
  };
  std::vector<Task> tasks;
  if (manifest.contains("instances"))
    for (const auto& inst : manifest["instances"])
      for (const std::string& mode : modes)
        tasks.push_back({inst.value("name", inst["network"].get<std::string>()),
                         inst["network"].get<std::string>(), inst["spec"].get<std::string>(), mode});

  std::vector<json> rows(tasks.size());
  auto work = [&](int from) {
    for (size_t t = from; t < tasks.size(); t += std::max(1, jobs)) {
      RunConfig cfg = base_cfg;
      cfg.mode = tasks[t].mode;
      try {
        VerifyRun run = run_verify(tasks[t].network, tasks[t].spec, cfg);
        rows[t] = run.report;
        rows[t]["instance"] = tasks[t].name;
      } catch (const std::exception& e) {
        rows[t] = json{{"instance", tasks[t].name}, {"mode", tasks[t].mode}, {"error", e.what()}};
      }
    }
  };
  if (jobs <= 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < jobs; ++w) threads.emplace_back(work, w);
    for (auto& th : threads) th.join();
  }

  json report;
  report["rows"] = json::array();
  for (auto& r : rows) report["rows"].push_back(std::move(r));

  json aggregates;
  for (const std::string& mode : modes) {
    long verified = 0, n = 0;
    double time_sum = 0.0;
    std::vector<double> domains;
    for (const auto& r : report["rows"]) {
      if (r.value("mode", "") != mode || r.contains("error")) continue;
      ++n;
      if (r["status"] == "UNSAT") ++verified;
      time_sum += r["time_s"].get<double>();
      domains.push_back(r["domains_visited"].get<double>());
    }
    aggregates[mode] = json{{"instances", n},
                            {"verified_count", verified},
                            {"mean_time_s", n ? time_sum / n : 0.0},
                            {"median_domains", median(domains)}};
  }
  report["aggregates"] = std::move(aggregates);

  // Paired per-instance comparison across modes.
  json paired = json::array();
  if (manifest.contains("instances"))
    for (const auto& inst : manifest["instances"]) {
      const std::string name = inst.value("name", inst["network"].get<std::string>());
      json entry{{"instance", name}};
      for (const auto& r : report["rows"]) {
        if (r.value("instance", "") != name || r.contains("error")) continue;
        entry[r["mode"].get<std::string>()] = json{{"status", r["status"]},
                                                   {"domains_visited", r["domains_visited"]},
                                                   {"cuts_generated", r["cuts_generated"]}};
      }
      paired.push_back(std::move(entry));
    }
  report["paired"] = std::move(paired);
  return report;
}

}  // namespace relucut
