#include <CLI11.hpp>

#include <iostream>

#include "relucut/report.hpp"

namespace {

constexpr int kExitUsage = 64;
constexpr int kExitParse = 65;
constexpr int kExitInternal = 70;

std::vector<int> parse_shape(const std::string& s) {
  std::vector<int> dims;
  size_t pos = 0;
  while (pos < s.size()) {
    size_t next = s.find('-', pos);
    if (next == std::string::npos) next = s.size();
    dims.push_back(std::stoi(s.substr(pos, next - pos)));
    pos = next + 1;
  }
  if (dims.size() < 2) throw std::invalid_argument("shape needs at least two widths, e.g. 3-16-16-1");
  return dims;
}

void add_config_flags(CLI::App* cmd, relucut::RunConfig& cfg) {
  cmd->add_option("--mode", cfg.mode, "plain | biccos-base | biccos-mts | auto");
  cmd->add_option("--timeout", cfg.timeout_s, "per-instance timeout in seconds");
  cmd->add_option("--seed", cfg.seed, "random seed");
  cmd->add_option("--batch-size", cfg.batch_size, "domains bounded per batch");
  cmd->add_option("--drop-percentage", cfg.drop_percentage, "strengthening drop percentile");
  cmd->add_flag("--strengthen-recursive", cfg.strengthen_recursive,
                "recurse strengthening to a fixpoint instead of one round");
  cmd->add_option("--strengthen-cap", cfg.strengthen_iteration_cap,
                  "strengthen only during the first N batches");
  cmd->add_option("--presolve-iters", cfg.presolve_iters, "multi-tree presolve iterations");
  cmd->add_option("--presolve-pick", cfg.presolve_pick, "domains picked per presolve iteration");
  cmd->add_option("--presolve-gen", cfg.presolve_gen, "target subdomains per presolve iteration");
  cmd->add_option("--presolve-trees", cfg.presolve_trees, "number of presolve trees");
  cmd->add_option("--opt-iters", cfg.opt_iters, "dual ascent iterations per bound");
  cmd->add_option("--lr-alpha", cfg.lr_alpha, "learning rate for alpha");
  cmd->add_option("--lr-beta", cfg.lr_beta, "learning rate for beta/mu/tau");
  cmd->add_option("--lr-decay", cfg.lr_decay, "learning rate decay per iteration");
  cmd->add_option("--pool-cap", cfg.pool_cap, "cut pool size cap");
  cmd->add_option("--workers", cfg.workers, "bounding worker threads");
  cmd->add_option("--queue-order", cfg.queue_order, "bfs | dfs");
  cmd->add_option("--auto-mts-threshold", cfg.auto_mts_threshold,
                  "auto mode enables multi-tree search above this unstable count");
}

int run_main(int argc, char** argv) {
  CLI::App app{"Complete verifier for small ReLU networks with branch-and-bound inferred cuts"};
  app.require_subcommand(1);

  relucut::RunConfig cfg;
  std::string network_path, spec_path, report_path, stats_path, cut_dump_path, lp_dump_path;

  CLI::App* verify = app.add_subcommand("verify", "verify one instance");
  verify->add_option("--network", network_path, "network JSON file")->required();
  verify->add_option("--spec", spec_path, "input/property JSON file")->required();
  add_config_flags(verify, cfg);
  verify->add_option("--report", report_path, "write the JSON run report here");
  verify->add_option("--stats-stream", stats_path, "append per-batch JSON lines here");
  verify->add_option("--cut-dump", cut_dump_path, "dump the final cut pool as JSON");
  verify->add_option("--lp-dump", lp_dump_path, "dump the root LP relaxation tableau as text");

  std::string manifest_path, suite_report_path;
  int jobs = 1;
  CLI::App* suite = app.add_subcommand("suite", "run a manifest of instances and modes");
  suite->add_option("--manifest", manifest_path, "suite manifest JSON")->required();
  add_config_flags(suite, cfg);
  suite->add_option("--report", suite_report_path, "write the suite report here");
  suite->add_option("--jobs", jobs, "instances run concurrently");

  relucut::GenConfig gen_cfg;
  std::string shape_str = "3-16-16-1", gen_out;
  CLI::App* gen = app.add_subcommand("gen", "generate calibrated random instances");
  gen->add_option("--seed", gen_cfg.seed, "generator seed");
  gen->add_option("--count", gen_cfg.count, "number of instances");
  gen->add_option("--shape", shape_str, "layer widths, e.g. 3-16-16-1");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--prefix", gen_cfg.prefix, "file name prefix");
  gen->add_option("--max-unstable", gen_cfg.max_unstable, "instability cap for calibration");
  gen->add_option("--margin-lo", gen_cfg.margin_lo, "smallest calibrated margin");
  gen->add_option("--margin-hi", gen_cfg.margin_hi, "largest calibrated margin");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  if (verify->parsed()) {
    std::ofstream stats_file;
    std::ostream* stats = nullptr;
    if (!stats_path.empty()) {
      stats_file.open(stats_path, std::ios::app);
      stats = &stats_file;
    }
    relucut::VerifyRun run = relucut::run_verify(network_path, spec_path, cfg, stats);
    if (!lp_dump_path.empty()) {
      auto [net, in, prop] = relucut::load_instance(network_path, spec_path);
      const relucut::ReluNetwork canon = relucut::canonicalize(net, prop);
      const relucut::PreActBounds b = relucut::compute_preact_bounds(canon, in);
      const relucut::UnstableLayout ly = relucut::make_layout(b);
      relucut::MilpEncoding enc = relucut::encode_milp(canon, in, b, ly, relucut::RelaxMode::lp);
      std::ofstream(lp_dump_path) << relucut::lp_to_text(enc.lp);
    }
    if (!cut_dump_path.empty())
      relucut::write_json_file(cut_dump_path, relucut::cut_pool_json(run.pool));
    if (!report_path.empty()) relucut::write_json_file(report_path, run.report);
    std::cout << "status=" << relucut::status_name(run.verdict.status)
              << " mode=" << run.resolved_mode << " bound=" << run.verdict.bound
              << " domains=" << run.stats.domains_visited << " cuts=" << run.stats.cuts_generated
              << " time_s=" << run.stats.wall_time_s << "\n";
    return run.exit_code;
  }

  if (suite->parsed()) {
    const relucut::json manifest = relucut::detail::parse_document(manifest_path);
    const relucut::json report = relucut::run_suite(manifest, cfg, jobs);
    if (!suite_report_path.empty()) relucut::write_json_file(suite_report_path, report);
    long rows = report["rows"].size(), errors = 0;
    for (const auto& r : report["rows"])
      if (r.contains("error")) ++errors;
    std::cout << "suite rows=" << rows << " errors=" << errors << "\n";
    if (!report["aggregates"].empty())
      std::cout << report["aggregates"].dump(2) << "\n";
    return 0;
  }

  // gen
  gen_cfg.shape = parse_shape(shape_str);
  gen_cfg.out_dir = gen_out;
  const relucut::json manifest = relucut::gen_instances(gen_cfg);
  const std::string manifest_out =
      (std::filesystem::path(gen_out) / (gen_cfg.prefix + "_manifest.json")).string();
  relucut::write_json_file(manifest_out, manifest);
  std::cout << "generated " << manifest["instances"].size() << " instances, manifest at "
            << manifest_out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_main(argc, argv);
  } catch (const relucut::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
