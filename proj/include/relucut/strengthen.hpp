#pragma once

#include "relucut/cuts.hpp"
#include "relucut/propagation.hpp"

namespace relucut {

struct StrengthenConfig {
  double drop_percentage = 0.5;
  int reverify_iterations = 10;
  bool recursive = false;       // the listing recurses; experiments run one round
  double dual_zero_tol = 1e-6;  // "nonzero" multiplier threshold
  OptimizerConfig optimizer;    // learning rates shared with the main loop
};

/// The pieces of an UNSAT domain strengthening consumes.
struct UnsatDomainView {
  const SplitSet& split;
  const std::vector<InfluenceRecord>& history;
  const DualState& duals;
};

struct StrengthenOutcome {
  int cuts_added = 0;
  int reverify_attempts = 0;
  int reverify_successes = 0;
  int missing_history = 0;
  long nonfinite_gradients = 0;
};

namespace detail {

/// Nearest-rank percentile over ascending scores; q = 0 returns the minimum
/// so nothing is dropped.
inline double percentile(std::vector<double> scores, double q) {
  std::sort(scores.begin(), scores.end());
  const size_t n = scores.size();
  size_t idx = static_cast<size_t>(q * static_cast<double>(n));
  if (idx >= n) idx = n - 1;
  return scores[idx];
}

inline double split_dual_value(const DualState& duals, const UnstableLayout& layout, int id,
                               std::int8_t branch) {
  const NeuronRef n = layout.ref(id);
  return branch > 0 ? duals.mu[n.layer - 1](n.index) : duals.tau[n.layer - 1](n.index);
}

}  // namespace detail

/// Neuron-elimination strengthening of a proven-UNSAT split set: drop the
/// lowest-influence splits whose multipliers are inactive, re-verify the
/// reduced set against the current pool, and on success add the reduced
/// inferred cut. Optionally recurses on the reduced set; always finishes
/// with a merge pass. `pair_log`, when given, records (parent, strengthened)
/// pairs for every cut this call adds.
inline StrengthenOutcome strengthen(const ReluNetwork& net, const InputSpec& spec,
                                    const PreActBounds& bounds, const UnstableLayout& layout,
                                    const UnsatDomainView& domain, CutPool& pool,
                                    const StrengthenConfig& cfg, long iteration = 0,
                                    std::vector<std::pair<Cut, Cut>>* pair_log = nullptr) {
  StrengthenOutcome out;
  if (domain.split.size() == 0) return out;  // root UNSAT carries no cut
  if (cfg.drop_percentage < 0.0 || cfg.drop_percentage >= 1.0)
    throw std::invalid_argument("drop_percentage must lie in [0, 1)");

  const std::optional<Cut> parent = infer_cut(domain.split, iteration);

  SplitSet current = domain.split;
  std::vector<InfluenceRecord> history = domain.history;
  DualState duals = domain.duals;

  for (;;) {
    InfluenceScores scores = neuron_influence_scores(history);
    out.missing_history += scores.missing_history;
    std::vector<double> values;
    values.reserve(scores.score.size());
    for (const auto& [id, s] : scores.score) values.push_back(s);
    // Splits without a history record count as score 0 (preferred drops).
    for (int id = 0; id < static_cast<int>(current.branch.size()); ++id)
      if (current.is_split(id) && !scores.score.count(id)) {
        values.push_back(0.0);
        ++out.missing_history;
      }
    if (values.empty()) break;
    const double threshold = detail::percentile(values, cfg.drop_percentage);

    SplitSet reduced(static_cast<int>(current.branch.size()));
    for (int id = 0; id < static_cast<int>(current.branch.size()); ++id) {
      if (!current.is_split(id)) continue;
      const double dual = detail::split_dual_value(duals, layout, id, current.at(id));
      const auto it = scores.score.find(id);
      const double score = it == scores.score.end() ? 0.0 : it->second;
      if (dual > cfg.dual_zero_tol || score >= threshold) reduced.fix(id, current.at(id));
    }
    if (reduced.size() == 0) break;

    // Re-verify the reduced set against the current pool, warm-started from
    // the domain's duals (dropped splits fall back to the slope heuristic).
    DualState init = make_initial_duals(net, bounds, 0);
    for (size_t li = 0; li < init.alpha.size(); ++li) {
      for (Eigen::Index j = 0; j < init.alpha[li].size(); ++j) {
        const int id = layout.id(static_cast<int>(li) + 1, static_cast<int>(j));
        if (id < 0) continue;
        if (reduced.is_split(id)) {
          if (reduced.at(id) > 0)
            init.mu[li](j) = duals.mu[li](j);
          else
            init.tau[li](j) = duals.tau[li](j);
        } else if (!current.is_split(id) && static_cast<Eigen::Index>(duals.alpha[li].size()) > j) {
          init.alpha[li](j) = duals.alpha[li](j);
        }
      }
    }
    const CutMatrixView view = to_matrix_view(pool, net, layout);
    resize_beta(init, view.rows);
    // Beta indices transfer only while the pool prefix is still aligned with
    // the snapshot the domain was bounded against; any feasible beta is sound
    // either way, so a stale vector just degrades the warm start.
    if (duals.beta_epoch == pool.structure_epoch() && duals.beta.size() <= init.beta.size())
      init.beta.head(duals.beta.size()) = duals.beta;
    init.beta_epoch = pool.structure_epoch();

    OptimizerConfig opt = cfg.optimizer;
    opt.iterations = cfg.reverify_iterations;
    ++out.reverify_attempts;
    OptimizeResult res =
        optimize_duals(net, spec, bounds, layout, reduced, view, std::move(init), opt);
    out.nonfinite_gradients += res.nonfinite_gradients;
    if (res.bound < 0.0) break;  // cannot verify the reduced set; keep what we have

    ++out.reverify_successes;
    std::optional<Cut> cut = infer_cut(reduced, iteration);
    if (cut) {
      cut->provenance = reduced.size() == domain.split.size() ? Cut::Provenance::inferred
                                                              : Cut::Provenance::strengthened;
      if (pair_log && parent) pair_log->push_back({*parent, *cut});
      if (pool.add(*cut)) ++out.cuts_added;
    }
    if (!cfg.recursive || reduced.size() == current.size()) break;

    // Recurse on the reduced set: restrict the history and continue with the
    // re-verification duals.
    std::vector<InfluenceRecord> reduced_history;
    for (const InfluenceRecord& r : history)
      if (reduced.is_split(r.neuron_id)) reduced_history.push_back(r);
    history = std::move(reduced_history);
    duals = res.duals;
    current = reduced;
  }

  merge_cuts(pool, iteration);
  return out;
}

}  // namespace relucut
