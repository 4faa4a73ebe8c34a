#pragma once

#include <chrono>
#include <deque>
#include <optional>
#include <ostream>
#include <thread>

#include "relucut/milp.hpp"
#include "relucut/strengthen.hpp"

namespace relucut {

enum class Mode { plain, cuts, cuts_mts };
enum class QueueOrder { bfs, dfs };
enum class Status { unsat, unknown, falsified_candidate };

inline const char* status_name(Status s) {
  switch (s) {
    case Status::unsat: return "UNSAT";
    case Status::unknown: return "unknown";
    case Status::falsified_candidate: return "falsified-candidate";
  }
  return "?";
}

struct BabConfig {
  Mode mode = Mode::cuts;
  double timeout_s = 200.0;
  int batch_size = 64;
  OptimizerConfig optimizer;
  StrengthenConfig strengthen;
  int strengthen_iteration_cap = 40;
  int presolve_iterations = 5;
  int presolve_pick = 50;
  int presolve_gen = 400;
  int presolve_trees = 4;
  size_t pool_cap = 1000;
  int workers = 1;
  QueueOrder queue_order = QueueOrder::bfs;
  std::uint64_t seed = 0;

  std::ostream* stats_stream = nullptr;  // JSON-lines, one record per batch
  // Test hooks: every cut added from an UNSAT domain, and the
  // (parent, strengthened) pairs emitted by strengthening.
  std::vector<Cut>* emitted_cut_log = nullptr;
  std::vector<std::pair<Cut, Cut>>* cut_pair_log = nullptr;
};

/// A BaB subproblem. `lower_bound` is the optimized dual bound under the
/// pool snapshot the domain was bounded with.
struct Domain {
  SplitSet split;
  double lower_bound = -kLpInfinity;
  DualState duals;
  std::vector<InfluenceRecord> history;
  int depth = 0;
  int tree_id = 0;
  long seq = 0;
};

struct VerdictReport {
  Status status = Status::unknown;
  double bound = -kLpInfinity;
  std::optional<Vec> witness;
};

struct SearchStats {
  long domains_visited = 0;
  long cuts_generated = 0;
  long strengthen_attempts = 0;
  long strengthen_successes = 0;
  double wall_time_s = 0.0;
  Status final_status = Status::unknown;
  long unsat_leaves = 0;
  long batches = 0;
  long nonfinite_gradients = 0;
  long missing_history_warnings = 0;
  bool hit_timeout = false;
};

/// Estimated-improvement branching: prefer the neuron whose relaxation
/// intercept term contributes the largest gap to the domain's last bound,
/// then the most unstable interval, then the lowest id. Returns nothing when
/// every unstable neuron is already split.
inline std::optional<int> select_branching_neuron(const Domain& domain, const PreActBounds& bounds,
                                                  const UnstableLayout& layout) {
  int best = -1;
  double best_gap = 0.0, best_instab = 0.0;
  for (int id = 0; id < layout.count(); ++id) {
    if (domain.split.is_split(id)) continue;
    const NeuronRef n = layout.ref(id);
    const double l = bounds.l(n.layer, n.index), u = bounds.u(n.layer, n.index);
    double nuhat_pos = 0.0;
    if (!domain.duals.nu_hat.empty())
      nuhat_pos = std::max(domain.duals.nu_hat[n.layer - 1](n.index), 0.0);
    const double gap = -l * u / (u - l) * nuhat_pos;
    const double instab = std::min(u, -l);
    if (best < 0 || gap > best_gap || (gap == best_gap && instab > best_instab)) {
      best = id;
      best_gap = gap;
      best_instab = instab;
    }
  }
  if (best < 0) return std::nullopt;
  return best;
}

/// Children in (Z-, Z+) order with warm-started duals; history is extended
/// by the caller once the children are bounded.
inline std::pair<Domain, Domain> split_domain(const Domain& parent, int neuron_id) {
  if (parent.split.is_split(neuron_id)) throw std::invalid_argument("neuron already split");
  Domain lo = parent, hi = parent;
  lo.split.fix(neuron_id, -1);
  hi.split.fix(neuron_id, +1);
  lo.depth = hi.depth = parent.depth + 1;
  return {std::move(lo), std::move(hi)};
}

/// UNSAT/unknown partition at the exact zero threshold.
inline std::pair<std::vector<Domain>, std::vector<Domain>> filter_domains(
    std::vector<Domain> children) {
  std::vector<Domain> unsat, unknown;
  for (Domain& d : children) {
    if (d.lower_bound >= 0.0)
      unsat.push_back(std::move(d));
    else
      unknown.push_back(std::move(d));
  }
  return {std::move(unsat), std::move(unknown)};
}

namespace detail {

using Clock = std::chrono::steady_clock;

struct SearchContext {
  const ReluNetwork& net;
  const InputSpec& spec;
  const BabConfig& cfg;
  PreActBounds bounds;
  UnstableLayout layout;
  CutPool pool;
  SearchStats stats;
  Clock::time_point deadline;
  long next_seq = 0;
  double min_bound_seen = kLpInfinity;   // over every optimized domain bound
  double min_leaf_bound = kLpInfinity;   // over UNSAT leaves (ignores +inf sentinels)
  bool timed_out() const { return Clock::now() >= deadline; }
};

inline void note_bound(SearchContext& ctx, double b) {
  if (b < ctx.min_bound_seen) ctx.min_bound_seen = b;
}

/// Bounds a set of domains in place against one pool snapshot. Work fans out
/// over `workers` threads by index, so results are identical for any worker
/// count.
inline void bound_batch(SearchContext& ctx, std::vector<Domain>& children,
                        const CutMatrixView& view) {
  const int n = static_cast<int>(children.size());
  if (n == 0) return;
  std::vector<long> nonfinite(n, 0);
  auto work = [&](int from) {
    for (int i = from; i < n; i += std::max(1, ctx.cfg.workers)) {
      Domain& d = children[i];
      resize_beta(d.duals, view.rows);
      d.duals.beta_epoch = ctx.pool.structure_epoch();
      OptimizeResult res = optimize_duals(ctx.net, ctx.spec, ctx.bounds, ctx.layout, d.split, view,
                                          std::move(d.duals), ctx.cfg.optimizer);
      d.duals = std::move(res.duals);
      d.duals.beta_epoch = ctx.pool.structure_epoch();
      d.lower_bound = res.bound;
      nonfinite[i] = res.nonfinite_gradients;
    }
  };
  if (ctx.cfg.workers <= 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < ctx.cfg.workers; ++w) threads.emplace_back(work, w);
    for (auto& t : threads) t.join();
  }
  for (int i = 0; i < n; ++i) ctx.stats.nonfinite_gradients += nonfinite[i];
  ctx.stats.domains_visited += n;
  for (const Domain& d : children) {
    note_bound(ctx, d.lower_bound);
    for (Eigen::Index r = 0; r < d.duals.beta.size(); ++r)
      if (d.duals.beta(r) > 1e-6 && r < static_cast<Eigen::Index>(ctx.pool.size()))
        ctx.pool.note_active(static_cast<size_t>(r));
  }
}

inline void record_history(Domain& child, const Domain& parent, int neuron_id,
                           const UnstableLayout& layout) {
  InfluenceRecord rec;
  rec.neuron_id = neuron_id;
  rec.branch = child.split.at(neuron_id);
  rec.parent_bound = parent.lower_bound;
  rec.child_bound = child.lower_bound;
  const NeuronRef n = layout.ref(neuron_id);
  rec.final_dual = rec.branch > 0 ? child.duals.mu[n.layer - 1](n.index)
                                  : child.duals.tau[n.layer - 1](n.index);
  rec.has_history = std::isfinite(parent.lower_bound);
  child.history.push_back(rec);
}

/// Cut extraction from one proven-UNSAT domain: the full-split inferred cut
/// first, then strengthening (which may add reduced cuts and merges).
inline void harvest_cuts(SearchContext& ctx, const Domain& unsat_domain, long iteration) {
  if (ctx.cfg.mode == Mode::plain) return;
  std::optional<Cut> parent = infer_cut(unsat_domain.split, iteration);
  if (!parent) return;  // root UNSAT
  if (ctx.cfg.emitted_cut_log) ctx.cfg.emitted_cut_log->push_back(*parent);
  if (ctx.pool.add(*parent)) ++ctx.stats.cuts_generated;

  std::vector<std::pair<Cut, Cut>> pairs;
  UnsatDomainView view{unsat_domain.split, unsat_domain.history, unsat_domain.duals};
  StrengthenConfig scfg = ctx.cfg.strengthen;
  scfg.optimizer = ctx.cfg.optimizer;
  StrengthenOutcome out =
      strengthen(ctx.net, ctx.spec, ctx.bounds, ctx.layout, view, ctx.pool, scfg, iteration, &pairs);
  ctx.stats.strengthen_attempts += out.reverify_attempts;
  ctx.stats.strengthen_successes += out.reverify_successes;
  ctx.stats.cuts_generated += out.cuts_added;
  ctx.stats.nonfinite_gradients += out.nonfinite_gradients;
  ctx.stats.missing_history_warnings += out.missing_history;
  for (auto& p : pairs) {
    if (ctx.cfg.emitted_cut_log) ctx.cfg.emitted_cut_log->push_back(p.second);
    if (ctx.cfg.cut_pair_log) ctx.cfg.cut_pair_log->push_back(std::move(p));
  }
}

/// Exact resolution of a fully-split domain via its region LP. Returns a
/// witness when the region genuinely falsifies the property; otherwise the
/// domain is UNSAT (vacuously so for empty regions) or, in a float-level
/// corner, parked as exhausted.
enum class LeafKind { unsat, falsified, exhausted };
struct LeafResult {
  LeafKind kind;
  double bound = kLpInfinity;
  Vec witness;
};

inline LeafResult resolve_full_leaf(SearchContext& ctx, const Domain& domain) {
  std::vector<std::int8_t> branch(ctx.layout.count());
  for (int id = 0; id < ctx.layout.count(); ++id) branch[id] = domain.split.at(id);
  LpSolution sol = pattern_region_lp(ctx.net, ctx.spec, ctx.bounds, ctx.layout, branch);
  LeafResult out{LeafKind::unsat};
  if (sol.status == LpStatus::infeasible) return out;  // vacuous region
  if (sol.status != LpStatus::optimal) throw std::runtime_error("leaf region LP unbounded");
  out.bound = sol.objective;
  if (sol.objective >= 0.0) return out;  // region exactly verified
  const double exact = evaluate(ctx.net, sol.x);
  if (exact < 0.0) {
    out.kind = LeafKind::falsified;
    out.witness = sol.x;
    return out;
  }
  out.kind = LeafKind::exhausted;
  out.bound = sol.objective;
  return out;
}

struct BatchChildEvent {
  int neuron = -1;
  int branch = 0;
  double parent_bound = 0.0;
  double child_bound = 0.0;
};

inline void emit_stats_line(SearchContext& ctx, long batch, size_t popped, size_t unsat,
                            size_t unknown, const std::vector<BatchChildEvent>& events) {
  if (!ctx.cfg.stats_stream) return;
  std::ostream& os = *ctx.cfg.stats_stream;
  os << "{\"batch\":" << batch << ",\"popped\":" << popped << ",\"unsat\":" << unsat
     << ",\"unknown\":" << unknown << ",\"pool\":" << ctx.pool.size()
     << ",\"visited\":" << ctx.stats.domains_visited << ",\"children\":[";
  for (size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    os << (i ? "," : "") << "{\"neuron\":" << e.neuron << ",\"branch\":" << e.branch
       << ",\"parent_bound\":" << e.parent_bound << ",\"child_bound\":" << e.child_bound << "}";
  }
  os << "]}\n";
}

inline void sort_frontier(std::deque<Domain>& frontier, QueueOrder order) {
  std::stable_sort(frontier.begin(), frontier.end(), [order](const Domain& a, const Domain& b) {
    if (order == QueueOrder::bfs) {
      if (a.depth != b.depth) return a.depth < b.depth;
    } else {
      if (a.depth != b.depth) return a.depth > b.depth;
    }
    if (a.lower_bound != b.lower_bound) return a.lower_bound < b.lower_bound;
    return a.seq < b.seq;
  });
}

}  // namespace detail

/// Multi-tree presolve: several shallow BaB trees rooted at different first
/// splits share one cut pool; after the configured iterations only the most
/// expanded tree survives. Returns (frontier, verified); verified means some
/// tree proved every one of its leaves.
inline std::pair<std::vector<Domain>, bool> multi_tree_presolve_impl(detail::SearchContext& ctx,
                                                                     const Domain& root) {
  const int want_trees = std::max(1, ctx.cfg.presolve_trees);
  std::vector<int> candidates;
  {
    std::vector<std::pair<double, int>> ranked;
    for (int id = 0; id < ctx.layout.count(); ++id) {
      if (root.split.is_split(id)) continue;
      const NeuronRef n = ctx.layout.ref(id);
      const double l = ctx.bounds.l(n.layer, n.index), u = ctx.bounds.u(n.layer, n.index);
      double nuhat_pos = 0.0;
      if (!root.duals.nu_hat.empty())
        nuhat_pos = std::max(root.duals.nu_hat[n.layer - 1](n.index), 0.0);
      ranked.push_back({-(-l * u / (u - l) * nuhat_pos), id});
    }
    std::stable_sort(ranked.begin(), ranked.end());
    for (size_t i = 0; i < ranked.size() && static_cast<int>(i) < want_trees; ++i)
      candidates.push_back(ranked[i].second);
  }
  if (candidates.empty()) return {{root}, false};

  const int trees = static_cast<int>(candidates.size());
  std::vector<std::deque<Domain>> frontier(trees);
  std::vector<long> expansions(trees, 0);

  auto absorb = [&](std::vector<Domain> children, long iteration) -> bool {
    auto [unsat, unknown] = filter_domains(std::move(children));
    for (Domain& d : unsat) {
      if (std::isfinite(d.lower_bound))
        ctx.min_leaf_bound = std::min(ctx.min_leaf_bound, d.lower_bound);
      ++ctx.stats.unsat_leaves;
      detail::harvest_cuts(ctx, d, iteration);
    }
    for (Domain& d : unknown) frontier[d.tree_id].push_back(std::move(d));
    for (int t = 0; t < trees; ++t)
      if (frontier[t].empty() && expansions[t] > 0) return true;
    return false;
  };

  // Root stage: one tree per top branching candidate.
  {
    std::vector<Domain> children;
    for (int t = 0; t < trees; ++t) {
      auto [lo, hi] = split_domain(root, candidates[t]);
      lo.tree_id = hi.tree_id = t;
      lo.seq = ctx.next_seq++;
      hi.seq = ctx.next_seq++;
      children.push_back(std::move(lo));
      children.push_back(std::move(hi));
      expansions[t] = 1;
    }
    const CutMatrixView view = to_matrix_view(ctx.pool, ctx.net, ctx.layout);
    detail::bound_batch(ctx, children, view);
    for (Domain& c : children) detail::record_history(c, root, candidates[c.tree_id], ctx.layout);
    if (absorb(std::move(children), 0)) return {{}, true};
  }

  // Joint split width so that `pick` domains yield about `gen` children.
  const double fan = std::max(2.0, static_cast<double>(ctx.cfg.presolve_gen) /
                                       std::max(1, ctx.cfg.presolve_pick));
  const int joint = std::max(1, static_cast<int>(std::floor(std::log2(fan))));

  for (int iter = 1; iter <= ctx.cfg.presolve_iterations; ++iter) {
    if (ctx.timed_out()) break;
    std::vector<Domain> picked;
    {
      std::vector<Domain> all;
      for (auto& f : frontier) {
        while (!f.empty()) {
          all.push_back(std::move(f.front()));
          f.pop_front();
        }
      }
      // Highest lower bound first: the most promising domains get the budget.
      std::stable_sort(all.begin(), all.end(), [](const Domain& a, const Domain& b) {
        if (a.lower_bound != b.lower_bound) return a.lower_bound > b.lower_bound;
        return a.seq < b.seq;
      });
      for (Domain& d : all) {
        if (static_cast<int>(picked.size()) < ctx.cfg.presolve_pick &&
            select_branching_neuron(d, ctx.bounds, ctx.layout))
          picked.push_back(std::move(d));
        else
          frontier[d.tree_id].push_back(std::move(d));
      }
    }
    if (picked.empty()) break;

    std::vector<Domain> children;
    std::vector<size_t> child_pick;           // child index -> picked index
    std::vector<std::vector<int>> pick_neurons(picked.size());
    for (size_t p = 0; p < picked.size(); ++p) {
      Domain& d = picked[p];
      ++expansions[d.tree_id];
      SplitSet probe = d.split;
      for (int k = 0; k < joint; ++k) {
        Domain scratch = d;
        scratch.split = probe;
        const auto id = select_branching_neuron(scratch, ctx.bounds, ctx.layout);
        if (!id) break;
        pick_neurons[p].push_back(*id);
        probe.fix(*id, -1);
      }
      const int combos = 1 << static_cast<int>(pick_neurons[p].size());
      for (int mask = 0; mask < combos; ++mask) {
        Domain child = d;
        child.depth += static_cast<int>(pick_neurons[p].size());
        for (size_t k = 0; k < pick_neurons[p].size(); ++k)
          child.split.fix(pick_neurons[p][k], (mask >> k) & 1 ? +1 : -1);
        child.seq = ctx.next_seq++;
        children.push_back(std::move(child));
        child_pick.push_back(p);
      }
    }
    const CutMatrixView view = to_matrix_view(ctx.pool, ctx.net, ctx.layout);
    detail::bound_batch(ctx, children, view);
    for (size_t i = 0; i < children.size(); ++i)
      for (int nid : pick_neurons[child_pick[i]])
        detail::record_history(children[i], picked[child_pick[i]], nid, ctx.layout);
    if (absorb(std::move(children), iter)) return {{}, true};
  }

  // Keep the most expanded tree; ties prefer the higher minimum frontier
  // bound, then the lower tree id.
  int winner = 0;
  auto min_front = [&](int t) {
    double m = kLpInfinity;
    for (const Domain& d : frontier[t]) m = std::min(m, d.lower_bound);
    return m;
  };
  for (int t = 1; t < trees; ++t) {
    if (expansions[t] > expansions[winner] ||
        (expansions[t] == expansions[winner] && min_front(t) > min_front(winner)))
      winner = t;
  }
  std::vector<Domain> out;
  for (Domain& d : frontier[winner]) out.push_back(std::move(d));
  return {std::move(out), false};
}

struct BabResult {
  VerdictReport verdict;
  SearchStats stats;
  CutPool pool;
};

/// Complete verification: root bounding, optional multi-tree presolve, then
/// the batched BFS loop with UNSAT filtering, cut harvesting and witness
/// extraction on fully-split domains.
inline BabResult bab_verify(const ReluNetwork& net, const InputSpec& spec, const BabConfig& cfg) {
  if (!net.scalar_output()) throw std::invalid_argument("bab_verify requires a canonical instance");
  const auto start = detail::Clock::now();
  detail::SearchContext ctx{net,
                            spec,
                            cfg,
                            compute_preact_bounds(net, spec),
                            {},
                            CutPool(cfg.pool_cap),
                            {},
                            start + std::chrono::duration_cast<detail::Clock::duration>(
                                        std::chrono::duration<double>(cfg.timeout_s))};
  ctx.layout = make_layout(ctx.bounds);

  auto finish = [&](Status status, double bound, std::optional<Vec> witness) {
    ctx.stats.final_status = status;
    ctx.stats.wall_time_s = std::chrono::duration<double>(detail::Clock::now() - start).count();
    VerdictReport rep{status, bound, std::move(witness)};
    return BabResult{std::move(rep), std::move(ctx.stats), std::move(ctx.pool)};
  };

  // Root bound.
  Domain root;
  root.split = SplitSet(ctx.layout.count());
  root.seq = ctx.next_seq++;
  {
    const CutMatrixView view = CutMatrixView::empty_for(net, ctx.layout);
    DualState init = make_initial_duals(net, ctx.bounds, 0);
    OptimizeResult res =
        optimize_duals(net, spec, ctx.bounds, ctx.layout, root.split, view, std::move(init), cfg.optimizer);
    root.duals = std::move(res.duals);
    root.lower_bound = res.bound;
    ctx.stats.nonfinite_gradients += res.nonfinite_gradients;
    ctx.stats.domains_visited = 1;
    detail::note_bound(ctx, root.lower_bound);
  }
  if (root.lower_bound >= 0.0) return finish(Status::unsat, root.lower_bound, std::nullopt);

  std::deque<Domain> queue;
  if (cfg.mode == Mode::cuts_mts) {
    auto [frontier, verified] = multi_tree_presolve_impl(ctx, root);
    if (verified)
      return finish(Status::unsat, ctx.pool.size() > 0 ? std::min(0.0, ctx.min_leaf_bound)
                                                       : ctx.min_leaf_bound,
                    std::nullopt);
    for (Domain& d : frontier) queue.push_back(std::move(d));
  } else {
    queue.push_back(std::move(root));
  }

  std::vector<Domain> exhausted;
  long iteration = 0;
  while (!queue.empty()) {
    if (ctx.timed_out()) {
      ctx.stats.hit_timeout = true;
      double fb = kLpInfinity;
      for (const Domain& d : queue) fb = std::min(fb, d.lower_bound);
      for (const Domain& d : exhausted) fb = std::min(fb, d.lower_bound);
      return finish(Status::unknown, fb, std::nullopt);
    }
    ++iteration;
    ctx.stats.batches = iteration;

    detail::sort_frontier(queue, cfg.queue_order);
    std::vector<Domain> batch;
    for (int i = 0; i < cfg.batch_size && !queue.empty(); ++i) {
      batch.push_back(std::move(queue.front()));
      queue.pop_front();
    }

    std::vector<Domain> children;
    std::vector<int> child_parent, child_neuron;
    for (size_t b = 0; b < batch.size(); ++b) {
      Domain& d = batch[b];
      const auto neuron = select_branching_neuron(d, ctx.bounds, ctx.layout);
      if (!neuron) {
        detail::LeafResult leaf = detail::resolve_full_leaf(ctx, d);
        if (leaf.kind == detail::LeafKind::falsified) {
          return finish(Status::falsified_candidate, ctx.min_bound_seen, leaf.witness);
        } else if (leaf.kind == detail::LeafKind::exhausted) {
          exhausted.push_back(std::move(d));
        } else {
          ++ctx.stats.unsat_leaves;
          if (std::isfinite(leaf.bound)) ctx.min_leaf_bound = std::min(ctx.min_leaf_bound, leaf.bound);
          Domain proven = std::move(d);
          proven.lower_bound = leaf.bound;
          if (cfg.mode != Mode::plain && iteration <= cfg.strengthen_iteration_cap)
            detail::harvest_cuts(ctx, proven, iteration);
        }
        continue;
      }
      auto [lo, hi] = split_domain(d, *neuron);
      lo.seq = ctx.next_seq++;
      hi.seq = ctx.next_seq++;
      children.push_back(std::move(lo));
      child_parent.push_back(static_cast<int>(b));
      child_neuron.push_back(*neuron);
      children.push_back(std::move(hi));
      child_parent.push_back(static_cast<int>(b));
      child_neuron.push_back(*neuron);
    }

    const CutMatrixView view = to_matrix_view(ctx.pool, net, ctx.layout);
    detail::bound_batch(ctx, children, view);

    std::vector<detail::BatchChildEvent> events;
    for (size_t i = 0; i < children.size(); ++i) {
      detail::record_history(children[i], batch[child_parent[i]], child_neuron[i], ctx.layout);
      events.push_back({child_neuron[i], children[i].split.at(child_neuron[i]),
                        batch[child_parent[i]].lower_bound, children[i].lower_bound});
    }

    auto [unsat, unknown] = filter_domains(std::move(children));
    for (Domain& d : unsat) {
      ++ctx.stats.unsat_leaves;
      if (std::isfinite(d.lower_bound)) ctx.min_leaf_bound = std::min(ctx.min_leaf_bound, d.lower_bound);
      if (cfg.mode != Mode::plain && iteration <= cfg.strengthen_iteration_cap)
        detail::harvest_cuts(ctx, d, iteration);
    }
    detail::emit_stats_line(ctx, iteration, batch.size(), unsat.size(), unknown.size(), events);
    for (Domain& d : unknown) queue.push_back(std::move(d));
  }

  if (!exhausted.empty()) {
    double fb = kLpInfinity;
    for (const Domain& d : exhausted) fb = std::min(fb, d.lower_bound);
    return finish(Status::unknown, fb, std::nullopt);
  }
  const bool used_cuts = cfg.mode != Mode::plain && ctx.pool.size() > 0;
  double bound = ctx.min_leaf_bound;
  if (!std::isfinite(bound)) bound = 0.0;  // every leaf was vacuous
  if (used_cuts) bound = std::min(bound, 0.0);
  return finish(Status::unsat, bound, std::nullopt);
}

/// Spec-facing presolve entry: runs root bounding and the presolve stage
/// only, returning the surviving frontier and the accumulated pool.
inline std::tuple<std::vector<Domain>, CutPool, SearchStats> multi_tree_presolve(
    const ReluNetwork& net, const InputSpec& spec, const BabConfig& cfg) {
  if (!net.scalar_output()) throw std::invalid_argument("presolve requires a canonical instance");
  const auto start = detail::Clock::now();
  detail::SearchContext ctx{net,
                            spec,
                            cfg,
                            compute_preact_bounds(net, spec),
                            {},
                            CutPool(cfg.pool_cap),
                            {},
                            start + std::chrono::duration_cast<detail::Clock::duration>(
                                        std::chrono::duration<double>(cfg.timeout_s))};
  ctx.layout = make_layout(ctx.bounds);
  Domain root;
  root.split = SplitSet(ctx.layout.count());
  root.seq = ctx.next_seq++;
  const CutMatrixView view = CutMatrixView::empty_for(net, ctx.layout);
  DualState init = make_initial_duals(net, ctx.bounds, 0);
  OptimizeResult res =
      optimize_duals(net, spec, ctx.bounds, ctx.layout, root.split, view, std::move(init), cfg.optimizer);
  root.duals = std::move(res.duals);
  root.lower_bound = res.bound;
  ctx.stats.domains_visited = 1;
  if (root.lower_bound >= 0.0) return {{}, std::move(ctx.pool), std::move(ctx.stats)};
  auto [frontier, verified] = multi_tree_presolve_impl(ctx, root);
  if (verified) frontier.clear();
  return {std::move(frontier), std::move(ctx.pool), std::move(ctx.stats)};
}

}  // namespace relucut
