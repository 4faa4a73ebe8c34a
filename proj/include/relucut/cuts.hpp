#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "relucut/bounds.hpp"

namespace relucut {

/// A linear constraint over the relaxed ReLU indicators:
///   sum_{i in pos} z_i - sum_{i in neg} z_i <= |pos| - 1.
/// Neuron ids refer to an UnstableLayout.
struct Cut {
  enum class Provenance : std::int8_t { inferred, strengthened, merged };

  std::vector<int> pos, neg;  // sorted, disjoint
  int rhs = -1;               // always |pos| - 1
  Provenance provenance = Provenance::inferred;
  long creation_iteration = 0;

  void normalize() {
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());
    rhs = static_cast<int>(pos.size()) - 1;
  }

  bool literals_valid() const {
    if (pos.empty() && neg.empty()) return false;
    std::vector<int> both;
    std::set_intersection(pos.begin(), pos.end(), neg.begin(), neg.end(), std::back_inserter(both));
    return both.empty();
  }

  bool same_literals(const Cut& o) const { return pos == o.pos && neg == o.neg; }

  /// Integer-form satisfaction for a full 0/1 assignment indexed by neuron id.
  bool satisfied_by(const std::vector<std::uint8_t>& z) const {
    int lhs = 0;
    for (int id : pos) lhs += z[id];
    for (int id : neg) lhs -= z[id];
    return lhs <= rhs;
  }
};

/// Eq.-form inferred cut of a proven-UNSAT split set. Empty split sets carry
/// no information (a root UNSAT ends the search), so no cut is produced.
inline std::optional<Cut> infer_cut(const SplitSet& split, long iteration = 0) {
  Cut c;
  for (int id = 0; id < static_cast<int>(split.branch.size()); ++id) {
    if (split.at(id) > 0) c.pos.push_back(id);
    else if (split.at(id) < 0) c.neg.push_back(id);
  }
  if (c.pos.empty() && c.neg.empty()) return std::nullopt;
  c.provenance = Cut::Provenance::inferred;
  c.creation_iteration = iteration;
  c.normalize();
  return c;
}

/// Strict dominance: a's literal sets are contained in b's with at least one
/// strictly smaller, so every assignment satisfying a satisfies b.
inline bool dominates(const Cut& a, const Cut& b) {
  const bool pos_sub = std::includes(b.pos.begin(), b.pos.end(), a.pos.begin(), a.pos.end());
  const bool neg_sub = std::includes(b.neg.begin(), b.neg.end(), a.neg.begin(), a.neg.end());
  if (!pos_sub || !neg_sub) return false;
  const bool strict = a.pos.size() < b.pos.size() || a.neg.size() < b.neg.size();
  return strict;
}

/// Sparse column view of the general cutting-plane form
///   sum_i H(i) x(i) + G(i) x̂(i) + Q(i) z(i) <= d.
/// Built once per pool snapshot; the propagation engine reads columns.
struct CutMatrixView {
  struct Term {
    int row;
    double coeff;
  };
  int rows = 0;
  std::vector<double> d;
  // [layer-1][neuron] -> terms. h/g are indexed by dense neuron index,
  // q by layout id (indicators exist only for initially-unstable neurons).
  std::vector<std::vector<std::vector<Term>>> h_cols, g_cols;
  std::vector<std::vector<Term>> q_cols;  // [layout id]

  static CutMatrixView empty_for(const ReluNetwork& net, const UnstableLayout& layout) {
    CutMatrixView v;
    const int hidden = net.layer_count() - 1;
    v.h_cols.resize(hidden);
    v.g_cols.resize(hidden);
    for (int i = 1; i <= hidden; ++i) {
      v.h_cols[i - 1].resize(net.width(i));
      v.g_cols[i - 1].resize(net.width(i));
    }
    v.q_cols.resize(layout.count());
    return v;
  }

  int add_row(double rhs) {
    d.push_back(rhs);
    return rows++;
  }
  void add_h(int row, const NeuronRef& n, double c) { h_cols[n.layer - 1][n.index].push_back({row, c}); }
  void add_g(int row, const NeuronRef& n, double c) { g_cols[n.layer - 1][n.index].push_back({row, c}); }
  void add_q(int row, int layout_id, double c) { q_cols[layout_id].push_back({row, c}); }
};

/// Appends a Cut as a Q-only row; H and G stay zero.
inline int to_general_form(CutMatrixView& view, const Cut& cut, const UnstableLayout& layout) {
  for (int id : cut.pos)
    if (id < 0 || id >= layout.count()) throw std::invalid_argument("cut references unknown neuron id");
  for (int id : cut.neg)
    if (id < 0 || id >= layout.count()) throw std::invalid_argument("cut references unknown neuron id");
  const int row = view.add_row(static_cast<double>(cut.rhs));
  for (int id : cut.pos) view.add_q(row, id, 1.0);
  for (int id : cut.neg) view.add_q(row, id, -1.0);
  return row;
}

/// Reconstructs (pos, neg, rhs) from a Q-only row; exact round-trip of
/// to_general_form.
inline Cut from_general_form(const CutMatrixView& view, int row) {
  Cut c;
  for (int id = 0; id < static_cast<int>(view.q_cols.size()); ++id)
    for (const auto& t : view.q_cols[id]) {
      if (t.row != row) continue;
      if (t.coeff > 0) c.pos.push_back(id);
      else c.neg.push_back(id);
    }
  c.normalize();
  c.rhs = static_cast<int>(view.d[row]);
  return c;
}

/// Ordered cut container with a size cap, duplicate rejection and per-cut
/// activity counters (times the cut's multiplier was active at an optimum).
class CutPool {
 public:
  explicit CutPool(size_t cap = 1000) : cap_(cap) {}

  size_t size() const { return cuts_.size(); }
  size_t cap() const { return cap_; }
  const Cut& at(size_t i) const { return cuts_[i]; }
  const std::vector<Cut>& cuts() const { return cuts_; }
  long activity(size_t i) const { return activity_[i]; }
  long version() const { return version_; }
  /// Bumped only when existing row indices move (merge/eviction); appends
  /// keep the prefix stable so beta vectors indexed before the append remain
  /// aligned.
  long structure_epoch() const { return structure_epoch_; }

  void note_active(size_t i) { ++activity_[i]; }

  bool contains(const Cut& c) const {
    for (const Cut& have : cuts_)
      if (have.same_literals(c)) return true;
    return false;
  }

  /// Returns true if the cut was inserted (not a duplicate).
  bool add(Cut c) {
    if (!c.literals_valid()) throw std::invalid_argument("cut literal sets invalid");
    if (c.rhs != static_cast<int>(c.pos.size()) - 1) throw std::invalid_argument("cut rhs mismatch");
    if (contains(c)) return false;
    if (cuts_.size() >= cap_) evict_one();
    cuts_.push_back(std::move(c));
    activity_.push_back(0);
    ++version_;
    return true;
  }

  void replace_all(std::vector<Cut> cuts, std::vector<long> activity) {
    cuts_ = std::move(cuts);
    activity_ = std::move(activity);
    ++version_;
    ++structure_epoch_;
  }

 private:
  // Under cap pressure: dominated cuts go first, then the lowest
  // (activity, creation order).
  void evict_one() {
    int victim = -1;
    for (size_t i = 0; i < cuts_.size() && victim < 0; ++i)
      for (size_t j = 0; j < cuts_.size(); ++j)
        if (i != j && dominates(cuts_[j], cuts_[i])) {
          victim = static_cast<int>(i);
          break;
        }
    if (victim < 0) {
      victim = 0;
      for (size_t i = 1; i < cuts_.size(); ++i) {
        if (activity_[i] < activity_[victim] ||
            (activity_[i] == activity_[victim] &&
             cuts_[i].creation_iteration < cuts_[victim].creation_iteration))
          victim = static_cast<int>(i);
      }
    }
    cuts_.erase(cuts_.begin() + victim);
    activity_.erase(activity_.begin() + victim);
    ++version_;
    ++structure_epoch_;
  }

  std::vector<Cut> cuts_;
  std::vector<long> activity_;
  size_t cap_;
  long version_ = 0;
  long structure_epoch_ = 0;
};

inline CutMatrixView to_matrix_view(const CutPool& pool, const ReluNetwork& net,
                                    const UnstableLayout& layout) {
  CutMatrixView v = CutMatrixView::empty_for(net, layout);
  for (size_t i = 0; i < pool.size(); ++i) to_general_form(v, pool.at(i), layout);
  return v;
}

/// Resolution-style merge to fixpoint: two cuts identical except for one
/// neuron flipped between pos and neg collapse onto their shared literals.
/// Pairs whose shared literal set would be empty are left alone (the pair is
/// jointly infeasible over integers; both cuts stay and the bound engine
/// exploits them directly).
inline void merge_cuts(CutPool& pool, long iteration = 0) {
  std::vector<Cut> cuts = pool.cuts();
  std::vector<long> act(pool.size());
  for (size_t i = 0; i < pool.size(); ++i) act[i] = pool.activity(i);

  bool any_change = false;
  bool changed = true;
  while (changed) {
    changed = false;
    for (size_t i = 0; i < cuts.size() && !changed; ++i) {
      for (size_t j = i + 1; j < cuts.size() && !changed; ++j) {
        if (cuts[i].same_literals(cuts[j])) {  // duplicate
          act[i] = std::max(act[i], act[j]);
          cuts.erase(cuts.begin() + j);
          act.erase(act.begin() + j);
          changed = true;
          break;
        }
        // Candidate resolution on neuron k: identical literal sets except k
        // sits in pos of one cut and neg of the other.
        std::vector<int> univ_i, univ_j;
        std::set_union(cuts[i].pos.begin(), cuts[i].pos.end(), cuts[i].neg.begin(),
                       cuts[i].neg.end(), std::back_inserter(univ_i));
        std::set_union(cuts[j].pos.begin(), cuts[j].pos.end(), cuts[j].neg.begin(),
                       cuts[j].neg.end(), std::back_inserter(univ_j));
        if (univ_i != univ_j || univ_i.size() < 2) continue;
        int flip = -1;
        bool ok = true;
        for (int id : univ_i) {
          const bool pi = std::binary_search(cuts[i].pos.begin(), cuts[i].pos.end(), id);
          const bool pj = std::binary_search(cuts[j].pos.begin(), cuts[j].pos.end(), id);
          if (pi != pj) {
            if (flip >= 0) {
              ok = false;
              break;
            }
            flip = id;
          }
        }
        if (!ok || flip < 0) continue;
        Cut merged;
        for (int id : cuts[i].pos)
          if (id != flip) merged.pos.push_back(id);
        for (int id : cuts[i].neg)
          if (id != flip) merged.neg.push_back(id);
        merged.normalize();
        merged.provenance = Cut::Provenance::merged;
        merged.creation_iteration = iteration;
        const long merged_act = std::max(act[i], act[j]);
        cuts.erase(cuts.begin() + j);
        act.erase(act.begin() + j);
        cuts.erase(cuts.begin() + i);
        act.erase(act.begin() + i);
        cuts.push_back(std::move(merged));
        act.push_back(merged_act);
        changed = true;
      }
    }
    any_change = any_change || changed;
  }
  if (any_change) pool.replace_all(std::move(cuts), std::move(act));
}

/// Per-split bookkeeping used by the neuron elimination heuristic: the bound
/// improvement observed when the split was introduced plus the final dual.
struct InfluenceRecord {
  int neuron_id = -1;
  std::int8_t branch = 0;
  double parent_bound = 0.0;
  double child_bound = 0.0;
  double final_dual = 0.0;
  bool has_history = true;
};

struct InfluenceScores {
  std::map<int, double> score;  // neuron id -> bound improvement at its split
  int missing_history = 0;
};

inline InfluenceScores neuron_influence_scores(const std::vector<InfluenceRecord>& records) {
  InfluenceScores out;
  for (const InfluenceRecord& r : records) {
    if (!r.has_history) {
      out.score[r.neuron_id] = 0.0;
      ++out.missing_history;
    } else {
      out.score[r.neuron_id] = r.child_bound - r.parent_bound;
    }
  }
  return out;
}

}  // namespace relucut
