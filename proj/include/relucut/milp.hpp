#pragma once

#include <functional>
#include <optional>

#include "relucut/bounds.hpp"
#include "relucut/cuts.hpp"
#include "relucut/lp.hpp"

namespace relucut {

enum class RelaxMode { integer, lp, planet };

/// The layered verification encoding: affine coupling rows, the per-neuron
/// ReLU constraint family for unstable neurons (indicator rows in integer/lp
/// mode, the single upper envelope in planet mode), equalities for stable
/// neurons, and the input box as variable bounds.
struct MilpEncoding {
  LinearProgram lp;
  RelaxMode mode = RelaxMode::lp;
  std::vector<std::vector<int>> x_var;     // [layer][j], layer 0 = inputs
  std::vector<std::vector<int>> xhat_var;  // [layer-1][j] for layers 1..L-1
  std::vector<int> z_var;                  // [layout id] -> var or -1
  std::vector<int> integer_vars;           // z vars when mode == integer

  int num_z() const {
    int n = 0;
    for (int v : z_var)
      if (v >= 0) ++n;
    return n;
  }
};

inline MilpEncoding encode_milp(const ReluNetwork& net, const InputSpec& spec,
                                const PreActBounds& bounds, const UnstableLayout& layout,
                                RelaxMode mode) {
  const int L = net.layer_count();
  const int d0 = net.input_dim();
  const bool with_z = mode != RelaxMode::planet;

  int vars = d0;
  MilpEncoding enc;
  enc.mode = mode;
  enc.x_var.resize(L + 1);
  enc.xhat_var.resize(L - 1);
  enc.x_var[0].resize(d0);
  for (int j = 0; j < d0; ++j) enc.x_var[0][j] = vars - d0 + j;
  for (int i = 1; i <= L; ++i) {
    enc.x_var[i].resize(net.width(i));
    for (int j = 0; j < net.width(i); ++j) enc.x_var[i][j] = vars++;
  }
  for (int i = 1; i <= L - 1; ++i) {
    enc.xhat_var[i - 1].resize(net.width(i));
    for (int j = 0; j < net.width(i); ++j) enc.xhat_var[i - 1][j] = vars++;
  }
  enc.z_var.assign(layout.count(), -1);
  if (with_z)
    for (int id = 0; id < layout.count(); ++id) enc.z_var[id] = vars++;

  LinearProgram lp(vars);
  for (int j = 0; j < d0; ++j) {
    lp.var_lo(enc.x_var[0][j]) = spec.center(j) - spec.radius;
    lp.var_hi(enc.x_var[0][j]) = spec.center(j) + spec.radius;
  }
  for (int id = 0; id < layout.count() && with_z; ++id) {
    lp.var_lo(enc.z_var[id]) = 0.0;
    lp.var_hi(enc.z_var[id]) = 1.0;
    if (mode == RelaxMode::integer) enc.integer_vars.push_back(enc.z_var[id]);
  }

  auto row = [&]() { return Vec(Vec::Zero(vars)); };

  // Affine coupling x(i) = W(i) x̂(i-1) + b(i).
  for (int i = 1; i <= L; ++i) {
    const Layer& layer = net.layer(i);
    for (int j = 0; j < net.width(i); ++j) {
      Vec r = row();
      r(enc.x_var[i][j]) = 1.0;
      for (int k = 0; k < net.width(i - 1); ++k) {
        const int src = i == 1 ? enc.x_var[0][k] : enc.xhat_var[i - 2][k];
        r(src) -= layer.weights(j, k);
      }
      lp.add_row(std::move(r), RowSense::eq, layer.bias(j));
    }
  }

  for (int i = 1; i <= L - 1; ++i) {
    for (int j = 0; j < net.width(i); ++j) {
      const int xv = enc.x_var[i][j];
      const int hv = enc.xhat_var[i - 1][j];
      switch (bounds.s(i, j)) {
        case NeuronState::active: {
          Vec r = row();
          r(hv) = 1.0;
          r(xv) = -1.0;
          lp.add_row(std::move(r), RowSense::eq, 0.0);
          break;
        }
        case NeuronState::inactive:
          lp.var_lo(hv) = 0.0;
          lp.var_hi(hv) = 0.0;
          break;
        case NeuronState::unstable: {
          const double l = bounds.l(i, j), u = bounds.u(i, j);
          {
            Vec r = row();
            r(hv) = 1.0;
            lp.add_row(std::move(r), RowSense::ge, 0.0);  // x̂ >= 0
          }
          {
            Vec r = row();
            r(hv) = 1.0;
            r(xv) = -1.0;
            lp.add_row(std::move(r), RowSense::ge, 0.0);  // x̂ >= x
          }
          if (mode == RelaxMode::planet) {
            Vec r = row();
            const double s = u / (u - l);
            r(hv) = 1.0;
            r(xv) = -s;
            lp.add_row(std::move(r), RowSense::le, -s * l);  // x̂ <= s (x - l)
          } else {
            const int zv = enc.z_var[layout.id(i, j)];
            {
              Vec r = row();
              r(hv) = 1.0;
              r(zv) = -u;
              lp.add_row(std::move(r), RowSense::le, 0.0);  // x̂ <= u z
            }
            {
              Vec r = row();
              r(hv) = 1.0;
              r(xv) = -1.0;
              r(zv) = -l;
              lp.add_row(std::move(r), RowSense::le, -l);  // x̂ <= x - l(1-z)
            }
          }
          break;
        }
      }
    }
  }

  lp.objective(enc.x_var[L][0]) = 1.0;
  enc.lp = std::move(lp);
  return enc;
}

/// Appends the general-form rows of a cut view to an encoding's LP.
inline void append_cut_rows(MilpEncoding& enc, const CutMatrixView& view) {
  if (view.rows == 0) return;
  std::vector<Vec> rows(view.rows, Vec::Zero(enc.lp.num_vars()));
  for (size_t li = 0; li < view.h_cols.size(); ++li)
    for (size_t j = 0; j < view.h_cols[li].size(); ++j) {
      for (const auto& t : view.h_cols[li][j]) rows[t.row](enc.x_var[li + 1][j]) += t.coeff;
      for (const auto& t : view.g_cols[li][j]) rows[t.row](enc.xhat_var[li][j]) += t.coeff;
    }
  for (int id = 0; id < static_cast<int>(view.q_cols.size()); ++id)
    for (const auto& t : view.q_cols[id]) {
      if (enc.z_var[id] < 0) throw std::invalid_argument("cut references a z variable outside the encoding");
      rows[t.row](enc.z_var[id]) += t.coeff;
    }
  for (int r = 0; r < view.rows; ++r) enc.lp.add_row(std::move(rows[r]), RowSense::le, view.d[r]);
}

/// Optimum of the lp-mode encoding with split indicators fixed and cut rows
/// appended. Infeasible splits return +inf (the domain is vacuously UNSAT).
inline double lp_relaxation_bound(const ReluNetwork& net, const InputSpec& spec,
                                  const PreActBounds& bounds, const UnstableLayout& layout,
                                  const SplitSet& split, const CutMatrixView& cuts) {
  MilpEncoding enc = encode_milp(net, spec, bounds, layout, RelaxMode::lp);
  for (int id = 0; id < layout.count(); ++id) {
    if (split.at(id) > 0) {
      enc.lp.var_lo(enc.z_var[id]) = 1.0;
    } else if (split.at(id) < 0) {
      enc.lp.var_hi(enc.z_var[id]) = 0.0;
    }
  }
  append_cut_rows(enc, cuts);
  LpSolution sol = simplex_solve(enc.lp);
  if (sol.status == LpStatus::infeasible) return kLpInfinity;
  if (sol.status != LpStatus::optimal) throw std::runtime_error("relaxation LP unbounded");
  return sol.objective;
}

inline double lp_relaxation_bound(const ReluNetwork& net, const InputSpec& spec,
                                  const PreActBounds& bounds, const UnstableLayout& layout) {
  return lp_relaxation_bound(net, spec, bounds, layout, SplitSet(layout.count()),
                             CutMatrixView::empty_for(net, layout));
}

inline constexpr int kEnumerationCap = 16;

/// Region LP of a full activation-pattern assignment: with every unstable
/// neuron's branch fixed, the network is affine in the input, so the region
/// is a polytope over the input box and the LP is exact there.
inline LpSolution pattern_region_lp(const ReluNetwork& net, const InputSpec& spec,
                                    const PreActBounds& bounds, const UnstableLayout& layout,
                                    const std::vector<std::int8_t>& branch) {
  const int L = net.layer_count();
  const int d0 = net.input_dim();
  LinearProgram lp(d0);
  for (int j = 0; j < d0; ++j) {
    lp.var_lo(j) = spec.center(j) - spec.radius;
    lp.var_hi(j) = spec.center(j) + spec.radius;
  }
  Mat A = Mat::Identity(d0, d0);
  Vec c = Vec::Zero(d0);
  for (int i = 1; i <= L; ++i) {
    Mat Ap = net.layer(i).weights * A;
    Vec cp = net.layer(i).weights * c + net.layer(i).bias;
    if (i == L) {
      lp.objective = Ap.row(0).transpose();
      lp.objective_offset = cp(0);
      break;
    }
    for (int j = 0; j < net.width(i); ++j) {
      bool active;
      if (bounds.s(i, j) == NeuronState::unstable) {
        const int id = layout.id(i, j);
        if (branch[id] == 0) throw std::invalid_argument("pattern_region_lp requires a full pattern");
        active = branch[id] > 0;
        lp.add_row(Ap.row(j).transpose(), active ? RowSense::ge : RowSense::le, -cp(j));
      } else {
        active = bounds.s(i, j) == NeuronState::active;
      }
      if (!active) {
        Ap.row(j).setZero();
        cp(j) = 0.0;
      }
    }
    A = std::move(Ap);
    c = std::move(cp);
  }
  return simplex_solve(lp);
}

namespace detail {

struct PatternEnumerator {
  const ReluNetwork& net;
  const InputSpec& spec;
  const PreActBounds& bounds;
  const UnstableLayout& layout;
  const std::function<void(const std::vector<std::int8_t>&, const LpSolution&)>& emit;

  std::vector<std::int8_t> branch;
  std::vector<Vec> sign_rows;
  std::vector<double> sign_offsets;
  std::vector<RowSense> sign_sense;

  void run() {
    branch.assign(layout.count(), 0);
    const int d0 = net.input_dim();
    descend(1, 0, Mat::Identity(d0, d0), Vec::Zero(d0));
  }

  // Interval of an affine row over the input box.
  std::pair<double, double> box_interval(const Vec& row, double offset) const {
    const double mid = row.dot(spec.center) + offset;
    const double rad = spec.radius * row.cwiseAbs().sum();
    return {mid - rad, mid + rad};
  }

  void descend(int layer, int neuron, Mat A_hat_prev, Vec c_hat_prev) {
    // A_hat_prev/c_hat_prev map inputs to x̂(layer-1) under the branch prefix.
    Mat Ap = net.layer(layer).weights * A_hat_prev;
    Vec cp = net.layer(layer).weights * c_hat_prev + net.layer(layer).bias;
    if (layer == net.layer_count()) {
      leaf(Ap.row(0).transpose(), cp(0));
      return;
    }
    branch_layer(layer, 0, Ap, cp);
  }

  void branch_layer(int layer, int j, Mat& Ap, Vec& cp) {
    if (j == net.width(layer)) {
      // All neurons of this layer decided; Ap/cp now map to x̂(layer).
      descend(layer + 1, 0, Ap, cp);
      return;
    }
    const NeuronState s = bounds.s(layer, j);
    if (s != NeuronState::unstable) {
      if (s == NeuronState::inactive) {
        Vec saved_row = Ap.row(j);
        const double saved_off = cp(j);
        Ap.row(j).setZero();
        cp(j) = 0.0;
        branch_layer(layer, j + 1, Ap, cp);
        Ap.row(j) = saved_row;
        cp(j) = saved_off;
      } else {
        branch_layer(layer, j + 1, Ap, cp);
      }
      return;
    }
    const int id = layout.id(layer, j);
    const auto [lo, hi] = box_interval(Ap.row(j), cp(j));
    const Vec pre_row = Ap.row(j);
    const double pre_off = cp(j);
    // Inactive branch first: patterns are visited in ascending lexicographic
    // order of the active-bit string.
    if (lo <= 0.0) {
      branch[id] = -1;
      sign_rows.push_back(pre_row);
      sign_offsets.push_back(pre_off);
      sign_sense.push_back(RowSense::le);
      Ap.row(j).setZero();
      cp(j) = 0.0;
      branch_layer(layer, j + 1, Ap, cp);
      Ap.row(j) = pre_row;
      cp(j) = pre_off;
      sign_rows.pop_back();
      sign_offsets.pop_back();
      sign_sense.pop_back();
    }
    if (hi >= 0.0) {
      branch[id] = 1;
      sign_rows.push_back(pre_row);
      sign_offsets.push_back(pre_off);
      sign_sense.push_back(RowSense::ge);
      branch_layer(layer, j + 1, Ap, cp);
      sign_rows.pop_back();
      sign_offsets.pop_back();
      sign_sense.pop_back();
    }
    branch[id] = 0;
  }

  void leaf(const Vec& obj_row, double obj_off) {
    const int d0 = net.input_dim();
    LinearProgram lp(d0);
    for (int j = 0; j < d0; ++j) {
      lp.var_lo(j) = spec.center(j) - spec.radius;
      lp.var_hi(j) = spec.center(j) + spec.radius;
    }
    for (size_t r = 0; r < sign_rows.size(); ++r)
      lp.add_row(sign_rows[r], sign_sense[r], -sign_offsets[r]);
    lp.objective = obj_row;
    lp.objective_offset = obj_off;
    LpSolution sol = simplex_solve(lp);
    if (sol.status == LpStatus::optimal) emit(branch, sol);
  }
};

}  // namespace detail

/// Visits every activation pattern realizable by some input in the ball (per
/// pattern-region LP feasibility), in lexicographic pattern order, passing
/// the region LP optimum. Throws beyond the enumeration cap.
inline void for_each_feasible_pattern(
    const ReluNetwork& net, const InputSpec& spec, const PreActBounds& bounds,
    const UnstableLayout& layout,
    const std::function<void(const std::vector<std::int8_t>&, const LpSolution&)>& emit) {
  if (layout.count() > kEnumerationCap)
    throw std::invalid_argument("instance exceeds the pattern enumeration cap of " +
                                std::to_string(kEnumerationCap) + " unstable neurons");
  detail::PatternEnumerator e{net, spec, bounds, layout, emit, {}, {}, {}, {}};
  e.run();
}

struct ExactMin {
  double value = kLpInfinity;
  Vec argmin;
  std::vector<std::int8_t> pattern;
  long patterns_visited = 0;
};

/// Exact minimum over the ball by activation-pattern enumeration; piecewise
/// linearity makes the per-region LP exact. Ties resolve to the
/// lexicographically smallest pattern.
inline ExactMin exact_min(const ReluNetwork& net, const InputSpec& spec,
                          const PreActBounds& bounds, const UnstableLayout& layout) {
  ExactMin out;
  for_each_feasible_pattern(net, spec, bounds, layout,
                            [&](const std::vector<std::int8_t>& pattern, const LpSolution& sol) {
                              ++out.patterns_visited;
                              if (sol.objective < out.value) {
                                out.value = sol.objective;
                                out.argmin = sol.x;
                                out.pattern = pattern;
                              }
                            });
  if (out.patterns_visited == 0) throw std::runtime_error("no feasible activation pattern found");
  return out;
}

inline ExactMin exact_min(const ReluNetwork& net, const InputSpec& spec,
                          const PreActBounds& bounds) {
  return exact_min(net, spec, bounds, make_layout(bounds));
}

/// Realizable-pattern bit lists (active=1) for cut validation.
inline std::vector<std::vector<std::uint8_t>> realizable_patterns(const ReluNetwork& net,
                                                                  const InputSpec& spec,
                                                                  const PreActBounds& bounds,
                                                                  const UnstableLayout& layout) {
  std::vector<std::vector<std::uint8_t>> out;
  for_each_feasible_pattern(net, spec, bounds, layout,
                            [&](const std::vector<std::int8_t>& pattern, const LpSolution&) {
                              std::vector<std::uint8_t> bits(pattern.size());
                              for (size_t i = 0; i < pattern.size(); ++i)
                                bits[i] = pattern[i] > 0 ? 1 : 0;
                              out.push_back(std::move(bits));
                            });
  return out;
}

/// A cut is valid iff no realizable pattern violates its integer form.
inline bool validate_cut(const Cut& cut, const std::vector<std::vector<std::uint8_t>>& patterns) {
  for (const auto& z : patterns)
    if (!cut.satisfied_by(z)) return false;
  return true;
}

inline bool validate_cut(const ReluNetwork& net, const InputSpec& spec, const PreActBounds& bounds,
                         const UnstableLayout& layout, const Cut& cut) {
  return validate_cut(cut, realizable_patterns(net, spec, bounds, layout));
}

/// Lemma-style split equivalence: fixing z=0 (resp. z=1) in the LP relaxation
/// must match the planet relaxation with the neuron's upper (resp. lower)
/// bound moved to 0, keeping the unstable constraint family in place.
inline bool check_split_equivalence(const ReluNetwork& net, const InputSpec& spec,
                                    const PreActBounds& bounds, const UnstableLayout& layout,
                                    NeuronRef neuron, double tol = 1e-7) {
  if (bounds.s(neuron.layer, neuron.index) != NeuronState::unstable)
    throw std::invalid_argument("check_split_equivalence requires an unstable neuron");
  const int id = layout.id(neuron.layer, neuron.index);

  auto lp_fixed = [&](double z_value) {
    MilpEncoding enc = encode_milp(net, spec, bounds, layout, RelaxMode::lp);
    enc.lp.var_lo(enc.z_var[id]) = z_value;
    enc.lp.var_hi(enc.z_var[id]) = z_value;
    return simplex_solve(enc.lp);
  };
  auto planet_moved = [&](bool zero_upper) {
    PreActBounds mod = bounds;
    if (zero_upper)
      mod.upper[neuron.layer - 1](neuron.index) = 0.0;
    else
      mod.lower[neuron.layer - 1](neuron.index) = 0.0;
    // Keep the neuron in the unstable family; only the envelope moves.
    mod.state = bounds.state;
    MilpEncoding enc = encode_milp(net, spec, mod, layout, RelaxMode::planet);
    return simplex_solve(enc.lp);
  };

  const LpSolution lp0 = lp_fixed(0.0), pl0 = planet_moved(/*zero_upper=*/true);
  const LpSolution lp1 = lp_fixed(1.0), pl1 = planet_moved(/*zero_upper=*/false);
  if (lp0.status != pl0.status || lp1.status != pl1.status) return false;
  const bool case0 =
      lp0.status != LpStatus::optimal || std::abs(lp0.objective - pl0.objective) <= tol;
  const bool case1 =
      lp1.status != LpStatus::optimal || std::abs(lp1.objective - pl1.objective) <= tol;
  return case0 && case1;
}

}  // namespace relucut
