#pragma once

#include <relucut/bab.hpp>
#include <relucut/instance_gen.hpp>
#include <relucut/json_io.hpp>
#include <relucut/milp.hpp>
#include <relucut/propagation.hpp>

namespace testutil {

using namespace relucut;

/// T1: 1-1-1 identity net, x0 = 0, eps = 1 — the canonical objective is
/// ReLU(x) (+ optional offset via c0).
inline ReluNetwork t1_network() {
  Layer l1{Mat::Constant(1, 1, 1.0), Vec::Zero(1)};
  Layer l2{Mat::Constant(1, 1, 1.0), Vec::Zero(1)};
  return ReluNetwork({l1, l2});
}

inline InputSpec t1_input() { return InputSpec{Vec::Zero(1), 1.0}; }

inline PropertySpec t1_property(double c0 = 0.0) { return PropertySpec{Vec::Constant(1, 1.0), c0}; }

/// Independently-written forward pass: plain index loops, no Eigen products,
/// used as the oracle for `evaluate`.
inline std::vector<double> reference_forward(const ReluNetwork& net, const Vec& x) {
  std::vector<double> v(x.data(), x.data() + x.size());
  for (int i = 1; i <= net.layer_count(); ++i) {
    const Layer& layer = net.layer(i);
    std::vector<double> next(layer.weights.rows(), 0.0);
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      double acc = layer.bias(r);
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) acc += layer.weights(r, c) * v[c];
      next[r] = (i < net.layer_count() && acc < 0.0) ? 0.0 : acc;
    }
    v = std::move(next);
  }
  return v;
}

inline Vec random_point_in_ball(const InputSpec& in, Rng& rng) {
  Vec x = in.center;
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += rng.uniform(-in.radius, in.radius);
  return x;
}

/// Brute-force LP solver by basis enumeration: tries every choice of
/// n tight constraints among rows and variable bounds, keeps the best
/// feasible vertex. Exact on small instances and completely independent of
/// the simplex code path.
inline LpSolution brute_force_lp(const LinearProgram& lp) {
  const int n = lp.num_vars();
  std::vector<Vec> planes;     // a.x = b candidates
  std::vector<double> pl_rhs;
  for (int r = 0; r < lp.num_rows(); ++r) {
    planes.push_back(lp.rows[r]);
    pl_rhs.push_back(lp.rhs[r]);
  }
  for (int k = 0; k < n; ++k) {
    if (std::isfinite(lp.var_lo(k))) {
      Vec e = Vec::Zero(n);
      e(k) = 1.0;
      planes.push_back(e);
      pl_rhs.push_back(lp.var_lo(k));
    }
    if (std::isfinite(lp.var_hi(k))) {
      Vec e = Vec::Zero(n);
      e(k) = 1.0;
      planes.push_back(e);
      pl_rhs.push_back(lp.var_hi(k));
    }
  }
  const int m = static_cast<int>(planes.size());
  auto feasible = [&](const Vec& x) {
    for (int r = 0; r < lp.num_rows(); ++r) {
      const double lhs = lp.rows[r].dot(x);
      if (lp.sense[r] == RowSense::le && lhs > lp.rhs[r] + 1e-7) return false;
      if (lp.sense[r] == RowSense::ge && lhs < lp.rhs[r] - 1e-7) return false;
      if (lp.sense[r] == RowSense::eq && std::abs(lhs - lp.rhs[r]) > 1e-7) return false;
    }
    for (int k = 0; k < n; ++k)
      if (x(k) < lp.var_lo(k) - 1e-7 || x(k) > lp.var_hi(k) + 1e-7) return false;
    return true;
  };

  LpSolution best;
  best.status = LpStatus::infeasible;
  std::vector<int> idx(n);
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == n) {
      Mat A(n, n);
      Vec b(n);
      for (int i = 0; i < n; ++i) {
        A.row(i) = planes[idx[i]].transpose();
        b(i) = pl_rhs[idx[i]];
      }
      Eigen::FullPivLU<Mat> lu(A);
      if (!lu.isInvertible()) return;
      const Vec x = lu.solve(b);
      if (!feasible(x)) return;
      const double obj = lp.objective.dot(x) + lp.objective_offset;
      if (best.status != LpStatus::optimal || obj < best.objective) {
        best.status = LpStatus::optimal;
        best.objective = obj;
        best.x = x;
      }
      return;
    }
    for (int i = start; i < m; ++i) {
      idx[depth] = i;
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);
  return best;
}

struct ReferenceSplit {
  std::vector<std::int8_t> branch;  // by layout id: +1 active, -1 inactive, 0 none
  std::vector<double> beta_hat;     // split multiplier by layout id
};

/// Independent reference for the no-cuts bound: the classic backward pass in
/// primal coefficient form (per-sign slope choice with intercept
/// accumulation, split terms added to the pre-activation coefficients).
/// Shares no code with the production recursion.
inline double reference_beta_crown(const ReluNetwork& net, const InputSpec& spec,
                                   const PreActBounds& bounds, const UnstableLayout& layout,
                                   const ReferenceSplit& split,
                                   const std::vector<Vec>& alpha) {
  const int L = net.layer_count();
  Vec coeff = net.layer(L).weights.row(0).transpose();
  double constant = net.layer(L).bias(0);
  for (int i = L - 1; i >= 1; --i) {
    Vec pre = Vec::Zero(net.width(i));
    for (int j = 0; j < net.width(i); ++j) {
      const double c = coeff(j);
      const int id = layout.id_of[i - 1][j];
      const int br = id >= 0 ? split.branch[id] : 0;
      switch (bounds.s(i, j)) {
        case NeuronState::active:
          pre(j) = c;
          break;
        case NeuronState::inactive:
          pre(j) = 0.0;
          break;
        case NeuronState::unstable: {
          if (br > 0) {
            pre(j) = c - split.beta_hat[id];
          } else if (br < 0) {
            pre(j) = split.beta_hat[id];
          } else {
            const double l = bounds.l(i, j), u = bounds.u(i, j);
            if (c >= 0.0) {
              pre(j) = alpha[i - 1](j) * c;
            } else {
              pre(j) = c * u / (u - l);
              constant += c * (-u * l / (u - l));
            }
          }
          break;
        }
      }
    }
    constant += pre.dot(net.layer(i).bias);
    coeff = net.layer(i).weights.transpose() * pre;
  }
  return coeff.dot(spec.center) - spec.radius * coeff.cwiseAbs().sum() + constant;
}

struct RandomInstance {
  ReluNetwork net;
  InputSpec input;
  PreActBounds bounds;
  UnstableLayout layout;
};

/// Canonical random instance with its bounds and layout; eps picked from a
/// ladder so a few neurons are unstable.
inline RandomInstance random_instance(const std::vector<int>& shape, Rng& rng,
                                      int max_unstable = 16) {
  for (;;) {
    ReluNetwork raw = random_network(shape, rng);
    PropertySpec prop;
    prop.c = shape.back() == 1 ? Vec::Constant(1, 1.0) : (Vec(2) << 1.0, -1.0).finished();
    ReluNetwork net = canonicalize(raw, prop);
    InputSpec in;
    in.center.resize(shape.front());
    for (Eigen::Index j = 0; j < in.center.size(); ++j) in.center(j) = rng.uniform(-0.3, 0.3);
    for (double eps : {0.08, 0.15, 0.3}) {
      in.radius = eps;
      PreActBounds b = compute_preact_bounds(net, in);
      const int u = b.count_unstable();
      if (u >= 1 && u <= max_unstable) {
        UnstableLayout ly = make_layout(b);
        return RandomInstance{std::move(net), in, std::move(b), std::move(ly)};
      }
    }
  }
}

}  // namespace testutil
