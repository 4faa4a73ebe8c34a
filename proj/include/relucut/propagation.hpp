#pragma once

#include <cmath>
#include <limits>

#include "relucut/bounds.hpp"
#include "relucut/cuts.hpp"
#include "relucut/rng.hpp"

namespace relucut {

/// Optimizable dual parameters of the cut-aware bound propagation plus the
/// derived backward vectors of the last evaluation.
struct DualState {
  std::vector<Vec> alpha;  // per hidden layer; meaningful at unsplit unstable entries
  std::vector<Vec> mu;     // meaningful at Z+ entries
  std::vector<Vec> tau;    // meaningful at Z- entries
  Vec beta;                // one multiplier per cut row
  long beta_epoch = -1;    // pool structure epoch beta was indexed against

  // Derived by the last bound evaluation.
  std::vector<Vec> nu;       // layers 1..L (nu[L-1] is the scalar -1)
  std::vector<Vec> nu_hat;   // hidden layers; valid at unsplit unstable entries
  std::vector<Vec> pi_star;  // hidden layers; valid at unsplit unstable entries
};

struct DualGradients {
  std::vector<Vec> alpha, mu, tau;
  Vec beta;
};

struct OptimizerConfig {
  int iterations = 20;
  double lr_alpha = 0.1;
  double lr_beta = 0.02;  // shared by beta, mu, tau
  double lr_decay = 0.98;
  double adam_b1 = 0.9;
  double adam_b2 = 0.999;
  double adam_eps = 1e-8;
};

inline DualState make_initial_duals(const ReluNetwork& net, const PreActBounds& bounds,
                                    int cut_rows = 0) {
  DualState d;
  const int hidden = net.layer_count() - 1;
  d.alpha.resize(hidden);
  d.mu.resize(hidden);
  d.tau.resize(hidden);
  for (int i = 1; i <= hidden; ++i) {
    d.alpha[i - 1] = Vec::Zero(net.width(i));
    d.mu[i - 1] = Vec::Zero(net.width(i));
    d.tau[i - 1] = Vec::Zero(net.width(i));
    for (int j = 0; j < net.width(i); ++j)
      if (bounds.s(i, j) == NeuronState::unstable)
        d.alpha[i - 1](j) = detail::heuristic_lower_slope(bounds.l(i, j), bounds.u(i, j));
  }
  d.beta = Vec::Zero(cut_rows);
  return d;
}

/// Extends beta with zero entries for cuts added after the state was created.
inline void resize_beta(DualState& d, int rows) {
  if (d.beta.size() == rows) return;
  if (d.beta.size() > rows) throw std::invalid_argument("cut rows shrank under a live dual state");
  Vec nb = Vec::Zero(rows);
  nb.head(d.beta.size()) = d.beta;
  d.beta = std::move(nb);
}

namespace detail {

inline double col_dot(const Vec& beta, const std::vector<CutMatrixView::Term>& col) {
  double s = 0.0;
  for (const auto& t : col) s += beta(t.row) * t.coeff;
  return s;
}

enum class PiBranch : std::int8_t { zero, interior, cap };
enum class HBranch : std::int8_t { zero, middle, low, split_pos, split_neg, none };

inline void validate_duals(const ReluNetwork& net, const PreActBounds& bounds,
                           const UnstableLayout& layout, const SplitSet& split,
                           const CutMatrixView& cuts, const DualState& d) {
  if (d.beta.size() != cuts.rows) throw std::invalid_argument("beta size does not match cut rows");
  for (Eigen::Index r = 0; r < d.beta.size(); ++r)
    if (!(d.beta(r) >= 0.0)) throw std::invalid_argument("beta must be nonnegative");
  for (int i = 1; i <= net.layer_count() - 1; ++i)
    for (int j = 0; j < net.width(i); ++j) {
      if (bounds.s(i, j) != NeuronState::unstable) continue;
      const int id = layout.id(i, j);
      const int br = split.at(id);
      if (br > 0) {
        if (!(d.mu[i - 1](j) >= 0.0)) throw std::invalid_argument("mu must be nonnegative");
      } else if (br < 0) {
        if (!(d.tau[i - 1](j) >= 0.0)) throw std::invalid_argument("tau must be nonnegative");
      } else {
        const double a = d.alpha[i - 1](j);
        if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("alpha must lie in [0,1]");
      }
    }
}

}  // namespace detail

/// Backward dual bound for the canonical objective under a split set and a
/// shared cut pool. Propagates nu(L) = -1 through the five per-neuron cases
/// (stable active, fixed active via mu, stable inactive, fixed inactive via
/// tau, unstable-unsplit via the clamped pi* and alpha), then assembles
///   g = -eps*|nu1'W1|_1 - nu1'W1 x0 - sum_i nu_i'b_i - beta'd + sum h.
/// Weak duality makes g a sound lower bound for any feasible duals.
/// Fills the derived vectors of `duals`; when `grads` is given, also computes
/// reverse-mode subgradients (breakpoint ties resolved to the interior
/// branch).
inline double gcp_lower_bound(const ReluNetwork& net, const InputSpec& spec,
                              const PreActBounds& bounds, const UnstableLayout& layout,
                              const SplitSet& split, const CutMatrixView& cuts, DualState& duals,
                              DualGradients* grads = nullptr) {
  detail::validate_duals(net, bounds, layout, split, cuts, duals);
  const int L = net.layer_count();
  const int hidden = L - 1;
  const Vec& beta = duals.beta;

  duals.nu.assign(L, Vec());
  duals.nu[L - 1] = Vec::Constant(net.width(L), -1.0);
  duals.nu_hat.assign(hidden, Vec());
  duals.pi_star.assign(hidden, Vec());

  std::vector<std::vector<detail::PiBranch>> pi_branch(hidden);
  std::vector<std::vector<detail::HBranch>> h_branch(hidden);

  double hsum = 0.0;
  for (int i = hidden; i >= 1; --i) {
    const int di = net.width(i);
    const Vec wt = net.layer(i + 1).weights.transpose() * duals.nu[i];  // nu[(i+1)-1]
    Vec nu_i(di);
    duals.nu_hat[i - 1] = Vec::Zero(di);
    duals.pi_star[i - 1] = Vec::Zero(di);
    pi_branch[i - 1].assign(di, detail::PiBranch::zero);
    h_branch[i - 1].assign(di, detail::HBranch::none);

    for (int j = 0; j < di; ++j) {
      const double bH = detail::col_dot(beta, cuts.h_cols[i - 1][j]);
      const double bG = detail::col_dot(beta, cuts.g_cols[i - 1][j]);
      switch (bounds.s(i, j)) {
        case NeuronState::active:
          nu_i(j) = wt(j) - bH - bG;
          break;
        case NeuronState::inactive:
          nu_i(j) = -bH;
          break;
        case NeuronState::unstable: {
          const int id = layout.id(i, j);
          const double bQ = detail::col_dot(beta, cuts.q_cols[id]);
          const int br = split.at(id);
          if (br > 0) {
            nu_i(j) = wt(j) - bH - bG + duals.mu[i - 1](j);
            hsum += bQ;
            h_branch[i - 1][j] = detail::HBranch::split_pos;
          } else if (br < 0) {
            nu_i(j) = -bH - duals.tau[i - 1](j);
            h_branch[i - 1][j] = detail::HBranch::split_neg;
          } else {
            const double l = bounds.l(i, j), u = bounds.u(i, j);
            const double nuhat = wt(j) - bG;
            const double pos = std::max(nuhat, 0.0);
            const double neg = std::min(nuhat, 0.0);
            const double t = (u * pos - bQ) / (u - l);
            double pi;
            if (t < 0.0) {
              pi = 0.0;
              pi_branch[i - 1][j] = detail::PiBranch::zero;
            } else if (t > pos) {
              pi = pos;
              pi_branch[i - 1][j] = detail::PiBranch::cap;
            } else {
              pi = t;
              pi_branch[i - 1][j] = detail::PiBranch::interior;
            }
            duals.nu_hat[i - 1](j) = nuhat;
            duals.pi_star[i - 1](j) = pi;
            nu_i(j) = pi + duals.alpha[i - 1](j) * neg - bH;
            if (bQ > u * pos) {
              h_branch[i - 1][j] = detail::HBranch::zero;
            } else if (bQ < l * pos) {
              hsum += bQ;
              h_branch[i - 1][j] = detail::HBranch::low;
            } else {
              hsum += l * pi;
              h_branch[i - 1][j] = detail::HBranch::middle;
            }
          }
          break;
        }
      }
    }
    duals.nu[i - 1] = std::move(nu_i);
  }

  const Vec s1 = net.layer(1).weights.transpose() * duals.nu[0];
  double g = -spec.radius * s1.cwiseAbs().sum() - s1.dot(spec.center);
  for (int i = 1; i <= L; ++i) g -= duals.nu[i - 1].dot(net.layer(i).bias);
  if (cuts.rows > 0) {
    double bd = 0.0;
    for (int r = 0; r < cuts.rows; ++r) bd += beta(r) * cuts.d[r];
    g -= bd;
  }
  g += hsum;

  if (!grads) return g;

  // Reverse sweep, layers 1..L-1 in ascending order so each nu adjoint is
  // complete before it is pushed upward.
  grads->alpha.assign(hidden, Vec());
  grads->mu.assign(hidden, Vec());
  grads->tau.assign(hidden, Vec());
  for (int i = 1; i <= hidden; ++i) {
    grads->alpha[i - 1] = Vec::Zero(net.width(i));
    grads->mu[i - 1] = Vec::Zero(net.width(i));
    grads->tau[i - 1] = Vec::Zero(net.width(i));
  }
  grads->beta = Vec::Zero(cuts.rows);
  for (int r = 0; r < cuts.rows; ++r) grads->beta(r) = -cuts.d[r];

  std::vector<Vec> anu(L);
  for (int i = 1; i <= L; ++i) anu[i - 1] = -net.layer(i).bias;
  {
    Vec dg_ds1(s1.size());
    for (Eigen::Index k = 0; k < s1.size(); ++k) {
      const double sgn = s1(k) > 0.0 ? 1.0 : (s1(k) < 0.0 ? -1.0 : 0.0);
      dg_ds1(k) = -spec.radius * sgn - spec.center(k);
    }
    anu[0] += net.layer(1).weights * dg_ds1;
  }

  for (int i = 1; i <= hidden; ++i) {
    const int di = net.width(i);
    Vec awt = Vec::Zero(di);
    for (int j = 0; j < di; ++j) {
      const double a = anu[i - 1](j);
      const auto& hc = cuts.h_cols[i - 1][j];
      const auto& gc = cuts.g_cols[i - 1][j];
      switch (bounds.s(i, j)) {
        case NeuronState::active:
          awt(j) += a;
          for (const auto& t : hc) grads->beta(t.row) -= a * t.coeff;
          for (const auto& t : gc) grads->beta(t.row) -= a * t.coeff;
          break;
        case NeuronState::inactive:
          for (const auto& t : hc) grads->beta(t.row) -= a * t.coeff;
          break;
        case NeuronState::unstable: {
          const int id = layout.id(i, j);
          const auto& qc = cuts.q_cols[id];
          const int br = split.at(id);
          if (br > 0) {
            awt(j) += a;
            grads->mu[i - 1](j) += a;
            for (const auto& t : hc) grads->beta(t.row) -= a * t.coeff;
            for (const auto& t : gc) grads->beta(t.row) -= a * t.coeff;
            for (const auto& t : qc) grads->beta(t.row) += t.coeff;  // h = beta'Q
          } else if (br < 0) {
            grads->tau[i - 1](j) -= a;
            for (const auto& t : hc) grads->beta(t.row) -= a * t.coeff;
          } else {
            const double l = bounds.l(i, j), u = bounds.u(i, j);
            const double nuhat = duals.nu_hat[i - 1](j);
            double api = a;
            if (h_branch[i - 1][j] == detail::HBranch::middle) api += l;
            grads->alpha[i - 1](j) += a * std::min(nuhat, 0.0);
            double anuhat = a * duals.alpha[i - 1](j) * (nuhat < 0.0 ? 1.0 : 0.0);
            double abQ = 0.0;
            if (pi_branch[i - 1][j] == detail::PiBranch::interior) {
              anuhat += api * (u / (u - l)) * (nuhat > 0.0 ? 1.0 : 0.0);
              abQ -= api / (u - l);
            } else if (pi_branch[i - 1][j] == detail::PiBranch::cap) {
              anuhat += api * (nuhat > 0.0 ? 1.0 : 0.0);
            }
            if (h_branch[i - 1][j] == detail::HBranch::low) abQ += 1.0;
            if (abQ != 0.0)
              for (const auto& t : qc) grads->beta(t.row) += abQ * t.coeff;
            for (const auto& t : hc) grads->beta(t.row) -= a * t.coeff;
            for (const auto& t : gc) grads->beta(t.row) -= anuhat * t.coeff;
            awt(j) += anuhat;
          }
          break;
        }
      }
    }
    anu[i] += net.layer(i + 1).weights * awt;
  }
  return g;
}

struct OptimizeResult {
  DualState duals;
  double bound = -std::numeric_limits<double>::infinity();
  long nonfinite_gradients = 0;
};

/// Projected momentum/second-moment ascent on (alpha, beta, mu, tau) with the
/// per-group learning rates and geometric decay. Returns the best iterate
/// seen (running max of g); zero iterations returns the init untouched.
inline OptimizeResult optimize_duals(const ReluNetwork& net, const InputSpec& spec,
                                     const PreActBounds& bounds, const UnstableLayout& layout,
                                     const SplitSet& split, const CutMatrixView& cuts,
                                     DualState init, const OptimizerConfig& cfg) {
  const int hidden = net.layer_count() - 1;
  DualState cur = std::move(init);
  resize_beta(cur, cuts.rows);

  OptimizeResult out;
  DualGradients g1, g2;  // Adam first/second moments, reusing the shape
  auto zero_like = [&](DualGradients& m) {
    m.alpha.assign(hidden, Vec());
    m.mu.assign(hidden, Vec());
    m.tau.assign(hidden, Vec());
    for (int i = 1; i <= hidden; ++i) {
      m.alpha[i - 1] = Vec::Zero(net.width(i));
      m.mu[i - 1] = Vec::Zero(net.width(i));
      m.tau[i - 1] = Vec::Zero(net.width(i));
    }
    m.beta = Vec::Zero(cuts.rows);
  };
  zero_like(g1);
  zero_like(g2);

  DualGradients grads;
  double b1t = 1.0, b2t = 1.0;
  for (int step = 0;; ++step) {
    const bool last = step == cfg.iterations;
    const double g = gcp_lower_bound(net, spec, bounds, layout, split, cuts, cur,
                                     last ? nullptr : &grads);
    if (g > out.bound) {
      out.bound = g;
      out.duals = cur;
    }
    if (last) break;

    const double lr_scale = std::pow(cfg.lr_decay, step);
    b1t *= cfg.adam_b1;
    b2t *= cfg.adam_b2;
    auto adam = [&](Vec& param, Vec& m, Vec& v, const Vec& grad, double lr) {
      for (Eigen::Index k = 0; k < param.size(); ++k) {
        double gk = grad(k);
        if (!std::isfinite(gk)) {
          gk = 0.0;
          ++out.nonfinite_gradients;
        }
        m(k) = cfg.adam_b1 * m(k) + (1.0 - cfg.adam_b1) * gk;
        v(k) = cfg.adam_b2 * v(k) + (1.0 - cfg.adam_b2) * gk * gk;
        const double mhat = m(k) / (1.0 - b1t);
        const double vhat = v(k) / (1.0 - b2t);
        param(k) += lr * lr_scale * mhat / (std::sqrt(vhat) + cfg.adam_eps);
      }
    };
    for (int i = 0; i < hidden; ++i) {
      adam(cur.alpha[i], g1.alpha[i], g2.alpha[i], grads.alpha[i], cfg.lr_alpha);
      adam(cur.mu[i], g1.mu[i], g2.mu[i], grads.mu[i], cfg.lr_beta);
      adam(cur.tau[i], g1.tau[i], g2.tau[i], grads.tau[i], cfg.lr_beta);
      cur.alpha[i] = cur.alpha[i].cwiseMax(0.0).cwiseMin(1.0);
      cur.mu[i] = cur.mu[i].cwiseMax(0.0);
      cur.tau[i] = cur.tau[i].cwiseMax(0.0);
    }
    adam(cur.beta, g1.beta, g2.beta, grads.beta, cfg.lr_beta);
    cur.beta = cur.beta.cwiseMax(0.0);
  }
  // Refresh the derived vectors to match the returned iterate.
  gcp_lower_bound(net, spec, bounds, layout, split, cuts, out.duals);
  return out;
}

/// Multi-start ascent: restart 0 is the heuristic init, later restarts are
/// seeded random perturbations. Returns the best result over restarts.
inline OptimizeResult optimize_duals_restarts(const ReluNetwork& net, const InputSpec& spec,
                                              const PreActBounds& bounds,
                                              const UnstableLayout& layout, const SplitSet& split,
                                              const CutMatrixView& cuts, const OptimizerConfig& cfg,
                                              int restarts, std::uint64_t seed) {
  OptimizeResult best;
  Rng rng(seed);
  for (int r = 0; r < restarts; ++r) {
    DualState init = make_initial_duals(net, bounds, cuts.rows);
    if (r > 0) {
      for (auto& a : init.alpha)
        for (Eigen::Index k = 0; k < a.size(); ++k) a(k) = rng.uniform();
      for (auto& m : init.mu)
        for (Eigen::Index k = 0; k < m.size(); ++k) m(k) = 0.5 * rng.uniform();
      for (auto& t : init.tau)
        for (Eigen::Index k = 0; k < t.size(); ++k) t(k) = 0.5 * rng.uniform();
      for (Eigen::Index k = 0; k < init.beta.size(); ++k) init.beta(k) = 0.1 * rng.uniform();
    }
    OptimizeResult res =
        optimize_duals(net, spec, bounds, layout, split, cuts, std::move(init), cfg);
    const long nf = res.nonfinite_gradients;
    if (res.bound > best.bound) {
      const long acc = best.nonfinite_gradients;
      best = std::move(res);
      best.nonfinite_gradients = acc;
    }
    best.nonfinite_gradients += nf;
  }
  return best;
}

}  // namespace relucut
