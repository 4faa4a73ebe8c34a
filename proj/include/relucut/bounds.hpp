#pragma once

#include <cstdint>
#include <vector>

#include "relucut/model.hpp"

namespace relucut {

enum class NeuronState : std::int8_t { active, inactive, unstable };

/// Bounds below which an interval is treated as degenerate and the neuron is
/// reclassified stable (guards the u/(u-l) divisions downstream).
inline constexpr double kDegenerateWidth = 1e-12;

inline NeuronState classify_neuron(double l, double u) {
  if (l >= 0.0) return NeuronState::active;
  if (u <= 0.0) return NeuronState::inactive;
  if (u - l < kDegenerateWidth) return NeuronState::inactive;
  return NeuronState::unstable;
}

/// Sound pre-activation intervals for the hidden layers 1..L-1 plus the
/// derived stability classification.
struct PreActBounds {
  std::vector<Vec> lower, upper;                   // index i-1 holds layer i
  std::vector<std::vector<NeuronState>> state;

  int hidden_layers() const { return static_cast<int>(lower.size()); }
  double l(int layer, int j) const { return lower[layer - 1](j); }
  double u(int layer, int j) const { return upper[layer - 1](j); }
  NeuronState s(int layer, int j) const { return state[layer - 1][j]; }

  void reclassify() {
    state.assign(lower.size(), {});
    for (size_t i = 0; i < lower.size(); ++i) {
      state[i].resize(lower[i].size());
      for (Eigen::Index j = 0; j < lower[i].size(); ++j)
        state[i][j] = classify_neuron(lower[i](j), upper[i](j));
    }
  }

  int count_unstable() const {
    int n = 0;
    for (const auto& layer : state)
      for (NeuronState s : layer)
        if (s == NeuronState::unstable) ++n;
    return n;
  }
};

/// Partition of a layer per the stability rule; `classify_neurons` view.
struct StabilityPartition {
  std::vector<std::vector<int>> active, inactive, unstable;  // per hidden layer
};

inline StabilityPartition classify_neurons(const PreActBounds& b) {
  StabilityPartition p;
  p.active.resize(b.hidden_layers());
  p.inactive.resize(b.hidden_layers());
  p.unstable.resize(b.hidden_layers());
  for (int i = 1; i <= b.hidden_layers(); ++i)
    for (Eigen::Index j = 0; j < b.lower[i - 1].size(); ++j) switch (b.s(i, j)) {
        case NeuronState::active: p.active[i - 1].push_back(static_cast<int>(j)); break;
        case NeuronState::inactive: p.inactive[i - 1].push_back(static_cast<int>(j)); break;
        case NeuronState::unstable: p.unstable[i - 1].push_back(static_cast<int>(j)); break;
      }
  return p;
}

struct NeuronRef {
  int layer = 0;  // 1..L-1
  int index = 0;
  friend bool operator==(const NeuronRef&, const NeuronRef&) = default;
};

/// Dense id space over the initially-unstable neurons; ids are stable for the
/// lifetime of a verification run and index cuts, splits and patterns.
struct UnstableLayout {
  std::vector<NeuronRef> neurons;        // id -> (layer, index)
  std::vector<std::vector<int>> id_of;   // [layer-1][index] -> id or -1

  int count() const { return static_cast<int>(neurons.size()); }
  int id(int layer, int index) const { return id_of[layer - 1][index]; }
  NeuronRef ref(int id) const { return neurons[id]; }
};

inline UnstableLayout make_layout(const PreActBounds& b) {
  UnstableLayout ly;
  ly.id_of.resize(b.hidden_layers());
  for (int i = 1; i <= b.hidden_layers(); ++i) {
    ly.id_of[i - 1].assign(b.lower[i - 1].size(), -1);
    for (Eigen::Index j = 0; j < b.lower[i - 1].size(); ++j)
      if (b.s(i, static_cast<int>(j)) == NeuronState::unstable) {
        ly.id_of[i - 1][j] = ly.count();
        ly.neurons.push_back(NeuronRef{i, static_cast<int>(j)});
      }
  }
  return ly;
}

/// BaB split assignment over the initially-unstable neurons:
/// +1 fixed active (z=1), -1 fixed inactive (z=0), 0 unsplit.
struct SplitSet {
  std::vector<std::int8_t> branch;
  int split_count = 0;

  explicit SplitSet(int unstable_count = 0) : branch(unstable_count, 0) {}

  bool is_split(int id) const { return branch[id] != 0; }
  std::int8_t at(int id) const { return branch[id]; }
  int size() const { return split_count; }

  void fix(int id, std::int8_t sign) {
    if (sign != 1 && sign != -1) throw std::invalid_argument("split sign must be +1 or -1");
    if (branch[id] != 0) throw std::invalid_argument("neuron already split");
    branch[id] = sign;
    ++split_count;
  }

  void release(int id) {
    if (branch[id] == 0) throw std::invalid_argument("neuron not split");
    branch[id] = 0;
    --split_count;
  }

  friend bool operator==(const SplitSet&, const SplitSet&) = default;
};

namespace detail {

/// Lower slope used when α is not being optimized (and as the α init).
inline double heuristic_lower_slope(double l, double u) { return u >= -l ? 1.0 : 0.0; }

// One backward layer step of the CROWN pass: replaces coefficients over
// post-activations x̂(m) by coefficients over x̂(m-1), accumulating the
// intercepts picked up at ReLU m and the affine bias of layer m.
inline void crown_backward_step(const ReluNetwork& net, const PreActBounds& bounds, int m,
                                bool want_lower, Mat& A, Vec& c) {
  const Vec& l = bounds.lower[m - 1];
  const Vec& u = bounds.upper[m - 1];
  Mat D = A;  // reuse shape; will hold A with ReLU relaxation applied
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      const double a = A(r, j);
      switch (bounds.s(m, static_cast<int>(j))) {
        case NeuronState::active: D(r, j) = a; break;
        case NeuronState::inactive: D(r, j) = 0.0; break;
        case NeuronState::unstable: {
          const double lo = l(j), hi = u(j);
          const double up_slope = hi / (hi - lo);
          const double up_icpt = -hi * lo / (hi - lo);
          const double lo_slope = heuristic_lower_slope(lo, hi);
          const bool take_lower_relax = want_lower ? (a >= 0.0) : (a < 0.0);
          if (take_lower_relax) {
            D(r, j) = a * lo_slope;
          } else {
            D(r, j) = a * up_slope;
            c(r) += a * up_icpt;
          }
          break;
        }
      }
    }
  }
  c += D * net.layer(m).bias;
  A = D * net.layer(m).weights;
}

}  // namespace detail

/// Backward bound propagation for the pre-activations of every hidden layer,
/// computed layer by layer from the input side with the fixed slope heuristic.
inline PreActBounds compute_preact_bounds(const ReluNetwork& net, const InputSpec& spec) {
  spec.validate(net);
  PreActBounds b;
  const int L = net.layer_count();
  b.lower.reserve(L - 1);
  b.upper.reserve(L - 1);
  b.state.reserve(L - 1);
  for (int k = 1; k <= L - 1; ++k) {
    Mat Alo = net.layer(k).weights, Aup = net.layer(k).weights;
    Vec clo = net.layer(k).bias, cup = net.layer(k).bias;
    for (int m = k - 1; m >= 1; --m) {
      detail::crown_backward_step(net, b, m, /*want_lower=*/true, Alo, clo);
      detail::crown_backward_step(net, b, m, /*want_lower=*/false, Aup, cup);
    }
    const int dk = net.width(k);
    Vec lo(dk), up(dk);
    for (int r = 0; r < dk; ++r) {
      lo(r) = Alo.row(r).dot(spec.center) - spec.radius * Alo.row(r).cwiseAbs().sum() + clo(r);
      up(r) = Aup.row(r).dot(spec.center) + spec.radius * Aup.row(r).cwiseAbs().sum() + cup(r);
    }
    b.lower.push_back(std::move(lo));
    b.upper.push_back(std::move(up));
    b.state.emplace_back();
    b.state.back().resize(dk);
    for (int r = 0; r < dk; ++r) b.state.back()[r] = classify_neuron(b.lower.back()(r), b.upper.back()(r));
  }
  return b;
}

/// Active/inactive assignment of the initially-unstable neurons at a point.
/// Ties at exactly zero pre-activation count as active.
struct ActivationPattern {
  std::vector<std::uint8_t> active;  // indexed by layout id
};

inline ActivationPattern activation_pattern(const ReluNetwork& net, const UnstableLayout& layout,
                                            const Vec& x) {
  if (x.size() != net.input_dim()) throw std::invalid_argument("activation_pattern: dimension mismatch");
  ActivationPattern p;
  p.active.assign(layout.count(), 0);
  Vec v = x;
  for (int i = 1; i <= net.layer_count() - 1; ++i) {
    v = net.layer(i).weights * v + net.layer(i).bias;
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      const int id = layout.id(i, static_cast<int>(j));
      if (id >= 0) p.active[id] = v(j) >= 0.0 ? 1 : 0;
    }
    v = v.cwiseMax(0.0);
  }
  return p;
}

inline ActivationPattern activation_pattern(const ReluNetwork& net, const PreActBounds& bounds,
                                            const Vec& x) {
  return activation_pattern(net, make_layout(bounds), x);
}

}  // namespace relucut
