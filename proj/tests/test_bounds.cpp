#include <catch2/catch_amalgamated.hpp>

#include "test_helpers.hpp"

using namespace relucut;
using namespace testutil;

TEST_CASE("T1 pre-activation bounds straddle zero") {
  const ReluNetwork net = canonicalize(t1_network(), t1_property());
  const PreActBounds b = compute_preact_bounds(net, t1_input());
  REQUIRE(b.hidden_layers() == 1);
  CHECK(b.l(1, 0) == Catch::Approx(-1.0));
  CHECK(b.u(1, 0) == Catch::Approx(1.0));
  CHECK(b.s(1, 0) == NeuronState::unstable);
}

TEST_CASE("degenerate ball classifies the boundary neuron active") {
  const ReluNetwork net = canonicalize(t1_network(), t1_property());
  InputSpec in = t1_input();
  in.radius = 0.0;
  const PreActBounds b = compute_preact_bounds(net, in);
  CHECK(b.l(1, 0) == 0.0);
  CHECK(b.u(1, 0) == 0.0);
  CHECK(b.s(1, 0) == NeuronState::active);  // l >= 0 wins the boundary
}

TEST_CASE("bounds are sound on 500 sampled points") {
  Rng rng(7);
  const ReluNetwork raw = random_network({2, 16, 16, 2}, rng);
  PropertySpec prop;
  prop.c = (Vec(2) << 1.0, -1.0).finished();
  const ReluNetwork net = canonicalize(raw, prop);
  InputSpec in;
  in.center = (Vec(2) << 0.1, -0.2).finished();
  in.radius = 0.25;
  const PreActBounds b = compute_preact_bounds(net, in);

  Rng points(2024);
  for (int k = 0; k < 500; ++k) {
    const Vec x = random_point_in_ball(in, points);
    for (int i = 1; i <= b.hidden_layers(); ++i) {
      const Vec pre = preactivation(net, x, i);
      for (Eigen::Index j = 0; j < pre.size(); ++j) {
        CHECK(pre(j) >= b.l(i, static_cast<int>(j)) - 1e-9);
        CHECK(pre(j) <= b.u(i, static_cast<int>(j)) + 1e-9);
      }
    }
  }
}

TEST_CASE("classification follows the boundary rules") {
  CHECK(classify_neuron(-1.0, 1.0) == NeuronState::unstable);
  CHECK(classify_neuron(0.0, 2.0) == NeuronState::active);
  CHECK(classify_neuron(-2.0, 0.0) == NeuronState::inactive);
  // Near-degenerate unstable intervals are reclassified before propagation.
  CHECK(classify_neuron(-1e-14, 1e-14) == NeuronState::inactive);
}

TEST_CASE("classify_neurons partitions every layer") {
  Rng rng(55);
  PreActBounds b;
  b.lower.push_back(Vec(10));
  b.upper.push_back(Vec(10));
  for (int j = 0; j < 10; ++j) {
    const double a = rng.uniform(-1, 1), c = rng.uniform(-1, 1);
    b.lower[0](j) = std::min(a, c);
    b.upper[0](j) = std::max(a, c);
  }
  b.reclassify();
  const StabilityPartition p = classify_neurons(b);
  std::vector<int> seen(10, 0);
  for (int j : p.active[0]) ++seen[j];
  for (int j : p.inactive[0]) ++seen[j];
  for (int j : p.unstable[0]) ++seen[j];
  for (int j = 0; j < 10; ++j) CHECK(seen[j] == 1);
}

TEST_CASE("layout indexes exactly the unstable set") {
  Rng rng(7);
  RandomInstance inst = random_instance({2, 8, 8, 1}, rng);
  int unstable = 0;
  for (int i = 1; i <= inst.bounds.hidden_layers(); ++i)
    for (Eigen::Index j = 0; j < inst.bounds.lower[i - 1].size(); ++j) {
      const int id = inst.layout.id(i, static_cast<int>(j));
      if (inst.bounds.s(i, static_cast<int>(j)) == NeuronState::unstable) {
        ++unstable;
        CHECK(id >= 0);
        CHECK(inst.layout.ref(id).layer == i);
        CHECK(inst.layout.ref(id).index == static_cast<int>(j));
      } else {
        CHECK(id == -1);
      }
    }
  CHECK(unstable == inst.layout.count());
}
