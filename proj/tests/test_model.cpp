#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "test_helpers.hpp"

using namespace relucut;
using namespace testutil;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const auto dir = std::filesystem::temp_directory_path() / "relucut_model_tests";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / name).string();
  std::ofstream(path) << content;
  return path;
}

}  // namespace

TEST_CASE("load_instance accepts the minimal instance") {
  const std::string net = write_temp("t1_net.json",
                                     R"({"layers": [{"weights": [[1.0]], "bias": [0.0]},
                                                    {"weights": [[1.0]], "bias": [0.0]}]})");
  const std::string spec =
      write_temp("t1_spec.json", R"({"x0": [0.0], "eps": 1.0, "c": [1.0], "c0": 0.0})");
  auto [network, input, prop] = load_instance(net, spec);
  CHECK(network.layer_count() == 2);
  CHECK(network.input_dim() == 1);
  CHECK(input.radius == 1.0);
  CHECK(prop.c0 == 0.0);
}

TEST_CASE("load_instance rejects layer dimension mismatches") {
  const std::string net = write_temp("bad_net.json",
                                     R"({"layers": [{"weights": [[1.0]], "bias": [0.0]},
                                                    {"weights": [[1.0, 2.0]], "bias": [0.0]}]})");
  const std::string spec =
      write_temp("bad_spec.json", R"({"x0": [0.0], "eps": 1.0, "c": [1.0], "c0": 0.0})");
  CHECK_THROWS_WITH(load_instance(net, spec), Catch::Matchers::ContainsSubstring("layer 2"));
}

TEST_CASE("load rejects malformed documents and non-finite values") {
  const std::string garbled = write_temp("garbled.json", "{\"layers\": [");
  CHECK_THROWS_AS(load_network(garbled), ParseError);
  const std::string nan_spec =
      write_temp("nan_spec.json", R"({"x0": [0.0], "eps": 1e999, "c": [1.0], "c0": 0.0})");
  CHECK_THROWS_AS(load_spec(nan_spec), ParseError);
  const std::string neg_eps =
      write_temp("neg_eps.json", R"({"x0": [0.0], "eps": -0.5, "c": [1.0], "c0": 0.0})");
  CHECK_THROWS_AS(load_spec(neg_eps), ParseError);
}

TEST_CASE("random fixture round-trips through files and matches the reference forward pass") {
  Rng rng(7);
  const ReluNetwork net = random_network({2, 16, 16, 2}, rng);
  const auto dir = std::filesystem::temp_directory_path() / "relucut_model_tests";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "seed7_net.json").string();
  write_json_file(path, network_to_json(net));
  const ReluNetwork loaded = load_network(path);

  Rng points(1234);
  for (int k = 0; k < 20; ++k) {
    Vec x(2);
    x << points.uniform(-1, 1), points.uniform(-1, 1);
    const Vec got = forward_outputs(loaded, x);
    const std::vector<double> want = reference_forward(net, x);
    REQUIRE(got.size() == static_cast<Eigen::Index>(want.size()));
    for (Eigen::Index i = 0; i < got.size(); ++i) CHECK(got(i) == Catch::Approx(want[i]).margin(1e-12));
  }
}

TEST_CASE("evaluate handles the T1 examples") {
  const ReluNetwork net = t1_network();
  CHECK(evaluate(net, Vec::Constant(1, 0.7)) == Catch::Approx(0.7));
  CHECK(evaluate(net, Vec::Constant(1, -0.3)) == 0.0);
  CHECK_THROWS_AS(evaluate(net, Vec::Zero(2)), std::invalid_argument);
}

TEST_CASE("canonicalize folds the property row") {
  const ReluNetwork net = t1_network();
  SECTION("identity fold") {
    const ReluNetwork canon = canonicalize(net, t1_property());
    CHECK(canon.layer(2).weights(0, 0) == 1.0);
    CHECK(canon.layer(2).bias(0) == 0.0);
  }
  SECTION("bias shift") {
    const ReluNetwork canon = canonicalize(net, t1_property(0.5));
    CHECK(evaluate(canon, Vec::Constant(1, 0.25)) == Catch::Approx(0.75));
    CHECK(evaluate(canon, Vec::Constant(1, -1.0)) == Catch::Approx(0.5));
  }
}

TEST_CASE("canonicalize commutes with evaluation on a margin property") {
  Rng rng(7);
  const ReluNetwork net = random_network({2, 16, 16, 2}, rng);
  PropertySpec prop;
  prop.c = (Vec(2) << 1.0, -1.0).finished();
  prop.c0 = 0.25;
  const ReluNetwork canon = canonicalize(net, prop);
  Rng points(99);
  for (int k = 0; k < 100; ++k) {
    Vec x(2);
    x << points.uniform(-2, 2), points.uniform(-2, 2);
    const Vec outs = forward_outputs(net, x);
    const double want = prop.c.dot(outs) + prop.c0;
    CHECK(evaluate(canon, x) == Catch::Approx(want).margin(1e-12));
  }
}

TEST_CASE("evaluate is affine within an activation region") {
  Rng rng(7);
  const ReluNetwork raw = random_network({2, 16, 16, 2}, rng);
  PropertySpec prop;
  prop.c = (Vec(2) << 1.0, -1.0).finished();
  const ReluNetwork net = canonicalize(raw, prop);
  InputSpec in;
  in.center = Vec::Zero(2);
  in.radius = 0.5;
  const PreActBounds bounds = compute_preact_bounds(net, in);
  const UnstableLayout layout = make_layout(bounds);

  Rng points(31);
  int checked = 0;
  while (checked < 25) {
    const Vec a = random_point_in_ball(in, points);
    Vec dir(2);
    dir << points.uniform(-1, 1), points.uniform(-1, 1);
    const Vec b = a + 1e-3 * dir;
    const Vec mid = 0.5 * (a + b);
    const auto pa = activation_pattern(net, layout, a);
    const auto pb = activation_pattern(net, layout, b);
    if (pa.active != pb.active) continue;
    ++checked;
    const double expect = 0.5 * (evaluate(net, a) + evaluate(net, b));
    CHECK(evaluate(net, mid) == Catch::Approx(expect).margin(1e-9));
  }
}

TEST_CASE("activation_pattern records the T1 branch") {
  const ReluNetwork net = t1_network();
  const InputSpec in = t1_input();
  const PreActBounds bounds = compute_preact_bounds(canonicalize(net, t1_property()), in);
  const UnstableLayout layout = make_layout(bounds);
  REQUIRE(layout.count() == 1);
  CHECK(activation_pattern(net, layout, Vec::Constant(1, 0.5)).active[0] == 1);
  CHECK(activation_pattern(net, layout, Vec::Constant(1, -0.5)).active[0] == 0);
  // Tie at zero counts as active.
  CHECK(activation_pattern(net, layout, Vec::Zero(1)).active[0] == 1);
}

TEST_CASE("patterns drive region LPs that reproduce point evaluations") {
  Rng rng(7);
  RandomInstance inst = random_instance({2, 8, 1}, rng, 12);
  Rng points(5);
  for (int k = 0; k < 20; ++k) {
    const Vec x = random_point_in_ball(inst.input, points);
    const ActivationPattern pat = activation_pattern(inst.net, inst.layout, x);
    std::vector<std::int8_t> branch(inst.layout.count());
    for (int id = 0; id < inst.layout.count(); ++id) branch[id] = pat.active[id] ? 1 : -1;
    // Pin the region LP's objective to the pattern's affine piece at x by
    // minimizing over the singleton {x}: reuse the region LP with a shrunk
    // box.
    InputSpec point = inst.input;
    point.center = x;
    point.radius = 0.0;
    const LpSolution sol = pattern_region_lp(inst.net, point, inst.bounds, inst.layout, branch);
    REQUIRE(sol.status == LpStatus::optimal);
    CHECK(sol.objective == Catch::Approx(evaluate(inst.net, x)).margin(1e-8));
  }
}
