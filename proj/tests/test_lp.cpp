#include <catch2/catch_amalgamated.hpp>

#include <functional>

#include "test_helpers.hpp"

using namespace relucut;
using namespace testutil;

TEST_CASE("simplex solves the hand examples") {
  SECTION("min x s.t. x >= 2") {
    LinearProgram lp(1);
    lp.objective(0) = 1.0;
    lp.add_row(Vec::Constant(1, 1.0), RowSense::ge, 2.0);
    const LpSolution s = simplex_solve(lp);
    REQUIRE(s.status == LpStatus::optimal);
    CHECK(s.objective == Catch::Approx(2.0));
  }
  SECTION("min x+y s.t. x+y >= 1, x,y in [0,1]") {
    LinearProgram lp(2);
    lp.objective << 1.0, 1.0;
    lp.var_lo << 0.0, 0.0;
    lp.var_hi << 1.0, 1.0;
    lp.add_row((Vec(2) << 1.0, 1.0).finished(), RowSense::ge, 1.0);
    const LpSolution s = simplex_solve(lp);
    REQUIRE(s.status == LpStatus::optimal);
    CHECK(s.objective == Catch::Approx(1.0));
  }
  SECTION("infeasible box") {
    LinearProgram lp(1);
    lp.objective(0) = 1.0;
    lp.var_lo(0) = 0.0;
    lp.var_hi(0) = 1.0;
    lp.add_row(Vec::Constant(1, 1.0), RowSense::ge, 2.0);
    CHECK(simplex_solve(lp).status == LpStatus::infeasible);
  }
  SECTION("unbounded direction") {
    LinearProgram lp(1);
    lp.objective(0) = 1.0;  // min x, x free, no rows
    CHECK(simplex_solve(lp).status == LpStatus::unbounded);
  }
  SECTION("free variables and equalities") {
    // min y - x s.t. x + y = 1, x - y <= 3, both free.
    LinearProgram lp(2);
    lp.objective << -1.0, 1.0;
    lp.add_row((Vec(2) << 1.0, 1.0).finished(), RowSense::eq, 1.0);
    lp.add_row((Vec(2) << 1.0, -1.0).finished(), RowSense::le, 3.0);
    const LpSolution s = simplex_solve(lp);
    REQUIRE(s.status == LpStatus::optimal);
    CHECK(s.objective == Catch::Approx(-3.0));
  }
}

TEST_CASE("simplex agrees with brute-force vertex enumeration on random LPs") {
  Rng rng(77);
  int solved = 0;
  while (solved < 50) {
    const int n = 2 + static_cast<int>(rng.uniform_int(3));  // 2..4 vars
    const int m = 2 + static_cast<int>(rng.uniform_int(5));  // 2..6 rows
    LinearProgram lp(n);
    for (int k = 0; k < n; ++k) {
      lp.objective(k) = rng.uniform(-1, 1);
      lp.var_lo(k) = rng.uniform(-2, 0);
      lp.var_hi(k) = lp.var_lo(k) + rng.uniform(0.5, 3.0);
    }
    for (int r = 0; r < m; ++r) {
      Vec row(n);
      for (int k = 0; k < n; ++k) row(k) = rng.uniform(-1, 1);
      const double rhs = rng.uniform(-1, 1.5);
      lp.add_row(std::move(row), rng.uniform() < 0.4 ? RowSense::ge : RowSense::le, rhs);
    }
    const LpSolution ref = brute_force_lp(lp);
    const LpSolution got = simplex_solve(lp);
    REQUIRE(got.status != LpStatus::unbounded);  // box-bounded by construction
    CHECK(got.status == ref.status);
    if (ref.status != LpStatus::optimal) continue;
    ++solved;
    CHECK(got.objective == Catch::Approx(ref.objective).margin(1e-6));
    // The minimizer must be primal feasible.
    for (int r = 0; r < lp.num_rows(); ++r) {
      const double lhs = lp.rows[r].dot(got.x);
      if (lp.sense[r] == RowSense::le) CHECK(lhs <= lp.rhs[r] + 1e-7);
      if (lp.sense[r] == RowSense::ge) CHECK(lhs >= lp.rhs[r] - 1e-7);
    }
  }
}

TEST_CASE("simplex is deterministic") {
  Rng rng(123);
  LinearProgram lp(4);
  for (int k = 0; k < 4; ++k) {
    lp.objective(k) = rng.uniform(-1, 1);
    lp.var_lo(k) = -1;
    lp.var_hi(k) = 1;
  }
  for (int r = 0; r < 5; ++r) {
    Vec row(4);
    for (int k = 0; k < 4; ++k) row(k) = rng.uniform(-1, 1);
    lp.add_row(std::move(row), RowSense::le, 0.5);
  }
  const LpSolution a = simplex_solve(lp);
  const LpSolution b = simplex_solve(lp);
  REQUIRE(a.status == b.status);
  CHECK(a.objective == b.objective);  // bitwise
  CHECK(a.x == b.x);
}

TEST_CASE("degenerate LPs terminate") {
  // Many redundant constraints through the same vertex.
  LinearProgram lp(2);
  lp.objective << -1.0, -1.0;
  lp.var_lo << 0.0, 0.0;
  lp.var_hi << 10.0, 10.0;
  for (int k = 0; k < 6; ++k)
    lp.add_row((Vec(2) << 1.0, static_cast<double>(k)).finished(), RowSense::le, 1.0);
  const LpSolution s = simplex_solve(lp);
  REQUIRE(s.status == LpStatus::optimal);
  CHECK(s.objective == Catch::Approx(-1.0));  // max x+y = 1 on this fan of rows
}

TEST_CASE("lp text dump round-trips the structure") {
  LinearProgram lp(2);
  lp.objective << 1.0, 2.0;
  lp.add_row((Vec(2) << 1.0, -1.0).finished(), RowSense::ge, 0.25);
  const std::string text = lp_to_text(lp);
  CHECK(text.find("minimize 1 2") != std::string::npos);
  CHECK(text.find(">= 0.25") != std::string::npos);
}
