#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>
#include <string>

#include "dirand/conic.hpp"
#include "dirand/errors.hpp"

using namespace dirand::conic;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// maximise <C, X> over 2x2 PSD X with unit trace; X = [[y0, y1], [y1, y2]].
ConicProgram eigen_program(double c00, double c01, double c11) {
  ConicProgram p(3, Sense::maximise);
  p.objective = {c00, 2.0 * c01, c11};
  p.add_equality({{0, 1.0}, {2, 1.0}}, 1.0);
  p.psdBlocks.push_back(PsdBlock::from_index_map(2, {0, 1, 1, 2}));
  return p;
}

}  // namespace

TEST_CASE("a fixed scalar in a 1x1 block", "[conic]") {
  ConicProgram p(1, Sense::minimise);
  p.objective = {1.0};
  p.add_equality({{0, 1.0}}, 3.0);
  p.psdBlocks.push_back(PsdBlock::from_index_map(1, {0}));
  const auto sol = solve(p);
  REQUIRE(sol.optimal());
  CHECK_THAT(sol.objective, WithinAbs(3.0, 1e-7));
  CHECK_THAT(sol.primal[0], WithinAbs(3.0, 1e-7));
}

TEST_CASE("unit-trace PSD matrix against diag(1, 0)", "[conic]") {
  const auto sol = solve(eigen_program(1.0, 0.0, 0.0));
  REQUIRE(sol.optimal());
  CHECK_THAT(sol.objective, WithinAbs(1.0, 1e-7));
}

TEST_CASE("largest eigenvalue of random symmetric matrices", "[conic]") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  for (int k = 0; k < 10; ++k) {
    const double a = n(rng), b = n(rng), c = n(rng);
    // Closed form for a 2x2 symmetric matrix.
    const double lmax = 0.5 * (a + c) + std::sqrt(0.25 * (a - c) * (a - c) + b * b);
    const auto sol = solve(eigen_program(a, b, c));
    REQUIRE(sol.optimal());
    CHECK_THAT(sol.objective, WithinAbs(lmax, 1e-6));
    CHECK_THAT(reconstructed_dual_objective(eigen_program(a, b, c), sol), WithinAbs(sol.objective, 1e-6));
  }
}

TEST_CASE("an empty feasible set is reported infeasible", "[conic]") {
  ConicProgram p(1, Sense::minimise);
  p.objective = {1.0};
  p.add_equality({{0, 1.0}}, -1.0);
  p.psdBlocks.push_back(PsdBlock::from_index_map(1, {0}));
  const auto sol = solve(p);
  CHECK_FALSE(sol.optimal());
  CHECK(sol.status == Status::infeasible);
}

TEST_CASE("relative entropy of two fixed numbers", "[conic]") {
  // minimise w subject to 2 ln(2/1) <= w.
  ConicProgram p(1, Sense::minimise);
  p.objective = {1.0};
  p.expCones.push_back({AffineExpr::value(1.0), AffineExpr::value(2.0), AffineExpr::variable(0)});
  const auto sol = solve(p);
  REQUIRE(sol.optimal());
  CHECK_THAT(sol.objective, WithinAbs(2.0 * std::log(2.0), 1e-6));
}

TEST_CASE("relative entropy minimised over a simplex", "[conic]") {
  // min_q sum_i p_i ln(p_i / q_i) over q in the simplex is 0 at q = p.
  const double pv[3] = {0.2, 0.3, 0.5};
  ConicProgram p(6, Sense::minimise);  // q0..q2, w0..w2
  for (int i = 0; i < 3; ++i) {
    p.objective[3 + i] = 1.0;
    p.expCones.push_back({AffineExpr::variable(i), AffineExpr::value(pv[i]), AffineExpr::variable(3 + i)});
  }
  p.add_equality({{0, 1.0}, {1, 1.0}, {2, 1.0}}, 1.0);
  const auto sol = solve(p);
  REQUIRE(sol.optimal());
  CHECK_THAT(sol.objective, WithinAbs(0.0, 1e-6));
  for (int i = 0; i < 3; ++i) CHECK_THAT(sol.primal[i], WithinAbs(pv[i], 1e-4));
}

TEST_CASE("solving twice is deterministic", "[conic]") {
  const auto a = solve(eigen_program(0.3, -0.7, 1.1));
  const auto b = solve(eigen_program(0.3, -0.7, 1.1));
  REQUIRE(a.optimal());
  CHECK(std::abs(a.objective - b.objective) <= 10.0 * ToleranceConfig{}.gap);
}

TEST_CASE("optimal solutions honour the tolerances", "[conic]") {
  const ToleranceConfig tol;
  const auto sol = solve(eigen_program(2.0, 0.5, -1.0));
  REQUIRE(sol.optimal());
  CHECK(sol.gap <= tol.gap);
  CHECK(sol.primalResidual <= tol.feasibility);
  CHECK_FALSE(sol.reducedAccuracy);
}

TEST_CASE("malformed programs are rejected", "[conic]") {
  ConicProgram p(1, Sense::minimise);
  p.objective = {1.0};
  p.add_equality({{3, 1.0}}, 1.0);
  CHECK_THROWS_AS(p.validate(), dirand::InvalidArgument);
  CHECK_THROWS_AS(PsdBlock::from_index_map(2, {0, 1, 2, 3}), dirand::InvalidArgument);
}

TEST_CASE("sparse dump lists every nonzero", "[conic]") {
  std::ostringstream os;
  write_sparse_dump(eigen_program(1.0, 0.0, 0.0), os);
  const std::string text = os.str();
  CHECK(text.find("obj 0 1") != std::string::npos);
  CHECK(text.find("eq 0 2 1") != std::string::npos);
  CHECK(text.find("rhs 0 1") != std::string::npos);
  CHECK(text.find("psd 0 0 1 1 1") != std::string::npos);
}
