#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "dirand/bound.hpp"
#include "dirand/errors.hpp"
#include "dirand/simulate.hpp"

using namespace dirand;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const MomentStructure& level2() {
  static const MomentStructure s = build_structure(2);
  return s;
}

const double kSqrt2 = std::sqrt(2.0);

BellExpression chsh_with_bounds() { return BellExpression(chsh().coefficients(), {2.0, 2.0 * kSqrt2, -2.0 * kSqrt2, 2}); }

}  // namespace

TEST_CASE("nu from coefficients over input weights", "[bound]") {
  const BellExpression e = chsh_with_bounds();
  CHECK_THAT(nu(e, {0.25, 0.25, 0.25, 0.25}), WithinAbs(4.0 + 2.0 * kSqrt2, 1e-12));
  const double third = 1.0 / 30.0;
  CHECK_THAT(nu(e, {0.9, third, third, third}), WithinAbs(30.0 + 2.0 * kSqrt2, 1e-9));
  const BellExpression zero(Tensor16{}, {0.0, 0.0, 0.0, 2});
  CHECK(nu(zero, {0.1, 0.2, 0.3, 0.4}) == 0.0);
  CHECK_THROWS_AS(nu(chsh(), {0.25, 0.25, 0.25, 0.25}), MissingBounds);
}

TEST_CASE("mu", "[bound]") {
  CHECK_THAT(mu(6.828427, 1e8, 1e-6), WithinAbs(3.5894e-3, 1e-7));
  CHECK(mu(0.0, 100.0, 1e-6) == 0.0);
  CHECK(mu(6.8, 1e6, 1.0 - 1e-12) < 1e-8);
  CHECK_THROWS_AS(mu(1.0, 0.0, 0.5), InvalidArgument);
  CHECK_THROWS_AS(mu(1.0, 10.0, 1.0), InvalidArgument);
}

TEST_CASE("gamma counts rounds outside chi", "[bound]") {
  std::vector<Round> rounds(10);
  for (int k = 0; k < 3; ++k) rounds[k].x = 1;
  CHECK(gamma(rounds, InputPairSet::single(0, 0)) == 3);
  CHECK(gamma(rounds, InputPairSet::all()) == 0);
  CHECK(gamma(std::vector<Round>(5), InputPairSet::single(0, 0)) == 0);
  const CountTable t = tally_rounds(rounds, {0.25, 0.25, 0.25, 0.25});
  CHECK(gamma(t, InputPairSet::single(0, 0)) == 3);
  CHECK(gamma(t, InputPairSet(0x5u)) == 0);  // pairs 00 and 10
}

TEST_CASE("thresholds split [I_L, I_Q+] evenly", "[bound]") {
  const auto j = thresholds({2.0, 2.0 * kSqrt2, -2.0 * kSqrt2, 2}, 999);
  REQUIRE(j.size() == 1000);
  CHECK(j.front() == 2.0);
  CHECK_THAT(j.back(), WithinAbs(2.0 * kSqrt2, 1e-15));
  CHECK_THAT(j[500] - j[499], WithinAbs((2.0 * kSqrt2 - 2.0) / 999.0, 1e-15));
}

TEST_CASE("RB function on CHSH", "[bound]") {
  const auto one = InputPairSet::single(0, 0);
  const BellExpression e = chsh_with_bounds();
  CHECK(rb_eval(e, one, level2(), 2.0) == 0.0);
  CHECK(rb_eval(e, one, level2(), 1.0) == 0.0);
  CHECK_THAT(rb_eval(e, one, level2(), 2.0 * kSqrt2), WithinAbs(1.2284, 3e-3));
  const double mid = rb_eval(e, one, level2(), 2.5);
  CHECK(mid > 0.0);
  CHECK(mid < 1.2284);
  CHECK_THROWS_AS(rb_eval(e, one, level2(), 2.9), InfeasibleValue);
  for (auto [v1, v2] : {std::pair{2.1, 2.7}, std::pair{2.2, 2.8}, std::pair{2.0, 2.6}}) {
    const double hm = rb_eval(e, one, level2(), 0.5 * (v1 + v2));
    CHECK(hm <= 0.5 * (rb_eval(e, one, level2(), v1) + rb_eval(e, one, level2(), v2)) + 1e-6);
  }
}

TEST_CASE("eta on CHSH and on the zero expression", "[bound]") {
  const double e1 = eta(chsh_with_bounds(), InputPairSet::single(0, 0), level2());
  CHECK_THAT(e1, WithinAbs(1.2284, 3e-3));
  // Below I_L the RB function is 0, so the I_Q- end is read off G directly.
  const double atMin = -std::log2(guessing_bell(chsh_with_bounds(), -2.0 * kSqrt2, InputPairSet::single(0, 0), level2()).G);
  CHECK_THAT(atMin, WithinAbs(e1, 1e-4));
  const BellExpression zero(Tensor16{}, {0.0, 0.0, 0.0, 2});
  CHECK_THAT(eta(zero, InputPairSet::single(0, 0), level2()), WithinAbs(0.0, 1e-6));
}

TEST_CASE("attached bounds", "[bound]") {
  const BellExpression e = with_quantum_bounds(chsh(), level2());
  REQUIRE(e.bounds());
  CHECK_THAT(e.bounds()->localBound, WithinAbs(2.0, 1e-12));
  CHECK_THAT(e.bounds()->quantumMax, WithinAbs(2.0 * kSqrt2, 1e-5));
  CHECK_THAT(e.bounds()->quantumMin, WithinAbs(-2.0 * kSqrt2, 1e-5));
  CHECK(e.bounds()->level == 2);
}

TEST_CASE("observed values near the local bound give nothing", "[bound]") {
  BoundConfig cfg;
  const BellExpression e = chsh_with_bounds();
  const auto r = evaluate_bound(e, 2.001, 1'000'000, 0, cfg, level2());
  CHECK(r.bound == 0.0);
  CHECK(r.hValue == 0.0);
  CHECK(r.regime == "clamped");
  const auto below = evaluate_bound(e, 1.5, 1'000'000, 0, cfg, level2());
  CHECK(below.bin == -1);
  CHECK(below.bound == 0.0);
}

TEST_CASE("the additive constant is log2 of 1/eps' in total", "[bound]") {
  BoundConfig cfg;
  const auto r = evaluate_bound(chsh_with_bounds(), 2.7, 1'000'000, 0, cfg, level2());
  CHECK_THAT(r.rawBound - static_cast<double>(r.n) * r.hValue, WithinAbs(-19.9316, 1e-4));
}

TEST_CASE("bin selection and clamping at the top", "[bound]") {
  BoundConfig cfg;
  cfg.M = 9;
  const BellExpression e = chsh_with_bounds();
  const auto j = thresholds(e.require_bounds(), cfg.M);
  const auto r = evaluate_bound(e, 0.5 * (j[4] + j[5]), 1'000'000, 0, cfg, level2());
  CHECK(r.bin == 4);
  CHECK(r.threshold == j[4]);
  const auto top = evaluate_bound(e, 3.5, 1'000'000, 0, cfg, level2());
  CHECK(top.bin == cfg.M - 1);
  const auto exact = evaluate_bound(e, j[7], 1'000'000, 0, cfg, level2());
  CHECK(exact.bin == 7);
}

TEST_CASE("bound uses I-hat, gamma and eta as stated", "[bound]") {
  BoundConfig cfg;
  cfg.chi = InputPairSet::single(0, 0);
  cfg.pi = {0.9, 0.1 / 3.0, 0.1 / 3.0, 0.1 / 3.0};
  SeededStream stream(3, 7);
  const std::int64_t n = 2'000'000;
  const CountTable t = sample_counts(Behaviour::tsirelson(), cfg.pi, n, stream);
  const BellExpression e = chsh_with_bounds();
  const auto r = min_entropy_bound(e, t, cfg, level2());
  CHECK(r.n == n);
  CHECK(r.gamma == n - t.input_count(0, 0));
  CHECK_THAT(r.observed, WithinAbs(observed_violation(e, t), 1e-15));
  const double expected =
      static_cast<double>(n) * r.hValue - static_cast<double>(r.gamma) * r.eta - std::log2(1.0 / cfg.epsPrime);
  CHECK_THAT(r.rawBound, WithinAbs(expected, 1e-9 * std::abs(expected)));
  CHECK(r.bound == std::max(0.0, expected));
  CHECK(r.counts.has_value());
}

TEST_CASE("count tables must match the configured input distribution", "[bound]") {
  BoundConfig cfg;
  SeededStream stream(2, 2);
  const CountTable t = sample_counts(Behaviour::tsirelson(), {0.4, 0.2, 0.2, 0.2}, 1000, stream);
  CHECK_THROWS_AS(min_entropy_bound(chsh_with_bounds(), t, cfg, level2()), InvalidArgument);
  CHECK_THROWS_AS(min_entropy_bound(chsh(), t, BoundConfig{.pi = {0.4, 0.2, 0.2, 0.2}}, level2()), MissingBounds);
}

TEST_CASE("configuration validation", "[bound]") {
  BoundConfig cfg;
  cfg.eps = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.M = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.pi = {0.5, 0.5, 0.0, 0.0};
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("changing eps' shifts the bound by the log difference", "[bound]") {
  BoundConfig a;
  BoundConfig b;
  b.epsPrime = 1e-9;
  const BellExpression e = chsh_with_bounds();
  const auto ra = evaluate_bound(e, 2.75, 1'000'000, 0, a, level2());
  const auto rb = evaluate_bound(e, 2.75, 1'000'000, 0, b, level2());
  REQUIRE(rb.regime == "positive");
  CHECK_THAT(ra.bound - rb.bound, WithinAbs(std::log2(1e9) - std::log2(1e6), 1e-6));
}
