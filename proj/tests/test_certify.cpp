#include <catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <random>

#include "dirand/certify.hpp"
#include "dirand/errors.hpp"
#include "dirand/simulate.hpp"
#include "oracles.hpp"

using namespace dirand;
using Catch::Matchers::WithinAbs;

namespace {

const MomentStructure& level2() {
  static const MomentStructure s = build_structure(2);
  return s;
}

const double kTsirelsonEntry = (2.0 + std::sqrt(2.0)) / 8.0;

}  // namespace

TEST_CASE("deterministic behaviours are fully guessable", "[certify]") {
  const Behaviour d = Behaviour::deterministic({1, 0}, {0, 1});
  CHECK_THAT(guessing_full(d, InputPairSet::all(), level2()).G, WithinAbs(1.0, 1e-6));
  CHECK_THAT(guessing_full(d, InputPairSet::single(1, 1), level2()).G, WithinAbs(1.0, 1e-6));
}

TEST_CASE("Tsirelson point: the guessing probability is its largest entry", "[certify]") {
  const auto r = guessing_full(Behaviour::tsirelson(), InputPairSet::single(0, 0), level2());
  CHECK_THAT(r.G, WithinAbs(kTsirelsonEntry, 1e-3));
  CHECK_THAT(-std::log2(r.G), WithinAbs(1.2284, 2e-3));
  CHECK(r.pieces.size() == 4);
}

TEST_CASE("raw signalling frequencies are infeasible", "[certify]") {
  SeededStream stream(1, 0);
  const CountTable t = sample_counts(Behaviour::tsirelson(), {0.25, 0.25, 0.25, 0.25}, 10000, stream);
  const Tensor16 raw = raw_frequencies(t);
  REQUIRE(signalling_norm(raw) > 0.0);
  CHECK_THROWS_AS(guessing_full(raw, InputPairSet::all(), level2()), Infeasible);
}

TEST_CASE("Bell-value program at the reference points", "[certify]") {
  const auto at2 = guessing_bell(chsh(), 2.0, InputPairSet::single(0, 1), level2());
  CHECK_THAT(at2.G, WithinAbs(1.0, 1e-6));
  CHECK_THAT(guessing_bell(chsh(), 2.0, InputPairSet::all(), level2()).G, WithinAbs(1.0, 1e-6));
  const auto top = guessing_bell(chsh(), 2.0 * std::sqrt(2.0), InputPairSet::single(0, 0), level2());
  CHECK_THAT(top.G, WithinAbs(kTsirelsonEntry, 1e-3));
  CHECK(top.evaluatedAt < 2.0 * std::sqrt(2.0));
  CHECK_THROWS_AS(guessing_bell(chsh(), 3.0, InputPairSet::single(0, 0), level2()), InfeasibleValue);
  CHECK_THROWS_AS(guessing_bell(chsh(), -3.0, InputPairSet::all(), level2()), InfeasibleValue);
}

TEST_CASE("full program never exceeds the Bell-value program", "[certify]") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> n;
  for (int k = 0; k < 3; ++k) {
    const Behaviour p(oracle::born_behaviour(oracle::random_device(rng)));
    Tensor16 c;
    for (auto& v : c) v = n(rng);
    const BellExpression e(c);
    const double gf = guessing_full(p, InputPairSet::all(), level2()).G;
    const double gi = guessing_bell(e, bell_value(e, p), InputPairSet::all(), level2()).G;
    CHECK(gf <= gi + 1e-5);
  }
}

TEST_CASE("the dual expression reproduces the full guessing probability", "[certify]") {
  SeededStream stream(4, 0);
  for (int k = 0; k < 3; ++k) {
    const Behaviour p = behaviour_from(random_accepted_device(stream));
    const auto full = guessing_full(p, InputPairSet::all(), level2());
    REQUIRE(full.canonicalDual);
    REQUIRE(full.dualFunctional);
    // G = g . m(P) with the dual functional; the negated expression is what
    // is handed to the bound.
    const MomentVector m = moments_of(p.data());
    double gm = 0.0;
    for (int j = 0; j < kMomentCount; ++j) gm += (*full.dualFunctional)[j] * m[j];
    CHECK_THAT(gm, WithinAbs(full.G, 1e-5));
    const BellExpression& dual = *full.canonicalDual;
    CHECK_THAT(bell_value(dual, p), WithinAbs(-full.G, 1e-5));
    const double gi = guessing_bell(dual, bell_value(dual, p), InputPairSet::all(), level2()).G;
    CHECK_THAT(gi, WithinAbs(full.G, 1e-4));
  }
}

TEST_CASE("a singleton never guesses worse than all pairs on CHSH", "[certify]") {
  for (double v : {2.3, 2.6}) {
    const double gAll = guessing_bell(chsh(), v, InputPairSet::all(), level2()).G;
    const double gOne = guessing_bell(chsh(), v, InputPairSet::single(0, 0), level2()).G;
    CHECK(gAll >= gOne - 1e-6);
  }
}

TEST_CASE("canonical representative", "[certify]") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n;
  for (int k = 0; k < 10; ++k) {
    Tensor16 c;
    for (auto& v : c) v = n(rng);
    const BellExpression e(c);
    const BellExpression once = canonical_bell(e);
    const BellExpression twice = canonical_bell(once);
    for (int i = 0; i < 16; ++i) CHECK_THAT(twice.coefficients()[i], WithinAbs(once.coefficients()[i], 1e-12));
    // Normalisation of input (1, 0) minus that of (0, 0) vanishes on every
    // no-signalling behaviour, so adding it changes nothing.
    Tensor16 shifted = c;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        shifted[flat_index(a, b, 1, 0)] += 0.7;
        shifted[flat_index(a, b, 0, 0)] -= 0.7;
      }
    const BellExpression other = canonical_bell(BellExpression(shifted));
    for (int i = 0; i < 16; ++i) CHECK_THAT(other.coefficients()[i], WithinAbs(once.coefficients()[i], 1e-12));
    const Tensor16 p = oracle::born_behaviour(oracle::random_device(rng));
    CHECK_THAT(bell_value(once, p), WithinAbs(oracle::dot(c, p), 1e-9));
  }
  const BellExpression zero = canonical_bell(BellExpression());
  for (double v : zero.coefficients()) CHECK(std::abs(v) < 1e-15);
}

TEST_CASE("canonical form is orthogonal to functionals vanishing on no-signalling behaviours", "[certify]") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n;
  Tensor16 c;
  for (auto& v : c) v = n(rng);
  const Tensor16 k = canonical_bell(BellExpression(c)).coefficients();
  // Differences of normalisation functionals: every input pair carries the
  // same total weight.
  std::array<double, 4> total{};
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) total[pair_index(x, y)] += k[flat_index(a, b, x, y)];
  for (int q = 1; q < 4; ++q) CHECK_THAT(total[q], WithinAbs(total[0], 1e-12));
  // Alice's marginal under y = 0 minus under y = 1, and Bob's likewise.
  for (int a = 0; a < 2; ++a)
    for (int x = 0; x < 2; ++x) {
      double s = 0.0;
      for (int b = 0; b < 2; ++b) s += k[flat_index(a, b, x, 0)] - k[flat_index(a, b, x, 1)];
      CHECK_THAT(s, WithinAbs(0.0, 1e-12));
    }
  for (int b = 0; b < 2; ++b)
    for (int y = 0; y < 2; ++y) {
      double s = 0.0;
      for (int a = 0; a < 2; ++a) s += k[flat_index(a, b, 0, y)] - k[flat_index(a, b, 1, y)];
      CHECK_THAT(s, WithinAbs(0.0, 1e-12));
    }
}

TEST_CASE("raw input distribution", "[certify]") {
  const auto u = raw_input_distribution(InputPairSet::all(), 0.9);
  for (double v : u) CHECK(v == 0.25);
  const auto b = raw_input_distribution(InputPairSet::single(1, 0), 0.9);
  CHECK(b[pair_index(1, 0)] == 0.9);
  CHECK_THAT(b[pair_index(0, 0)], WithinAbs(0.1 / 3.0, 1e-15));
  CHECK_THROWS_AS(raw_input_distribution(InputPairSet(0x3u), 0.9), InvalidArgument);
}

TEST_CASE("identical conditionals keep all input pairs", "[certify]") {
  const Behaviour p = Behaviour::uniform();
  ChiBudget budget;
  budget.nTot = 1'000'000;
  budget.nRaw = 990'000;
  const auto sel = select_chi(p, level2(), budget);
  CHECK(sel.chosen.is_all());
  CHECK(sel.candidates.size() == 5);
  CHECK(sel.candidates[0].chi.is_all());
}

TEST_CASE("very long runs with strong bias favour a single pair", "[certify]") {
  const Behaviour p = Behaviour::tsirelson().mix(Behaviour::uniform(), 0.97);
  ChiBudget big;
  big.nTot = 1'000'000'000'000;
  big.nRaw = big.nTot - 10'000'000;
  big.piStar = 0.99;
  const auto sel = select_chi(p, level2(), big);
  CHECK(sel.chosen.size() == 1);
  CHECK(sel.chosen == sel.bestSingleton);
  ChiBudget typical;
  typical.nTot = 100'000'000;
  typical.nRaw = 99'000'000;
  CHECK(select_chi(p, level2(), typical).chosen.is_all());
}
