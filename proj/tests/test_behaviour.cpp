#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "dirand/behaviour.hpp"
#include "dirand/errors.hpp"
#include "oracles.hpp"

using namespace dirand;
using Catch::Matchers::WithinAbs;

namespace {

CountTable table_from(const std::array<std::int64_t, 16>& counts) {
  CountTable t;
  t.counts = counts;
  t.n = 0;
  for (auto c : counts) t.n += c;
  return t;
}

}  // namespace

TEST_CASE("frequencies are counts over the input totals", "[behaviour]") {
  std::array<std::int64_t, 16> c{};
  c[flat_index(0, 0, 0, 0)] = 3;
  c[flat_index(0, 1, 0, 0)] = 1;
  c[flat_index(0, 0, 0, 1)] = 1;
  c[flat_index(1, 0, 1, 0)] = 1;
  c[flat_index(1, 1, 1, 1)] = 1;
  const Behaviour p = frequencies_from_counts(table_from(c));
  CHECK(p(0, 0, 0, 0) == 0.75);
  CHECK(p(0, 1, 0, 0) == 0.25);
  CHECK(p(1, 0, 0, 0) == 0.0);
  CHECK(p(1, 1, 1, 1) == 1.0);
}

TEST_CASE("proportional counts give back the behaviour", "[behaviour]") {
  const Behaviour d = Behaviour::deterministic({0, 1}, {1, 1});
  std::array<std::int64_t, 16> c{};
  for (int k = 0; k < 16; ++k) c[k] = static_cast<std::int64_t>(std::lround(d.data()[k] * 40.0));
  const Behaviour p = frequencies_from_counts(table_from(c));
  for (int k = 0; k < 16; ++k) CHECK(p.data()[k] == d.data()[k]);
}

TEST_CASE("a missing input pair is reported", "[behaviour]") {
  std::array<std::int64_t, 16> c{};
  c[flat_index(0, 0, 0, 0)] = 2;
  c[flat_index(0, 0, 1, 0)] = 2;
  c[flat_index(0, 0, 1, 1)] = 2;
  CHECK_THROWS_AS(frequencies_from_counts(table_from(c)), ZeroInputCount);
}

TEST_CASE("behaviour construction validates entries", "[behaviour]") {
  Tensor16 t = Behaviour::uniform().data();
  t[0] = -0.01;
  t[4] += 0.01;
  CHECK_THROWS_AS(Behaviour(t), InvalidArgument);
  Tensor16 u = Behaviour::uniform().data();
  u[0] += 1e-6;
  CHECK_THROWS_AS(Behaviour(u), InvalidArgument);
}

TEST_CASE("CHSH values of reference behaviours", "[behaviour]") {
  CHECK_THAT(bell_value(chsh(), Behaviour::uniform()), WithinAbs(0.0, 1e-15));
  CHECK_THAT(bell_value(chsh(), Behaviour::deterministic({0, 0}, {0, 0})), WithinAbs(2.0, 1e-15));
  // Direct sum: each of the four correlators contributes 1/sqrt2.
  double direct = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) {
          const double sign = ((a + b + x * y) % 2) ? -1.0 : 1.0;
          direct += sign * (1.0 + sign / std::sqrt(2.0)) / 4.0;
        }
  CHECK_THAT(bell_value(chsh(), Behaviour::tsirelson()), WithinAbs(direct, 1e-12));
  CHECK_THAT(direct, WithinAbs(2.0 * std::sqrt(2.0), 1e-12));
  CHECK_THAT(bell_value(chsh(), Behaviour::pr_box()), WithinAbs(4.0, 1e-12));
}

TEST_CASE("the CHSH family has eight members with local bound two", "[behaviour]") {
  const auto fam = chsh_family();
  REQUIRE(fam.size() == 8);
  for (int k = 0; k < 16; ++k) CHECK(fam[0].coefficients()[k] == chsh().coefficients()[k]);
  // Correlator-form oracle: exactly one negative s_xy, overall sign +-1.
  std::vector<Tensor16> expected;
  for (double sign : {1.0, -1.0})
    for (int neg = 0; neg < 4; ++neg) {
      std::array<double, 4> s{sign, sign, sign, sign};
      s[neg] = -sign;
      expected.push_back(oracle::correlator_expression(s));
    }
  for (const auto& e : fam) {
    CHECK_THAT(oracle::local_max(e.coefficients()), WithinAbs(2.0, 1e-12));
    CHECK_THAT(local_bound(e), WithinAbs(2.0, 1e-12));
    int matches = 0;
    for (const auto& t : expected) matches += (t == e.coefficients());
    CHECK(matches == 1);
  }
}

TEST_CASE("at most one CHSH representative is violated", "[behaviour]") {
  std::mt19937_64 rng(7);
  const auto fam = chsh_family();
  int violatedSomewhere = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const Tensor16 p = oracle::born_behaviour(oracle::random_device(rng));
    int violated = 0;
    for (const auto& e : fam) violated += bell_value(e, p) > 2.0 + 1e-12;
    CHECK(violated <= 1);
    violatedSomewhere += violated;
  }
  CHECK(violatedSomewhere > 0);
}

TEST_CASE("signalling norm", "[behaviour]") {
  CHECK_THAT(signalling_norm(Behaviour::tsirelson().data()), WithinAbs(0.0, 1e-15));
  // Alice's P(a=0|x=0) is 0.6 under y=0 and 0.5 under y=1.
  Tensor16 t = Behaviour::uniform().data();
  t[flat_index(0, 0, 0, 0)] = 0.3;
  t[flat_index(0, 1, 0, 0)] = 0.3;
  t[flat_index(1, 0, 0, 0)] = 0.2;
  t[flat_index(1, 1, 0, 0)] = 0.2;
  CHECK_THAT(signalling_norm(t), WithinAbs(0.1, 1e-12));
}

TEST_CASE("total variation distance", "[behaviour]") {
  const std::vector<double> p{0.5, 0.5}, q{0.8, 0.2}, r{0.0, 0.0, 1.0}, s{1.0, 0.0, 0.0};
  CHECK(tv_distance(p, p) == 0.0);
  CHECK_THAT(tv_distance(p, q), WithinAbs(0.3, 1e-15));
  CHECK(tv_distance(r, s) == 1.0);
  CHECK_THROWS_AS(tv_distance(p, r), DimensionMismatch);
}

TEST_CASE("observed violation divides by n times pi", "[behaviour]") {
  CountTable t;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) t.counts[flat_index(0, 0, x, y)] = 1000;
  t.n = 4000;
  CHECK_THAT(observed_violation(chsh(), t), WithinAbs(2.0, 1e-12));
  t.pi = {0.4, 0.2, 0.2, 0.2};
  // 1000/(4000*0.4) + 1000/800 + 1000/800 - 1000/800
  CHECK_THAT(observed_violation(chsh(), t), WithinAbs(0.625 + 1.25, 1e-12));
}

TEST_CASE("count table validation", "[behaviour]") {
  CountTable t;
  t.counts[0] = 3;
  t.n = 2;
  CHECK_THROWS_AS(t.validate(), InvalidArgument);
  t.n = 3;
  CHECK_NOTHROW(t.validate());
  t.pi = {0.5, 0.5, 0.5, -0.5};
  CHECK_THROWS_AS(t.validate(), InvalidArgument);
}

TEST_CASE("no-signalling moments round trip", "[behaviour]") {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 20; ++k) {
    const Tensor16 p = oracle::born_behaviour(oracle::random_device(rng));
    const Tensor16 back = tensor_from_moments(moments_of(p));
    for (int i = 0; i < 16; ++i) CHECK_THAT(back[i], WithinAbs(p[i], 1e-12));
  }
}

TEST_CASE("moment functional reproduces Bell values", "[behaviour]") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  for (int k = 0; k < 20; ++k) {
    Tensor16 c;
    for (auto& v : c) v = n(rng);
    const BellExpression e(c);
    const MomentVector g = moment_functional(e);
    const Tensor16 p = oracle::born_behaviour(oracle::random_device(rng));
    const MomentVector m = moments_of(p);
    double gm = 0.0;
    for (int j = 0; j < kMomentCount; ++j) gm += g[j] * m[j];
    CHECK_THAT(gm, WithinAbs(oracle::dot(c, p), 1e-10));
    // The canonical representative agrees on no-signalling points.
    const BellExpression canon = expression_from_moment_functional(g);
    CHECK_THAT(bell_value(canon, p), WithinAbs(oracle::dot(c, p), 1e-10));
  }
}

TEST_CASE("scaled expressions scale their bounds", "[behaviour]") {
  const BellExpression e(chsh().coefficients(), BellBounds{2.0, 2.8, -2.8, 2});
  const auto neg = e.scaled(-2.0);
  REQUIRE(neg.bounds());
  CHECK(neg.bounds()->quantumMax == 5.6);
  CHECK(neg.bounds()->quantumMin == -5.6);
  CHECK_THROWS_AS(BellExpression().require_bounds(), MissingBounds);
}

TEST_CASE("input pair sets", "[behaviour]") {
  CHECK_THROWS_AS(InputPairSet(0u), InvalidArgument);
  CHECK(InputPairSet::all().size() == 4);
  const auto one = InputPairSet::single(1, 0);
  CHECK(one.contains(1, 0));
  CHECK_FALSE(one.contains(0, 0));
  CHECK(one.members().size() == 1);
}
