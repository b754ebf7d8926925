#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <set>

#include "dirand/errors.hpp"
#include "dirand/npa.hpp"
#include "oracles.hpp"

using namespace dirand;
using Catch::Matchers::WithinAbs;

TEST_CASE("structure sizes", "[npa]") {
  const auto s2 = build_structure(2);
  CHECK(s2.dimension() == 25);
  CHECK(s2.party_monomial_count() == 5);
  const auto s1 = build_structure(1);
  CHECK(s1.dimension() == 9);
  CHECK(s1.party_monomial_count() == 3);
  CHECK_THROWS_AS(build_structure(3), UnsupportedLevel);
  CHECK_THROWS_AS(build_structure(0), UnsupportedLevel);
}

TEST_CASE("index map is symmetric with the normalisation at the corner", "[npa]") {
  for (int level : {1, 2}) {
    const auto s = build_structure(level);
    const int d = s.dimension();
    const auto& map = s.index_map();
    REQUIRE(map.size() == static_cast<std::size_t>(d * d));
    CHECK(map[0] == s.normalisation_var());
    std::set<int> used;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        CHECK(map[i * d + j] == map[j * d + i]);
        used.insert(map[i * d + j]);
      }
    CHECK(static_cast<int>(used.size()) == s.variable_count());
    // Diagonal entries are <w^dagger w>; projectors make <A_x> diagonal too.
    const auto bm = s.behaviour_moments();
    for (int j = 0; j < kMomentCount; ++j) CHECK(bm[j] == j);
  }
}

TEST_CASE("Tsirelson bound from the level-2 relaxation", "[npa]") {
  const auto s = build_structure(2);
  CHECK_THAT(max_bell(chsh(), s), WithinAbs(2.0 * std::sqrt(2.0), 1e-5));
  CHECK_THAT(min_bell(chsh(), s), WithinAbs(-2.0 * std::sqrt(2.0), 1e-5));
}

TEST_CASE("constant expressions", "[npa]") {
  const auto s = build_structure(2);
  CHECK_THAT(max_bell(BellExpression(), s), WithinAbs(0.0, 1e-7));
  CHECK_THAT(min_bell(BellExpression(), s), WithinAbs(0.0, 1e-7));
  Tensor16 c{};
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) c[flat_index(a, b, 0, 0)] = 1.0;
  CHECK_THAT(max_bell(BellExpression(c), s), WithinAbs(1.0, 1e-7));
  CHECK_THAT(min_bell(BellExpression(c), s), WithinAbs(1.0, 1e-7));
}

TEST_CASE("membership of reference behaviours", "[npa]") {
  const auto s = build_structure(2);
  CHECK(membership(Behaviour::tsirelson(), s).feasible);
  CHECK(membership(Behaviour::uniform(), s).feasible);
  const auto pr = membership(Behaviour::pr_box(), s);
  CHECK_FALSE(pr.feasible);
  CHECK(pr.margin < -1e-3);
}

TEST_CASE("signalling tensors are not members", "[npa]") {
  const auto s = build_structure(2);
  Tensor16 t = Behaviour::uniform().data();
  t[flat_index(0, 0, 0, 0)] = 0.3;
  t[flat_index(0, 1, 0, 0)] = 0.3;
  t[flat_index(1, 0, 0, 0)] = 0.2;
  t[flat_index(1, 1, 0, 0)] = 0.2;
  const auto m = membership(t, s);
  CHECK_FALSE(m.feasible);
  CHECK_THAT(m.margin, WithinAbs(-0.1, 1e-12));
}

TEST_CASE("quantum behaviours lie inside and below the relaxed maximum", "[npa]") {
  const auto s = build_structure(2);
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n;
  for (int k = 0; k < 5; ++k) {
    const Tensor16 p = oracle::born_behaviour(oracle::random_device(rng));
    CHECK(membership(p, s).feasible);
    Tensor16 c;
    for (auto& v : c) v = n(rng);
    CHECK(max_bell(BellExpression(c), s) >= oracle::dot(c, p) - 1e-6);
  }
}
