#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>

#include "dirand/errors.hpp"
#include "dirand/regularise.hpp"
#include "dirand/simulate.hpp"
#include "oracles.hpp"

using namespace dirand;
using Catch::Matchers::WithinAbs;

namespace {

const MomentStructure& level2() {
  static const MomentStructure s = build_structure(2);
  return s;
}

// Weighted KL in bits written out from its definition.
double kl_oracle(const CountTable& t, const Tensor16& p) {
  double total = 0.0;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) {
      double nxy = 0.0;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) nxy += static_cast<double>(t.counts[flat_index(a, b, x, y)]);
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          const double c = static_cast<double>(t.counts[flat_index(a, b, x, y)]);
          if (c == 0.0) continue;
          const double ph = c / nxy;
          total += nxy / static_cast<double>(t.n) * ph * std::log2(ph / p[flat_index(a, b, x, y)]);
        }
    }
  return total;
}

CountTable proportional_counts(const Tensor16& p, double perInput) {
  CountTable t;
  for (int k = 0; k < 16; ++k) {
    t.counts[k] = static_cast<std::int64_t>(std::llround(p[k] * perInput));
    t.n += t.counts[k];
  }
  return t;
}

}  // namespace

TEST_CASE("weighted KL matches its definition", "[regularise]") {
  SeededStream stream(5, 0);
  const Behaviour p = Behaviour::tsirelson();
  const CountTable t = sample_counts(p, {0.25, 0.25, 0.25, 0.25}, 2000, stream);
  const Tensor16 q = Behaviour::uniform().data();
  CHECK_THAT(weighted_kl_bits(t, q), WithinAbs(kl_oracle(t, q), 1e-12));
  CHECK(weighted_kl_bits(t, q) >= 0.0);
}

TEST_CASE("zero-count cells contribute nothing to the divergence", "[regularise]") {
  const Tensor16 d = Behaviour::deterministic({0, 0}, {0, 0}).data();
  const CountTable t = proportional_counts(d, 100.0);
  CHECK(weighted_kl_bits(t, d) == 0.0);
  Tensor16 q = d;
  q[flat_index(0, 0, 0, 0)] = 0.0;
  q[flat_index(1, 1, 0, 0)] = 1.0;
  CHECK(weighted_kl_bits(t, q) == std::numeric_limits<double>::infinity());
}

TEST_CASE("feasible frequencies are fixed points", "[regularise]") {
  // Tsirelson entries (2 +- sqrt2)/8 are irrational; 10^6 rounds per input
  // put the frequencies within 1e-6 of a relaxation point.
  const CountTable t = proportional_counts(Behaviour::tsirelson().data(), 1e6);
  const Behaviour ph = frequencies_from_counts(t);
  for (RegMethod m : {RegMethod::ml, RegMethod::ls}) {
    const auto r = regularise(t, level2(), m);
    CHECK(r.objective <= 1e-5);
    for (int k = 0; k < 16; ++k) CHECK_THAT(r.behaviour.data()[k], WithinAbs(ph.data()[k], 1e-5));
  }
  const CountTable u = proportional_counts(Behaviour::uniform().data(), 400.0);
  const auto r = regularise_ls(u, level2());
  CHECK(r.objective <= 1e-6);
}

TEST_CASE("ML output beats sampled feasible points", "[regularise]") {
  std::mt19937_64 rng(99);
  SeededStream stream(17, 3);
  const Tensor16 truth = oracle::born_behaviour(oracle::random_device(rng));
  const CountTable t = sample_counts(Behaviour(truth), {0.25, 0.25, 0.25, 0.25}, 10000, stream);
  const auto r = regularise_ml(t, level2());
  CHECK(membership(r.behaviour, level2()).margin >= -kMembershipFloor);
  CHECK_THAT(r.objective, WithinAbs(kl_oracle(t, r.behaviour.data()), 1e-6));
  CHECK(r.objective >= 0.0);
  for (int k = 0; k < 200; ++k) {
    Tensor16 q = oracle::born_behaviour(oracle::random_device(rng));
    CHECK(r.objective <= kl_oracle(t, q) + 1e-9);
  }
  CHECK(r.objective <= kl_oracle(t, truth) + 1e-9);
}

TEST_CASE("LS distance is at most the signalling perturbation", "[regularise]") {
  const Tensor16 base = Behaviour::tsirelson().mix(Behaviour::uniform(), 0.8).data();
  // Moves Alice's x=0 marginal by +-0.0025 between y=0 and y=1: pure
  // signalling with Euclidean norm sqrt(8) * 0.0025 < 1e-2.
  Tensor16 ph = base;
  const double e = 0.0025;
  for (int b = 0; b < 2; ++b) {
    ph[flat_index(0, b, 0, 0)] += e;
    ph[flat_index(1, b, 0, 0)] -= e;
    ph[flat_index(0, b, 0, 1)] -= e;
    ph[flat_index(1, b, 0, 1)] += e;
  }
  const double delta = euclidean_distance(ph, base);
  CHECK_THAT(delta, WithinAbs(std::sqrt(8.0) * e, 1e-12));
  CHECK(signalling_norm(ph) > 0.0);
  const CountTable t = proportional_counts(ph, 1e6);
  const auto r = regularise_ls(t, level2());
  CHECK(r.objective <= euclidean_distance(frequencies_from_counts(t).data(), base) + 1e-7);
  CHECK(membership(r.behaviour, level2()).margin >= -kMembershipFloor);
}

TEST_CASE("missing inputs are refused", "[regularise]") {
  CountTable t;
  t.counts[flat_index(0, 0, 0, 0)] = 5;
  t.n = 5;
  CHECK_THROWS_AS(regularise_ml(t, level2()), ZeroInputCount);
  CHECK_THROWS_AS(regularise_ls(t, level2()), ZeroInputCount);
}

TEST_CASE("method names", "[regularise]") {
  CHECK(reg_method_from_string("ML") == RegMethod::ml);
  CHECK(reg_method_from_string("ls") == RegMethod::ls);
  CHECK(to_string(RegMethod::ml) == "ML");
  CHECK(to_string(RegMethod::ls) == "LS");
  CHECK_THROWS_AS(reg_method_from_string("kl"), InvalidArgument);
}

TEST_CASE("ML and LS agree at large n", "[regularise]") {
  std::mt19937_64 rng(5);
  const Tensor16 truth = oracle::born_behaviour(oracle::random_device(rng));
  SeededStream stream(8, 1);
  const CountTable t = sample_counts(Behaviour(truth), {0.25, 0.25, 0.25, 0.25}, 1'000'000, stream);
  const auto ml = regularise_ml(t, level2());
  const auto ls = regularise_ls(t, level2());
  CHECK(euclidean_distance(ml.behaviour.data(), ls.behaviour.data()) <= 1e-2);
}
