#pragma once

// Random two-qubit devices and finite-round Bell-test sampling.

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "dirand/behaviour.hpp"

namespace dirand {

/// Reproducible random stream keyed by (master seed, stream index).
class SeededStream {
 public:
  SeededStream(std::uint64_t seed, std::uint64_t index);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t index() const { return index_; }
  /// Number of primitive draws taken so far.
  std::uint64_t counter() const { return counter_; }

  double uniform();  // [0, 1)
  double normal();
  std::int64_t binomial(std::int64_t n, double p);
  /// Index drawn from a finite distribution.
  int discrete(std::span<const double> weights);

 private:
  std::uint64_t seed_;
  std::uint64_t index_;
  std::uint64_t counter_ = 0;
  std::mt19937_64 engine_;
};

using Bloch = std::array<double, 3>;

/// cos(theta)|00> + sin(theta)|11>, measured along unit Bloch vectors; the
/// outcome-0 projector of a measurement along n is (I + n.sigma) / 2.
struct DeviceModel {
  double theta = 0.0;
  std::array<Bloch, 2> blochA{};
  std::array<Bloch, 2> blochB{};

  /// Throws InvalidArgument if theta is outside [0, pi/4] or a vector is not
  /// unit-norm within 1e-12.
  void validate() const;
};

/// Maximally entangled state with Alice Z, X and Bob (Z +- X)/sqrt2.
DeviceModel chsh_optimal_device();

DeviceModel random_device(SeededStream& stream);

Behaviour behaviour_from(const DeviceModel& d);

/// Index into chsh_family() of the representative with the largest value,
/// and that value.
struct ChshChoice {
  int representative = 0;
  double value = 0.0;
};
ChshChoice best_chsh(const Behaviour& p);

/// True iff some CHSH representative exceeds 2 + 1e-9.
bool accept_device(const DeviceModel& d);

/// Draws random devices from the stream until one is accepted.
DeviceModel random_accepted_device(SeededStream& stream);

/// Input pairs from a multinomial(n, pi), then outputs per pair from a
/// multinomial(N_xy, P(.,.|x,y)). Throws InvalidArgument for n < 0 or a
/// pi that is not a positive probability vector.
CountTable sample_counts(const Behaviour& p, const std::array<double, 4>& pi, std::int64_t n, SeededStream& stream);

/// One round: inputs then outputs.
struct Round {
  int x = 0;
  int y = 0;
  int a = 0;
  int b = 0;
};

/// Round-by-round reference sampler with the same law as sample_counts.
std::vector<Round> sample_rounds(const Behaviour& p, const std::array<double, 4>& pi, std::int64_t n,
                                 SeededStream& stream);

CountTable tally_rounds(const std::vector<Round>& rounds, const std::array<double, 4>& pi);

}  // namespace dirand
