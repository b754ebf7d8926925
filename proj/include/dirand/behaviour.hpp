#pragma once

// Single-round data model for the two-party, two-input, two-output Bell
// scenario: behaviours, Bell expressions and count tables.
//
// Every 16-entry tensor is indexed (a, b, x, y) in that order, with
// flat_index(a, b, x, y) = 8a + 4b + 2x + y.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace dirand {

using Tensor16 = std::array<double, 16>;

constexpr std::size_t flat_index(int a, int b, int x, int y) {
  return static_cast<std::size_t>(((a * 2 + b) * 2 + x) * 2 + y);
}

/// Input pair (x, y) packed as 2x + y.
constexpr int pair_index(int x, int y) { return 2 * x + y; }

inline constexpr double kNormalisationTolerance = 1e-9;

/// Conditional distribution P(ab|xy).
class Behaviour {
 public:
  /// Throws InvalidArgument if an entry is negative or some (x, y) slice
  /// does not sum to one within kNormalisationTolerance.
  explicit Behaviour(const Tensor16& p);

  double operator()(int a, int b, int x, int y) const { return p_[flat_index(a, b, x, y)]; }
  const Tensor16& data() const { return p_; }

  static Behaviour uniform();
  /// Deterministic strategy a = outA[x], b = outB[y].
  static Behaviour deterministic(std::array<int, 2> outA, std::array<int, 2> outB);
  /// P(ab|xy) = (1 + (-1)^{a+b+xy}/sqrt2)/4, the CHSH-maximising point.
  static Behaviour tsirelson();
  /// P(ab|xy) = 1/2 iff a xor b = xy.
  static Behaviour pr_box();

  /// Convex combination w*this + (1-w)*other.
  Behaviour mix(const Behaviour& other, double w) const;

 private:
  Tensor16 p_;
};

/// Cached extrema of a Bell expression.
struct BellBounds {
  double localBound = 0.0;
  double quantumMax = 0.0;
  double quantumMin = 0.0;
  int level = 0;
};

/// Linear functional I(P) = sum c_abxy P(ab|xy).
class BellExpression {
 public:
  BellExpression() { c_.fill(0.0); }
  explicit BellExpression(const Tensor16& c) : c_(c) {}
  BellExpression(const Tensor16& c, const BellBounds& bounds);

  double operator()(int a, int b, int x, int y) const { return c_[flat_index(a, b, x, y)]; }
  const Tensor16& coefficients() const { return c_; }

  const std::optional<BellBounds>& bounds() const { return bounds_; }
  /// Throws MissingBounds when nothing is cached.
  const BellBounds& require_bounds() const;
  BellExpression with_bounds(const BellBounds& bounds) const;
  BellExpression without_bounds() const { return BellExpression(c_); }

  /// s * expr; cached bounds scale (and swap for s < 0).
  BellExpression scaled(double s) const;
  BellExpression operator+(const BellExpression& other) const;

 private:
  Tensor16 c_;
  std::optional<BellBounds> bounds_;
};

/// Input subset chi, stored as a 4-bit mask over pair_index.
class InputPairSet {
 public:
  /// Throws InvalidArgument for an empty set.
  explicit InputPairSet(unsigned mask);
  static InputPairSet all() { return InputPairSet(0xFu); }
  static InputPairSet single(int x, int y) { return InputPairSet(1u << pair_index(x, y)); }

  bool contains(int x, int y) const { return (mask_ >> pair_index(x, y)) & 1u; }
  unsigned mask() const { return mask_; }
  int size() const;
  bool is_all() const { return mask_ == 0xFu; }
  std::vector<std::array<int, 2>> members() const;

  bool operator==(const InputPairSet&) const = default;

 private:
  unsigned mask_;
};

/// Integer counts N_abxy together with the input distribution they were
/// collected under.
struct CountTable {
  std::array<std::int64_t, 16> counts{};
  std::int64_t n = 0;
  std::array<double, 4> pi{0.25, 0.25, 0.25, 0.25};  // indexed by pair_index

  std::int64_t input_count(int x, int y) const;
  /// Throws InvalidArgument on negative counts, sum != n, or a pi that is not
  /// a probability vector.
  void validate() const;
};

/// P-hat(ab|xy) = N_abxy / N_xy. Throws ZeroInputCount if some N_xy is 0.
Behaviour frequencies_from_counts(const CountTable& t);

/// Raw frequency tensor; entries of unplayed inputs stay zero.
Tensor16 raw_frequencies(const CountTable& t);

double bell_value(const BellExpression& expr, const Behaviour& p);
double bell_value(const BellExpression& expr, const Tensor16& p);

/// I-hat = sum c_abxy N_abxy / (n pi_xy).
double observed_violation(const BellExpression& expr, const CountTable& t);

/// c_abxy = (-1)^{xy+a+b}.
BellExpression chsh();

/// The eight CHSH representatives: minus sign on correlator E_{x*y*},
/// times an overall sign. Element 0 is chsh(). Each has local bound 2.
std::vector<BellExpression> chsh_family();

/// Maximum over the 16 deterministic strategies.
double local_bound(const BellExpression& expr);

/// Largest change of one party's marginal when the other party's input flips.
double signalling_norm(const Tensor16& p);

/// Half the l1 distance. Throws DimensionMismatch on differing sizes.
double tv_distance(std::span<const double> p, std::span<const double> q);

// ---------------------------------------------------------------------------
// No-signalling parameterisation.
//
// A no-signalling (possibly unnormalised) behaviour is fixed by nine moments
//   m = (<1>, <A0>, <A1>, <B0>, <B1>, <A0B0>, <A0B1>, <A1B0>, <A1B1>)
// where A_x, B_y are the projectors onto outcome 0. The map m -> P is
// P(00|xy) = <AxBy>, P(01|xy) = <Ax> - <AxBy>, P(10|xy) = <By> - <AxBy>,
// P(11|xy) = <1> - <Ax> - <By> + <AxBy>.

inline constexpr int kMomentCount = 9;
using MomentVector = std::array<double, kMomentCount>;

/// 16 x 9 matrix of the map m -> P.
const Eigen::Matrix<double, 16, 9>& ns_embedding();

/// Tensor of the no-signalling behaviour with moments m.
Tensor16 tensor_from_moments(const MomentVector& m);

/// Moments read off a no-signalling tensor (marginals taken at the other
/// party's input 0).
MomentVector moments_of(const Tensor16& p);

/// g with I(P) = g . m(P) for every no-signalling P.
MomentVector moment_functional(const BellExpression& expr);

/// The coefficient tensor in the span of no-signalling behaviours whose
/// moment functional is g.
BellExpression expression_from_moment_functional(const MomentVector& g);

}  // namespace dirand
