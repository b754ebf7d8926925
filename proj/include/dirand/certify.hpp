#pragma once

// Guessing-probability programs over the moment relaxation and extraction of
// the Bell expression that certifies a given behaviour best.
//
// An adversary splits the behaviour into unnormalised pieces P~^{ab,xy}, one
// for every output guess (a, b) and input pair (x, y) in chi, each lying in
// the (unnormalised) relaxation. The guessing probability is the largest
// achievable sum_{ab, xy in chi} P~^{ab,xy}(ab|xy).

#include <array>
#include <optional>
#include <vector>

#include "dirand/behaviour.hpp"
#include "dirand/conic.hpp"
#include "dirand/npa.hpp"

namespace dirand {

/// Relative inset (of I_Q+ - I_Q-) applied to Bell values at the ends of
/// the relaxation range.
inline constexpr double kEndpointInset = 1e-7;

struct GuessingResult {
  double G = 1.0;
  InputPairSet chi = InputPairSet::all();
  int level = 0;
  /// Negated dual of the decomposition constraint (full program only), in
  /// tensor form read off the moment positions, and its canonical
  /// representative. Larger values certify more randomness.
  std::optional<BellExpression> rawDual;
  std::optional<BellExpression> canonicalDual;
  /// The dual as a functional on the nine moments: G = g . m(P).
  std::optional<MomentVector> dualFunctional;
  /// Optimal unnormalised pieces, one per (a, b, x, y) with (x, y) in chi.
  std::vector<Tensor16> pieces;
  /// Weight of the uniform behaviour mixed into the input when the program
  /// stalled on the boundary of the relaxation (guessing_full only).
  double mixing = 0.0;
  /// Bell value actually imposed (guessing_bell only).
  double evaluatedAt = 0.0;
  conic::Status status = conic::Status::optimal;
  double solverGap = 0.0;
  int iterations = 0;
};

/// Full guessing probability of a behaviour. If the solver stalls on a
/// boundary point, p is mixed with the uniform behaviour by a weight of at
/// most 1e-4 (recorded in `mixing`). Throws Infeasible when p is signalling
/// or has no moment completion, SolverFailure otherwise.
GuessingResult guessing_full(const Tensor16& p, const InputPairSet& chi, const MomentStructure& s);
GuessingResult guessing_full(const Behaviour& p, const InputPairSet& chi, const MomentStructure& s);

/// The conic program solved by guessing_full, for inspection and dumps.
conic::ConicProgram full_guessing_program(const Tensor16& p, const InputPairSet& chi, const MomentStructure& s);

/// Guessing probability given only the value of a Bell expression. Cached
/// bounds are used for the range check when their level matches, otherwise
/// they are computed. Throws InfeasibleValue outside [I_Q-, I_Q+]; values
/// within kEndpointInset of an end are moved inside by that amount, widened
/// tenfold up to 1e-4 of the range while the solver stalls there.
GuessingResult guessing_bell(const BellExpression& expr, double istar, const InputPairSet& chi,
                             const MomentStructure& s);

/// Orthogonal projection of the coefficient tensor onto the span of
/// no-signalling behaviours; preserves the value on every no-signalling
/// behaviour and drops any cached bounds.
BellExpression canonical_bell(const BellExpression& expr);

/// Planning inputs for select_chi.
struct ChiBudget {
  std::int64_t nRaw = 0;
  std::int64_t nTot = 0;
  double piStar = 0.9;
  double eps = 1e-6;
  double epsPrime = 1e-6;
  int M = 999;
};

struct ChiCandidate {
  InputPairSet chi = InputPairSet::all();
  double G = 1.0;
  double projectedRate = 0.0;
};

struct ChiSelection {
  InputPairSet chosen = InputPairSet::all();
  /// chi_all first, then the four singletons in (x, y) order.
  std::vector<ChiCandidate> candidates;
  /// Singleton with the smallest G (ties to the smallest (x, y)).
  InputPairSet bestSingleton = InputPairSet::single(0, 0);
};

/// Input distribution used in the raw phase for a given chi: uniform for
/// chi_all, otherwise piStar on the (single) selected pair and the rest
/// spread evenly.
std::array<double, 4> raw_input_distribution(const InputPairSet& chi, double piStar);

/// Evaluates chi_all and every singleton and keeps chi_all unless the best
/// singleton's projected bound rate is strictly larger.
ChiSelection select_chi(const Behaviour& preg, const MomentStructure& s, const ChiBudget& budget);

}  // namespace dirand
