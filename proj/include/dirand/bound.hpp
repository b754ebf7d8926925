#pragma once

// Finite-statistics min-entropy bound for a single Bell expression.
//
// With thresholds J_m = I_L + m (I_Q+ - I_L) / M, the realised bin m
// (J_m <= I-hat < J_{m+1}), mu = nu sqrt(2 ln(1/eps) / n) and
// H = -log2 G_I (zero at or below I_L), the bound on the raw-phase output is
//
//   max(0, n H(J_m - mu) - gamma eta - log2(1/eps')),
//
// where gamma counts raw rounds whose input pair lies outside chi and
// eta = max(H(I_Q+), H(I_Q-)).

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dirand/behaviour.hpp"
#include "dirand/certify.hpp"
#include "dirand/npa.hpp"
#include "dirand/simulate.hpp"

namespace dirand {

struct BoundConfig {
  double eps = 1e-6;
  double epsPrime = 1e-6;
  /// The grid has M + 1 thresholds J_0 .. J_M.
  int M = 999;
  int level = 2;
  InputPairSet chi = InputPairSet::all();
  std::array<double, 4> pi{0.25, 0.25, 0.25, 0.25};
  /// Rounds the rate is normalised by; 0 means the raw-phase n.
  std::int64_t nTot = 0;

  /// Throws InvalidArgument on out-of-range values.
  void validate() const;
};

double nu(const BellExpression& expr, const std::array<double, 4>& pi);
double mu(double nu, double n, double eps);

std::int64_t gamma(const std::vector<Round>& rounds, const InputPairSet& chi);
std::int64_t gamma(const CountTable& t, const InputPairSet& chi);

/// The expression with local and relaxation bounds attached.
BellExpression with_quantum_bounds(const BellExpression& expr, const MomentStructure& s);

/// J_0 .. J_M.
std::vector<double> thresholds(const BellBounds& b, int M);

/// -log2 G_I(v); zero for v <= I_L. Throws InfeasibleValue outside the
/// relaxation range. Values are memoised per (expression, chi, level, v).
double rb_eval(const BellExpression& expr, const InputPairSet& chi, const MomentStructure& s, double v);

/// max(-log2 G_I(I_Q+), -log2 G_I(I_Q-)).
double eta(const BellExpression& expr, const InputPairSet& chi, const MomentStructure& s);

struct CertificateReport {
  BellExpression expression;
  double localBound = 0.0;
  double quantumMax = 0.0;
  double quantumMin = 0.0;
  int level = 2;
  InputPairSet chi = InputPairSet::all();
  std::array<double, 4> pi{0.25, 0.25, 0.25, 0.25};
  double eps = 1e-6;
  double epsPrime = 1e-6;
  int M = 999;

  double observed = 0.0;  // I-hat
  /// Realised bin, or -1 when I-hat < J_0.
  int bin = -1;
  double threshold = 0.0;  // J_m
  double argument = 0.0;   // J_m - mu
  double hValue = 0.0;     // H(J_m - mu)
  double mu = 0.0;
  double nu = 0.0;
  std::int64_t gamma = 0;
  double eta = 0.0;
  std::int64_t n = 0;
  std::int64_t nTot = 0;
  double rawBound = 0.0;
  double bound = 0.0;
  double rate = 0.0;
  /// "positive" or "clamped".
  std::string regime;
  std::string guarantee;
  std::optional<CountTable> counts;

  // Filled by the protocol driver.
  std::string method;
  std::int64_t nEst = 0;
  bool degenerateExpression = false;
  std::uint64_t masterSeed = 0;
  std::uint64_t deviceIndex = 0;
  std::uint64_t trialIndex = 0;
  double regularisationObjective = 0.0;
  double gFull = 1.0;
  int chshRepresentative = -1;
  std::optional<ChiSelection> chiSelection;
};

/// Theorem evaluation for a given observed value, round count and gamma.
/// The expression must carry bounds at the configured level.
CertificateReport evaluate_bound(const BellExpression& expr, double observed, std::int64_t n, std::int64_t gamma,
                                 const BoundConfig& cfg, const MomentStructure& s);

/// Raw-phase counts version: I-hat and gamma come from the table. Throws
/// InvalidArgument if the table's pi differs from cfg.pi and MissingBounds
/// if the expression has no cached bounds.
CertificateReport min_entropy_bound(const BellExpression& expr, const CountTable& counts, const BoundConfig& cfg,
                                    const MomentStructure& s);

}  // namespace dirand
