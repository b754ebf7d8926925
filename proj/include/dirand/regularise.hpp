#pragma once

// Projection of observed frequencies onto the moment relaxation, either by
// minimising the input-weighted KL divergence (maximum likelihood) or the
// Euclidean distance (least squares).

#include <string>

#include "dirand/behaviour.hpp"
#include "dirand/npa.hpp"

namespace dirand {

enum class RegMethod { ml, ls };

std::string to_string(RegMethod m);
/// Accepts "ml" / "ls" (any case). Throws InvalidArgument otherwise.
RegMethod reg_method_from_string(const std::string& s);

struct RegularisationDiagnostics {
  std::string solverStatus;
  std::string solverMessage;
  double solverGap = 0.0;
  int iterations = 0;
  /// Smallest eigenvalue of the moment matrix at the returned point.
  double minEigenvalue = 0.0;
  /// Most negative entry clipped to zero when forming the behaviour.
  double clipped = 0.0;
};

struct RegularisationResult {
  Behaviour behaviour = Behaviour::uniform();
  MomentVector moments{};
  /// KL divergence in bits (ML) or Euclidean distance (LS), recomputed at
  /// the returned behaviour.
  double objective = 0.0;
  RegMethod method = RegMethod::ml;
  int level = 0;
  RegularisationDiagnostics diagnostics;
};

/// sum_xy (N_xy / n) sum_ab P-hat log2(P-hat / P); cells with P-hat = 0
/// contribute nothing. Infinite when P vanishes on the support of P-hat.
double weighted_kl_bits(const CountTable& t, const Tensor16& p);

/// sqrt(sum (P-hat - P)^2) over all 16 entries.
double euclidean_distance(const Tensor16& phat, const Tensor16& p);

/// Throws ZeroInputCount if an input pair is missing, SolverFailure if the
/// conic solve does not converge.
RegularisationResult regularise_ml(const CountTable& t, const MomentStructure& s);
RegularisationResult regularise_ls(const CountTable& t, const MomentStructure& s);
RegularisationResult regularise(const CountTable& t, const MomentStructure& s, RegMethod method);

}  // namespace dirand
