#pragma once

// Moment-matrix relaxations of the quantum set for two parties with binary
// inputs and outputs, built on products of per-party words (local levels).
//
// Each measurement is described by the projector A_x (B_y) onto outcome 0.
// Level 1 uses the words {1, A0, A1} per party, level 2 uses
// {1, A0, A1, A0A1, A1A0}. Moments are identified under idempotence,
// commutation of the two parties and the real-symmetric reduction
// <w> = <w^dagger>, so each distinct moment is one free variable.

#include <array>
#include <vector>

#include "dirand/behaviour.hpp"
#include "dirand/conic.hpp"

namespace dirand {

class MomentStructure {
 public:
  int level() const { return level_; }
  int dimension() const { return dim_; }
  int party_monomial_count() const { return static_cast<int>(words_.size()); }
  const std::vector<std::vector<int>>& party_monomials() const { return words_; }
  int variable_count() const { return varCount_; }

  /// Free-variable index of moment-matrix entry (i, j), row-major.
  const std::vector<int>& index_map() const { return map_; }
  /// Always 0; entry (0, 0) of the matrix.
  int normalisation_var() const { return 0; }
  /// Variable indices of the nine no-signalling moments, in MomentVector
  /// order. They are 0..8.
  std::array<int, kMomentCount> behaviour_moments() const;

  /// The moment matrix as a PSD block over variables varOffset + index.
  conic::PsdBlock block(int varOffset = 0) const;

  friend MomentStructure build_structure(int level);

 private:
  int level_ = 0;
  int dim_ = 0;
  int varCount_ = 0;
  std::vector<std::vector<int>> words_;
  std::vector<int> map_;
};

/// Throws UnsupportedLevel unless level is 1 or 2.
MomentStructure build_structure(int level);

/// Extrema of a Bell expression over the relaxation. Throw SolverFailure if
/// the solver does not report an optimum.
double max_bell(const BellExpression& expr, const MomentStructure& s);
double min_bell(const BellExpression& expr, const MomentStructure& s);

inline constexpr double kMembershipFloor = 1e-7;

struct MembershipResult {
  bool feasible = false;
  /// Largest achievable minimum eigenvalue of a completion. Negative when no
  /// PSD completion exists; for signalling input it is minus the signalling
  /// norm.
  double margin = 0.0;
};

MembershipResult membership(const Behaviour& p, const MomentStructure& s);
MembershipResult membership(const Tensor16& p, const MomentStructure& s);

}  // namespace dirand
