#pragma once

// Conic programs over a real variable vector y:
//
//   minimise / maximise  c.y + c0
//   subject to           A y = b
//                        S_j(y) = F_j0 + sum_i y_i F_ji  is PSD      (PSD blocks)
//                        v ln(v/u) <= w, u > 0, v > 0               (relative-entropy triples)
//
// PSD block entries and cone-triple components are affine in y.
// Programs with only PSD blocks go to a primal-dual interior-point method
// (HKM direction, Mehrotra predictor-corrector, infeasible start). Programs
// with relative-entropy triples go to a barrier path-following method with a
// phase-I search for a strictly feasible point.

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dirand::conic {

inline constexpr int kConstant = -1;

struct LinearTerm {
  int var = 0;
  double coef = 0.0;
};

struct AffineExpr {
  double constant = 0.0;
  std::vector<LinearTerm> terms;

  static AffineExpr variable(int var, double coef = 1.0) { return {0.0, {{var, coef}}}; }
  static AffineExpr value(double v) { return {v, {}}; }
  double evaluate(const std::vector<double>& y) const;
};

/// One contribution coef * y[var] (or coef, when var == kConstant) to the
/// symmetric entries (row, col) and (col, row) of a block.
struct PsdEntry {
  int row = 0;
  int col = 0;
  int var = kConstant;
  double coef = 0.0;
};

struct PsdBlock {
  int dim = 0;
  std::vector<PsdEntry> entries;

  /// Block whose (i, j) entry is y[map[i*dim + j]]; a negative index means a
  /// structural zero. Throws InvalidArgument if the map is not symmetric.
  static PsdBlock from_index_map(int dim, const std::vector<int>& map);

  void add(int row, int col, int var, double coef);
  Eigen::MatrixXd evaluate(const std::vector<double>& y) const;
};

/// v ln(v/u) <= w with u > 0, v > 0 (natural log).
struct RelEntropyTriple {
  AffineExpr u;
  AffineExpr v;
  AffineExpr w;
};

struct LinearConstraint {
  std::vector<LinearTerm> terms;
  double rhs = 0.0;
};

enum class Sense { minimise, maximise };

struct ConicProgram {
  int variableCount = 0;
  Sense sense = Sense::minimise;
  std::vector<double> objective;  // size variableCount
  double objectiveConstant = 0.0;
  std::vector<LinearConstraint> equalities;
  std::vector<PsdBlock> psdBlocks;
  std::vector<RelEntropyTriple> expCones;

  explicit ConicProgram(int n = 0, Sense s = Sense::minimise)
      : variableCount(n), sense(s), objective(static_cast<std::size_t>(n), 0.0) {}

  int add_variables(int count);
  void add_equality(std::vector<LinearTerm> terms, double rhs);

  /// Throws InvalidArgument if an index is out of range or sizes disagree.
  void validate() const;
};

struct ToleranceConfig {
  double feasibility = 1e-8;
  double gap = 1e-8;
  int maxIterations = 150;
};

enum class Status { optimal, infeasible, numericalFailure };

std::string to_string(Status s);

struct ConicSolution {
  Status status = Status::numericalFailure;
  std::vector<double> primal;
  /// Sensitivities of the optimal value to the equality right-hand sides,
  /// in the program's own sense.
  std::vector<double> equalityDuals;
  /// Dual matrices of the PSD blocks, signed so that
  /// objective = b.dual - sum_j <Z_j, F_j0> + c0 in either sense
  /// (PSD for a minimisation, NSD for a maximisation).
  std::vector<Eigen::MatrixXd> psdDuals;
  double objective = 0.0;
  double dualObjective = 0.0;
  /// |objective - dualObjective| / (1 + |objective| + |dualObjective|).
  double gap = 0.0;
  /// Largest equality or block residual, relative to 1 + |rhs|.
  double primalResidual = 0.0;
  int iterations = 0;
  std::string message;
  /// Set (with status numericalFailure) when the method could not finish but
  /// its best iterate met every stopping measure to within 1e-5; the values
  /// are that iterate's.
  bool reducedAccuracy = false;

  bool optimal() const { return status == Status::optimal; }
  /// Optimal, or failed with a reduced-accuracy iterate.
  bool usable() const { return optimal() || reducedAccuracy; }
};

ConicSolution solve(const ConicProgram& prog, const ToleranceConfig& tol = {});

/// b.dual - sum_j <Z_j, F_j0> + c0, recomputed from a solution's multipliers.
double reconstructed_dual_objective(const ConicProgram& prog, const ConicSolution& sol);

/// Sparse text dump, one nonzero per line:
///   obj   <var> <coef>
///   eq    <row> <var> <coef>
///   rhs   <row> <value>
///   psd   <block> <row> <col> <var> <coef>     (var -1 = constant)
///   rel   <triple> <u|v|w> <var> <coef>        (var -1 = constant)
void write_sparse_dump(const ConicProgram& prog, std::ostream& os);

namespace detail {
ConicSolution solve_primal_dual(const ConicProgram& prog, const ToleranceConfig& tol);
ConicSolution solve_barrier(const ConicProgram& prog, const ToleranceConfig& tol);
}  // namespace detail

}  // namespace dirand::conic
