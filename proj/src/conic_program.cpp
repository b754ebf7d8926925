#include <cmath>
#include <ostream>

#include "dirand/conic.hpp"
#include "dirand/errors.hpp"

namespace dirand::conic {

double AffineExpr::evaluate(const std::vector<double>& y) const {
  double s = constant;
  for (const auto& t : terms) s += t.coef * y[static_cast<std::size_t>(t.var)];
  return s;
}

PsdBlock PsdBlock::from_index_map(int dim, const std::vector<int>& map) {
  if (static_cast<int>(map.size()) != dim * dim) throw InvalidArgument("index map has wrong size");
  PsdBlock blk;
  blk.dim = dim;
  for (int i = 0; i < dim; ++i)
    for (int j = i; j < dim; ++j) {
      const int v = map[static_cast<std::size_t>(i * dim + j)];
      if (v != map[static_cast<std::size_t>(j * dim + i)]) throw InvalidArgument("index map is not symmetric");
      if (v >= 0) blk.add(i, j, v, 1.0);
    }
  return blk;
}

void PsdBlock::add(int row, int col, int var, double coef) {
  if (row > col) std::swap(row, col);
  entries.push_back({row, col, var, coef});
}

Eigen::MatrixXd PsdBlock::evaluate(const std::vector<double>& y) const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& e : entries) {
    const double v = e.coef * (e.var == kConstant ? 1.0 : y[static_cast<std::size_t>(e.var)]);
    m(e.row, e.col) += v;
    if (e.row != e.col) m(e.col, e.row) += v;
  }
  return m;
}

int ConicProgram::add_variables(int count) {
  const int first = variableCount;
  variableCount += count;
  objective.resize(static_cast<std::size_t>(variableCount), 0.0);
  return first;
}

void ConicProgram::add_equality(std::vector<LinearTerm> terms, double rhs) {
  equalities.push_back({std::move(terms), rhs});
}

void ConicProgram::validate() const {
  if (variableCount < 0) throw InvalidArgument("negative variable count");
  if (static_cast<int>(objective.size()) != variableCount) throw InvalidArgument("objective size mismatch");
  auto check_var = [&](int v, bool allowConstant) {
    if ((v == kConstant && allowConstant) || (v >= 0 && v < variableCount)) return;
    throw InvalidArgument("variable index " + std::to_string(v) + " out of range");
  };
  for (const auto& eq : equalities)
    for (const auto& t : eq.terms) check_var(t.var, false);
  for (const auto& blk : psdBlocks) {
    if (blk.dim <= 0) throw InvalidArgument("PSD block must have positive dimension");
    for (const auto& e : blk.entries) {
      if (e.row < 0 || e.col < 0 || e.row >= blk.dim || e.col >= blk.dim)
        throw InvalidArgument("PSD entry outside its block");
      check_var(e.var, true);
    }
  }
  for (const auto& cone : expCones)
    for (const auto* a : {&cone.u, &cone.v, &cone.w})
      for (const auto& t : a->terms) check_var(t.var, false);
}

std::string to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::numericalFailure: return "numericalFailure";
  }
  return "unknown";
}

ConicSolution solve(const ConicProgram& prog, const ToleranceConfig& tol) {
  prog.validate();
  if (prog.expCones.empty()) return detail::solve_primal_dual(prog, tol);
  return detail::solve_barrier(prog, tol);
}

double reconstructed_dual_objective(const ConicProgram& prog, const ConicSolution& sol) {
  double d = prog.objectiveConstant;
  for (std::size_t i = 0; i < prog.equalities.size() && i < sol.equalityDuals.size(); ++i)
    d += prog.equalities[i].rhs * sol.equalityDuals[i];
  for (std::size_t j = 0; j < prog.psdBlocks.size() && j < sol.psdDuals.size(); ++j) {
    const auto& blk = prog.psdBlocks[j];
    const auto& z = sol.psdDuals[j];
    for (const auto& e : blk.entries) {
      if (e.var != kConstant) continue;
      d -= e.coef * (e.row == e.col ? z(e.row, e.col) : 2.0 * z(e.row, e.col));
    }
  }
  return d;
}

void write_sparse_dump(const ConicProgram& prog, std::ostream& os) {
  os << "# dirand conic program\n";
  os << "# variables " << prog.variableCount << " sense "
     << (prog.sense == Sense::minimise ? "min" : "max") << " constant " << prog.objectiveConstant << "\n";
  os.precision(17);
  for (int i = 0; i < prog.variableCount; ++i)
    if (prog.objective[static_cast<std::size_t>(i)] != 0.0)
      os << "obj " << i << ' ' << prog.objective[static_cast<std::size_t>(i)] << '\n';
  for (std::size_t r = 0; r < prog.equalities.size(); ++r) {
    for (const auto& t : prog.equalities[r].terms) os << "eq " << r << ' ' << t.var << ' ' << t.coef << '\n';
    os << "rhs " << r << ' ' << prog.equalities[r].rhs << '\n';
  }
  for (std::size_t j = 0; j < prog.psdBlocks.size(); ++j) {
    os << "# block " << j << " dim " << prog.psdBlocks[j].dim << '\n';
    for (const auto& e : prog.psdBlocks[j].entries)
      os << "psd " << j << ' ' << e.row << ' ' << e.col << ' ' << e.var << ' ' << e.coef << '\n';
  }
  for (std::size_t k = 0; k < prog.expCones.size(); ++k) {
    const auto& cone = prog.expCones[k];
    const std::pair<char, const AffineExpr*> parts[] = {{'u', &cone.u}, {'v', &cone.v}, {'w', &cone.w}};
    for (const auto& [name, a] : parts) {
      if (a->constant != 0.0) os << "rel " << k << ' ' << name << " -1 " << a->constant << '\n';
      for (const auto& t : a->terms) os << "rel " << k << ' ' << name << ' ' << t.var << ' ' << t.coef << '\n';
    }
  }
}

}  // namespace dirand::conic
