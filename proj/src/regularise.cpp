#include "dirand/regularise.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "dirand/errors.hpp"

namespace dirand {
namespace {

// Tighter than the library default: the fixed-point property needs the
// minimiser itself, not only the optimal value.
constexpr conic::ToleranceConfig kRegTolerance{1e-9, 1e-10, 200};

conic::AffineExpr entry_expr(const MomentStructure& s, std::size_t k) {
  const auto& e = ns_embedding();
  const auto idx = s.behaviour_moments();
  conic::AffineExpr out;
  for (int j = 0; j < kMomentCount; ++j)
    if (e(static_cast<int>(k), j) != 0.0) out.terms.push_back({idx[j], e(static_cast<int>(k), j)});
  return out;
}

RegularisationResult finish(const conic::ConicProgram& prog, const conic::ConicSolution& sol,
                            const MomentStructure& s, RegMethod method) {
  if (!sol.usable())
    throw SolverFailure(to_string(method) + " regularisation: " + conic::to_string(sol.status) + " (" + sol.message + ")");
  RegularisationResult r;
  r.method = method;
  r.level = s.level();
  const auto idx = s.behaviour_moments();
  for (int j = 0; j < kMomentCount; ++j) r.moments[j] = sol.primal[static_cast<std::size_t>(idx[j])];
  Tensor16 p = tensor_from_moments(r.moments);
  double clipped = 0.0;
  for (double& v : p)
    if (v < 0.0) {
      clipped = std::min(clipped, v);
      v = 0.0;
    }
  r.behaviour = Behaviour(p);
  std::vector<double> y(sol.primal.begin(), sol.primal.begin() + s.variable_count());
  const Eigen::MatrixXd gamma = prog.psdBlocks.front().evaluate(y);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gamma, Eigen::EigenvaluesOnly);
  r.diagnostics.minEigenvalue = es.eigenvalues().minCoeff();
  r.diagnostics.clipped = clipped;
  r.diagnostics.solverStatus = conic::to_string(sol.status);
  r.diagnostics.solverMessage = sol.message;
  r.diagnostics.solverGap = sol.gap;
  r.diagnostics.iterations = sol.iterations;
  return r;
}

}  // namespace

std::string to_string(RegMethod m) { return m == RegMethod::ml ? "ML" : "LS"; }

RegMethod reg_method_from_string(const std::string& s) {
  std::string l(s);
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (l == "ml") return RegMethod::ml;
  if (l == "ls") return RegMethod::ls;
  throw InvalidArgument("unknown regularisation method '" + s + "'");
}

double weighted_kl_bits(const CountTable& t, const Tensor16& p) {
  double d = 0.0;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) {
      const auto nxy = t.input_count(x, y);
      if (nxy == 0) continue;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          const auto k = flat_index(a, b, x, y);
          if (t.counts[k] == 0) continue;
          const double ph = static_cast<double>(t.counts[k]) / static_cast<double>(nxy);
          if (!(p[k] > 0.0)) return std::numeric_limits<double>::infinity();
          d += static_cast<double>(nxy) / static_cast<double>(t.n) * ph * std::log2(ph / p[k]);
        }
    }
  return d;
}

double euclidean_distance(const Tensor16& phat, const Tensor16& p) {
  double s = 0.0;
  for (std::size_t k = 0; k < 16; ++k) s += (phat[k] - p[k]) * (phat[k] - p[k]);
  return std::sqrt(s);
}

RegularisationResult regularise_ml(const CountTable& t, const MomentStructure& s) {
  t.validate();
  const Behaviour phat = frequencies_from_counts(t);
  conic::ConicProgram prog(s.variable_count());
  prog.add_equality({{s.normalisation_var(), 1.0}}, 1.0);
  prog.psdBlocks.push_back(s.block());
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) {
      const double weight = static_cast<double>(t.input_count(x, y)) / static_cast<double>(t.n);
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          const auto k = flat_index(a, b, x, y);
          if (t.counts[k] == 0) continue;
          const int w = prog.add_variables(1);
          prog.objective[static_cast<std::size_t>(w)] = weight / std::log(2.0);
          prog.expCones.push_back({entry_expr(s, k), conic::AffineExpr::value(phat.data()[k]),
                                   conic::AffineExpr::variable(w)});
        }
    }
  const auto sol = conic::solve(prog, kRegTolerance);
  RegularisationResult r = finish(prog, sol, s, RegMethod::ml);
  r.objective = std::max(0.0, weighted_kl_bits(t, r.behaviour.data()));
  return r;
}

RegularisationResult regularise_ls(const CountTable& t, const MomentStructure& s) {
  t.validate();
  const Behaviour phat = frequencies_from_counts(t);
  conic::ConicProgram prog(s.variable_count());
  prog.add_equality({{s.normalisation_var(), 1.0}}, 1.0);
  prog.psdBlocks.push_back(s.block());
  // Arrow block [[r, d^T], [d, r I]] is PSD iff r >= |d|.
  const int r = prog.add_variables(1);
  prog.objective[static_cast<std::size_t>(r)] = 1.0;
  conic::PsdBlock arrow;
  arrow.dim = 17;
  for (int i = 0; i < 17; ++i) arrow.add(i, i, r, 1.0);
  for (std::size_t k = 0; k < 16; ++k) {
    const int row = static_cast<int>(k) + 1;
    arrow.add(0, row, conic::kConstant, phat.data()[k]);
    for (const auto& term : entry_expr(s, k).terms) arrow.add(0, row, term.var, -term.coef);
  }
  prog.psdBlocks.push_back(std::move(arrow));
  const auto sol = conic::solve(prog, kRegTolerance);
  RegularisationResult res = finish(prog, sol, s, RegMethod::ls);
  res.objective = euclidean_distance(phat.data(), res.behaviour.data());
  return res;
}

RegularisationResult regularise(const CountTable& t, const MomentStructure& s, RegMethod method) {
  return method == RegMethod::ml ? regularise_ml(t, s) : regularise_ls(t, s);
}

}  // namespace dirand
