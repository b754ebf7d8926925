#include "dirand/certify.hpp"

#include <cmath>

#include "dirand/bound.hpp"
#include "dirand/errors.hpp"

namespace dirand {
namespace {

// Mixing weights towards the uniform behaviour tried in turn when the full
// program stalls; the last entry is a sentinel.
constexpr std::array<double, 6> kBoundaryMixing{1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 0.0};

struct GuessProgram {
  conic::ConicProgram prog{0, conic::Sense::maximise};
  std::vector<std::array<int, 4>> pieces;  // (a, b, x, y) per block
  int blockVars = 0;
};

GuessProgram build_guess(const InputPairSet& chi, const MomentStructure& s) {
  GuessProgram gp;
  gp.blockVars = s.variable_count();
  const auto& e = ns_embedding();
  const auto idx = s.behaviour_moments();
  for (const auto& xy : chi.members())
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        const int offset = gp.prog.add_variables(gp.blockVars);
        gp.prog.psdBlocks.push_back(s.block(offset));
        const int row = static_cast<int>(flat_index(a, b, xy[0], xy[1]));
        for (int j = 0; j < kMomentCount; ++j)
          gp.prog.objective[static_cast<std::size_t>(offset + idx[j])] += e(row, j);
        gp.pieces.push_back({a, b, xy[0], xy[1]});
      }
  return gp;
}

// Pieces summing to q, one equality per no-signalling moment.
GuessProgram build_full(const Tensor16& q, const InputPairSet& chi, const MomentStructure& s) {
  GuessProgram gp = build_guess(chi, s);
  const MomentVector m = moments_of(q);
  const auto idx = s.behaviour_moments();
  for (int j = 0; j < kMomentCount; ++j) {
    std::vector<conic::LinearTerm> terms;
    for (std::size_t k = 0; k < gp.pieces.size(); ++k)
      terms.push_back({static_cast<int>(k) * gp.blockVars + idx[j], 1.0});
    gp.prog.add_equality(std::move(terms), m[j]);
  }
  return gp;
}

MomentVector block_moments(const GuessProgram& gp, const MomentStructure& s, const std::vector<double>& y,
                           std::size_t k) {
  MomentVector m{};
  const auto idx = s.behaviour_moments();
  for (int j = 0; j < kMomentCount; ++j)
    m[j] = y[k * static_cast<std::size_t>(gp.blockVars) + static_cast<std::size_t>(idx[j])];
  return m;
}

void fill_common(GuessingResult& r, const GuessProgram& gp, const MomentStructure& s, const conic::ConicSolution& sol) {
  r.G = sol.objective;
  r.level = s.level();
  r.status = sol.status;
  r.solverGap = sol.gap;
  r.iterations = sol.iterations;
  for (std::size_t k = 0; k < gp.pieces.size(); ++k) r.pieces.push_back(tensor_from_moments(block_moments(gp, s, sol.primal, k)));
}

// Tensor c with c . P = g . moments_of(P) for every P (not only
// no-signalling ones).
BellExpression readout_expression(const MomentVector& g) {
  Tensor16 c{};
  for (std::size_t k = 0; k < 16; ++k) {
    Tensor16 unit{};
    unit[k] = 1.0;
    const MomentVector col = moments_of(unit);
    for (int j = 0; j < kMomentCount; ++j) c[k] += g[j] * col[j];
  }
  return BellExpression(c);
}

}  // namespace

GuessingResult guessing_full(const Behaviour& p, const InputPairSet& chi, const MomentStructure& s) {
  return guessing_full(p.data(), chi, s);
}

GuessingResult guessing_full(const Tensor16& p, const InputPairSet& chi, const MomentStructure& s) {
  const double sig = signalling_norm(p);
  if (sig > kNormalisationTolerance)
    throw Infeasible("behaviour is signalling (norm " + std::to_string(sig) + "); regularise it first");
  const Tensor16 uniform = Behaviour::uniform().data();
  conic::ConicSolution sol;
  double kappa = 0.0;
  for (double next : kBoundaryMixing) {
    Tensor16 q = p;
    for (std::size_t k = 0; k < 16; ++k) q[k] = (1.0 - kappa) * p[k] + kappa * uniform[k];
    GuessProgram gp = build_full(q, chi, s);
    sol = conic::solve(gp.prog);
    if (sol.usable()) {
      GuessingResult r;
      r.chi = chi;
      r.mixing = kappa;
      fill_common(r, gp, s, sol);
      MomentVector g{};
      for (int jj = 0; jj < kMomentCount; ++jj) g[jj] = sol.equalityDuals[static_cast<std::size_t>(jj)];
      r.dualFunctional = g;
      // g bounds the guessing probability from above, so smaller values mean
      // more randomness. The extracted expression is -g: violations then grow
      // upwards from the local bound, which is the orientation the threshold
      // grid of the bound assumes.
      MomentVector neg{};
      for (int jj = 0; jj < kMomentCount; ++jj) neg[jj] = -g[jj];
      r.rawDual = readout_expression(neg);
      r.canonicalDual = expression_from_moment_functional(neg);
      return r;
    }
    if (sol.status == conic::Status::infeasible || !membership(p, s).feasible)
      throw Infeasible("behaviour has no moment completion at level " + std::to_string(s.level()));
    // A point on the boundary of the relaxation leaves every piece on the
    // boundary too and the multipliers unbounded; nudge towards the centre.
    kappa = next;
  }
  throw SolverFailure("full guessing program: " + conic::to_string(sol.status) + " (" + sol.message + ")");
}

namespace {

GuessingResult bell_at(const BellExpression& expr, double istar, const InputPairSet& chi, const MomentStructure& s,
                       double qmin, double qmax) {
  GuessProgram gp = build_guess(chi, s);
  const MomentVector g = moment_functional(expr);
  const auto idx = s.behaviour_moments();
  const std::size_t K = gp.pieces.size();
  std::vector<conic::LinearTerm> norm;
  for (std::size_t k = 0; k < K; ++k) norm.push_back({static_cast<int>(k) * gp.blockVars + s.normalisation_var(), 1.0});
  gp.prog.add_equality(std::move(norm), 1.0);
  // An expression constant on no-signalling behaviours adds nothing beyond
  // the normalisation and would make the constraints dependent.
  double gmax = 0.0;
  for (int j = 1; j < kMomentCount; ++j) gmax = std::max(gmax, std::abs(g[j]));
  if (gmax > 1e-12 * (1.0 + std::abs(g[0]))) {
    // The row only fixes a hyperplane, so the constant moment is moved to the
    // right-hand side and the rest scaled to unit max-norm. Rescaled or
    // shifted expressions then give the same program.
    std::vector<conic::LinearTerm> bell;
    for (std::size_t k = 0; k < K; ++k)
      for (int j = 1; j < kMomentCount; ++j)
        if (g[j] != 0.0) bell.push_back({static_cast<int>(k) * gp.blockVars + idx[j], g[j] / gmax});
    gp.prog.add_equality(std::move(bell), (istar - g[0]) / gmax);
  }
  const auto sol = conic::solve(gp.prog);
  if (sol.status == conic::Status::infeasible)
    throw InfeasibleValue("Bell value " + std::to_string(istar) + " is not attainable in the relaxation");
  if (!sol.usable())
    throw SolverFailure("Bell guessing program at " + std::to_string(istar) + " in [" + std::to_string(qmin) + ", " +
                        std::to_string(qmax) + "]: " + conic::to_string(sol.status) + " (" + sol.message + ")");
  GuessingResult r;
  r.chi = chi;
  r.evaluatedAt = istar;
  fill_common(r, gp, s, sol);
  return r;
}

}  // namespace

GuessingResult guessing_bell(const BellExpression& expr, double istar, const InputPairSet& chi,
                             const MomentStructure& s) {
  double qmax = 0.0, qmin = 0.0;
  if (expr.bounds() && expr.bounds()->level == s.level()) {
    qmax = expr.bounds()->quantumMax;
    qmin = expr.bounds()->quantumMin;
  } else {
    qmax = max_bell(expr, s);
    qmin = min_bell(expr, s);
  }
  const double tol = 1e-7 * (1.0 + std::max(std::abs(qmax), std::abs(qmin)));
  if (!(istar <= qmax + tol && istar >= qmin - tol))
    throw InfeasibleValue("Bell value " + std::to_string(istar) + " outside the relaxation range [" +
                          std::to_string(qmin) + ", " + std::to_string(qmax) + "]");
  // At the ends of the range the feasible set has no interior and the Bell
  // multiplier diverges; evaluate a hair inside instead. If the solver still
  // stalls there, the inset is widened (at most 1e-4 of the range).
  const double requested = istar;
  for (double rel = kEndpointInset;; rel *= 10.0) {
    const double inset = rel * (qmax - qmin);
    const double at =
        qmax - qmin > 2.0 * inset ? std::clamp(requested, qmin + inset, qmax - inset) : 0.5 * (qmin + qmax);
    const bool clamped = at != requested;
    try {
      return bell_at(expr, at, chi, s, qmin, qmax);
    } catch (const SolverFailure&) {
      if (!clamped || rel >= 1e-4 * (1.0 - 1e-9)) throw;
    }
  }
}

conic::ConicProgram full_guessing_program(const Tensor16& p, const InputPairSet& chi, const MomentStructure& s) {
  return build_full(p, chi, s).prog;
}

BellExpression canonical_bell(const BellExpression& expr) {
  return expression_from_moment_functional(moment_functional(expr));
}

std::array<double, 4> raw_input_distribution(const InputPairSet& chi, double piStar) {
  if (chi.is_all()) return {0.25, 0.25, 0.25, 0.25};
  if (chi.size() != 1) throw InvalidArgument("biased raw-phase inputs need a single input pair");
  if (!(piStar > 0.0 && piStar < 1.0)) throw InvalidArgument("bias must lie in (0, 1)");
  std::array<double, 4> pi{};
  for (int k = 0; k < 4; ++k) pi[static_cast<std::size_t>(k)] = (chi.mask() >> k) & 1u ? piStar : (1.0 - piStar) / 3.0;
  return pi;
}

ChiSelection select_chi(const Behaviour& preg, const MomentStructure& s, const ChiBudget& budget) {
  ChiSelection sel;
  std::vector<InputPairSet> sets{InputPairSet::all()};
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) sets.push_back(InputPairSet::single(x, y));
  std::vector<GuessingResult> results;
  for (const auto& chi : sets) {
    results.push_back(guessing_full(preg, chi, s));
    sel.candidates.push_back({chi, results.back().G, std::nan("")});
  }
  std::size_t best = 1;
  for (std::size_t k = 2; k < sets.size(); ++k)
    if (results[k].G < results[best].G) best = k;
  sel.bestSingleton = sets[best];

  for (std::size_t k : {std::size_t{0}, best}) {
    const BellExpression expr = with_quantum_bounds(*results[k].canonicalDual, s);
    BoundConfig cfg;
    cfg.eps = budget.eps;
    cfg.epsPrime = budget.epsPrime;
    cfg.M = budget.M;
    cfg.level = s.level();
    cfg.chi = sets[k];
    cfg.pi = raw_input_distribution(sets[k], budget.piStar);
    cfg.nTot = budget.nTot;
    double inside = 0.0;
    for (const auto& xy : sets[k].members()) inside += cfg.pi[static_cast<std::size_t>(pair_index(xy[0], xy[1]))];
    const auto expectedGamma = static_cast<std::int64_t>(std::llround(static_cast<double>(budget.nRaw) * (1.0 - inside)));
    const auto rep = evaluate_bound(expr, bell_value(expr, preg), budget.nRaw, expectedGamma, cfg, s);
    sel.candidates[k].projectedRate = rep.rate;
  }
  sel.chosen = sel.candidates[best].projectedRate > sel.candidates[0].projectedRate ? sets[best] : sets[0];
  return sel;
}

}  // namespace dirand
