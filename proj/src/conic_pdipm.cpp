// Primal-dual interior-point method for conic programs with PSD blocks only.
//
// Internally everything is a minimisation of c.y over
//   A y = b,  S_j = F_j0 + sum_i y_i F_ji  PSD,
// with Lagrange dual
//   maximise b.lambda - sum_j <Z_j, F_j0>  s.t.  A^T lambda + F^*(Z) = c,  Z_j PSD.
// The slack S_j is carried as its own iterate (infeasible start), so the
// block residual R_j = S_j(y) - S_j is driven to zero alongside the equality
// and dual residuals.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "dirand/conic.hpp"

namespace dirand::conic::detail {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kReducedAccuracy = 1e-5;
constexpr int kStallWindow = 15;

struct Coef {
  int row;
  int col;
  double value;
};

// Linear part of one block restricted to a single variable.
struct BlockVar {
  int var;
  std::vector<Coef> coefs;  // upper triangle, row <= col
};

struct BlockData {
  int dim = 0;
  MatrixXd constant;
  std::vector<BlockVar> vars;
};

std::vector<BlockData> compile_blocks(const ConicProgram& prog) {
  std::vector<BlockData> out;
  out.reserve(prog.psdBlocks.size());
  for (const auto& blk : prog.psdBlocks) {
    BlockData bd;
    bd.dim = blk.dim;
    bd.constant = MatrixXd::Zero(blk.dim, blk.dim);
    std::map<int, std::map<std::pair<int, int>, double>> perVar;
    for (const auto& e : blk.entries) {
      if (e.var == kConstant) {
        bd.constant(e.row, e.col) += e.coef;
        if (e.row != e.col) bd.constant(e.col, e.row) += e.coef;
      } else {
        perVar[e.var][{e.row, e.col}] += e.coef;
      }
    }
    for (auto& [var, entries] : perVar) {
      BlockVar bv{var, {}};
      for (auto& [rc, v] : entries)
        if (v != 0.0) bv.coefs.push_back({rc.first, rc.second, v});
      if (!bv.coefs.empty()) bd.vars.push_back(std::move(bv));
    }
    out.push_back(std::move(bd));
  }
  return out;
}

// <F, X> for a symmetric F given by its upper triangle.
double inner(const std::vector<Coef>& f, const MatrixXd& x) {
  double s = 0.0;
  for (const auto& c : f) s += c.value * (c.row == c.col ? x(c.row, c.col) : x(c.row, c.col) + x(c.col, c.row));
  return s;
}

void add_scaled(MatrixXd& m, const std::vector<Coef>& f, double s) {
  for (const auto& c : f) {
    m(c.row, c.col) += s * c.value;
    if (c.row != c.col) m(c.col, c.row) += s * c.value;
  }
}

MatrixXd linear_part(const BlockData& bd, const VectorXd& y) {
  MatrixXd m = MatrixXd::Zero(bd.dim, bd.dim);
  for (const auto& bv : bd.vars) add_scaled(m, bv.coefs, y(bv.var));
  return m;
}

MatrixXd sym(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

// Largest alpha with X + alpha dX PSD (infinity if unbounded).
double max_step(const MatrixXd& x, const MatrixXd& dx) {
  Eigen::LLT<MatrixXd> llt(x);
  if (llt.info() != Eigen::Success) return 0.0;
  MatrixXd l = llt.matrixL();
  MatrixXd tmp = l.triangularView<Eigen::Lower>().solve(dx);
  MatrixXd m = l.triangularView<Eigen::Lower>().solve(tmp.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym(m), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  if (lmin >= 0.0) return std::numeric_limits<double>::infinity();
  return -1.0 / lmin;
}

struct Direction {
  VectorXd dy;
  VectorXd dlambda;
  std::vector<MatrixXd> dS;
  std::vector<MatrixXd> dZ;
};

class PrimalDualSolver {
 public:
  PrimalDualSolver(const ConicProgram& prog, const ToleranceConfig& tol)
      : prog_(prog), tol_(tol), n_(prog.variableCount), m_(static_cast<int>(prog.equalities.size())) {
    blocks_ = compile_blocks(prog);
    c_ = VectorXd::Zero(n_);
    const double sgn = prog.sense == Sense::minimise ? 1.0 : -1.0;
    for (int i = 0; i < n_; ++i) c_(i) = sgn * prog.objective[static_cast<std::size_t>(i)];
    std::vector<Eigen::Triplet<double>> trips;
    b_ = VectorXd::Zero(m_);
    for (int r = 0; r < m_; ++r) {
      for (const auto& t : prog.equalities[static_cast<std::size_t>(r)].terms) trips.emplace_back(r, t.var, t.coef);
      b_(r) = prog.equalities[static_cast<std::size_t>(r)].rhs;
    }
    a_.resize(m_, n_);
    a_.setFromTriplets(trips.begin(), trips.end());
    a_.makeCompressed();
    totalDim_ = 0;
    for (const auto& bd : blocks_) totalDim_ += bd.dim;
  }

  ConicSolution run();

 private:
  VectorXd adjoint(const std::vector<MatrixXd>& x) const {
    VectorXd out = VectorXd::Zero(n_);
    for (std::size_t j = 0; j < blocks_.size(); ++j)
      for (const auto& bv : blocks_[j].vars) out(bv.var) += inner(bv.coefs, x[j]);
    return out;
  }

  bool factorise();
  Direction direction(const std::vector<MatrixXd>& target, const VectorXd& rd, const VectorXd& rp) const;

  const ConicProgram& prog_;
  ToleranceConfig tol_;
  int n_;
  int m_;
  int totalDim_;
  std::vector<BlockData> blocks_;
  VectorXd c_;
  VectorXd b_;
  Eigen::SparseMatrix<double> a_;

  // Iterates.
  VectorXd y_;
  VectorXd lambda_;
  std::vector<MatrixXd> s_;
  std::vector<MatrixXd> z_;
  // Per-iteration data.
  std::vector<MatrixXd> sinv_;
  std::vector<MatrixXd> resid_;  // S(y) - S
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> hfac_;
  MatrixXd hinvAt_;
  Eigen::LDLT<MatrixXd> schur_;
};

bool PrimalDualSolver::factorise() {
  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t j = 0; j < blocks_.size(); ++j) {
    const auto& bd = blocks_[j];
    const MatrixXd& z = z_[j];
    const MatrixXd& si = sinv_[j];
    MatrixXd w(bd.dim, bd.dim);
    for (const auto& bi : bd.vars) {
      // W = Z F_i S^{-1}
      w.setZero();
      for (const auto& c : bi.coefs) {
        w.noalias() += c.value * z.col(c.row) * si.row(c.col);
        if (c.row != c.col) w.noalias() += c.value * z.col(c.col) * si.row(c.row);
      }
      for (const auto& bk : bd.vars) {
        if (bk.var < bi.var) continue;
        const double h = inner(bk.coefs, w);
        trips.emplace_back(bi.var, bk.var, h);
        if (bk.var != bi.var) trips.emplace_back(bk.var, bi.var, h);
      }
    }
  }
  Eigen::SparseMatrix<double> h(n_, n_);
  h.setFromTriplets(trips.begin(), trips.end());
  double maxDiag = 0.0;
  for (int i = 0; i < n_; ++i) maxDiag = std::max(maxDiag, std::abs(h.coeff(i, i)));
  // Variables absent from every block get a unit diagonal so the factor
  // exists. The rest get a relative nudge only: the diagonal spans many
  // orders of magnitude near the optimum and an absolute shift would swamp
  // the flat directions.
  Eigen::SparseMatrix<double> shift(n_, n_);
  std::vector<Eigen::Triplet<double>> diag;
  for (int i = 0; i < n_; ++i) {
    const double d = h.coeff(i, i);
    diag.emplace_back(i, i, d > 1e-300 ? 1e-15 * d : 1.0 + maxDiag);
  }
  shift.setFromTriplets(diag.begin(), diag.end());
  h += shift;
  hfac_.compute(h);
  if (hfac_.info() != Eigen::Success) return false;
  if (m_ > 0) {
    MatrixXd at = MatrixXd(a_.transpose());
    hinvAt_ = hfac_.solve(at);
    MatrixXd schur = a_ * hinvAt_;
    schur_.compute(schur);
    if (schur_.info() != Eigen::Success) return false;
  }
  return true;
}

Direction PrimalDualSolver::direction(const std::vector<MatrixXd>& target, const VectorXd& rd,
                                      const VectorXd& rp) const {
  const std::size_t nb = blocks_.size();
  std::vector<MatrixXd> t(nb);
  for (std::size_t j = 0; j < nb; ++j) t[j] = target[j] - sym(z_[j] * resid_[j] * sinv_[j]);
  Direction d;
  d.dy = VectorXd::Zero(n_);
  d.dlambda = VectorXd::Zero(m_);
  d.dS.resize(nb);
  d.dZ.resize(nb);
  VectorXd h = adjoint(t) - rd;
  VectorXd rpr = rp;
  // The reduced system loses accuracy as the iterates approach the boundary,
  // so the true residuals are fed back while that keeps reducing them.
  Direction best;
  double bestResid = std::numeric_limits<double>::infinity();
  for (int pass = 0; pass < 8; ++pass) {
    VectorXd hinvh = hfac_.solve(h);
    VectorXd dl = VectorXd::Zero(m_);
    VectorXd dy = hinvh;
    if (m_ > 0) {
      dl = schur_.solve(rpr - a_ * hinvh);
      dy += hinvAt_ * dl;
    }
    d.dy += dy;
    d.dlambda += dl;
    for (std::size_t j = 0; j < nb; ++j) {
      d.dS[j] = linear_part(blocks_[j], d.dy) + resid_[j];
      d.dZ[j] = target[j] - sym(z_[j] * d.dS[j] * sinv_[j]);
    }
    VectorXd r = rd - adjoint(d.dZ);
    if (m_ > 0) r -= a_.transpose() * d.dlambda;
    rpr = m_ > 0 ? VectorXd(rp - a_ * d.dy) : VectorXd::Zero(0);
    const double scale = 1.0 + rd.cwiseAbs().maxCoeff() + d.dy.cwiseAbs().maxCoeff();
    const double resid = std::max(r.cwiseAbs().maxCoeff(), m_ > 0 ? rpr.cwiseAbs().maxCoeff() : 0.0);
    if (resid >= bestResid) break;
    bestResid = resid;
    best = d;
    if (resid <= 1e-14 * scale) break;
    h = -r;
  }
  return best;
}

ConicSolution PrimalDualSolver::run() {
  const std::size_t nb = blocks_.size();
  ConicSolution sol;

  double dataScale = 1.0;
  for (const auto& bd : blocks_) dataScale = std::max(dataScale, bd.constant.cwiseAbs().maxCoeff());
  const double cScale = std::max(1.0, c_.size() ? c_.cwiseAbs().maxCoeff() : 0.0);
  const double bScale = std::max(1.0, m_ ? b_.cwiseAbs().maxCoeff() : 0.0);

  y_ = VectorXd::Zero(n_);
  lambda_ = VectorXd::Zero(m_);
  s_.resize(nb);
  z_.resize(nb);
  sinv_.resize(nb);
  resid_.resize(nb);
  const double xi = 10.0 * std::max(dataScale, bScale);
  const double eta = 10.0 * cScale;
  for (std::size_t j = 0; j < nb; ++j) {
    s_[j] = xi * MatrixXd::Identity(blocks_[j].dim, blocks_[j].dim);
    z_[j] = eta * MatrixXd::Identity(blocks_[j].dim, blocks_[j].dim);
  }

  // Best iterate so far by the worst of the three stopping measures; near
  // degenerate optima the dual residual can drift once rounding dominates,
  // so that iterate is returned when the method cannot finish.
  ConicSolution best;
  double bestMerit = std::numeric_limits<double>::infinity();
  int bestIter = 0;
  auto fallback = [&](ConicSolution failed) {
    if (bestMerit <= kReducedAccuracy) {
      best.status = Status::numericalFailure;
      best.reducedAccuracy = true;
      best.message = "converged to reduced accuracy (" + failed.message + ")";
      best.iterations = failed.iterations;
      return best;
    }
    return failed;
  };

  int stalls = 0;
  for (int iter = 0; iter <= tol_.maxIterations; ++iter) {
    sol.iterations = iter;
    // Residuals and objectives.
    double comp = 0.0;
    double blockResid = 0.0;
    double constTerm = 0.0;
    for (std::size_t j = 0; j < nb; ++j) {
      resid_[j] = blocks_[j].constant + linear_part(blocks_[j], y_) - s_[j];
      blockResid = std::max(blockResid, resid_[j].cwiseAbs().maxCoeff());
      comp += (z_[j].cwiseProduct(s_[j])).sum();
      constTerm += (z_[j].cwiseProduct(blocks_[j].constant)).sum();
    }
    const double mu = totalDim_ > 0 ? comp / totalDim_ : 0.0;
    VectorXd rp = m_ ? VectorXd(b_ - a_ * y_) : VectorXd::Zero(0);
    VectorXd aty = m_ ? VectorXd(a_.transpose() * lambda_) : VectorXd::Zero(n_);
    VectorXd fz = adjoint(z_);
    VectorXd rd = c_ - aty - fz;
    const double pobj = c_.dot(y_);
    const double dobj = (m_ ? b_.dot(lambda_) : 0.0) - constTerm;
    const double relGap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    const double pinf = std::max(m_ ? rp.cwiseAbs().maxCoeff() / bScale : 0.0, blockResid / std::max(1.0, dataScale));
    // Relative to the size of the terms that cancel: large multipliers near
    // degenerate optima leave absolute residuals at the rounding level of
    // A^T lambda and F^*(Z).
    const double dScale = std::max({cScale, n_ ? aty.cwiseAbs().maxCoeff() : 0.0, n_ ? fz.cwiseAbs().maxCoeff() : 0.0});
    const double dinf = n_ ? rd.cwiseAbs().maxCoeff() / dScale : 0.0;

    const double sgn = prog_.sense == Sense::minimise ? 1.0 : -1.0;
    auto fill = [&](Status st, std::string msg) {
      sol.status = st;
      sol.message = std::move(msg);
      sol.primal.assign(y_.data(), y_.data() + n_);
      sol.equalityDuals.resize(static_cast<std::size_t>(m_));
      for (int r = 0; r < m_; ++r) sol.equalityDuals[static_cast<std::size_t>(r)] = sgn * lambda_(r);
      sol.psdDuals.resize(nb);
      for (std::size_t j = 0; j < nb; ++j) sol.psdDuals[j] = sgn * z_[j];
      sol.objective = sgn * pobj + prog_.objectiveConstant;
      sol.dualObjective = sgn * dobj + prog_.objectiveConstant;
      sol.gap = relGap;
      sol.primalResidual = pinf;
      return sol;
    };

    if (std::getenv("DIRAND_SOLVER_TRACE"))
      std::fprintf(stderr, "%3d pobj %.10e dobj %.10e gap %.2e pinf %.2e dinf %.2e mu %.2e\n", iter, pobj, dobj, relGap,
                   pinf, dinf, mu);
    if (relGap <= tol_.gap && pinf <= tol_.feasibility && dinf <= tol_.feasibility) {
      return fill(Status::optimal, "converged");
    }
    const double merit = std::max({relGap, pinf, dinf});
    if (merit < bestMerit && std::isfinite(merit)) {
      bestMerit = merit;
      bestIter = iter;
      best = fill(Status::optimal, "");
    }
    if (iter - bestIter >= kStallWindow && bestMerit <= kReducedAccuracy)
      return fallback(fill(Status::numericalFailure, "no progress"));
    // Farkas rays.
    if (dobj > 0.0) {
      const double ray = (c_ - rd).cwiseAbs().maxCoeff() / dobj;
      if (ray < 1e-8 && dobj > 1e6 * cScale) return fill(Status::infeasible, "primal infeasible");
    }
    if (pobj < 0.0) {
      double rayA = m_ ? (a_ * y_).cwiseAbs().maxCoeff() : 0.0;
      double minEig = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < nb; ++j) {
        MatrixXd lin = linear_part(blocks_[j], y_);
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(lin, Eigen::EigenvaluesOnly);
        minEig = std::min(minEig, es.eigenvalues().minCoeff());
      }
      if (std::isinf(minEig)) minEig = 0.0;
      if (-pobj > 1e6 * bScale && rayA / -pobj < 1e-8 && minEig / -pobj > -1e-8)
        return fill(Status::infeasible, "dual infeasible (unbounded)");
    }
    if (iter == tol_.maxIterations) return fallback(fill(Status::numericalFailure, "iteration limit"));
    if (!std::isfinite(pobj) || !std::isfinite(dobj)) return fallback(fill(Status::numericalFailure, "non-finite iterate"));

    for (std::size_t j = 0; j < nb; ++j) {
      Eigen::LLT<MatrixXd> llt(s_[j]);
      if (llt.info() != Eigen::Success) return fallback(fill(Status::numericalFailure, "slack lost definiteness"));
      sinv_[j] = llt.solve(MatrixXd::Identity(blocks_[j].dim, blocks_[j].dim));
      sinv_[j] = sym(sinv_[j]);
    }
    if (!factorise()) return fallback(fill(Status::numericalFailure, "Schur complement factorisation failed"));

    // Predictor.
    std::vector<MatrixXd> target(nb);
    for (std::size_t j = 0; j < nb; ++j) target[j] = -z_[j];
    Direction pred = direction(target, rd, rp);
    double ap = 1.0, ad = 1.0;
    for (std::size_t j = 0; j < nb; ++j) {
      ap = std::min(ap, max_step(s_[j], pred.dS[j]));
      ad = std::min(ad, max_step(z_[j], pred.dZ[j]));
    }
    double muAff = 0.0;
    for (std::size_t j = 0; j < nb; ++j)
      muAff += ((s_[j] + ap * pred.dS[j]).cwiseProduct(z_[j] + ad * pred.dZ[j])).sum();
    muAff = totalDim_ > 0 ? muAff / totalDim_ : 0.0;
    double sigma = mu > 0.0 ? std::pow(std::max(0.0, muAff) / mu, 3) : 0.0;
    sigma = std::clamp(sigma, 0.0, 1.0);

    // Corrector.
    for (std::size_t j = 0; j < nb; ++j)
      target[j] = sigma * mu * sinv_[j] - z_[j] - sym(pred.dZ[j] * pred.dS[j] * sinv_[j]);
    Direction corr = direction(target, rd, rp);
    double apMax = std::numeric_limits<double>::infinity(), adMax = apMax;
    for (std::size_t j = 0; j < nb; ++j) {
      apMax = std::min(apMax, max_step(s_[j], corr.dS[j]));
      adMax = std::min(adMax, max_step(z_[j], corr.dZ[j]));
    }
    const double tau = 0.98;
    ap = std::min(1.0, tau * apMax);
    ad = std::min(1.0, tau * adMax);
    if (ap < 1e-10 && ad < 1e-10) {
      if (++stalls >= 3) return fallback(fill(Status::numericalFailure, "step length stalled"));
    } else {
      stalls = 0;
    }

    if (std::getenv("DIRAND_SOLVER_TRACE")) std::fprintf(stderr, "    ap %.3e ad %.3e sigma %.3e\n", ap, ad, sigma);
    y_ += ap * corr.dy;
    if (m_) lambda_ += ad * corr.dlambda;
    for (std::size_t j = 0; j < nb; ++j) {
      s_[j] = sym(s_[j] + ap * corr.dS[j]);
      z_[j] = sym(z_[j] + ad * corr.dZ[j]);
    }
  }
  return sol;
}

}  // namespace

ConicSolution solve_primal_dual(const ConicProgram& prog, const ToleranceConfig& tol) {
  PrimalDualSolver solver(prog, tol);
  return solver.run();
}

}  // namespace dirand::conic::detail
