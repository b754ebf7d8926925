// Barrier path-following method for programs with relative-entropy triples.
//
// Minimises t c.x + phi(x) subject to A x = b for an increasing sequence of
// t, where phi is the sum of -log det S_j(x) over PSD blocks and
// -log(w - v ln(v/u)) - log u - log v over triples. The barrier parameter
// of phi is theta = sum_j dim_j + 3 K, so a centred point is theta/t
// suboptimal. A strictly feasible start comes from a phase-I program that
// shifts every cone by a scalar s and drives s below zero.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <optional>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/QR>

#include "dirand/conic.hpp"

namespace dirand::conic::detail {
namespace {

constexpr double kReducedAccuracy = 1e-5;

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Compiled {
  int n = 0;
  VectorXd c;
  MatrixXd a;
  VectorXd b;
  // Per block: constant matrix and per-variable dense coefficient matrices.
  struct Block {
    MatrixXd constant;
    std::vector<int> vars;
    std::vector<MatrixXd> mats;
  };
  std::vector<Block> blocks;
  struct Triple {
    double c[3];
    std::vector<std::pair<int, double>> terms[3];
  };
  std::vector<Triple> triples;
  double theta = 0.0;
  // Phase I only: -log(R^2 - |x|^2) over the first ballVars variables keeps
  // the auxiliary problem bounded.
  int ballVars = 0;
  double ballRadius = 0.0;
};

Compiled compile(const ConicProgram& prog) {
  Compiled cp;
  cp.n = prog.variableCount;
  cp.c = VectorXd::Zero(cp.n);
  const double sgn = prog.sense == Sense::minimise ? 1.0 : -1.0;
  for (int i = 0; i < cp.n; ++i) cp.c(i) = sgn * prog.objective[static_cast<std::size_t>(i)];
  const int m = static_cast<int>(prog.equalities.size());
  cp.a = MatrixXd::Zero(m, cp.n);
  cp.b = VectorXd::Zero(m);
  for (int r = 0; r < m; ++r) {
    for (const auto& t : prog.equalities[static_cast<std::size_t>(r)].terms) cp.a(r, t.var) += t.coef;
    cp.b(r) = prog.equalities[static_cast<std::size_t>(r)].rhs;
  }
  for (const auto& blk : prog.psdBlocks) {
    Compiled::Block cb;
    cb.constant = MatrixXd::Zero(blk.dim, blk.dim);
    std::vector<int> slot(static_cast<std::size_t>(cp.n), -1);
    for (const auto& e : blk.entries) {
      MatrixXd* target = &cb.constant;
      if (e.var != kConstant) {
        auto& s = slot[static_cast<std::size_t>(e.var)];
        if (s < 0) {
          s = static_cast<int>(cb.vars.size());
          cb.vars.push_back(e.var);
          cb.mats.push_back(MatrixXd::Zero(blk.dim, blk.dim));
        }
        target = &cb.mats[static_cast<std::size_t>(s)];
      }
      (*target)(e.row, e.col) += e.coef;
      if (e.row != e.col) (*target)(e.col, e.row) += e.coef;
    }
    cp.theta += blk.dim;
    cp.blocks.push_back(std::move(cb));
  }
  for (const auto& cone : prog.expCones) {
    Compiled::Triple t;
    const AffineExpr* parts[3] = {&cone.u, &cone.v, &cone.w};
    for (int k = 0; k < 3; ++k) {
      t.c[k] = parts[k]->constant;
      for (const auto& term : parts[k]->terms) t.terms[k].emplace_back(term.var, term.coef);
    }
    cp.triples.push_back(std::move(t));
    cp.theta += 3.0;
  }
  return cp;
}

struct Eval {
  bool inDomain = false;
  double value = 0.0;
  VectorXd grad;
  MatrixXd hess;
  std::vector<MatrixXd> sinv;
};

// Barrier value (and optionally derivatives) at x.
Eval evaluate(const Compiled& cp, const VectorXd& x, bool derivatives) {
  Eval ev;
  if (derivatives) {
    ev.grad = VectorXd::Zero(cp.n);
    ev.hess = MatrixXd::Zero(cp.n, cp.n);
  }
  for (const auto& blk : cp.blocks) {
    MatrixXd s = blk.constant;
    for (std::size_t i = 0; i < blk.vars.size(); ++i) s += x(blk.vars[i]) * blk.mats[i];
    Eigen::LLT<MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) return ev;
    const MatrixXd l = llt.matrixL();
    double logdet = 0.0;
    for (int i = 0; i < l.rows(); ++i) {
      if (!(l(i, i) > 0.0)) return ev;
      logdet += 2.0 * std::log(l(i, i));
    }
    ev.value -= logdet;
    if (derivatives) {
      const MatrixXd sinv = llt.solve(MatrixXd::Identity(s.rows(), s.cols()));
      std::vector<MatrixXd> v(blk.vars.size());
      for (std::size_t i = 0; i < blk.vars.size(); ++i) {
        v[i] = sinv * blk.mats[i];
        ev.grad(blk.vars[i]) -= v[i].trace();
      }
      for (std::size_t i = 0; i < blk.vars.size(); ++i)
        for (std::size_t k = i; k < blk.vars.size(); ++k) {
          const double h = (v[i].cwiseProduct(v[k].transpose())).sum();
          ev.hess(blk.vars[i], blk.vars[k]) += h;
          if (k != i) ev.hess(blk.vars[k], blk.vars[i]) += h;
        }
      ev.sinv.push_back(sinv);
    }
  }
  for (const auto& t : cp.triples) {
    double val[3];
    for (int k = 0; k < 3; ++k) {
      val[k] = t.c[k];
      for (const auto& [var, coef] : t.terms[k]) val[k] += coef * x(var);
    }
    const double u = val[0], v = val[1], w = val[2];
    if (!(u > 0.0) || !(v > 0.0)) return ev;
    const double psi = w - v * std::log(v / u);
    if (!(psi > 0.0)) return ev;
    ev.value -= std::log(psi) + std::log(u) + std::log(v);
    if (derivatives) {
      const double dpsi[3] = {v / u, std::log(u / v) - 1.0, 1.0};
      double d2psi[3][3] = {{-v / (u * u), 1.0 / u, 0.0}, {1.0 / u, -1.0 / v, 0.0}, {0.0, 0.0, 0.0}};
      double g[3];
      double h[3][3];
      g[0] = -dpsi[0] / psi - 1.0 / u;
      g[1] = -dpsi[1] / psi - 1.0 / v;
      g[2] = -dpsi[2] / psi;
      for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) h[i][k] = dpsi[i] * dpsi[k] / (psi * psi) - d2psi[i][k] / psi;
      h[0][0] += 1.0 / (u * u);
      h[1][1] += 1.0 / (v * v);
      for (int i = 0; i < 3; ++i)
        for (const auto& [vi, ci] : t.terms[i]) {
          ev.grad(vi) += ci * g[i];
          for (int k = 0; k < 3; ++k)
            for (const auto& [vk, ck] : t.terms[k]) ev.hess(vi, vk) += ci * ck * h[i][k];
        }
    }
  }
  if (cp.ballVars > 0) {
    const double slack = cp.ballRadius * cp.ballRadius - x.head(cp.ballVars).squaredNorm();
    if (!(slack > 0.0)) return ev;
    ev.value -= std::log(slack);
    if (derivatives) {
      const VectorXd xb = x.head(cp.ballVars);
      ev.grad.head(cp.ballVars) += 2.0 * xb / slack;
      ev.hess.topLeftCorner(cp.ballVars, cp.ballVars) += 4.0 * xb * xb.transpose() / (slack * slack);
      ev.hess.topLeftCorner(cp.ballVars, cp.ballVars).diagonal().array() += 2.0 / slack;
    }
  }
  ev.inDomain = true;
  return ev;
}

struct CentringResult {
  bool ok = false;
  VectorXd x;
  VectorXd w;  // multiplier of A x = b in the Newton system
  int newtonSteps = 0;
};

// Minimise t c.x + phi(x) over A x = b from a strictly feasible x.
CentringResult centre(const Compiled& cp, VectorXd x, double t, int maxSteps) {
  CentringResult res;
  const int m = static_cast<int>(cp.a.rows());
  for (int step = 0; step < maxSteps; ++step) {
    Eval ev = evaluate(cp, x, true);
    if (!ev.inDomain) return res;
    VectorXd g = t * cp.c + ev.grad;
    // Full KKT system; the second block also pulls x back onto A x = b.
    MatrixXd kkt = MatrixXd::Zero(cp.n + m, cp.n + m);
    kkt.topLeftCorner(cp.n, cp.n) = ev.hess;
    kkt.topRightCorner(cp.n, m) = cp.a.transpose();
    kkt.bottomLeftCorner(m, cp.n) = cp.a;
    VectorXd rhs(cp.n + m);
    rhs.head(cp.n) = -g;
    rhs.tail(m) = cp.b - cp.a * x;
    Eigen::PartialPivLU<MatrixXd> lu(kkt);
    VectorXd sol = lu.solve(rhs);
    VectorXd dx = sol.head(cp.n);
    VectorXd w = sol.tail(m);
    if (!dx.allFinite()) return res;
    const double dec2 = std::max(0.0, dx.dot(ev.hess * dx));
    if (std::getenv("DIRAND_SOLVER_TRACE"))
      std::fprintf(stderr, "  t %.3e step %d f %.10e dec2 %.3e |dx| %.3e res %.2e\n", t, step, t * cp.c.dot(x) + ev.value,
                   dec2, dx.cwiseAbs().maxCoeff(), m ? (cp.a * x - cp.b).cwiseAbs().maxCoeff() : 0.0);
    res.w = w;
    res.x = x;
    res.newtonSteps = step;
    if (dec2 / 2.0 <= 1e-9) {
      res.ok = true;
      return res;
    }
    if (dx.cwiseAbs().maxCoeff() <= 1e-13 * (1.0 + x.cwiseAbs().maxCoeff())) {
      res.ok = dec2 <= 1e-2;
      return res;
    }
    // Backtracking line search on f = t c.x + phi.
    const double f0 = t * cp.c.dot(x) + ev.value;
    double alpha = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      VectorXd xn = x + alpha * dx;
      Eval en = evaluate(cp, xn, false);
      if (en.inDomain) {
        const double f1 = t * cp.c.dot(xn) + en.value;
        if (f1 <= f0 - 0.25 * alpha * dec2) {
          x = xn;
          moved = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!moved) {
      // Rounding dominates the decrease; the point is as centred as it gets.
      res.ok = dec2 <= 1e-4;
      return res;
    }
  }
  res.x = x;
  res.ok = true;
  return res;
}

struct PathResult {
  bool ok = false;
  VectorXd x;
  VectorXd w;
  double t = 0.0;
  int steps = 0;
};

// Follow the central path from a strictly feasible x. `stop` may end early.
template <class Stop>
PathResult follow_path(const Compiled& cp, VectorXd x, double gapTol, Stop stop) {
  PathResult pr;
  const double c0 = std::max(1.0, cp.c.cwiseAbs().maxCoeff());
  double t = 1.0 / c0;
  const double factor = 20.0;
  for (int outer = 0; outer < 60; ++outer) {
    CentringResult cr = centre(cp, x, t, 100);
    pr.steps += cr.newtonSteps;
    if (!cr.ok) return pr;
    x = cr.x;
    pr.x = x;
    pr.w = cr.w;
    pr.t = t;
    const double pobj = cp.c.dot(x);
    const double gap = cp.theta / t;
    if (stop(x)) {
      pr.ok = true;
      return pr;
    }
    if (gap / (1.0 + 2.0 * std::abs(pobj)) <= gapTol) {
      pr.ok = true;
      return pr;
    }
    t *= factor;
  }
  return pr;
}

// Shift every cone by the scalar variable s (last index) and minimise s.
Compiled phase_one(const Compiled& cp, double radius) {
  Compiled ph = cp;
  ph.ballVars = cp.n;
  ph.ballRadius = radius;
  ph.theta += 1.0;
  const int s = cp.n;
  ph.n = cp.n + 1;
  ph.c = VectorXd::Zero(ph.n);
  ph.c(s) = 1.0;
  ph.a.conservativeResize(Eigen::NoChange, ph.n);
  ph.a.col(s).setZero();
  for (auto& blk : ph.blocks) {
    blk.vars.push_back(s);
    blk.mats.push_back(MatrixXd::Identity(blk.constant.rows(), blk.constant.cols()));
  }
  for (auto& t : ph.triples)
    for (int k = 0; k < 3; ++k) t.terms[k].emplace_back(s, 1.0);
  return ph;
}

}  // namespace

ConicSolution solve_barrier(const ConicProgram& prog, const ToleranceConfig& tol) {
  ConicSolution sol;
  const Compiled cp = compile(prog);
  const int m = static_cast<int>(cp.a.rows());

  // Least-norm point of the affine set.
  VectorXd x0 = VectorXd::Zero(cp.n);
  if (m > 0) {
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(cp.a);
    x0 = cod.solve(cp.b);
    if ((cp.a * x0 - cp.b).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + cp.b.cwiseAbs().maxCoeff())) {
      sol.status = Status::infeasible;
      sol.message = "inconsistent equality constraints";
      return sol;
    }
  }

  if (!evaluate(cp, x0, false).inDomain) {
    const Compiled ph = phase_one(cp, 1e3 * (1.0 + x0.cwiseAbs().maxCoeff()));
    VectorXd z(ph.n);
    z.head(cp.n) = x0;
    double s0 = 1.0;
    for (int k = 0; k < 200; ++k) {
      z(cp.n) = s0;
      if (evaluate(ph, z, false).inDomain) break;
      s0 *= 2.0;
    }
    if (!evaluate(ph, z, false).inDomain) {
      sol.message = "phase I could not find a starting point";
      return sol;
    }
    PathResult pr = follow_path(ph, z, 1e-12, [&](const VectorXd& v) { return v(cp.n) < 0.0; });
    if (!pr.ok || !(pr.x(cp.n) < 0.0)) {
      sol.status = pr.ok ? Status::infeasible : Status::numericalFailure;
      sol.message = pr.ok ? "no strictly feasible point" : "phase I failed";
      return sol;
    }
    x0 = pr.x.head(cp.n);
  }

  PathResult pr = follow_path(cp, x0, tol.gap, [](const VectorXd&) { return false; });
  sol.iterations = pr.steps;
  if (pr.x.size() == 0) {
    sol.message = "centring failed";
    return sol;
  }
  const double sgn = prog.sense == Sense::minimise ? 1.0 : -1.0;
  const VectorXd& x = pr.x;
  sol.primal.assign(x.data(), x.data() + cp.n);
  const double pobj = cp.c.dot(x);
  const double gapAbs = cp.theta / pr.t;
  sol.objective = sgn * pobj + prog.objectiveConstant;
  sol.dualObjective = sgn * (pobj - gapAbs) + prog.objectiveConstant;
  sol.gap = gapAbs / (1.0 + std::abs(pobj) + std::abs(pobj - gapAbs));
  sol.primalResidual = m > 0 ? (cp.a * x - cp.b).cwiseAbs().maxCoeff() / std::max(1.0, cp.b.cwiseAbs().maxCoeff()) : 0.0;
  sol.equalityDuals.resize(static_cast<std::size_t>(m));
  for (int r = 0; r < m; ++r) sol.equalityDuals[static_cast<std::size_t>(r)] = sgn * (-pr.w(r) / pr.t);
  Eval ev = evaluate(cp, x, true);
  for (const auto& sinv : ev.sinv) sol.psdDuals.push_back(sgn * sinv / pr.t);
  const bool converged = pr.ok && sol.gap <= tol.gap && sol.primalResidual <= tol.feasibility;
  sol.status = converged ? Status::optimal : Status::numericalFailure;
  sol.message = converged ? "converged" : "path following stopped early";
  // Centring can stall on rounding at large t; the last centred point is
  // still a certified one, just less accurate.
  if (!converged && sol.gap <= kReducedAccuracy && sol.primalResidual <= kReducedAccuracy) {
    sol.reducedAccuracy = true;
    char buf[96];
    std::snprintf(buf, sizeof buf, "converged to reduced accuracy (gap %.1e)", sol.gap);
    sol.message = buf;
  }
  return sol;
}

}  // namespace dirand::conic::detail
