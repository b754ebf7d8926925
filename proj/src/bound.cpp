#include "dirand/bound.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <tuple>

#include "dirand/errors.hpp"

namespace dirand {
namespace {

using CacheKey = std::tuple<Tensor16, unsigned, int, double>;

std::mutex& cache_mutex() {
  static std::mutex m;
  return m;
}

std::map<CacheKey, double>& g_cache() {
  static std::map<CacheKey, double> c;
  return c;
}

// G_I(v), memoised. The solver is deterministic, so caching never changes
// a reported number.
double cached_guessing(const BellExpression& expr, const InputPairSet& chi, const MomentStructure& s, double v) {
  const CacheKey key{expr.coefficients(), chi.mask(), s.level(), v};
  {
    std::lock_guard<std::mutex> lock(cache_mutex());
    auto it = g_cache().find(key);
    if (it != g_cache().end()) return it->second;
  }
  const double g = guessing_bell(expr, v, chi, s).G;
  std::lock_guard<std::mutex> lock(cache_mutex());
  g_cache().emplace(key, g);
  return g;
}

BellBounds bounds_at_level(const BellExpression& expr, const MomentStructure& s) {
  if (expr.bounds() && expr.bounds()->level == s.level()) return *expr.bounds();
  return *with_quantum_bounds(expr, s).bounds();
}

double h_of(double g) { return g >= 1.0 ? 0.0 : -std::log2(g); }

}  // namespace

void BoundConfig::validate() const {
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("eps must lie in (0, 1)");
  if (!(epsPrime > 0.0 && epsPrime < 1.0)) throw InvalidArgument("eps' must lie in (0, 1)");
  if (M < 1) throw InvalidArgument("M must be at least 1");
  double s = 0.0;
  for (double p : pi) {
    if (!(p > 0.0)) throw InvalidArgument("input distribution entries must be positive");
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-9) throw InvalidArgument("input distribution must sum to one");
  if (nTot < 0) throw InvalidArgument("nTot must be nonnegative");
}

double nu(const BellExpression& expr, const std::array<double, 4>& pi) {
  const BellBounds& b = expr.require_bounds();
  double hi = -std::numeric_limits<double>::infinity();
  double lo = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 2; ++a)
    for (int bb = 0; bb < 2; ++bb)
      for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) {
          const double r = expr(a, bb, x, y) / pi[static_cast<std::size_t>(pair_index(x, y))];
          hi = std::max(hi, r);
          lo = std::min(lo, r);
        }
  return std::max(hi - b.quantumMin, b.quantumMax - lo);
}

double mu(double nu, double n, double eps) {
  if (!(n >= 1.0)) throw InvalidArgument("mu needs at least one round");
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("eps must lie in (0, 1)");
  return nu * std::sqrt(2.0 * std::log(1.0 / eps) / n);
}

std::int64_t gamma(const std::vector<Round>& rounds, const InputPairSet& chi) {
  std::int64_t g = 0;
  for (const auto& r : rounds)
    if (!chi.contains(r.x, r.y)) ++g;
  return g;
}

std::int64_t gamma(const CountTable& t, const InputPairSet& chi) {
  std::int64_t inside = 0;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      if (chi.contains(x, y)) inside += t.input_count(x, y);
  return t.n - inside;
}

BellExpression with_quantum_bounds(const BellExpression& expr, const MomentStructure& s) {
  BellBounds b;
  b.localBound = local_bound(expr);
  b.quantumMax = max_bell(expr, s);
  b.quantumMin = min_bell(expr, s);
  b.level = s.level();
  // The relaxation contains the local set; absorb solver noise at the ends.
  b.quantumMax = std::max(b.quantumMax, b.localBound);
  b.quantumMin = std::min(b.quantumMin, b.localBound);
  return expr.with_bounds(b);
}

std::vector<double> thresholds(const BellBounds& b, int M) {
  if (M < 1) throw InvalidArgument("M must be at least 1");
  std::vector<double> j(static_cast<std::size_t>(M) + 1);
  const double step = (b.quantumMax - b.localBound) / M;
  for (int m = 0; m <= M; ++m) j[static_cast<std::size_t>(m)] = b.localBound + m * step;
  j.back() = b.quantumMax;
  return j;
}

double rb_eval(const BellExpression& expr, const InputPairSet& chi, const MomentStructure& s, double v) {
  const BellBounds b = bounds_at_level(expr, s);
  const double tol = 1e-7 * (1.0 + std::max(std::abs(b.quantumMax), std::abs(b.quantumMin)));
  if (v > b.quantumMax + tol || v < b.quantumMin - tol)
    throw InfeasibleValue("violation " + std::to_string(v) + " outside the relaxation range");
  if (v <= b.localBound) return 0.0;
  return h_of(cached_guessing(expr.with_bounds(b), chi, s, v));
}

double eta(const BellExpression& expr, const InputPairSet& chi, const MomentStructure& s) {
  const BellBounds b = bounds_at_level(expr, s);
  const BellExpression e = expr.with_bounds(b);
  return std::max(h_of(cached_guessing(e, chi, s, b.quantumMax)), h_of(cached_guessing(e, chi, s, b.quantumMin)));
}

CertificateReport evaluate_bound(const BellExpression& expr, double observed, std::int64_t n, std::int64_t gammaValue,
                                 const BoundConfig& cfg, const MomentStructure& s) {
  cfg.validate();
  const BellBounds& b = expr.require_bounds();
  if (b.level != cfg.level || s.level() != cfg.level)
    throw InvalidArgument("expression bounds, structure and configuration disagree on the relaxation level");
  if (n < 1) throw InvalidArgument("the bound needs at least one raw round");

  CertificateReport r;
  r.expression = expr;
  r.localBound = b.localBound;
  r.quantumMax = b.quantumMax;
  r.quantumMin = b.quantumMin;
  r.level = b.level;
  r.chi = cfg.chi;
  r.pi = cfg.pi;
  r.eps = cfg.eps;
  r.epsPrime = cfg.epsPrime;
  r.M = cfg.M;
  r.observed = observed;
  r.n = n;
  r.nTot = cfg.nTot > 0 ? cfg.nTot : n;
  r.gamma = gammaValue;
  r.nu = nu(expr, cfg.pi);
  r.mu = mu(r.nu, static_cast<double>(n), cfg.eps);
  r.guarantee =
      "with probability at least 1 - eps' the raw output has min-entropy at least the bound, or the "
      "output distribution is eps-close to one that does";

  const double width = b.quantumMax - b.localBound;
  const bool degenerate = !(width > 1e-9 * (1.0 + std::abs(b.localBound)));
  r.eta = degenerate ? 0.0 : eta(expr, cfg.chi, s);

  const auto j = thresholds(b, cfg.M);
  if (degenerate || observed < j.front()) {
    r.bin = -1;
    r.threshold = j.front();
    r.argument = j.front() - r.mu;
    r.hValue = 0.0;
    r.rawBound = -static_cast<double>(gammaValue) * r.eta - std::log2(1.0 / cfg.epsPrime);
  } else {
    int m = static_cast<int>(std::floor((observed - b.localBound) / width * cfg.M));
    m = std::clamp(m, 0, cfg.M - 1);
    while (m + 1 <= cfg.M - 1 && j[static_cast<std::size_t>(m) + 1] <= observed) ++m;
    while (m > 0 && j[static_cast<std::size_t>(m)] > observed) --m;
    r.bin = m;
    r.threshold = j[static_cast<std::size_t>(m)];
    r.argument = r.threshold - r.mu;
    r.hValue = r.argument <= b.localBound ? 0.0 : rb_eval(expr, cfg.chi, s, r.argument);
    r.rawBound = static_cast<double>(n) * r.hValue - static_cast<double>(gammaValue) * r.eta -
                 std::log2(1.0 / cfg.epsPrime);
  }
  r.bound = std::max(0.0, r.rawBound);
  r.regime = r.rawBound > 0.0 ? "positive" : "clamped";
  r.rate = r.bound / static_cast<double>(r.nTot);
  return r;
}

CertificateReport min_entropy_bound(const BellExpression& expr, const CountTable& counts, const BoundConfig& cfg,
                                    const MomentStructure& s) {
  counts.validate();
  for (std::size_t k = 0; k < 4; ++k)
    if (std::abs(counts.pi[k] - cfg.pi[k]) > 1e-12)
      throw InvalidArgument("count table was collected under a different input distribution");
  expr.require_bounds();
  CertificateReport r =
      evaluate_bound(expr, observed_violation(expr, counts), counts.n, gamma(counts, cfg.chi), cfg, s);
  r.counts = counts;
  return r;
}

}  // namespace dirand
