#include "dirand/behaviour.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "dirand/errors.hpp"

namespace dirand {

Behaviour::Behaviour(const Tensor16& p) : p_(p) {
  for (double v : p_) {
    if (!(v >= 0.0)) throw InvalidArgument("behaviour entries must be nonnegative");
  }
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) {
      double s = 0.0;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) s += p_[flat_index(a, b, x, y)];
      if (std::abs(s - 1.0) > kNormalisationTolerance) {
        throw InvalidArgument("behaviour slice (" + std::to_string(x) + "," + std::to_string(y) +
                              ") is not normalised");
      }
    }
  }
}

Behaviour Behaviour::uniform() {
  Tensor16 p;
  p.fill(0.25);
  return Behaviour(p);
}

Behaviour Behaviour::deterministic(std::array<int, 2> outA, std::array<int, 2> outB) {
  Tensor16 p{};
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) p[flat_index(outA[x], outB[y], x, y)] = 1.0;
  return Behaviour(p);
}

Behaviour Behaviour::tsirelson() {
  Tensor16 p{};
  const double r = 1.0 / std::sqrt(2.0);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) {
          const int parity = (a + b + x * y) % 2;
          p[flat_index(a, b, x, y)] = (1.0 + (parity == 0 ? r : -r)) / 4.0;
        }
  return Behaviour(p);
}

Behaviour Behaviour::pr_box() {
  Tensor16 p{};
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) p[flat_index(a, b, x, y)] = ((a ^ b) == (x & y)) ? 0.5 : 0.0;
  return Behaviour(p);
}

Behaviour Behaviour::mix(const Behaviour& other, double w) const {
  Tensor16 p;
  for (std::size_t i = 0; i < 16; ++i) p[i] = w * p_[i] + (1.0 - w) * other.p_[i];
  return Behaviour(p);
}

BellExpression::BellExpression(const Tensor16& c, const BellBounds& bounds)
    : c_(c), bounds_(bounds) {}

const BellBounds& BellExpression::require_bounds() const {
  if (!bounds_) throw MissingBounds("Bell expression has no cached bounds");
  return *bounds_;
}

BellExpression BellExpression::with_bounds(const BellBounds& bounds) const {
  return BellExpression(c_, bounds);
}

BellExpression BellExpression::scaled(double s) const {
  Tensor16 c;
  for (std::size_t i = 0; i < 16; ++i) c[i] = s * c_[i];
  if (!bounds_) return BellExpression(c);
  BellBounds b = *bounds_;
  b.localBound = s >= 0 ? s * bounds_->localBound : local_bound(BellExpression(c));
  b.quantumMax = s >= 0 ? s * bounds_->quantumMax : s * bounds_->quantumMin;
  b.quantumMin = s >= 0 ? s * bounds_->quantumMin : s * bounds_->quantumMax;
  return BellExpression(c, b);
}

BellExpression BellExpression::operator+(const BellExpression& other) const {
  Tensor16 c;
  for (std::size_t i = 0; i < 16; ++i) c[i] = c_[i] + other.c_[i];
  return BellExpression(c);
}

InputPairSet::InputPairSet(unsigned mask) : mask_(mask & 0xFu) {
  if (mask_ == 0 || mask != mask_) throw InvalidArgument("input pair set must be a nonempty subset of {0,1}^2");
}

int InputPairSet::size() const { return std::popcount(mask_); }

std::vector<std::array<int, 2>> InputPairSet::members() const {
  std::vector<std::array<int, 2>> out;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      if (contains(x, y)) out.push_back({x, y});
  return out;
}

std::int64_t CountTable::input_count(int x, int y) const {
  std::int64_t s = 0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) s += counts[flat_index(a, b, x, y)];
  return s;
}

void CountTable::validate() const {
  std::int64_t total = 0;
  for (auto c : counts) {
    if (c < 0) throw InvalidArgument("counts must be nonnegative");
    total += c;
  }
  if (total != n) throw InvalidArgument("counts do not sum to n");
  double s = 0.0;
  for (double p : pi) {
    if (!(p >= 0.0)) throw InvalidArgument("input distribution must be nonnegative");
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-12) throw InvalidArgument("input distribution must sum to one");
}

Tensor16 raw_frequencies(const CountTable& t) {
  Tensor16 p{};
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) {
      const auto nxy = t.input_count(x, y);
      if (nxy == 0) continue;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          p[flat_index(a, b, x, y)] =
              static_cast<double>(t.counts[flat_index(a, b, x, y)]) / static_cast<double>(nxy);
    }
  return p;
}

Behaviour frequencies_from_counts(const CountTable& t) {
  t.validate();
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      if (t.input_count(x, y) == 0) {
        throw ZeroInputCount("input pair (" + std::to_string(x) + "," + std::to_string(y) +
                             ") was never played");
      }
  return Behaviour(raw_frequencies(t));
}

double bell_value(const BellExpression& expr, const Tensor16& p) {
  const auto& c = expr.coefficients();
  return std::inner_product(c.begin(), c.end(), p.begin(), 0.0);
}

double bell_value(const BellExpression& expr, const Behaviour& p) { return bell_value(expr, p.data()); }

double observed_violation(const BellExpression& expr, const CountTable& t) {
  double s = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) {
          const auto i = flat_index(a, b, x, y);
          if (t.counts[i] == 0) continue;
          s += expr.coefficients()[i] * static_cast<double>(t.counts[i]) /
               (static_cast<double>(t.n) * t.pi[pair_index(x, y)]);
        }
  return s;
}

namespace {

BellExpression chsh_representative(int minusX, int minusY, double sign) {
  Tensor16 c;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) {
          const double s = (x == minusX && y == minusY) ? -1.0 : 1.0;
          c[flat_index(a, b, x, y)] = sign * s * (((a + b) % 2) ? -1.0 : 1.0);
        }
  return BellExpression(c);
}

}  // namespace

BellExpression chsh() { return chsh_representative(1, 1, 1.0); }

std::vector<BellExpression> chsh_family() {
  static const std::array<std::array<int, 2>, 4> positions{{{1, 1}, {0, 0}, {0, 1}, {1, 0}}};
  std::vector<BellExpression> out;
  for (double sign : {1.0, -1.0})
    for (const auto& pos : positions) out.push_back(chsh_representative(pos[0], pos[1], sign));
  return out;
}

double local_bound(const BellExpression& expr) {
  double best = -std::numeric_limits<double>::infinity();
  for (int strategy = 0; strategy < 16; ++strategy) {
    const std::array<int, 2> outA{strategy & 1, (strategy >> 1) & 1};
    const std::array<int, 2> outB{(strategy >> 2) & 1, (strategy >> 3) & 1};
    double v = 0.0;
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y) v += expr(outA[x], outB[y], x, y);
    best = std::max(best, v);
  }
  return best;
}

double signalling_norm(const Tensor16& p) {
  double worst = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int x = 0; x < 2; ++x) {
      double m[2];
      for (int y = 0; y < 2; ++y) m[y] = p[flat_index(a, 0, x, y)] + p[flat_index(a, 1, x, y)];
      worst = std::max(worst, std::abs(m[0] - m[1]));
    }
  for (int b = 0; b < 2; ++b)
    for (int y = 0; y < 2; ++y) {
      double m[2];
      for (int x = 0; x < 2; ++x) m[x] = p[flat_index(0, b, x, y)] + p[flat_index(1, b, x, y)];
      worst = std::max(worst, std::abs(m[0] - m[1]));
    }
  return worst;
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DimensionMismatch("tv_distance: distributions differ in size");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

const Eigen::Matrix<double, 16, 9>& ns_embedding() {
  static const Eigen::Matrix<double, 16, 9> e = [] {
    Eigen::Matrix<double, 16, 9> m = Eigen::Matrix<double, 16, 9>::Zero();
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y) {
        const int ax = 1 + x, by = 3 + y, axby = 5 + 2 * x + y;
        m(flat_index(0, 0, x, y), axby) = 1.0;
        m(flat_index(0, 1, x, y), ax) = 1.0;
        m(flat_index(0, 1, x, y), axby) = -1.0;
        m(flat_index(1, 0, x, y), by) = 1.0;
        m(flat_index(1, 0, x, y), axby) = -1.0;
        m(flat_index(1, 1, x, y), 0) = 1.0;
        m(flat_index(1, 1, x, y), ax) = -1.0;
        m(flat_index(1, 1, x, y), by) = -1.0;
        m(flat_index(1, 1, x, y), axby) = 1.0;
      }
    return m;
  }();
  return e;
}

Tensor16 tensor_from_moments(const MomentVector& m) {
  Eigen::Map<const Eigen::Matrix<double, 9, 1>> mv(m.data());
  Eigen::Matrix<double, 16, 1> p = ns_embedding() * mv;
  Tensor16 out;
  for (int i = 0; i < 16; ++i) out[i] = p(i);
  return out;
}

MomentVector moments_of(const Tensor16& p) {
  MomentVector m{};
  auto P = [&](int a, int b, int x, int y) { return p[flat_index(a, b, x, y)]; };
  m[0] = P(0, 0, 0, 0) + P(0, 1, 0, 0) + P(1, 0, 0, 0) + P(1, 1, 0, 0);
  for (int x = 0; x < 2; ++x) m[1 + x] = P(0, 0, x, 0) + P(0, 1, x, 0);
  for (int y = 0; y < 2; ++y) m[3 + y] = P(0, 0, 0, y) + P(1, 0, 0, y);
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) m[5 + 2 * x + y] = P(0, 0, x, y);
  return m;
}

MomentVector moment_functional(const BellExpression& expr) {
  Eigen::Map<const Eigen::Matrix<double, 16, 1>> c(expr.coefficients().data());
  Eigen::Matrix<double, 9, 1> g = ns_embedding().transpose() * c;
  MomentVector out;
  for (int i = 0; i < 9; ++i) out[i] = g(i);
  return out;
}

BellExpression expression_from_moment_functional(const MomentVector& g) {
  static const Eigen::Matrix<double, 9, 9> gramInverse =
      (ns_embedding().transpose() * ns_embedding()).inverse();
  Eigen::Map<const Eigen::Matrix<double, 9, 1>> gv(g.data());
  Eigen::Matrix<double, 16, 1> c = ns_embedding() * (gramInverse * gv);
  Tensor16 out;
  for (int i = 0; i < 16; ++i) out[i] = c(i);
  return BellExpression(out);
}

}  // namespace dirand
