#include "dirand/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include <Eigen/Dense>

#include "dirand/errors.hpp"

namespace dirand {
namespace {

using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;

Mat2 projector(const Bloch& n, int outcome) {
  const std::complex<double> i(0.0, 1.0);
  Mat2 sx, sy, sz;
  sx << 0, 1, 1, 0;
  sy << 0, -i, i, 0;
  sz << 1, 0, 0, -1;
  const double sign = outcome == 0 ? 1.0 : -1.0;
  return 0.5 * (Mat2::Identity() + sign * (n[0] * sx + n[1] * sy + n[2] * sz));
}

Mat4 kron(const Mat2& a, const Mat2& b) {
  Mat4 out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return out;
}

Bloch random_direction(SeededStream& s) {
  for (;;) {
    Bloch v{s.normal(), s.normal(), s.normal()};
    const double norm = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (norm < 1e-12) continue;
    for (double& c : v) c /= norm;
    return v;
  }
}

void check_pi(const std::array<double, 4>& pi) {
  double s = 0.0;
  for (double v : pi) {
    if (!(v > 0.0)) throw InvalidArgument("input distribution entries must be positive");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-9) throw InvalidArgument("input distribution must sum to one");
}

// Multinomial draw by successive conditional binomials.
template <std::size_t K>
std::array<std::int64_t, K> multinomial(std::int64_t n, const std::array<double, K>& p, SeededStream& s) {
  std::array<std::int64_t, K> out{};
  std::int64_t left = n;
  double mass = 1.0;
  for (std::size_t k = 0; k + 1 < K; ++k) {
    if (left == 0) break;
    const double q = mass > 0.0 ? std::clamp(p[k] / mass, 0.0, 1.0) : 0.0;
    out[k] = s.binomial(left, q);
    left -= out[k];
    mass -= p[k];
  }
  out[K - 1] += left;
  return out;
}

}  // namespace

SeededStream::SeededStream(std::uint64_t seed, std::uint64_t index) : seed_(seed), index_(index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  engine_.seed(seq);
}

double SeededStream::uniform() {
  ++counter_;
  return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
}

double SeededStream::normal() {
  ++counter_;
  return std::normal_distribution<double>(0.0, 1.0)(engine_);
}

std::int64_t SeededStream::binomial(std::int64_t n, double p) {
  ++counter_;
  if (n <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  return std::binomial_distribution<std::int64_t>(n, p)(engine_);
}

int SeededStream::discrete(std::span<const double> weights) {
  ++counter_;
  return std::discrete_distribution<int>(weights.begin(), weights.end())(engine_);
}

void DeviceModel::validate() const {
  if (!(theta >= 0.0 && theta <= std::numbers::pi / 4 + 1e-15))
    throw InvalidArgument("Schmidt angle must lie in [0, pi/4]");
  for (const auto* set : {&blochA, &blochB})
    for (const auto& v : *set) {
      const double norm = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
      if (std::abs(norm - 1.0) > 1e-12) throw InvalidArgument("Bloch vectors must have unit norm");
    }
}

DeviceModel chsh_optimal_device() {
  const double r = 1.0 / std::numbers::sqrt2;
  DeviceModel d;
  d.theta = std::numbers::pi / 4;
  d.blochA = {Bloch{0, 0, 1}, Bloch{1, 0, 0}};
  d.blochB = {Bloch{r, 0, r}, Bloch{-r, 0, r}};
  return d;
}

DeviceModel random_device(SeededStream& stream) {
  DeviceModel d;
  d.theta = stream.uniform() * std::numbers::pi / 4;
  for (auto& v : d.blochA) v = random_direction(stream);
  for (auto& v : d.blochB) v = random_direction(stream);
  return d;
}

Behaviour behaviour_from(const DeviceModel& d) {
  d.validate();
  Eigen::Vector4cd psi = Eigen::Vector4cd::Zero();
  psi(0) = std::cos(d.theta);
  psi(3) = std::sin(d.theta);
  Tensor16 p{};
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          const Mat4 op = kron(projector(d.blochA[static_cast<std::size_t>(x)], a),
                               projector(d.blochB[static_cast<std::size_t>(y)], b));
          p[flat_index(a, b, x, y)] = std::max(0.0, (psi.adjoint() * op * psi)(0).real());
        }
  // Remove rounding so each slice sums to one exactly enough for validation.
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) {
      double s = 0.0;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) s += p[flat_index(a, b, x, y)];
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) p[flat_index(a, b, x, y)] /= s;
    }
  return Behaviour(p);
}

ChshChoice best_chsh(const Behaviour& p) {
  const auto family = chsh_family();
  ChshChoice best{0, bell_value(family[0], p)};
  for (std::size_t k = 1; k < family.size(); ++k) {
    const double v = bell_value(family[k], p);
    if (v > best.value) best = {static_cast<int>(k), v};
  }
  return best;
}

bool accept_device(const DeviceModel& d) { return best_chsh(behaviour_from(d)).value > 2.0 + 1e-9; }

DeviceModel random_accepted_device(SeededStream& stream) {
  for (;;) {
    DeviceModel d = random_device(stream);
    if (accept_device(d)) return d;
  }
}

CountTable sample_counts(const Behaviour& p, const std::array<double, 4>& pi, std::int64_t n, SeededStream& stream) {
  if (n < 0) throw InvalidArgument("round count must be nonnegative");
  check_pi(pi);
  CountTable t;
  t.n = n;
  t.pi = pi;
  const auto perPair = multinomial<4>(n, pi, stream);
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) {
      const std::array<double, 4> q{p(0, 0, x, y), p(0, 1, x, y), p(1, 0, x, y), p(1, 1, x, y)};
      const auto cells = multinomial<4>(perPair[static_cast<std::size_t>(pair_index(x, y))], q, stream);
      for (int ab = 0; ab < 4; ++ab) t.counts[flat_index(ab >> 1, ab & 1, x, y)] = cells[static_cast<std::size_t>(ab)];
    }
  return t;
}

std::vector<Round> sample_rounds(const Behaviour& p, const std::array<double, 4>& pi, std::int64_t n,
                                 SeededStream& stream) {
  if (n < 0) throw InvalidArgument("round count must be nonnegative");
  check_pi(pi);
  std::vector<Round> out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t j = 0; j < n; ++j) {
    const int xy = stream.discrete(pi);
    const int x = xy >> 1, y = xy & 1;
    const std::array<double, 4> q{p(0, 0, x, y), p(0, 1, x, y), p(1, 0, x, y), p(1, 1, x, y)};
    const int ab = stream.discrete(q);
    out.push_back({x, y, ab >> 1, ab & 1});
  }
  return out;
}

CountTable tally_rounds(const std::vector<Round>& rounds, const std::array<double, 4>& pi) {
  CountTable t;
  t.pi = pi;
  t.n = static_cast<std::int64_t>(rounds.size());
  for (const auto& r : rounds) ++t.counts[flat_index(r.a, r.b, r.x, r.y)];
  return t;
}

}  // namespace dirand
