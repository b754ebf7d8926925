#include "dirand/npa.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "dirand/errors.hpp"

namespace dirand {
namespace {

using Word = std::vector<int>;
using Key = std::pair<Word, Word>;

// Concatenate rev(s) with t and collapse repeated projectors.
Word product(const Word& s, const Word& t) {
  Word out;
  auto push = [&](int p) {
    if (out.empty() || out.back() != p) out.push_back(p);
  };
  for (auto it = s.rbegin(); it != s.rend(); ++it) push(*it);
  for (int p : t) push(p);
  return out;
}

Key canonical(const Key& k) {
  Key r{Word(k.first.rbegin(), k.first.rend()), Word(k.second.rbegin(), k.second.rend())};
  return std::min(k, r);
}

std::vector<Word> party_words(int level) {
  if (level == 1) return {{}, {0}, {1}};
  if (level == 2) return {{}, {0}, {1}, {0, 1}, {1, 0}};
  throw UnsupportedLevel("relaxation level " + std::to_string(level) + " is not supported (use 1 or 2)");
}

double solve_bell(const BellExpression& expr, const MomentStructure& s, conic::Sense sense) {
  conic::ConicProgram prog(s.variable_count(), sense);
  const MomentVector g = moment_functional(expr);
  const auto idx = s.behaviour_moments();
  for (int k = 0; k < kMomentCount; ++k) prog.objective[static_cast<std::size_t>(idx[k])] += g[k];
  prog.add_equality({{s.normalisation_var(), 1.0}}, 1.0);
  prog.psdBlocks.push_back(s.block());
  const auto sol = conic::solve(prog);
  if (!sol.usable())
    throw SolverFailure("Bell extremum over the relaxation: " + conic::to_string(sol.status) + " (" + sol.message + ")");
  return sol.objective;
}

}  // namespace

MomentStructure build_structure(int level) {
  MomentStructure s;
  s.level_ = level;
  s.words_ = party_words(level);
  const int w = static_cast<int>(s.words_.size());
  s.dim_ = w * w;

  std::map<Key, int> ids;
  // Reserve 0..8 for the no-signalling moments.
  const Key fixed[kMomentCount] = {{{}, {}},   {{0}, {}},  {{1}, {}},  {{}, {0}},  {{}, {1}},
                                   {{0}, {0}}, {{0}, {1}}, {{1}, {0}}, {{1}, {1}}};
  for (int k = 0; k < kMomentCount; ++k) ids.emplace(fixed[k], k);
  int next = kMomentCount;

  s.map_.assign(static_cast<std::size_t>(s.dim_ * s.dim_), -1);
  for (int i = 0; i < s.dim_; ++i) {
    const Word& sa = s.words_[static_cast<std::size_t>(i / w)];
    const Word& sb = s.words_[static_cast<std::size_t>(i % w)];
    for (int j = 0; j < s.dim_; ++j) {
      const Word& ta = s.words_[static_cast<std::size_t>(j / w)];
      const Word& tb = s.words_[static_cast<std::size_t>(j % w)];
      const Key key = canonical({product(sa, ta), product(sb, tb)});
      auto [it, inserted] = ids.emplace(key, next);
      if (inserted) ++next;
      s.map_[static_cast<std::size_t>(i * s.dim_ + j)] = it->second;
    }
  }
  s.varCount_ = next;
  return s;
}

std::array<int, kMomentCount> MomentStructure::behaviour_moments() const {
  return {0, 1, 2, 3, 4, 5, 6, 7, 8};
}

conic::PsdBlock MomentStructure::block(int varOffset) const {
  std::vector<int> shifted(map_);
  for (auto& v : shifted) v += varOffset;
  return conic::PsdBlock::from_index_map(dim_, shifted);
}

double max_bell(const BellExpression& expr, const MomentStructure& s) {
  return solve_bell(expr, s, conic::Sense::maximise);
}

double min_bell(const BellExpression& expr, const MomentStructure& s) {
  return solve_bell(expr, s, conic::Sense::minimise);
}

MembershipResult membership(const Behaviour& p, const MomentStructure& s) { return membership(p.data(), s); }

MembershipResult membership(const Tensor16& p, const MomentStructure& s) {
  const double sig = signalling_norm(p);
  if (sig > kNormalisationTolerance) return {false, -sig};

  // maximise t subject to Gamma(y) - t I PSD, behaviour moments fixed.
  const int n = s.variable_count();
  conic::ConicProgram prog(n + 1, conic::Sense::maximise);
  prog.objective[static_cast<std::size_t>(n)] = 1.0;
  const MomentVector m = moments_of(p);
  const auto idx = s.behaviour_moments();
  for (int k = 0; k < kMomentCount; ++k) prog.add_equality({{idx[k], 1.0}}, m[k]);
  conic::PsdBlock blk = s.block();
  for (int i = 0; i < s.dimension(); ++i) blk.add(i, i, n, -1.0);
  prog.psdBlocks.push_back(std::move(blk));
  const auto sol = conic::solve(prog);
  if (!sol.usable())
    throw SolverFailure("membership program: " + conic::to_string(sol.status) + " (" + sol.message + ")");
  return {sol.objective >= -kMembershipFloor, sol.objective};
}

}  // namespace dirand
