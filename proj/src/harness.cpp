#include "dirand/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include "dirand/errors.hpp"

namespace dirand {
namespace {

constexpr std::array<double, 4> kUniformInputs{0.25, 0.25, 0.25, 0.25};
// G_full at or above this counts as a local point.
constexpr double kDegenerateG = 1.0 - 1e-6;

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex errorMutex;
  auto run = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(errorMutex);
        if (!error) error = std::current_exception();
        next = count;
      }
    }
  };
  if (workers == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

const std::vector<BellExpression>& chsh_family_bounded(const MomentStructure& s) {
  static std::mutex m;
  static std::map<int, std::vector<BellExpression>> cache;
  std::lock_guard<std::mutex> lock(m);
  auto it = cache.find(s.level());
  if (it == cache.end()) {
    std::vector<BellExpression> fam;
    for (const auto& e : chsh_family()) fam.push_back(with_quantum_bounds(e, s));
    it = cache.emplace(s.level(), std::move(fam)).first;
  }
  return it->second;
}

BoundConfig bound_config(const ProtocolConfig& cfg, const InputPairSet& chi, const std::array<double, 4>& pi) {
  BoundConfig b;
  b.eps = cfg.eps;
  b.epsPrime = cfg.epsPrime;
  b.M = cfg.M;
  b.level = cfg.level;
  b.chi = chi;
  b.pi = pi;
  b.nTot = cfg.nTot;
  return b;
}

GuessingResult best_singleton(const Behaviour& p, const MomentStructure& s) {
  std::optional<GuessingResult> best;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) {
      GuessingResult g = guessing_full(p, InputPairSet::single(x, y), s);
      if (!best || g.G < best->G) best = std::move(g);
    }
  return *best;
}

void check_level(const ProtocolConfig& cfg, const MomentStructure& s) {
  if (s.level() != cfg.level)
    throw InvalidArgument("moment structure level " + std::to_string(s.level()) + " differs from the configured level " +
                          std::to_string(cfg.level));
}

double mean(const std::vector<double>& v) {
  double t = 0.0;
  for (double x : v) t += x;
  return v.empty() ? 0.0 : t / static_cast<double>(v.size());
}

// Mean of v[i * len, (i + 1) * len).
double block_mean(const std::vector<double>& v, std::size_t i, std::size_t len) {
  double t = 0.0;
  for (std::size_t k = i * len; k < (i + 1) * len; ++k) t += v[k];
  return t / static_cast<double>(len);
}

void set_ratios(ComparisonRow& row) {
  if (row.rateBaseline > 0.0) {
    row.ratioProtocol = row.rateProtocol / row.rateBaseline;
    row.ratioOptimal = row.rateOptimal / row.rateBaseline;
  }
}

std::string csv_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::string to_string(ChiPolicy p) {
  switch (p) {
    case ChiPolicy::all: return "all";
    case ChiPolicy::one: return "one";
    case ChiPolicy::automatic: return "auto";
  }
  return "all";
}

ChiPolicy chi_policy_from_string(const std::string& s) {
  if (s == "all") return ChiPolicy::all;
  if (s == "one") return ChiPolicy::one;
  if (s == "auto") return ChiPolicy::automatic;
  throw InvalidArgument("unknown chi policy '" + s + "' (expected all, one or auto)");
}

std::int64_t ProtocolConfig::n_est() const { return nEst > 0 ? nEst : std::max<std::int64_t>(1, nTot / 100); }

void ProtocolConfig::validate() const {
  if (nTot < 2) throw InvalidArgument("N_tot must be at least 2");
  if (nEst < 0) throw InvalidArgument("N_est must be nonnegative");
  if (n_est() >= nTot) throw InvalidArgument("N_est must be smaller than N_tot");
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("eps must lie in (0, 1)");
  if (!(epsPrime > 0.0 && epsPrime < 1.0)) throw InvalidArgument("eps' must lie in (0, 1)");
  if (M < 1) throw InvalidArgument("M must be at least 1");
  if (level != 1 && level != 2) throw UnsupportedLevel("relaxation level must be 1 or 2");
  if (!(piStar > 0.0 && piStar < 1.0)) throw InvalidArgument("bias must lie in (0, 1)");
  if (trials < 1) throw InvalidArgument("at least one trial is needed");
  if (devices < 1) throw InvalidArgument("at least one device is needed");
  if (threads < 0) throw InvalidArgument("thread count must be nonnegative");
}

ProtocolConfig ProtocolConfig::full_scale() {
  ProtocolConfig c;
  c.nTot = 100'000'000;
  c.nEst = 1'000'000;
  c.devices = 50;
  c.trials = 500;
  return c;
}

std::uint64_t stream_index(std::uint64_t device, std::uint64_t trial, StreamPurpose purpose) {
  if (device >= (std::uint64_t{1} << 24) || trial >= (std::uint64_t{1} << 32))
    throw InvalidArgument("device or trial index out of range");
  return (device << 40) | (trial << 8) | static_cast<std::uint64_t>(purpose);
}

DeviceModel seeded_device(std::uint64_t seed, std::uint64_t device) {
  SeededStream st(seed, stream_index(device, 0, StreamPurpose::device));
  return random_accepted_device(st);
}

std::uint64_t find_device_index(std::uint64_t seed, double target, double tol, std::uint64_t start,
                                std::uint64_t limit) {
  for (std::uint64_t d = start; d < start + limit; ++d)
    if (std::abs(best_chsh(behaviour_from(seeded_device(seed, d))).value - target) <= tol) return d;
  throw InvalidArgument("no device with CHSH value near " + std::to_string(target) + " in the scanned range");
}

CertificateReport run_protocol(const DeviceModel& device, const ProtocolConfig& cfg, const MomentStructure& s,
                               std::uint64_t deviceIndex, std::uint64_t trialIndex) {
  return run_protocol(behaviour_from(device), cfg, s, deviceIndex, trialIndex);
}

CertificateReport run_protocol(const Behaviour& device, const ProtocolConfig& cfg, const MomentStructure& s,
                               std::uint64_t deviceIndex, std::uint64_t trialIndex) {
  cfg.validate();
  check_level(cfg, s);

  // (i)-(ii) estimation rounds and regularisation.
  SeededStream est(cfg.seed, stream_index(deviceIndex, trialIndex, StreamPurpose::estimation));
  const CountTable estCounts = sample_counts(device, kUniformInputs, cfg.n_est(), est);
  const RegularisationResult reg = regularise(estCounts, s, cfg.method);

  // (iii)-(iv) guessing program and dual expression.
  std::optional<ChiSelection> selection;
  GuessingResult g;
  switch (cfg.chi) {
    case ChiPolicy::all:
      g = guessing_full(reg.behaviour, InputPairSet::all(), s);
      break;
    case ChiPolicy::one:
      g = best_singleton(reg.behaviour, s);
      break;
    case ChiPolicy::automatic: {
      ChiBudget budget{cfg.n_raw(), cfg.nTot, cfg.piStar, cfg.eps, cfg.epsPrime, cfg.M};
      selection = select_chi(reg.behaviour, s, budget);
      g = guessing_full(reg.behaviour, selection->chosen, s);
      break;
    }
  }
  const InputPairSet chi = g.chi;
  const auto pi = raw_input_distribution(chi, cfg.piStar);
  const BoundConfig bc = bound_config(cfg, chi, pi);

  // (v) raw phase; only these rounds enter the bound.
  SeededStream raw(cfg.seed, stream_index(deviceIndex, trialIndex, StreamPurpose::raw));
  const CountTable rawCounts = sample_counts(device, pi, cfg.n_raw(), raw);

  CertificateReport r;
  if (g.G >= kDegenerateG) {
    r.expression = *g.canonicalDual;
    r.level = s.level();
    r.chi = chi;
    r.pi = pi;
    r.eps = cfg.eps;
    r.epsPrime = cfg.epsPrime;
    r.M = cfg.M;
    r.observed = observed_violation(r.expression, rawCounts);
    r.n = cfg.n_raw();
    r.nTot = cfg.nTot;
    r.gamma = gamma(rawCounts, chi);
    r.regime = "degenerate";
    r.guarantee = "the regularised behaviour is local, so no expression certifies randomness";
    r.counts = rawCounts;
    r.degenerateExpression = true;
  } else {
    // (vi) the bound.
    r = min_entropy_bound(with_quantum_bounds(*g.canonicalDual, s), rawCounts, bc, s);
  }
  r.method = to_string(cfg.method);
  r.nEst = cfg.n_est();
  r.masterSeed = cfg.seed;
  r.deviceIndex = deviceIndex;
  r.trialIndex = trialIndex;
  r.regularisationObjective = reg.objective;
  r.gFull = g.G;
  r.chiSelection = selection;
  return r;
}

CertificateReport run_chsh_baseline(const DeviceModel& device, const ProtocolConfig& cfg, const MomentStructure& s,
                                    std::uint64_t deviceIndex, std::uint64_t trialIndex) {
  return run_chsh_baseline(behaviour_from(device), cfg, s, deviceIndex, trialIndex);
}

CertificateReport chsh_baseline_bound(const CountTable& counts, const ProtocolConfig& cfg, const MomentStructure& s) {
  cfg.validate();
  check_level(cfg, s);
  const BoundConfig bc = bound_config(cfg, InputPairSet::all(), counts.pi);
  const auto& family = chsh_family_bounded(s);
  std::optional<CertificateReport> best;
  for (std::size_t k = 0; k < family.size(); ++k) {
    CertificateReport r = min_entropy_bound(family[k], counts, bc, s);
    if (!best || r.bound > best->bound) {
      r.chshRepresentative = static_cast<int>(k);
      best = std::move(r);
    }
  }
  best->method = "CHSH";
  best->nEst = 0;
  best->masterSeed = cfg.seed;
  return *best;
}

CertificateReport run_chsh_baseline(const Behaviour& device, const ProtocolConfig& cfg, const MomentStructure& s,
                                    std::uint64_t deviceIndex, std::uint64_t trialIndex) {
  cfg.validate();
  check_level(cfg, s);
  SeededStream st(cfg.seed, stream_index(deviceIndex, trialIndex, StreamPurpose::baseline));
  CertificateReport r = chsh_baseline_bound(sample_counts(device, kUniformInputs, cfg.nTot, st), cfg, s);
  r.deviceIndex = deviceIndex;
  r.trialIndex = trialIndex;
  return r;
}

double optimal_rate(const Behaviour& p, const InputPairSet& chi, const MomentStructure& s) {
  return std::max(0.0, -std::log2(guessing_full(p, chi, s).G));
}

CertificateReport rederive(const CertificateReport& report, const MomentStructure& s) {
  if (!report.counts) throw InvalidArgument("report carries no raw-phase counts");
  if (report.degenerateExpression) return report;
  BoundConfig cfg;
  cfg.eps = report.eps;
  cfg.epsPrime = report.epsPrime;
  cfg.M = report.M;
  cfg.level = report.level;
  cfg.chi = report.chi;
  cfg.pi = report.pi;
  cfg.nTot = report.nTot;
  BellBounds b{report.localBound, report.quantumMax, report.quantumMin, report.level};
  CertificateReport r = min_entropy_bound(report.expression.with_bounds(b), *report.counts, cfg, s);
  r.method = report.method;
  r.nEst = report.nEst;
  r.degenerateExpression = report.degenerateExpression;
  r.masterSeed = report.masterSeed;
  r.deviceIndex = report.deviceIndex;
  r.trialIndex = report.trialIndex;
  r.regularisationObjective = report.regularisationObjective;
  r.gFull = report.gFull;
  r.chshRepresentative = report.chshRepresentative;
  r.chiSelection = report.chiSelection;
  return r;
}

void write_csv(const std::vector<ComparisonRow>& rows, std::ostream& os) {
  os << "device_seed,chsh_value,method,chi_mode,n_est,pi_star,rate_protocol,rate_baseline,rate_optimal,"
        "ratio_protocol,ratio_optimal\n";
  for (const auto& r : rows) {
    os << r.deviceSeed << ',' << csv_number(r.chshValue) << ',' << r.method << ',' << r.chiMode << ',' << r.nEst << ','
       << csv_number(r.piStar) << ',' << csv_number(r.rateProtocol) << ',' << csv_number(r.rateBaseline) << ','
       << csv_number(r.rateOptimal) << ',' << (r.ratioProtocol ? csv_number(*r.ratioProtocol) : "") << ','
       << (r.ratioOptimal ? csv_number(*r.ratioOptimal) : "") << '\n';
  }
}

std::vector<ComparisonRow> experiment_compare(const ProtocolConfig& cfg, const MomentStructure& s) {
  cfg.validate();
  check_level(cfg, s);
  const auto D = static_cast<std::size_t>(cfg.devices);
  const auto T = static_cast<std::size_t>(cfg.trials);
  std::vector<Behaviour> devices(D, Behaviour::uniform());
  std::vector<ComparisonRow> rows(D);
  parallel_for(D, cfg.threads, [&](std::size_t d) {
    devices[d] = behaviour_from(seeded_device(cfg.seed, d));
    ComparisonRow& row = rows[d];
    row.deviceSeed = d;
    row.chshValue = best_chsh(devices[d]).value;
    row.method = to_string(cfg.method);
    row.chiMode = to_string(cfg.chi);
    row.nEst = cfg.n_est();
    row.piStar = cfg.chi == ChiPolicy::all ? 0.25 : cfg.piStar;
    const double all = optimal_rate(devices[d], InputPairSet::all(), s);
    const double one = cfg.chi == ChiPolicy::all ? 0.0 : -std::log2(best_singleton(devices[d], s).G);
    row.rateOptimal = cfg.chi == ChiPolicy::all ? all : cfg.chi == ChiPolicy::one ? one : std::max(all, one);
  });
  std::vector<double> prot(D * T), base(D * T);
  parallel_for(D * T, cfg.threads, [&](std::size_t k) {
    const std::size_t d = k / T, t = k % T;
    prot[k] = run_protocol(devices[d], cfg, s, d, t).rate;
    base[k] = run_chsh_baseline(devices[d], cfg, s, d, t).rate;
  });
  for (std::size_t d = 0; d < D; ++d) {
    rows[d].rateProtocol = block_mean(prot, d, T);
    rows[d].rateBaseline = block_mean(base, d, T);
    set_ratios(rows[d]);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
    const double inf = std::numeric_limits<double>::infinity();
    return a.ratioOptimal.value_or(inf) < b.ratioOptimal.value_or(inf);
  });
  return rows;
}

std::vector<ComparisonRow> experiment_tune_nest(const ProtocolConfig& cfg, const std::vector<std::int64_t>& grid,
                                                std::uint64_t deviceIndex, const MomentStructure& s) {
  cfg.validate();
  check_level(cfg, s);
  for (auto n : grid)
    if (n < 1 || n >= cfg.nTot) throw InvalidArgument("every N_est in the grid must lie in [1, N_tot)");
  const Behaviour device = behaviour_from(seeded_device(cfg.seed, deviceIndex));
  const auto T = static_cast<std::size_t>(cfg.trials);

  std::vector<double> base(T);
  parallel_for(T, cfg.threads, [&](std::size_t t) { base[t] = run_chsh_baseline(device, cfg, s, deviceIndex, t).rate; });
  const double baseline = mean(base);
  const double optimalAll = optimal_rate(device, InputPairSet::all(), s);
  const double optimalOne = -std::log2(best_singleton(device, s).G);

  struct Cell {
    RegMethod method;
    ChiPolicy chi;
    std::int64_t nEst;
  };
  std::vector<Cell> cells;
  for (RegMethod m : {RegMethod::ml, RegMethod::ls})
    for (ChiPolicy c : {ChiPolicy::all, ChiPolicy::one})
      for (auto n : grid) cells.push_back({m, c, n});
  std::vector<double> rates(cells.size() * T);
  parallel_for(rates.size(), cfg.threads, [&](std::size_t k) {
    const Cell& cell = cells[k / T];
    ProtocolConfig c = cfg;
    c.method = cell.method;
    c.chi = cell.chi;
    c.nEst = cell.nEst;
    rates[k] = run_protocol(device, c, s, deviceIndex, k % T).rate;
  });

  const double chsh = best_chsh(device).value;
  std::vector<ComparisonRow> rows;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    ComparisonRow row;
    row.deviceSeed = deviceIndex;
    row.chshValue = chsh;
    row.method = to_string(cells[i].method);
    row.chiMode = to_string(cells[i].chi);
    row.nEst = cells[i].nEst;
    row.piStar = cells[i].chi == ChiPolicy::all ? 0.25 : cfg.piStar;
    row.rateProtocol = block_mean(rates, i, T);
    row.rateBaseline = baseline;
    row.rateOptimal = cells[i].chi == ChiPolicy::all ? optimalAll : optimalOne;
    set_ratios(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ComparisonRow> experiment_bias_sweep(const ProtocolConfig& cfg, const std::vector<double>& grid,
                                                 const MomentStructure& s) {
  cfg.validate();
  check_level(cfg, s);
  for (double p : grid)
    if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("every bias in the grid must lie in (0, 1)");
  const auto D = static_cast<std::size_t>(cfg.devices);
  const auto T = static_cast<std::size_t>(cfg.trials);
  const std::size_t perDevice = grid.size() + 1;  // chi_all first

  std::vector<Behaviour> devices(D, Behaviour::uniform());
  std::vector<double> optimalAll(D), optimalOne(D), chsh(D);
  parallel_for(D, cfg.threads, [&](std::size_t d) {
    devices[d] = behaviour_from(seeded_device(cfg.seed, d));
    chsh[d] = best_chsh(devices[d]).value;
    optimalAll[d] = optimal_rate(devices[d], InputPairSet::all(), s);
    optimalOne[d] = -std::log2(best_singleton(devices[d], s).G);
  });
  std::vector<double> base(D * T);
  parallel_for(D * T, cfg.threads,
               [&](std::size_t k) { base[k] = run_chsh_baseline(devices[k / T], cfg, s, k / T, k % T).rate; });
  std::vector<double> rates(D * perDevice * T);
  parallel_for(rates.size(), cfg.threads, [&](std::size_t k) {
    const std::size_t t = k % T, cell = k / T, d = cell / perDevice, j = cell % perDevice;
    ProtocolConfig c = cfg;
    if (j == 0) {
      c.chi = ChiPolicy::all;
    } else {
      c.chi = ChiPolicy::one;
      c.piStar = grid[j - 1];
    }
    rates[k] = run_protocol(devices[d], c, s, d, t).rate;
  });

  std::vector<ComparisonRow> rows;
  for (std::size_t d = 0; d < D; ++d) {
    const double baseline = block_mean(base, d, T);
    for (std::size_t j = 0; j < perDevice; ++j) {
      const std::size_t cell = d * perDevice + j;
      ComparisonRow row;
      row.deviceSeed = d;
      row.chshValue = chsh[d];
      row.method = to_string(cfg.method);
      row.chiMode = j == 0 ? "all" : "one";
      row.nEst = cfg.n_est();
      row.piStar = j == 0 ? 0.25 : grid[j - 1];
      row.rateProtocol = block_mean(rates, cell, T);
      row.rateBaseline = baseline;
      row.rateOptimal = j == 0 ? optimalAll[d] : optimalOne[d];
      set_ratios(row);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<std::int64_t> default_nest_grid(std::int64_t nTot) {
  std::vector<std::int64_t> g;
  for (std::int64_t n = 100; n < nTot / 2; n *= 10) g.push_back(n);
  if (nTot / 100 >= 1) g.push_back(nTot / 100);
  if (nTot / 2 >= 1) g.push_back(nTot / 2);
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

std::vector<double> default_bias_grid() { return {0.4, 0.6, 0.8, 0.9, 0.99}; }

}  // namespace dirand
