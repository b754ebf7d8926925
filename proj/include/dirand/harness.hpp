#pragma once

// Protocol driver, the CHSH baseline and the comparison experiments.
//
// Every random draw comes from a SeededStream keyed by the master seed and a
// stream index built from (device, trial, purpose), so any cell of an
// experiment can be replayed on its own.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dirand/bound.hpp"
#include "dirand/certify.hpp"
#include "dirand/regularise.hpp"
#include "dirand/simulate.hpp"

namespace dirand {

enum class ChiPolicy { all, one, automatic };

std::string to_string(ChiPolicy p);
/// "all", "one" or "auto".
ChiPolicy chi_policy_from_string(const std::string& s);

struct ProtocolConfig {
  std::int64_t nTot = 1'000'000;
  /// 0 selects 1% of nTot.
  std::int64_t nEst = 0;
  double eps = 1e-6;
  double epsPrime = 1e-6;
  /// Number of threshold intervals; the grid has M + 1 points.
  int M = 999;
  int level = 2;
  RegMethod method = RegMethod::ml;
  ChiPolicy chi = ChiPolicy::all;
  double piStar = 0.9;
  int trials = 10;
  int devices = 20;
  std::uint64_t seed = 0;
  /// Worker threads for experiments; 0 uses the hardware concurrency.
  int threads = 0;

  std::int64_t n_est() const;
  std::int64_t n_raw() const { return nTot - n_est(); }
  /// Throws InvalidArgument unless 0 < N_est < N_tot and the other fields
  /// are in range.
  void validate() const;

  /// 10^8 rounds, 10^6 for estimation, 50 devices, 500 trials.
  static ProtocolConfig full_scale();
};

enum class StreamPurpose : std::uint64_t { device = 0, estimation = 1, raw = 2, baseline = 3 };

/// Stream index for one cell of an experiment.
std::uint64_t stream_index(std::uint64_t device, std::uint64_t trial, StreamPurpose purpose);

/// Accepted device number `device` under the master seed.
DeviceModel seeded_device(std::uint64_t seed, std::uint64_t device);

/// First device index (scanning upwards from `start`) whose best CHSH value
/// lies within tol of target. Throws InvalidArgument after `limit` tries.
std::uint64_t find_device_index(std::uint64_t seed, double target, double tol, std::uint64_t start = 0,
                                std::uint64_t limit = 100000);

/// Estimation, regularisation, expression extraction, raw phase and bound.
/// The report's n is the raw-phase round count and its rate is normalised
/// by N_tot. A regularised point with G_full = 1 gives a zero bound with
/// degenerateExpression set.
CertificateReport run_protocol(const Behaviour& device, const ProtocolConfig& cfg, const MomentStructure& s,
                               std::uint64_t deviceIndex = 0, std::uint64_t trialIndex = 0);
CertificateReport run_protocol(const DeviceModel& device, const ProtocolConfig& cfg, const MomentStructure& s,
                               std::uint64_t deviceIndex = 0, std::uint64_t trialIndex = 0);

/// N_tot uniform rounds scored with each of the eight CHSH representatives;
/// the largest bound wins (ties to the lowest index).
CertificateReport run_chsh_baseline(const Behaviour& device, const ProtocolConfig& cfg, const MomentStructure& s,
                                    std::uint64_t deviceIndex = 0, std::uint64_t trialIndex = 0);
CertificateReport run_chsh_baseline(const DeviceModel& device, const ProtocolConfig& cfg, const MomentStructure& s,
                                    std::uint64_t deviceIndex = 0, std::uint64_t trialIndex = 0);

/// Scores uniform-input counts with each CHSH representative and keeps the
/// best bound; the rate is normalised by cfg.nTot.
CertificateReport chsh_baseline_bound(const CountTable& counts, const ProtocolConfig& cfg, const MomentStructure& s);

/// -log2 G_full(P) for the given chi.
double optimal_rate(const Behaviour& p, const InputPairSet& chi, const MomentStructure& s);

/// Recomputes the bound of a report from its own expression, counts and
/// parameters. Throws InvalidArgument if the report carries no counts.
CertificateReport rederive(const CertificateReport& report, const MomentStructure& s);

struct ComparisonRow {
  std::uint64_t deviceSeed = 0;  // device index under the master seed
  double chshValue = 0.0;
  std::string method;
  std::string chiMode;
  std::int64_t nEst = 0;
  double piStar = 0.0;
  double rateProtocol = 0.0;
  double rateBaseline = 0.0;
  double rateOptimal = 0.0;
  /// Rates divided by the baseline rate; empty when the baseline is zero.
  std::optional<double> ratioProtocol;
  std::optional<double> ratioOptimal;
};

/// Header plus one line per row, columns in the order of ComparisonRow.
void write_csv(const std::vector<ComparisonRow>& rows, std::ostream& os);

/// cfg.devices accepted devices, cfg.trials trials each; rows sorted by
/// ascending optimal ratio.
std::vector<ComparisonRow> experiment_compare(const ProtocolConfig& cfg, const MomentStructure& s);

/// Mean rates over cfg.trials for every N_est in the grid, for ML and LS
/// and for chi_all and chi_one, on device `deviceIndex`.
std::vector<ComparisonRow> experiment_tune_nest(const ProtocolConfig& cfg, const std::vector<std::int64_t>& grid,
                                                std::uint64_t deviceIndex, const MomentStructure& s);

/// chi_one mean rates for every bias in the grid on cfg.devices devices,
/// each preceded by the chi_all row of the same device.
std::vector<ComparisonRow> experiment_bias_sweep(const ProtocolConfig& cfg, const std::vector<double>& grid,
                                                 const MomentStructure& s);

std::vector<std::int64_t> default_nest_grid(std::int64_t nTot);
std::vector<double> default_bias_grid();

}  // namespace dirand
