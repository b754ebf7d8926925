// Command-line front end: device simulation, regularisation, guessing
// programs, the min-entropy bound, single protocol runs and the experiments.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dirand/bound.hpp"
#include "dirand/certify.hpp"
#include "dirand/errors.hpp"
#include "dirand/harness.hpp"
#include "dirand/io.hpp"
#include "dirand/npa.hpp"
#include "dirand/regularise.hpp"
#include "dirand/simulate.hpp"

namespace fs = std::filesystem;
using namespace dirand;

namespace {

struct ConfigFlags {
  ProtocolConfig cfg;
  std::string configFile;
  std::string method = "ml";
  std::string chi = "all";
  bool fullScale = false;
};

void add_config_flags(CLI::App* app, ConfigFlags& f) {
  app->add_option("--config", f.configFile, "ProtocolConfig JSON; flags given explicitly override it");
  app->add_option("--n-tot", f.cfg.nTot, "Total rounds N_tot");
  app->add_option("--n-est", f.cfg.nEst, "Estimation rounds (0 = 1% of N_tot)");
  app->add_option("--eps", f.cfg.eps, "Soundness parameter eps");
  app->add_option("--eps-prime", f.cfg.epsPrime, "Error parameter eps'");
  app->add_option("--M", f.cfg.M, "Threshold intervals (M + 1 thresholds)");
  app->add_option("--level", f.cfg.level, "Relaxation level (1 or 2)");
  app->add_option("--method", f.method, "Regularisation: ml or ls");
  app->add_option("--chi", f.chi, "Input-pair policy: all, one or auto");
  app->add_option("--pi-star", f.cfg.piStar, "Raw-phase bias on the selected pair");
  app->add_option("--trials", f.cfg.trials, "Trials per device");
  app->add_option("--devices", f.cfg.devices, "Number of devices");
  app->add_option("--seed", f.cfg.seed, "Master seed");
  app->add_option("--threads", f.cfg.threads, "Worker threads (0 = all cores)");
  app->add_flag("--full-scale", f.fullScale, "10^8 rounds, 10^6 estimation, 50 devices, 500 trials");
}

ProtocolConfig resolve(const CLI::App* app, const ConfigFlags& f) {
  ProtocolConfig c = f.fullScale ? ProtocolConfig::full_scale() : ProtocolConfig{};
  if (!f.configFile.empty()) c = config_from_json(read_json_file(f.configFile));
  auto given = [&](const char* name) { return app->count(name) > 0; };
  if (given("--n-tot")) c.nTot = f.cfg.nTot;
  if (given("--n-est")) c.nEst = f.cfg.nEst;
  if (given("--eps")) c.eps = f.cfg.eps;
  if (given("--eps-prime")) c.epsPrime = f.cfg.epsPrime;
  if (given("--M")) c.M = f.cfg.M;
  if (given("--level")) c.level = f.cfg.level;
  if (given("--method")) c.method = reg_method_from_string(f.method);
  if (given("--chi")) c.chi = chi_policy_from_string(f.chi);
  if (given("--pi-star")) c.piStar = f.cfg.piStar;
  if (given("--trials")) c.trials = f.cfg.trials;
  if (given("--devices")) c.devices = f.cfg.devices;
  if (given("--seed")) c.seed = f.cfg.seed;
  if (given("--threads")) c.threads = f.cfg.threads;
  c.validate();
  return c;
}

/// "all", or a comma-separated list of pairs such as "00" or "00,11".
InputPairSet parse_chi(const std::string& text) {
  if (text == "all") return InputPairSet::all();
  unsigned mask = 0;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.size() != 2 || (item[0] != '0' && item[0] != '1') || (item[1] != '0' && item[1] != '1'))
      throw InvalidArgument("input pair '" + item + "' is not one of 00, 01, 10, 11");
    mask |= 1u << pair_index(item[0] - '0', item[1] - '0');
  }
  return InputPairSet(mask);
}

std::array<double, 4> parse_pi(const std::vector<double>& v) {
  if (v.empty()) return {0.25, 0.25, 0.25, 0.25};
  if (v.size() != 4) throw InvalidArgument("--pi takes four probabilities (00 01 10 11)");
  return {v[0], v[1], v[2], v[3]};
}

struct DeviceSource {
  std::string file;
  std::uint64_t index = 0;
  bool chshOptimal = false;
};

void add_device_flags(CLI::App* app, DeviceSource& d) {
  app->add_option("--device", d.file, "DeviceModel JSON instead of a seeded device");
  app->add_option("--device-index", d.index, "Accepted-device number under the master seed");
  app->add_flag("--chsh-optimal", d.chshOptimal, "Use the maximally violating CHSH device");
}

DeviceModel load_device(const DeviceSource& d, std::uint64_t seed) {
  if (d.chshOptimal) return chsh_optimal_device();
  if (!d.file.empty()) return device_from_json(read_json_file(d.file));
  return seeded_device(seed, d.index);
}

void print_report(const CertificateReport& r) {
  std::cout << "observed " << r.observed << "  bin " << r.bin << "  H " << r.hValue << "  bound " << r.bound
            << "  rate " << r.rate << "  (" << r.regime << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Device-independent randomness certification from regularised Bell-test data"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string outDir = ".";
  app.add_option("--out", outDir, "Output directory")->capture_default_str();

  // simulate-device
  auto* sim = app.add_subcommand("simulate-device", "Draw a device, write its behaviour and optional counts");
  std::uint64_t simSeed = 0;
  DeviceSource simDev;
  std::int64_t simRounds = 0;
  std::vector<double> simPi;
  sim->add_option("--seed", simSeed, "Master seed");
  add_device_flags(sim, simDev);
  sim->add_option("--rounds", simRounds, "Also sample this many rounds into counts.json");
  sim->add_option("--pi", simPi, "Input distribution for sampling (00 01 10 11)")->expected(4);

  // regularise
  auto* reg = app.add_subcommand("regularise", "Project observed counts onto the relaxation");
  std::string regCounts, regMethod = "ml";
  int regLevel = 2;
  reg->add_option("--counts", regCounts, "Counts JSON")->required();
  reg->add_option("--method", regMethod, "ml or ls");
  reg->add_option("--level", regLevel, "Relaxation level");

  // certify
  auto* cert = app.add_subcommand("certify", "Guessing probability of a behaviour, or of a Bell value");
  std::string certBehaviour, certExpr, certChi = "all", certDump;
  double certValue = NAN;
  int certLevel = 2;
  cert->add_option("--behaviour", certBehaviour, "Behaviour JSON (full program)");
  cert->add_option("--expression", certExpr, "Bell expression JSON (value program)");
  cert->add_option("--value", certValue, "Bell value for the value program");
  cert->add_option("--chi", certChi, "all, or pairs such as 00 or 00,11");
  cert->add_option("--level", certLevel, "Relaxation level");
  cert->add_option("--dump", certDump, "Write the full program as a sparse text dump");

  // bound
  auto* bnd = app.add_subcommand("bound", "Min-entropy bound from an expression and raw counts");
  std::string bndExpr, bndCounts, bndReport, bndChi = "all";
  double bndEps = 1e-6, bndEpsPrime = 1e-6;
  int bndM = 999, bndLevel = 2;
  std::int64_t bndNTot = 0;
  bnd->add_option("--expression", bndExpr, "Bell expression JSON");
  bnd->add_option("--counts", bndCounts, "Raw-phase counts JSON");
  bnd->add_option("--report", bndReport, "Recompute the bound of an existing report instead");
  bnd->add_option("--chi", bndChi, "all, or pairs such as 00");
  bnd->add_option("--eps", bndEps, "Soundness parameter eps");
  bnd->add_option("--eps-prime", bndEpsPrime, "Error parameter eps'");
  bnd->add_option("--M", bndM, "Threshold intervals");
  bnd->add_option("--level", bndLevel, "Relaxation level");
  bnd->add_option("--n-tot", bndNTot, "Rate normaliser (0 = raw-phase rounds)");

  // protocol / baseline
  auto* prot = app.add_subcommand("protocol", "One protocol run on a device");
  ConfigFlags protFlags;
  DeviceSource protDev;
  std::uint64_t protTrial = 0;
  add_config_flags(prot, protFlags);
  add_device_flags(prot, protDev);
  prot->add_option("--trial", protTrial, "Trial index");

  auto* base = app.add_subcommand("baseline", "CHSH baseline run on a device");
  ConfigFlags baseFlags;
  DeviceSource baseDev;
  std::uint64_t baseTrial = 0;
  add_config_flags(base, baseFlags);
  add_device_flags(base, baseDev);
  base->add_option("--trial", baseTrial, "Trial index");

  // experiments
  auto* exp = app.add_subcommand("experiment", "Comparison experiments, written to results.csv");
  exp->require_subcommand(1);
  auto* cmp = exp->add_subcommand("compare", "Protocol against baseline and optimum over devices");
  ConfigFlags cmpFlags;
  add_config_flags(cmp, cmpFlags);
  auto* tune = exp->add_subcommand("tune-nest", "Rates as a function of the estimation size");
  ConfigFlags tuneFlags;
  std::vector<std::int64_t> tuneGrid;
  std::uint64_t tuneDevice = 0;
  add_config_flags(tune, tuneFlags);
  tune->add_option("--grid", tuneGrid, "Estimation sizes (default: log grid up to N_tot/2)");
  tune->add_option("--device-index", tuneDevice, "Accepted-device number under the master seed");
  auto* bias = exp->add_subcommand("bias-sweep", "Single-pair rates as a function of the bias");
  ConfigFlags biasFlags;
  std::vector<double> biasGrid;
  add_config_flags(bias, biasFlags);
  bias->add_option("--grid", biasGrid, "Biases pi* (default 0.4 .. 0.99)");

  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path out(outDir);
    if (sim->parsed()) {
      const DeviceModel d = load_device(simDev, simSeed);
      const Behaviour p = behaviour_from(d);
      write_json_file(out / "device.json", to_json(d));
      write_json_file(out / "behaviour.json", to_json(p));
      const auto best = best_chsh(p);
      std::cout << "CHSH " << best.value << " (representative " << best.representative << ")\n";
      if (simRounds > 0) {
        SeededStream stream(simSeed, stream_index(simDev.index, 0, StreamPurpose::estimation));
        write_json_file(out / "counts.json", to_json(sample_counts(p, parse_pi(simPi), simRounds, stream)));
      }
    } else if (reg->parsed()) {
      const auto s = build_structure(regLevel);
      const CountTable t = counts_from_json(read_json_file(regCounts));
      const auto r = regularise(t, s, reg_method_from_string(regMethod));
      write_json_file(out / "behaviour.json", to_json(r, membership(r.behaviour, s).margin));
      std::cout << to_string(r.method) << " objective " << r.objective << '\n';
    } else if (cert->parsed()) {
      const auto s = build_structure(certLevel);
      const InputPairSet chi = parse_chi(certChi);
      if (!certBehaviour.empty()) {
        const Behaviour p = behaviour_from_json(read_json_file(certBehaviour));
        if (!certDump.empty()) {
          const std::filesystem::path dumpPath(certDump);
          if (dumpPath.has_parent_path()) std::filesystem::create_directories(dumpPath.parent_path());
          std::ofstream os(dumpPath);
          if (!os) throw InvalidArgument("cannot write " + certDump);
          conic::write_sparse_dump(full_guessing_program(p.data(), chi, s), os);
        }
        const auto g = guessing_full(p, chi, s);
        write_json_file(out / "guessing.json", to_json(g));
        if (g.canonicalDual)
          write_json_file(out / "expression.json", to_json(with_quantum_bounds(*g.canonicalDual, s)));
        std::cout << "G " << g.G << "  H " << -std::log2(g.G) << '\n';
      } else if (!certExpr.empty() && !std::isnan(certValue)) {
        const auto g = guessing_bell(expression_from_json(read_json_file(certExpr)), certValue, chi, s);
        write_json_file(out / "guessing.json", to_json(g));
        std::cout << "G " << g.G << "  H " << -std::log2(g.G) << '\n';
      } else {
        throw InvalidArgument("certify needs --behaviour, or --expression with --value");
      }
    } else if (bnd->parsed()) {
      CertificateReport r;
      if (!bndReport.empty()) {
        const Json j = read_json_file(bndReport);
        r = rederive(report_from_json(j), build_structure(j.at("level").get<int>()));
      } else {
        if (bndExpr.empty() || bndCounts.empty()) throw InvalidArgument("bound needs --expression and --counts");
        const auto s = build_structure(bndLevel);
        const CountTable t = counts_from_json(read_json_file(bndCounts));
        BoundConfig bc;
        bc.eps = bndEps;
        bc.epsPrime = bndEpsPrime;
        bc.M = bndM;
        bc.level = bndLevel;
        bc.chi = parse_chi(bndChi);
        bc.pi = t.pi;
        bc.nTot = bndNTot;
        r = min_entropy_bound(with_quantum_bounds(expression_from_json(read_json_file(bndExpr)), s), t, bc, s);
      }
      write_json_file(out / "report.json", to_json(r));
      print_report(r);
    } else if (prot->parsed() || base->parsed()) {
      const bool isProt = prot->parsed();
      const ProtocolConfig c = resolve(isProt ? prot : base, isProt ? protFlags : baseFlags);
      const DeviceSource& src = isProt ? protDev : baseDev;
      const DeviceModel d = load_device(src, c.seed);
      const auto s = build_structure(c.level);
      const std::uint64_t trial = isProt ? protTrial : baseTrial;
      const auto r = isProt ? run_protocol(d, c, s, src.index, trial) : run_chsh_baseline(d, c, s, src.index, trial);
      write_json_file(out / "behaviour.json", to_json(behaviour_from(d)));
      write_json_file(out / "report.json", to_json(r, c));
      print_report(r);
    } else if (exp->parsed()) {
      std::vector<ComparisonRow> rows;
      if (cmp->parsed()) {
        const ProtocolConfig c = resolve(cmp, cmpFlags);
        rows = experiment_compare(c, build_structure(c.level));
      } else if (tune->parsed()) {
        const ProtocolConfig c = resolve(tune, tuneFlags);
        rows = experiment_tune_nest(c, tuneGrid.empty() ? default_nest_grid(c.nTot) : tuneGrid, tuneDevice,
                                    build_structure(c.level));
      } else {
        const ProtocolConfig c = resolve(bias, biasFlags);
        rows = experiment_bias_sweep(c, biasGrid.empty() ? default_bias_grid() : biasGrid, build_structure(c.level));
      }
      fs::create_directories(out);
      std::ofstream os(out / "results.csv");
      if (!os) throw InvalidArgument("cannot write " + (out / "results.csv").string());
      write_csv(rows, os);
      std::cout << rows.size() << " rows written to " << (out / "results.csv").string() << '\n';
    }
  } catch (const dirand::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
