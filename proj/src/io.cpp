#include "dirand/io.hpp"

#include <cmath>
#include <fstream>

#include "dirand/errors.hpp"

namespace dirand {
namespace {

template <class F>
auto guarded(const char* what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed ") + what + ": " + e.what());
  }
}

Json pi_to_json(const std::array<double, 4>& pi) {
  return Json::array({Json::array({pi[0], pi[1]}), Json::array({pi[2], pi[3]})});
}

std::array<double, 4> pi_from_json(const Json& j) {
  std::array<double, 4> pi{};
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) pi[static_cast<std::size_t>(pair_index(x, y))] = j.at(x).at(y).get<double>();
  return pi;
}

Json bloch_pair(const std::array<Bloch, 2>& v) { return Json::array({v[0], v[1]}); }

std::array<Bloch, 2> bloch_pair_from(const Json& j) {
  std::array<Bloch, 2> v{};
  for (int k = 0; k < 2; ++k)
    for (int c = 0; c < 3; ++c) v[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)] = j.at(k).at(c).get<double>();
  return v;
}

template <class T>
void read_opt(const Json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

}  // namespace

Json tensor_to_json(const Tensor16& t) {
  Json out = Json::array();
  for (int a = 0; a < 2; ++a) {
    Json ja = Json::array();
    for (int b = 0; b < 2; ++b) {
      Json jb = Json::array();
      for (int x = 0; x < 2; ++x) jb.push_back(Json::array({t[flat_index(a, b, x, 0)], t[flat_index(a, b, x, 1)]}));
      ja.push_back(std::move(jb));
    }
    out.push_back(std::move(ja));
  }
  return out;
}

Tensor16 tensor_from_json(const Json& j) {
  return guarded("tensor", [&] {
    Tensor16 t{};
    if (!j.is_array() || j.size() != 2) throw InvalidArgument("tensor must be a 2x2x2x2 nested array");
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int x = 0; x < 2; ++x) {
          const Json& row = j.at(a).at(b).at(x);
          if (row.size() != 2) throw InvalidArgument("tensor must be a 2x2x2x2 nested array");
          for (int y = 0; y < 2; ++y) t[flat_index(a, b, x, y)] = row.at(y).get<double>();
        }
    return t;
  });
}

Json to_json(const Behaviour& p) { return Json{{"p", tensor_to_json(p.data())}}; }

Behaviour behaviour_from_json(const Json& j) {
  return guarded("behaviour", [&] { return Behaviour(tensor_from_json(j.at("p"))); });
}

Json to_json(const CountTable& t) {
  Json counts = Json::array();
  for (int a = 0; a < 2; ++a) {
    Json ja = Json::array();
    for (int b = 0; b < 2; ++b) {
      Json jb = Json::array();
      for (int x = 0; x < 2; ++x)
        jb.push_back(Json::array({t.counts[flat_index(a, b, x, 0)], t.counts[flat_index(a, b, x, 1)]}));
      ja.push_back(std::move(jb));
    }
    counts.push_back(std::move(ja));
  }
  return Json{{"counts", counts}, {"n", t.n}, {"pi", pi_to_json(t.pi)}};
}

CountTable counts_from_json(const Json& j) {
  return guarded("counts", [&] {
    CountTable t;
    const Json& c = j.at("counts");
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int x = 0; x < 2; ++x)
          for (int y = 0; y < 2; ++y) t.counts[flat_index(a, b, x, y)] = c.at(a).at(b).at(x).at(y).get<std::int64_t>();
    t.n = j.at("n").get<std::int64_t>();
    t.pi = pi_from_json(j.at("pi"));
    t.validate();
    return t;
  });
}

Json to_json(const BellExpression& e) {
  Json out{{"c", tensor_to_json(e.coefficients())}};
  if (e.bounds()) {
    out["localBound"] = e.bounds()->localBound;
    out["quantumMax"] = e.bounds()->quantumMax;
    out["quantumMin"] = e.bounds()->quantumMin;
    out["level"] = e.bounds()->level;
  } else {
    out["localBound"] = nullptr;
    out["quantumMax"] = nullptr;
    out["quantumMin"] = nullptr;
    out["level"] = nullptr;
  }
  return out;
}

BellExpression expression_from_json(const Json& j) {
  return guarded("Bell expression", [&] {
    const Tensor16 c = tensor_from_json(j.at("c"));
    const bool bounded = j.contains("localBound") && !j.at("localBound").is_null();
    if (!bounded) return BellExpression(c);
    BellBounds b;
    b.localBound = j.at("localBound").get<double>();
    b.quantumMax = j.at("quantumMax").get<double>();
    b.quantumMin = j.at("quantumMin").get<double>();
    b.level = j.at("level").get<int>();
    return BellExpression(c, b);
  });
}

Json to_json(const DeviceModel& d) {
  return Json{{"theta", d.theta}, {"blochA", bloch_pair(d.blochA)}, {"blochB", bloch_pair(d.blochB)}};
}

DeviceModel device_from_json(const Json& j) {
  return guarded("device", [&] {
    DeviceModel d;
    d.theta = j.at("theta").get<double>();
    d.blochA = bloch_pair_from(j.at("blochA"));
    d.blochB = bloch_pair_from(j.at("blochB"));
    d.validate();
    return d;
  });
}

Json to_json(const InputPairSet& chi) {
  Json out = Json::array();
  for (const auto& xy : chi.members()) out.push_back(Json::array({xy[0], xy[1]}));
  return out;
}

InputPairSet chi_from_json(const Json& j) {
  return guarded("input pair set", [&] {
    unsigned mask = 0;
    for (const auto& xy : j) {
      const int x = xy.at(0).get<int>(), y = xy.at(1).get<int>();
      if ((x != 0 && x != 1) || (y != 0 && y != 1)) throw InvalidArgument("inputs must be 0 or 1");
      mask |= 1u << pair_index(x, y);
    }
    return InputPairSet(mask);
  });
}

Json to_json(const ProtocolConfig& c) {
  return Json{{"nTot", c.nTot},     {"nEst", c.n_est()},   {"nRaw", c.n_raw()},
              {"eps", c.eps},       {"epsPrime", c.epsPrime}, {"M", c.M},
              {"level", c.level},   {"method", to_string(c.method)}, {"chi", to_string(c.chi)},
              {"piStar", c.piStar}, {"trials", c.trials},  {"devices", c.devices},
              {"seed", c.seed}};
}

ProtocolConfig config_from_json(const Json& j) {
  return guarded("configuration", [&] {
    ProtocolConfig c;
    read_opt(j, "nTot", c.nTot);
    read_opt(j, "nEst", c.nEst);
    read_opt(j, "eps", c.eps);
    read_opt(j, "epsPrime", c.epsPrime);
    read_opt(j, "M", c.M);
    read_opt(j, "level", c.level);
    if (j.contains("method")) c.method = reg_method_from_string(j.at("method").get<std::string>());
    if (j.contains("chi")) c.chi = chi_policy_from_string(j.at("chi").get<std::string>());
    read_opt(j, "piStar", c.piStar);
    read_opt(j, "trials", c.trials);
    read_opt(j, "devices", c.devices);
    read_opt(j, "seed", c.seed);
    return c;
  });
}

Json to_json(const ChiSelection& s) {
  Json cands = Json::array();
  for (const auto& c : s.candidates) {
    Json jc{{"chi", to_json(c.chi)}, {"G", c.G}};
    jc["projectedRate"] = std::isnan(c.projectedRate) ? Json(nullptr) : Json(c.projectedRate);
    cands.push_back(std::move(jc));
  }
  return Json{{"chosen", to_json(s.chosen)}, {"bestSingleton", to_json(s.bestSingleton)}, {"candidates", cands}};
}

ChiSelection chi_selection_from_json(const Json& j) {
  return guarded("chi selection", [&] {
    ChiSelection s;
    s.chosen = chi_from_json(j.at("chosen"));
    s.bestSingleton = chi_from_json(j.at("bestSingleton"));
    for (const auto& c : j.at("candidates")) {
      ChiCandidate cand;
      cand.chi = chi_from_json(c.at("chi"));
      cand.G = c.at("G").get<double>();
      cand.projectedRate = c.at("projectedRate").is_null() ? std::nan("") : c.at("projectedRate").get<double>();
      s.candidates.push_back(cand);
    }
    return s;
  });
}

Json to_json(const CertificateReport& r, const std::optional<ProtocolConfig>& config) {
  Json j;
  j["expression"] = to_json(r.expression);
  j["localBound"] = r.localBound;
  j["quantumMax"] = r.quantumMax;
  j["quantumMin"] = r.quantumMin;
  j["level"] = r.level;
  j["chi"] = to_json(r.chi);
  j["pi"] = pi_to_json(r.pi);
  j["eps"] = r.eps;
  j["epsPrime"] = r.epsPrime;
  j["M"] = r.M;
  j["observed"] = r.observed;
  j["bin"] = r.bin;
  j["threshold"] = r.threshold;
  j["argument"] = r.argument;
  j["hValue"] = r.hValue;
  j["mu"] = r.mu;
  j["nu"] = r.nu;
  j["gamma"] = r.gamma;
  j["eta"] = r.eta;
  j["n"] = r.n;
  j["nTot"] = r.nTot;
  j["rawBound"] = r.rawBound;
  j["bound"] = r.bound;
  j["rate"] = r.rate;
  j["regime"] = r.regime;
  j["guarantee"] = r.guarantee;
  j["counts"] = r.counts ? to_json(*r.counts) : Json(nullptr);
  j["method"] = r.method;
  j["nEst"] = r.nEst;
  j["degenerateExpression"] = r.degenerateExpression;
  j["seeds"] = Json{{"masterSeed", r.masterSeed}, {"deviceIndex", r.deviceIndex}, {"trialIndex", r.trialIndex}};
  j["regularisationObjective"] = r.regularisationObjective;
  j["gFull"] = r.gFull;
  j["chshRepresentative"] = r.chshRepresentative;
  j["chiSelection"] = r.chiSelection ? to_json(*r.chiSelection) : Json(nullptr);
  j["config"] = config ? to_json(*config) : Json(nullptr);
  return j;
}

CertificateReport report_from_json(const Json& j) {
  return guarded("report", [&] {
    CertificateReport r;
    r.expression = expression_from_json(j.at("expression"));
    r.localBound = j.at("localBound").get<double>();
    r.quantumMax = j.at("quantumMax").get<double>();
    r.quantumMin = j.at("quantumMin").get<double>();
    r.level = j.at("level").get<int>();
    r.chi = chi_from_json(j.at("chi"));
    r.pi = pi_from_json(j.at("pi"));
    r.eps = j.at("eps").get<double>();
    r.epsPrime = j.at("epsPrime").get<double>();
    r.M = j.at("M").get<int>();
    r.observed = j.at("observed").get<double>();
    r.bin = j.at("bin").get<int>();
    r.threshold = j.at("threshold").get<double>();
    r.argument = j.at("argument").get<double>();
    r.hValue = j.at("hValue").get<double>();
    r.mu = j.at("mu").get<double>();
    r.nu = j.at("nu").get<double>();
    r.gamma = j.at("gamma").get<std::int64_t>();
    r.eta = j.at("eta").get<double>();
    r.n = j.at("n").get<std::int64_t>();
    r.nTot = j.at("nTot").get<std::int64_t>();
    r.rawBound = j.at("rawBound").get<double>();
    r.bound = j.at("bound").get<double>();
    r.rate = j.at("rate").get<double>();
    r.regime = j.at("regime").get<std::string>();
    r.guarantee = j.at("guarantee").get<std::string>();
    if (!j.at("counts").is_null()) r.counts = counts_from_json(j.at("counts"));
    r.method = j.at("method").get<std::string>();
    r.nEst = j.at("nEst").get<std::int64_t>();
    r.degenerateExpression = j.at("degenerateExpression").get<bool>();
    const Json& seeds = j.at("seeds");
    r.masterSeed = seeds.at("masterSeed").get<std::uint64_t>();
    r.deviceIndex = seeds.at("deviceIndex").get<std::uint64_t>();
    r.trialIndex = seeds.at("trialIndex").get<std::uint64_t>();
    r.regularisationObjective = j.at("regularisationObjective").get<double>();
    r.gFull = j.at("gFull").get<double>();
    r.chshRepresentative = j.at("chshRepresentative").get<int>();
    if (!j.at("chiSelection").is_null()) r.chiSelection = chi_selection_from_json(j.at("chiSelection"));
    return r;
  });
}

Json to_json(const RegularisationResult& r, double membershipMargin) {
  Json j = to_json(r.behaviour);
  j["metadata"] = Json{{"method", to_string(r.method)},
                       {"objective", r.objective},
                       {"level", r.level},
                       {"margins",
                        {{"membership", membershipMargin},
                         {"minEigenvalue", r.diagnostics.minEigenvalue},
                         {"clipped", r.diagnostics.clipped}}},
                       {"solver",
                        {{"status", r.diagnostics.solverStatus},
                         {"message", r.diagnostics.solverMessage},
                         {"gap", r.diagnostics.solverGap},
                         {"iterations", r.diagnostics.iterations}}}};
  return j;
}

Json to_json(const GuessingResult& g) {
  Json j{{"G", g.G},
         {"chi", to_json(g.chi)},
         {"level", g.level},
         {"mixing", g.mixing},
         {"status", conic::to_string(g.status)},
         {"solverGap", g.solverGap},
         {"iterations", g.iterations}};
  j["rawDual"] = g.rawDual ? to_json(*g.rawDual) : Json(nullptr);
  j["canonicalDual"] = g.canonicalDual ? to_json(*g.canonicalDual) : Json(nullptr);
  if (g.dualFunctional) j["dualFunctional"] = *g.dualFunctional;
  return j;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  return guarded("JSON file", [&] { return Json::parse(in); });
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace dirand
