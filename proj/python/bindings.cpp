// Python bindings. Tensors cross the boundary as flat 16-entry lists in
// (a, b, x, y) order; reports and other records as JSON text, which the
// package wrapper turns into dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dirand/bound.hpp"
#include "dirand/certify.hpp"
#include "dirand/errors.hpp"
#include "dirand/harness.hpp"
#include "dirand/io.hpp"
#include "dirand/npa.hpp"
#include "dirand/regularise.hpp"
#include "dirand/simulate.hpp"

namespace py = pybind11;
using namespace dirand;

namespace {

InputPairSet chi_from_mask(unsigned mask) { return InputPairSet(mask); }

std::string dump(const Json& j) { return j.dump(); }

}  // namespace

PYBIND11_MODULE(_dirand, m) {
  m.doc() = "Device-independent randomness certification core";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<Infeasible>(m, "Infeasible", PyExc_RuntimeError);
  py::register_exception<InfeasibleValue>(m, "InfeasibleValue", PyExc_RuntimeError);
  py::register_exception<SolverFailure>(m, "SolverFailure", PyExc_RuntimeError);

  m.def("flat_index", &flat_index, py::arg("a"), py::arg("b"), py::arg("x"), py::arg("y"));
  m.def("chsh", [] { return chsh().coefficients(); });
  m.def("tsirelson", [] { return Behaviour::tsirelson().data(); });
  m.def("uniform", [] { return Behaviour::uniform().data(); });
  m.def("bell_value", [](const Tensor16& c, const Tensor16& p) { return bell_value(BellExpression(c), p); });
  m.def("signalling_norm", &signalling_norm);

  m.def("max_bell", [](const Tensor16& c, int level) { return max_bell(BellExpression(c), build_structure(level)); },
        py::arg("c"), py::arg("level") = 2);
  m.def("min_bell", [](const Tensor16& c, int level) { return min_bell(BellExpression(c), build_structure(level)); },
        py::arg("c"), py::arg("level") = 2);
  m.def(
      "membership_margin",
      [](const Tensor16& p, int level) { return membership(p, build_structure(level)).margin; }, py::arg("p"),
      py::arg("level") = 2);

  m.def(
      "guessing_full",
      [](const Tensor16& p, unsigned chiMask, int level) {
        return dump(to_json(guessing_full(p, chi_from_mask(chiMask), build_structure(level))));
      },
      py::arg("p"), py::arg("chi_mask") = 0xFu, py::arg("level") = 2);
  m.def(
      "guessing_bell",
      [](const Tensor16& c, double value, unsigned chiMask, int level) {
        return guessing_bell(BellExpression(c), value, chi_from_mask(chiMask), build_structure(level)).G;
      },
      py::arg("c"), py::arg("value"), py::arg("chi_mask") = 0xFu, py::arg("level") = 2);

  m.def(
      "device_behaviour",
      [](std::uint64_t seed, std::uint64_t index) { return behaviour_from(seeded_device(seed, index)).data(); },
      py::arg("seed"), py::arg("index"));
  m.def(
      "sample_counts",
      [](const Tensor16& p, const std::array<double, 4>& pi, std::int64_t n, std::uint64_t seed,
         std::uint64_t index) {
        SeededStream stream(seed, index);
        return dump(to_json(sample_counts(Behaviour(p), pi, n, stream)));
      },
      py::arg("p"), py::arg("pi"), py::arg("n"), py::arg("seed"), py::arg("index") = 0);
  m.def(
      "regularise",
      [](const std::string& countsJson, const std::string& method, int level) {
        const auto s = build_structure(level);
        const auto r = regularise(counts_from_json(Json::parse(countsJson)), s, reg_method_from_string(method));
        return dump(to_json(r, membership(r.behaviour, s).margin));
      },
      py::arg("counts_json"), py::arg("method") = "ml", py::arg("level") = 2);

  m.def(
      "run_protocol",
      [](std::uint64_t deviceIndex, const std::string& configJson, std::uint64_t trial) {
        const ProtocolConfig cfg = config_from_json(Json::parse(configJson));
        cfg.validate();
        const auto r =
            run_protocol(seeded_device(cfg.seed, deviceIndex), cfg, build_structure(cfg.level), deviceIndex, trial);
        return dump(to_json(r, cfg));
      },
      py::arg("device_index"), py::arg("config_json") = "{}", py::arg("trial") = 0);
  m.def(
      "run_chsh_baseline",
      [](std::uint64_t deviceIndex, const std::string& configJson, std::uint64_t trial) {
        const ProtocolConfig cfg = config_from_json(Json::parse(configJson));
        cfg.validate();
        const auto r = run_chsh_baseline(seeded_device(cfg.seed, deviceIndex), cfg, build_structure(cfg.level),
                                         deviceIndex, trial);
        return dump(to_json(r, cfg));
      },
      py::arg("device_index"), py::arg("config_json") = "{}", py::arg("trial") = 0);
  m.def(
      "rederive",
      [](const std::string& reportJson) {
        const Json j = Json::parse(reportJson);
        return dump(to_json(rederive(report_from_json(j), build_structure(j.at("level").get<int>()))));
      },
      py::arg("report_json"));
}
