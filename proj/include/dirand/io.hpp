#pragma once

// JSON (de)serialisation of behaviours, counts, expressions, devices,
// configurations and reports. Tensors are 4-nested arrays [a][b][x][y];
// input distributions are 2-nested arrays [x][y].
//
// Parse errors of any kind surface as InvalidArgument.

#include <filesystem>
#include <optional>

#include "json.hpp"

#include "dirand/behaviour.hpp"
#include "dirand/bound.hpp"
#include "dirand/certify.hpp"
#include "dirand/harness.hpp"
#include "dirand/regularise.hpp"
#include "dirand/simulate.hpp"

namespace dirand {

using Json = nlohmann::json;

Json tensor_to_json(const Tensor16& t);
Tensor16 tensor_from_json(const Json& j);

/// {"p": [a][b][x][y]}
Json to_json(const Behaviour& p);
Behaviour behaviour_from_json(const Json& j);

/// {"counts": [a][b][x][y], "n", "pi": [x][y]}
Json to_json(const CountTable& t);
CountTable counts_from_json(const Json& j);

/// {"c": [a][b][x][y], "localBound", "quantumMax", "quantumMin", "level"};
/// the bound fields are null when the expression carries none.
Json to_json(const BellExpression& e);
BellExpression expression_from_json(const Json& j);

/// {"theta", "blochA": [[..],[..]], "blochB": [[..],[..]]}
Json to_json(const DeviceModel& d);
DeviceModel device_from_json(const Json& j);

/// List of [x, y] pairs.
Json to_json(const InputPairSet& chi);
InputPairSet chi_from_json(const Json& j);

Json to_json(const ProtocolConfig& c);
/// Missing keys keep their defaults.
ProtocolConfig config_from_json(const Json& j);

Json to_json(const ChiSelection& s);
ChiSelection chi_selection_from_json(const Json& j);

/// Every report field, the seeds, and the configuration when given.
Json to_json(const CertificateReport& r, const std::optional<ProtocolConfig>& config = std::nullopt);
CertificateReport report_from_json(const Json& j);

/// behaviour.json with a metadata block {method, objective, level, margins}.
Json to_json(const RegularisationResult& r, double membershipMargin);

Json to_json(const GuessingResult& g);

Json read_json_file(const std::filesystem::path& path);
/// Writes with two-space indentation; creates parent directories.
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace dirand
