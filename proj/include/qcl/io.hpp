#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "qcl/analysis.hpp"
#include "qcl/scenarios.hpp"

namespace qcl::io {

using Json = nlohmann::ordered_json;

/// Malformed input with a 1-based source location (0 when unknown).
class ParseError : public InputError {
public:
  ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

private:
  std::size_t line_;
  std::size_t column_;
};

/// `source` (a file name, say) prefixes the error message.
Json parse_json(const std::string& text, const std::string& source = "");
Json read_json_file(const std::string& path);

/// Pretty-printed JSON with every float written to 17 significant digits.
std::string dump(const Json& j, int indent = 2);
void write_json_file(const std::string& path, const Json& j);

/// Shortest representation that reads back to the same double.
std::string format_double(double v);

Json to_json(const GraphSchedule<double>& s);
GraphSchedule<double> schedule_from_json(const Json& j);

Json to_json(const Quantizer<double>& q);
Quantizer<double> quantizer_from_json(const Json& j);

Json to_json(const SelectionPolicy<double>& p);
SelectionPolicy<double> policy_from_json(const Json& j);
/// "sliding", "sequential_slow" or "fixed_alpha" (the latter needs alphas, so
/// it only names the policy kind).
std::string policy_name(const SelectionPolicy<double>& p);

Json to_json(const Expectation& e);
Expectation expectation_from_json(const Json& j);

Json to_json(const ScenarioConfig& cfg);
ScenarioConfig scenario_from_json(const Json& j);
ScenarioConfig load_scenario(const std::string& path);

Json to_json(const Trajectory<double>& traj);
Trajectory<double> trajectory_from_json(const Json& j, const Quantizer<double>& q);

/// Columns t, event, x_1..x_n, z_1..z_n, alpha_1..alpha_n; one row per event,
/// plus rows tagged "sample" every `stride` time units when given.
void write_trajectory_csv(std::ostream& out, const Trajectory<double>& traj,
                          std::optional<double> stride = std::nullopt);

Json to_json(const ConvergenceReport& r);

} // namespace qcl::io
