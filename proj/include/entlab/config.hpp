#pragma once

#include <filesystem>
#include <optional>

#include <json.hpp>

#include "entlab/report_io.hpp"

namespace entlab::cli {

/// Parsed experiment description. Schema problems throw ConfigError at
/// parse time; measures and densities are built (and validated
/// numerically) only when the experiment runs.
struct ExperimentConfig {
  std::string kind;  // entropy | chain-rule | aep | slice | deformed-polar
  Unit unit{};
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool monte_carlo = false;
  std::int64_t samples = 100000;
  double epsilon = 0.1;
  double tolerance = 1e-3;  // deformed-polar identity tolerance
  std::vector<int> n_list;
  std::vector<double> delta_list;
  QuadratureOptions quad{};
  nlohmann::json measure_json;
  nlohmann::json density_json;
  nlohmann::json disintegration_json;  // null unless chain-rule / slice
  std::optional<std::filesystem::path> json_out;
  std::optional<std::filesystem::path> csv_out;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Builders shared by the runner and the acceptance battery.
ReferenceMeasure measure_from_json(const nlohmann::json& j);
Density density_from_json(const nlohmann::json& j, const ReferenceMeasure& mu);
Disintegration disintegration_from_json(const nlohmann::json& j,
                                        const ReferenceMeasure& total);

struct RunResult {
  int status = 0;  // 0 = all declared checks passed, 1 = a check failed
  std::string summary;
};

/// Dispatches to the library, writes the JSON/CSV artifacts, and returns
/// the one-screen summary with pass/fail marks. Numerical failures
/// propagate as exceptions (mapped to exit status 3 by the CLI).
RunResult run_experiment(const ExperimentConfig& config);

/// Human-readable description of the accepted config document.
std::string config_schema();

}  // namespace entlab::cli
