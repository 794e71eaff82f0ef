#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "csq/model.hpp"
#include "csq/protocol.hpp"
#include "csq/squid.hpp"

namespace csq {

inline constexpr const char* kLibraryVersion = "1.0.0";

// Batch-run configuration, resolved from an INI-style config file plus
// command-line overrides (flags > config > defaults). Frequency-like keys in
// the file carry explicit unit suffixes (_GHz_times_2pi or _rad_per_ns) so no
// 2pi is ever inserted silently; everything here is already in rad/ns.
struct ScenarioConfig {
  std::string scenario = "simulate";  // simulate|sweep|optimize-phi|modes|wigner
  PhysicalParams params = reference_params();

  Backend backend = Backend::Ideal;
  std::optional<double> phi_star;  // empty -> phi_analytic from derive()
  BlochPoint input;                // simulate / wigner-source input point
  bool input_set = false;          // whether the config named the point
  SweepGrid grid;                  // sweep scenario; defaults filled by normalize()

  std::optional<SquidResonatorGeometry> geometry;  // modes scenario
  int mode_count = 8;

  std::string out_path;       // empty -> scenario-dependent default name
  std::string format = "";    // "csv" | "json"; empty -> per-scenario default
  std::string manifest_path;  // empty -> "<out>.manifest.json"

  double wigner_min = -5.0;
  double wigner_max = 5.0;
  int wigner_points = 201;
  std::string wigner_source = "vacuum";  // vacuum | encode_plus | encode_minus

  bool strict = false;
  int jobs = 1;

  // Fills scenario-dependent defaults (output name/format, sweep grid, the
  // optimizer's equatorial probe) so a config echo reproduces the same run.
  // Called after flag overrides; idempotent.
  void normalize();
  void validate() const;  // scenario/format/grid coherence; throws ConfigError
};

// Parses the three-section (`[params]`, `[sweep]`, `[output]`) key-value
// format. Unknown sections or keys, duplicate keys, unit-suffix conflicts and
// malformed values all throw ConfigError naming the file, line and key.
// `filename` is only used in diagnostics.
ScenarioConfig parse_scenario_config(const std::string& text, const std::string& filename);

// Canonical INI echo of a resolved config: feeding it back through
// parse_scenario_config reproduces the same resolved run (roundtrip).
std::string scenario_config_to_ini(const ScenarioConfig& cfg);

// One output artifact rendered in memory; the runner writes them to disk.
struct Artifact {
  std::string path;
  std::string content;
};

struct RunResult {
  std::vector<Artifact> artifacts;  // data first, manifest last
  int exit_code = 0;
  std::string message;  // human-readable summary printed to stdout
};

// Executes a validated config and renders every artifact (deterministic bytes
// apart from the manifest's wall-time field). Library errors propagate as
// csq::Error; the caller maps codes to exit status via cli_exit_code().
RunResult run_scenario(const ScenarioConfig& cfg);

// 2 = config/parameter validation, 3 = numeric failure, 4 = regime violation.
int cli_exit_code(ErrorCode code);

}  // namespace csq
