#pragma once

// Experiment configuration, manifests and CSV output.
//
// Config files are line oriented: `key = value`, `# comment`, and optional
// `[section]` headers (geometry, system, traffic, run, sweep, solver). Key
// names are unique across sections, so a key may also appear before any
// header. Unspecified keys keep the SimConfig defaults.

#include <iosfwd>
#include <stdexcept>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "starris/sim.hpp"

namespace starris {

struct SweepSpec {
  std::optional<SweepParameter> parameter;
  std::vector<double> values;
  std::vector<SimMode> modes{SimMode::kES};
};

struct ExperimentConfig {
  SimConfig sim;
  SweepSpec sweep;
  int workers = 1;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// "section.key" for every accepted key.
std::vector<std::string> valid_config_keys();

// Throws ConfigError on syntax errors and unknown keys, std::invalid_argument
// on invariant violations.
ExperimentConfig parse_config(std::istream& in, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::string& path);

// "gamma_th=0,3,6" -> parameter and values.
std::pair<SweepParameter, std::vector<double>> parse_sweep_flag(const std::string& text);
// "es,ms,conv" -> modes, order kept.
std::vector<SimMode> parse_modes(const std::string& text);

// Shortest round-trip decimal form, independent of the locale.
std::string format_number(double v);

struct RunManifest {
  std::string config_path;  // empty when no file was given
  ExperimentConfig config;
  std::string output_dir;
  std::string tool_version;
  std::string timestamp;  // ISO 8601 UTC

  std::string results_path() const;
  std::string summary_path() const;
  std::string manifest_path() const;
};

nlohmann::json manifest_to_json(const RunManifest& manifest);

inline constexpr const char* kResultsHeader =
    "mode,parameter,value,run_id,avg_sum_aoi,min_harvested_energy,delivery_rate_t,delivery_rate_r,"
    "infeasible_fraction,mean_ao_iterations";
inline constexpr const char* kSummaryHeader = "mode,parameter,value,runs,mean_avg_sum_aoi,stderr_avg_sum_aoi";

void write_results_csv(std::ostream& out, const std::vector<SweepRow>& rows);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

// Runs the sweep and writes results.csv, summary.csv and manifest.json into
// the output directory. Returns the sweep; throws std::runtime_error on I/O
// failure.
SweepResult run_command(const RunManifest& manifest, std::ostream* log = nullptr);

}  // namespace starris
