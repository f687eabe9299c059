#include "starris/config.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace starris {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError(key + ": expected a number, got '" + text + "'");
  return v;
}

long to_integer(const std::string& key, const std::string& text) {
  long v = 0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError(key + ": expected an integer, got '" + text + "'");
  return v;
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)>;

struct KeySpec {
  std::string section;
  Setter set;
};

Setter real(double SimConfig::*field) {
  return [field](ExperimentConfig& c, const std::string& k, const std::string& v) { c.sim.*field = to_double(k, v); };
}

Setter integer(int SimConfig::*field) {
  return [field](ExperimentConfig& c, const std::string& k, const std::string& v) {
    c.sim.*field = static_cast<int>(to_integer(k, v));
  };
}

Setter point(Point2 Geometry::*field, bool y) {
  return [field, y](ExperimentConfig& c, const std::string& k, const std::string& v) {
    (y ? (c.sim.geometry.*field).y : (c.sim.geometry.*field).x) = to_double(k, v);
  };
}

Setter user_point(PerSide<Point2> Geometry::*field, Side side, bool y) {
  return [field, side, y](ExperimentConfig& c, const std::string& k, const std::string& v) {
    Point2& p = (c.sim.geometry.*field)[side];
    (y ? p.y : p.x) = to_double(k, v);
  };
}

Setter exponent(double Geometry::*field) {
  return [field](ExperimentConfig& c, const std::string& k, const std::string& v) {
    c.sim.geometry.*field = to_double(k, v);
  };
}

Setter solver_int(int OptimizerSettings::*field) {
  return [field](ExperimentConfig& c, const std::string& k, const std::string& v) {
    c.sim.optimizer.*field = static_cast<int>(to_integer(k, v));
  };
}

Setter solver_real(double OptimizerSettings::*field) {
  return [field](ExperimentConfig& c, const std::string& k, const std::string& v) {
    c.sim.optimizer.*field = to_double(k, v);
  };
}

const std::map<std::string, KeySpec>& key_table() {
  static const std::map<std::string, KeySpec> table = [] {
    std::map<std::string, KeySpec> t;
    t["bs_x"] = {"geometry", point(&Geometry::bs, false)};
    t["bs_y"] = {"geometry", point(&Geometry::bs, true)};
    t["ris_x"] = {"geometry", point(&Geometry::ris, false)};
    t["ris_y"] = {"geometry", point(&Geometry::ris, true)};
    for (Side s : kSides) {
      const std::string suffix = std::string("_") + to_string(s);
      t["iu" + suffix + "_x"] = {"geometry", user_point(&Geometry::info_user, s, false)};
      t["iu" + suffix + "_y"] = {"geometry", user_point(&Geometry::info_user, s, true)};
      t["eu" + suffix + "_x"] = {"geometry", user_point(&Geometry::energy_user, s, false)};
      t["eu" + suffix + "_y"] = {"geometry", user_point(&Geometry::energy_user, s, true)};
      t["lambda" + suffix] = {"traffic", [s](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                c.sim.lambda[s] = to_double(k, v);
                              }};
    }
    t["exponent_info"] = {"geometry", exponent(&Geometry::exponent_info)};
    t["exponent_energy"] = {"geometry", exponent(&Geometry::exponent_energy)};
    t["exponent_bs_ris"] = {"geometry", exponent(&Geometry::exponent_bs_ris)};

    t["m"] = {"system", integer(&SimConfig::m)};
    t["n_t"] = {"system", integer(&SimConfig::n_t)};
    t["power_budget"] = {"system", real(&SimConfig::power_budget)};
    t["gamma_th_db"] = {"system", real(&SimConfig::gamma_th_db)};
    t["energy_min_db"] = {"system", real(&SimConfig::energy_min_db)};
    t["sigma2"] = {"system", real(&SimConfig::sigma2)};

    t["horizon"] = {"traffic", integer(&SimConfig::horizon)};
    t["lambda"] = {"traffic", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                     c.sim.lambda[Side::kT] = c.sim.lambda[Side::kR] = to_double(k, v);
                   }};

    t["mode"] = {"run", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                   const auto m = parse_sim_mode(v);
                   if (!m) throw ConfigError(k + ": unknown mode '" + v + "' (es, ms, conv, random)");
                   c.sim.mode = *m;
                 }};
    t["seed"] = {"run", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                   std::uint64_t s = 0;
                   const char* end = v.data() + v.size();
                   const auto [ptr, ec] = std::from_chars(v.data(), end, s);
                   if (ec != std::errc() || ptr != end) throw ConfigError(k + ": expected a non-negative integer");
                   c.sim.seed = s;
                 }};
    t["runs"] = {"run", integer(&SimConfig::monte_carlo_runs)};
    t["workers"] = {"run", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                      c.workers = static_cast<int>(to_integer(k, v));
                    }};

    t["parameter"] = {"sweep", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                        const auto p = parse_sweep_parameter(v);
                        if (!p) throw ConfigError(k + ": unknown sweep parameter '" + v + "'");
                        c.sweep.parameter = *p;
                      }};
    t["values"] = {"sweep", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                     c.sweep.values.clear();
                     for (const std::string& item : split(v, ',')) c.sweep.values.push_back(to_double(k, item));
                   }};
    t["modes"] = {"sweep", [](ExperimentConfig& c, const std::string&, const std::string& v) {
                    c.sweep.modes = parse_modes(v);
                  }};

    t["max_ao_iters"] = {"solver", solver_int(&OptimizerSettings::max_ao_iters)};
    t["max_sca_iters"] = {"solver", solver_int(&OptimizerSettings::max_sca_iters)};
    t["max_penalty_iters"] = {"solver", solver_int(&OptimizerSettings::max_penalty_iters)};
    t["tolerance"] = {"solver", solver_real(&OptimizerSettings::tolerance)};
    t["randomizations"] = {"solver", solver_int(&OptimizerSettings::randomizations)};
    t["time_budget_seconds"] = {"solver", solver_real(&OptimizerSettings::time_budget_seconds)};
    return t;
  }();
  return table;
}

std::string key_list() {
  std::string out;
  for (const std::string& k : valid_config_keys()) out += (out.empty() ? "" : ", ") + k;
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  sim.validate();
  if (workers < 1) throw std::invalid_argument("config: workers must be >= 1");
  if (sweep.modes.empty()) throw std::invalid_argument("config: modes must not be empty");
  if (sweep.parameter && sweep.values.empty()) throw std::invalid_argument("config: values must not be empty");
  for (SimMode mode : sweep.modes) {
    SimConfig c = sim;
    c.mode = mode;
    c.validate();
    if (sweep.parameter)
      for (double v : sweep.values) {
        SimConfig d = c;
        apply_parameter(d, *sweep.parameter, v);
        d.validate();
      }
  }
}

std::vector<std::string> valid_config_keys() {
  std::vector<std::string> out;
  for (const auto& [key, spec] : key_table()) out.push_back(spec.section + "." + key);
  return out;
}

ExperimentConfig parse_config(std::istream& in, const std::string& origin) {
  ExperimentConfig c;
  static const std::vector<std::string> sections{"geometry", "system", "traffic", "run", "sweep", "solver"};
  std::string section;
  std::string line;
  int number = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++number;
    const std::string where = origin + ":" + std::to_string(number) + ": ";
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (std::find(sections.begin(), sections.end(), section) == sections.end())
        throw ConfigError(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = key_table().find(key);
    if (it == key_table().end() || (!section.empty() && it->second.section != section))
      throw ConfigError(where + "unknown key '" + (section.empty() ? "" : section + ".") + key +
                        "'; valid keys: " + key_list());
    try {
      it->second.set(c, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
    seen.insert(key);
  }
  // run.mode alone selects the single mode to run.
  if (seen.count("mode") != 0 && seen.count("modes") == 0) c.sweep.modes = {c.sim.mode};
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file '" + path + "'");
  return parse_config(in, path);
}

std::pair<SweepParameter, std::vector<double>> parse_sweep_flag(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("sweep: expected <parameter>=<v1,v2,...>");
  const std::string name = trim(text.substr(0, eq));
  const auto p = parse_sweep_parameter(name);
  if (!p) throw ConfigError("sweep: unknown parameter '" + name + "' (gamma_th, power_budget, n_t, m, energy_min_db)");
  std::vector<double> values;
  for (const std::string& item : split(text.substr(eq + 1), ',')) values.push_back(to_double("sweep", item));
  if (values.empty()) throw ConfigError("sweep: no values given");
  return {*p, values};
}

std::vector<SimMode> parse_modes(const std::string& text) {
  std::vector<SimMode> out;
  for (const std::string& item : split(text, ',')) {
    const auto m = parse_sim_mode(item);
    if (!m) throw ConfigError("modes: unknown mode '" + item + "' (es, ms, conv, random)");
    out.push_back(*m);
  }
  if (out.empty()) throw ConfigError("modes: no modes given");
  return out;
}

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_number: conversion failed");
  return std::string(buf, ptr);
}

std::string RunManifest::results_path() const { return (std::filesystem::path(output_dir) / "results.csv").string(); }
std::string RunManifest::summary_path() const { return (std::filesystem::path(output_dir) / "summary.csv").string(); }
std::string RunManifest::manifest_path() const {
  return (std::filesystem::path(output_dir) / "manifest.json").string();
}

nlohmann::json manifest_to_json(const RunManifest& m) {
  using nlohmann::json;
  const SimConfig& s = m.config.sim;
  const Geometry& g = s.geometry;
  auto pt = [](Point2 p) { return json::array({p.x, p.y}); };
  json j;
  j["tool_version"] = m.tool_version;
  j["timestamp"] = m.timestamp;
  j["config_path"] = m.config_path;
  j["seed"] = s.seed;
  j["geometry"] = {{"bs", pt(g.bs)},
                   {"ris", pt(g.ris)},
                   {"iu_t", pt(g.info_user[Side::kT])},
                   {"iu_r", pt(g.info_user[Side::kR])},
                   {"eu_t", pt(g.energy_user[Side::kT])},
                   {"eu_r", pt(g.energy_user[Side::kR])},
                   {"exponent_info", g.exponent_info},
                   {"exponent_energy", g.exponent_energy},
                   {"exponent_bs_ris", g.exponent_bs_ris}};
  const double e = s.energy_min();
  j["system"] = {{"m", s.m},
                 {"n_t", s.n_t},
                 {"power_budget", s.power_budget},
                 {"gamma_th_db", s.gamma_th_db},
                 {"gamma_th_linear", s.gamma_th()},
                 {"energy_min_db", std::isfinite(s.energy_min_db) ? json(s.energy_min_db) : json("-inf")},
                 {"energy_min_linear", e},
                 {"sigma2", s.sigma2}};
  j["traffic"] = {{"horizon", s.horizon}, {"lambda_t", s.lambda[Side::kT]}, {"lambda_r", s.lambda[Side::kR]}};
  j["run"] = {{"mode", to_string(s.mode)}, {"runs", s.monte_carlo_runs}, {"workers", m.config.workers}};
  json modes = json::array();
  for (SimMode mode : m.config.sweep.modes) modes.push_back(to_string(mode));
  j["sweep"] = {{"parameter", m.config.sweep.parameter ? json(to_string(*m.config.sweep.parameter)) : json(nullptr)},
                {"values", m.config.sweep.values},
                {"modes", modes}};
  const OptimizerSettings& o = s.optimizer;
  j["solver"] = {{"max_ao_iters", o.max_ao_iters},
                 {"max_sca_iters", o.max_sca_iters},
                 {"max_penalty_iters", o.max_penalty_iters},
                 {"tolerance", o.tolerance},
                 {"randomizations", o.randomizations},
                 {"time_budget_seconds", o.time_budget_seconds}};
  j["outputs"] = {{"results", m.results_path()}, {"summary", m.summary_path()}, {"manifest", m.manifest_path()}};
  return j;
}

void write_results_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << kResultsHeader << '\n';
  for (const SweepRow& r : rows) {
    const EpisodeMetrics& m = r.metrics;
    out << to_string(r.mode) << ',' << r.parameter << ',' << format_number(r.value) << ',' << r.run << ','
        << format_number(m.avg_sum_aoi) << ',' << format_number(m.min_harvested_energy) << ','
        << format_number(m.delivery_rate[Side::kT]) << ',' << format_number(m.delivery_rate[Side::kR]) << ','
        << format_number(m.infeasible_slot_fraction) << ',' << format_number(m.mean_ao_iterations) << '\n';
  }
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << kSummaryHeader << '\n';
  for (const SummaryRow& r : rows)
    out << to_string(r.mode) << ',' << r.parameter << ',' << format_number(r.value) << ',' << r.runs << ','
        << format_number(r.mean_avg_sum_aoi) << ',' << format_number(r.stderr_avg_sum_aoi) << '\n';
}

SweepResult run_command(const RunManifest& manifest, std::ostream* log) {
  manifest.config.validate();
  std::error_code ec;
  std::filesystem::create_directories(manifest.output_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + manifest.output_dir + "': " + ec.message());

  auto open = [](const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    return f;
  };
  {
    std::ofstream f = open(manifest.manifest_path());
    f << manifest_to_json(manifest).dump(2) << '\n';
  }

  const SweepSpec& sw = manifest.config.sweep;
  const std::vector<double> values = sw.parameter ? sw.values : std::vector<double>{0.0};
  if (log)
    *log << "running " << values.size() * sw.modes.size() * manifest.config.sim.monte_carlo_runs << " episodes of "
         << manifest.config.sim.horizon << " slots\n";
  SweepResult result = run_sweep(manifest.config.sim, sw.parameter, values, sw.modes, manifest.config.workers);

  std::ofstream results = open(manifest.results_path());
  write_results_csv(results, result.rows);
  std::ofstream summary = open(manifest.summary_path());
  write_summary_csv(summary, result.summary);
  if (!results.flush() || !summary.flush()) throw std::runtime_error("write failed in '" + manifest.output_dir + "'");
  if (log)
    for (const SummaryRow& r : result.summary)
      *log << to_string(r.mode) << ' ' << r.parameter << '=' << format_number(r.value) << "  mean "
           << format_number(r.mean_avg_sum_aoi) << "  stderr " << format_number(r.stderr_avg_sum_aoi) << '\n';
  return result;
}

}  // namespace starris
