#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "starris/aoi.hpp"
#include "starris/channel.hpp"
#include "starris/optimizer.hpp"

namespace starris {

enum class SimMode { kES, kMS, kConventional, kRandomPhase };

const char* to_string(SimMode mode);
// Accepts es, ms, conv, random.
std::optional<SimMode> parse_sim_mode(const std::string& text);

struct SimConfig {
  Geometry geometry;
  int m = 32;
  int n_t = 4;
  int horizon = 100;
  PerSide<double> lambda{{0.6, 0.6}};
  double gamma_th_db = 3.0;
  double power_budget = 3.0;
  double energy_min_db = -20.0;  // -inf disables the energy constraint
  double sigma2 = 1.0;           // information-user noise variance
  SimMode mode = SimMode::kES;
  std::uint64_t seed = 1;
  int monte_carlo_runs = 1;
  OptimizerSettings optimizer;

  double gamma_th() const { return db_to_linear(gamma_th_db); }
  double energy_min() const;
  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

// Independent random streams of one episode. Each is seeded from
// (seed, run, purpose), so modes run with the same (seed, run) see the same
// channels and arrivals whatever the optimizer consumes.
struct EpisodeStreams {
  Rng channel;
  Rng arrival;
  Rng optimizer;

  static EpisodeStreams derive(std::uint64_t seed, int run);
};

struct SlotRecord {
  PerSide<StreamState> state;  // at the start of the slot
  PerSide<double> weight{};
  PerSide<bool> scheduled{};
  PerSide<bool> delivered{};
  PerSide<double> snr{};
  PerSide<double> energy{};
  SlotStatus status = SlotStatus::kInfeasible;
  double objective = 0.0;
  int ao_iterations = 0;
  std::vector<double> objective_trace;
  std::uint64_t channel_digest = 0;
};

struct EpisodeTrace {
  std::vector<SlotRecord> slots;
  AoITrace aoi;
};

struct EpisodeMetrics {
  double avg_sum_aoi = 0.0;
  // Minimum realized energy over both energy users and all optimal slots;
  // NaN when no slot is optimal.
  double min_harvested_energy = 0.0;
  // Delivered over scheduled slots; zero for a stream never scheduled.
  PerSide<double> delivery_rate{};
  double infeasible_slot_fraction = 0.0;
  double mean_ao_iterations = 0.0;
};

struct EpisodeResult {
  EpisodeTrace trace;
  EpisodeMetrics metrics;
};

EpisodeResult run_episode(const SimConfig& config, EpisodeStreams& streams);
EpisodeResult run_episode(const SimConfig& config, int run);

EpisodeMetrics compute_metrics(const EpisodeTrace& trace);

// FNV-1a over the raw channel coefficients.
std::uint64_t channel_digest(const ChannelSet& channels);

// Uniform random phases, alpha = 1/2, matched beams. Energy beams get the
// least power that meets the threshold; the rest goes to the first stream,
// by weight, whose SNR then clears gamma_th.
SlotDecision random_phase_decision(const SlotProblem& slot, Rng& rng);

enum class SweepParameter { kGammaTh, kPowerBudget, kNt, kM, kEnergyMinDb };

const char* to_string(SweepParameter p);
std::optional<SweepParameter> parse_sweep_parameter(const std::string& text);
// Throws std::invalid_argument for non-integral m / n_t values.
void apply_parameter(SimConfig& config, SweepParameter p, double value);

struct SweepRow {
  SimMode mode = SimMode::kES;
  std::string parameter;  // "base" without a sweep
  double value = 0.0;
  int run = 0;
  EpisodeMetrics metrics;
};

struct SummaryRow {
  SimMode mode = SimMode::kES;
  std::string parameter;
  double value = 0.0;
  int runs = 0;
  double mean_avg_sum_aoi = 0.0;
  double stderr_avg_sum_aoi = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // ordered by value, mode, run
  std::vector<SummaryRow> summary;
};

// Runs base.monte_carlo_runs episodes for every (value, mode). Run r of every
// cell uses EpisodeStreams::derive(base.seed, r). `workers` > 1 runs episodes
// on that many threads; the output does not depend on it.
SweepResult run_sweep(const SimConfig& base, std::optional<SweepParameter> parameter, const std::vector<double>& values,
                      const std::vector<SimMode>& modes, int workers = 1);

std::vector<SummaryRow> summarize(const std::vector<SweepRow>& rows);

}  // namespace starris
