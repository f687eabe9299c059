#include "starris/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <thread>

namespace starris {

const char* to_string(SimMode mode) {
  switch (mode) {
    case SimMode::kES:
      return "es";
    case SimMode::kMS:
      return "ms";
    case SimMode::kConventional:
      return "conv";
    case SimMode::kRandomPhase:
      return "random";
  }
  return "?";
}

std::optional<SimMode> parse_sim_mode(const std::string& text) {
  if (text == "es") return SimMode::kES;
  if (text == "ms") return SimMode::kMS;
  if (text == "conv") return SimMode::kConventional;
  if (text == "random") return SimMode::kRandomPhase;
  return std::nullopt;
}

double SimConfig::energy_min() const {
  if (std::isinf(energy_min_db) && energy_min_db < 0) return 0.0;
  return db_to_linear(energy_min_db);
}

void SimConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("config: " + field + " " + why);
  };
  geometry.validate();
  if (m < 1) fail("m", "must be >= 1");
  if (mode != SimMode::kES && mode != SimMode::kRandomPhase && m < 2) fail("m", "must be >= 2 for ms and conv");
  if (n_t < 1) fail("n_t", "must be >= 1");
  if (horizon < 1) fail("horizon", "must be >= 1");
  if (monte_carlo_runs < 1) fail("runs", "must be >= 1");
  for (Side s : kSides)
    if (!(lambda[s] >= 0.0 && lambda[s] <= 1.0)) fail(std::string("lambda_") + to_string(s), "must lie in [0, 1]");
  if (!std::isfinite(gamma_th_db)) fail("gamma_th_db", "must be finite");
  if (!(power_budget > 0.0) || !std::isfinite(power_budget)) fail("power_budget", "must be positive");
  if (std::isnan(energy_min_db) || energy_min_db == std::numeric_limits<double>::infinity())
    fail("energy_min_db", "must be finite or -inf");
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) fail("sigma2", "must be positive");
  if (optimizer.max_ao_iters < 1) fail("max_ao_iters", "must be >= 1");
  if (optimizer.max_sca_iters < 1) fail("max_sca_iters", "must be >= 1");
  if (optimizer.max_penalty_iters < 1) fail("max_penalty_iters", "must be >= 1");
  if (!(optimizer.tolerance > 0.0)) fail("tolerance", "must be positive");
  if (optimizer.randomizations < 0) fail("randomizations", "must be >= 0");
  if (!(optimizer.time_budget_seconds > 0.0)) fail("time_budget_seconds", "must be positive");
}

EpisodeStreams EpisodeStreams::derive(std::uint64_t seed, int run) {
  auto make = [&](std::uint32_t purpose) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(run), purpose};
    return Rng(seq);
  };
  return EpisodeStreams{make(1), make(2), make(3)};
}

std::uint64_t channel_digest(const ChannelSet& ch) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](double v) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ull;
    }
  };
  for (Eigen::Index i = 0; i < ch.g.size(); ++i) {
    mix(ch.g.data()[i].real());
    mix(ch.g.data()[i].imag());
  }
  for (Side s : kSides) {
    for (Eigen::Index i = 0; i < ch.f[s].size(); ++i) {
      mix(ch.f[s](i).real());
      mix(ch.f[s](i).imag());
    }
    for (Eigen::Index i = 0; i < ch.u[s].size(); ++i) {
      mix(ch.u[s](i).real());
      mix(ch.u[s](i).imag());
    }
  }
  return h;
}

SlotDecision random_phase_decision(const SlotProblem& slot, Rng& rng) {
  slot.validate();
  const ChannelSet& ch = slot.channels;
  const int m = ch.m();
  SlotDecision d;
  d.beams = Beams::zeros(ch.n_t());
  d.tarc = make_uniform_split(m);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  for (Side s : kSides)
    for (int i = 0; i < m; ++i) d.tarc.phase[s](i) = phase(rng);

  auto direction = [&](const Eigen::VectorXcd& h, Side s) {
    const Eigen::VectorXcd c = coefficients(d.tarc, s);
    return Eigen::VectorXcd(ch.g.adjoint() * (c.conjugate().asDiagonal() * h));
  };

  double remaining = slot.power_budget;
  if (slot.energy_min > 0.0) {
    for (Side s : kSides) {
      const Eigen::VectorXcd a = direction(ch.u[s], s);
      const double gain = a.squaredNorm();
      if (!(gain > 0.0)) return d;
      const double p = slot.energy_min / gain;
      d.beams.energy[s] = a * std::sqrt(p / gain);
      remaining -= p;
    }
    // Guard against the last ulp so the threshold is met exactly.
    for (Side s : kSides) {
      int guard = 0;
      while (harvested_energy(ch.u[s], coefficients(d.tarc, s), ch.g, d.beams.energy[s]) < slot.energy_min &&
             guard++ < 4) {
        d.beams.energy[s] *= 1.0 + 1e-12;
      }
    }
    if (remaining < 0.0) {
      d.beams = Beams::zeros(ch.n_t());
      return d;
    }
  }

  d.status = SlotStatus::kOptimal;
  d.ao_iterations = 0;
  const Side first = slot.weights[Side::kR] > slot.weights[Side::kT] ? Side::kR : Side::kT;
  for (Side k : {first, other(first)}) {
    if (!(slot.availability[k] && slot.weights[k] > 0.0) || remaining <= 0.0) continue;
    const Eigen::VectorXcd a = direction(ch.f[k], k);
    const double n = a.norm();
    if (!(n > 0.0)) continue;
    const Eigen::VectorXcd w = a * (std::sqrt(remaining) / n);
    if (snr(ch.f[k], coefficients(d.tarc, k), ch.g, w, ch.sigma2_info[k]) >= slot.gamma_th) {
      d.beams.info[k] = w;
      d.schedule[k] = true;
      d.objective = slot.weights[k];
      break;
    }
  }
  return d;
}

EpisodeMetrics compute_metrics(const EpisodeTrace& trace) {
  EpisodeMetrics m;
  m.avg_sum_aoi = average_sum_aoi(trace.aoi);
  const double n = static_cast<double>(trace.slots.size());
  double min_energy = std::numeric_limits<double>::infinity();
  PerSide<int> scheduled{}, delivered{};
  int infeasible = 0;
  long ao = 0;
  for (const SlotRecord& r : trace.slots) {
    if (r.status == SlotStatus::kOptimal)
      for (Side s : kSides) min_energy = std::min(min_energy, r.energy[s]);
    if (r.status == SlotStatus::kInfeasible) ++infeasible;
    ao += r.ao_iterations;
    for (Side s : kSides) {
      scheduled[s] += r.scheduled[s] ? 1 : 0;
      delivered[s] += r.delivered[s] ? 1 : 0;
    }
  }
  m.min_harvested_energy = std::isinf(min_energy) ? std::numeric_limits<double>::quiet_NaN() : min_energy;
  for (Side s : kSides)
    m.delivery_rate[s] = scheduled[s] > 0 ? static_cast<double>(delivered[s]) / scheduled[s] : 0.0;
  m.infeasible_slot_fraction = infeasible / n;
  m.mean_ao_iterations = static_cast<double>(ao) / n;
  return m;
}

EpisodeResult run_episode(const SimConfig& config, EpisodeStreams& streams) {
  config.validate();
  NoiseLevels noise;
  noise.info = {{config.sigma2, config.sigma2}};
  const double gamma = config.gamma_th();
  const double e_min = config.energy_min();

  EpisodeResult out;
  PerSide<StreamState> state;
  for (Side s : kSides) state[s] = initial_state(config.lambda[s], streams.arrival);

  for (int n = 0; n < config.horizon; ++n) {
    SlotRecord rec;
    rec.state = state;
    SlotProblem slot;
    slot.channels = sample_channel_set(config.geometry, config.m, config.n_t, streams.channel, noise);
    rec.channel_digest = channel_digest(slot.channels);
    for (Side s : kSides) {
      slot.weights[s] = reduction_weight(state[s]);
      slot.availability[s] = state[s].has_packet;
    }
    rec.weight = slot.weights;
    slot.gamma_th = gamma;
    slot.energy_min = e_min;
    slot.power_budget = config.power_budget;

    SlotDecision d;
    switch (config.mode) {
      case SimMode::kES:
        slot.mode = Mode::kES;
        d = alternating_optimize(slot, config.optimizer, streams.optimizer);
        break;
      case SimMode::kMS:
        slot.mode = Mode::kMS;
        d = alternating_optimize(slot, config.optimizer, streams.optimizer);
        break;
      case SimMode::kConventional:
        slot.mode = Mode::kConventional;
        d = alternating_optimize(slot, config.optimizer, streams.optimizer);
        break;
      case SimMode::kRandomPhase:
        d = random_phase_decision(slot, streams.optimizer);
        break;
    }

    rec.status = d.status;
    rec.objective = d.objective;
    rec.ao_iterations = d.ao_iterations;
    rec.objective_trace = d.objective_trace;
    rec.scheduled = d.schedule;
    const ChannelSet& ch = slot.channels;
    for (Side s : kSides) {
      const Eigen::VectorXcd c = coefficients(d.tarc, s);
      rec.snr[s] = snr(ch.f[s], c, ch.g, d.beams.info[s], ch.sigma2_info[s]);
      rec.energy[s] = harvested_energy(ch.u[s], c, ch.g, d.beams.energy[s]);
      rec.delivered[s] = delivery_predicate(rec.snr[s], d.schedule[s], state[s].has_packet, gamma);
    }
    for (Side s : kSides) {
      out.trace.aoi.streams[s].push_back(
          AoIRecord{state[s].age, state[s].system_time, state[s].has_packet, rec.scheduled[s], rec.delivered[s]});
    }
    for (Side s : kSides) {
      const bool arrival = sample_arrival(config.lambda[s], streams.arrival);
      state[s] = step(state[s], rec.scheduled[s], rec.delivered[s], arrival);
    }
    out.trace.slots.push_back(std::move(rec));
  }
  out.metrics = compute_metrics(out.trace);
  return out;
}

EpisodeResult run_episode(const SimConfig& config, int run) {
  EpisodeStreams streams = EpisodeStreams::derive(config.seed, run);
  return run_episode(config, streams);
}

const char* to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::kGammaTh:
      return "gamma_th";
    case SweepParameter::kPowerBudget:
      return "power_budget";
    case SweepParameter::kNt:
      return "n_t";
    case SweepParameter::kM:
      return "m";
    case SweepParameter::kEnergyMinDb:
      return "energy_min_db";
  }
  return "?";
}

std::optional<SweepParameter> parse_sweep_parameter(const std::string& text) {
  if (text == "gamma_th" || text == "gamma_th_db") return SweepParameter::kGammaTh;
  if (text == "power_budget") return SweepParameter::kPowerBudget;
  if (text == "n_t") return SweepParameter::kNt;
  if (text == "m") return SweepParameter::kM;
  if (text == "energy_min_db") return SweepParameter::kEnergyMinDb;
  return std::nullopt;
}

void apply_parameter(SimConfig& config, SweepParameter p, double value) {
  auto integral = [&](const char* name) {
    if (!(value >= 1.0) || value != std::floor(value) || value > 1e6)
      throw std::invalid_argument(std::string("sweep: ") + name + " values must be positive integers");
    return static_cast<int>(value);
  };
  switch (p) {
    case SweepParameter::kGammaTh:
      config.gamma_th_db = value;
      break;
    case SweepParameter::kPowerBudget:
      config.power_budget = value;
      break;
    case SweepParameter::kNt:
      config.n_t = integral("n_t");
      break;
    case SweepParameter::kM:
      config.m = integral("m");
      break;
    case SweepParameter::kEnergyMinDb:
      config.energy_min_db = value;
      break;
  }
}

std::vector<SummaryRow> summarize(const std::vector<SweepRow>& rows) {
  std::vector<SummaryRow> out;
  std::vector<std::vector<double>> samples;
  for (const SweepRow& r : rows) {
    std::size_t key = 0;
    while (key < out.size() &&
           !(out[key].value == r.value && out[key].mode == r.mode && out[key].parameter == r.parameter))
      ++key;
    if (key == out.size()) {
      SummaryRow s;
      s.mode = r.mode;
      s.parameter = r.parameter;
      s.value = r.value;
      out.push_back(s);
      samples.emplace_back();
    }
    samples[key].push_back(r.metrics.avg_sum_aoi);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::vector<double>& v = samples[i];
    const double n = static_cast<double>(v.size());
    double sum = 0.0;
    for (double x : v) sum += x;
    out[i].runs = static_cast<int>(v.size());
    out[i].mean_avg_sum_aoi = sum / n;
    if (v.size() > 1) {
      double ss = 0.0;
      for (double x : v) ss += (x - out[i].mean_avg_sum_aoi) * (x - out[i].mean_avg_sum_aoi);
      out[i].stderr_avg_sum_aoi = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
  }
  return out;
}

SweepResult run_sweep(const SimConfig& base, std::optional<SweepParameter> parameter, const std::vector<double>& values,
                      const std::vector<SimMode>& modes, int workers) {
  if (modes.empty()) throw std::invalid_argument("run_sweep: no modes");
  std::vector<double> grid = values;
  if (!parameter) grid = {0.0};
  if (grid.empty()) throw std::invalid_argument("run_sweep: no values");

  struct Job {
    SimConfig config;
    SweepRow row;
  };
  std::vector<Job> jobs;
  for (double v : grid)
    for (SimMode mode : modes) {
      SimConfig c = base;
      if (parameter) apply_parameter(c, *parameter, v);
      c.mode = mode;
      c.validate();
      for (int r = 0; r < base.monte_carlo_runs; ++r) {
        Job j{c, SweepRow{}};
        j.row.mode = mode;
        j.row.parameter = parameter ? to_string(*parameter) : "base";
        j.row.value = v;
        j.row.run = r;
        jobs.push_back(std::move(j));
      }
    }

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        jobs[i].row.metrics = run_episode(jobs[i].config, jobs[i].row.run).metrics;
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next = jobs.size();
      }
    }
  };
  const int n_workers = std::max(1, std::min<int>(workers, static_cast<int>(jobs.size())));
  if (n_workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  SweepResult out;
  for (Job& j : jobs) out.rows.push_back(std::move(j.row));
  out.summary = summarize(out.rows);
  return out;
}

}  // namespace starris
