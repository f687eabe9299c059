#include "starris/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include "starris/conic_problem.hpp"

namespace starris {

using conic::ConicProblem;
using conic::ConicSolution;
using conic::LinearExpr;
using conic::PsdVar;
using conic::ScalarVar;
using conic::SocVar;
using conic::Status;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

const char* to_string(SlotStatus status) {
  switch (status) {
    case SlotStatus::kOptimal:
      return "optimal";
    case SlotStatus::kInfeasible:
      return "infeasible";
    case SlotStatus::kMaxIterations:
      return "max-iterations";
  }
  return "?";
}

void SlotProblem::validate() const {
  const ChannelSet& ch = channels;
  if (ch.m() < 1 || ch.n_t() < 1) throw std::invalid_argument("slot problem: empty channel matrix");
  for (Side s : kSides) {
    if (ch.f[s].size() != ch.m() || ch.u[s].size() != ch.m())
      throw std::invalid_argument("slot problem: user channel length does not match M");
    if (!(ch.sigma2_info[s] > 0.0)) throw std::invalid_argument("slot problem: sigma2_info must be positive");
    if (!(weights[s] >= 0.0) || !std::isfinite(weights[s]))
      throw std::invalid_argument("slot problem: weights must be finite and non-negative");
  }
  if (!(gamma_th > 0.0) || !std::isfinite(gamma_th)) throw std::invalid_argument("slot problem: gamma_th must be positive");
  if (!(energy_min >= 0.0) || !std::isfinite(energy_min))
    throw std::invalid_argument("slot problem: energy_min must be finite and non-negative");
  if (!(power_budget > 0.0) || !std::isfinite(power_budget))
    throw std::invalid_argument("slot problem: power_budget must be positive");
  if (mode != Mode::kES && ch.m() < 2) throw std::invalid_argument("slot problem: switching modes need M >= 2");
}

Beams Beams::zeros(int n_t) {
  Beams b;
  for (Side s : kSides) {
    b.info[s] = VectorXcd::Zero(n_t);
    b.energy[s] = VectorXcd::Zero(n_t);
  }
  return b;
}

double Beams::power() const {
  double p = 0.0;
  for (Side s : kSides) p += info[s].squaredNorm() + energy[s].squaredNorm();
  return p;
}

LiftedForms build_lifted_forms(const ChannelSet& channels, const Beams& beams) {
  LiftedForms out;
  for (Side s : kSides) {
    if (beams.info[s].size() != channels.n_t() || beams.energy[s].size() != channels.n_t())
      throw std::invalid_argument("build_lifted_forms: beam length does not match N_t");
    const VectorXcd p = cascade(channels.f[s], channels.g) * beams.info[s];
    const VectorXcd v = cascade(channels.u[s], channels.g) * beams.energy[s];
    out.info[s] = p * p.adjoint();
    out.energy[s] = v * v.adjoint();
  }
  return out;
}

double penalty_surrogate(double a0, double a) { return a0 * a0 + (1.0 - 2.0 * a0) * a; }

double linearized_quadratic(const MatrixXcd& q, const VectorXcd& w0, const VectorXcd& w) {
  const VectorXcd qw0 = q * w0;
  return 2.0 * qw0.dot(w).real() - w0.dot(qw0).real();
}

PerSide<bool> round_schedule(const PerSide<double>& s, const PerSide<double>& weights,
                             const std::function<bool(const PerSide<bool>&)>& feasible) {
  if (s[Side::kT] + s[Side::kR] > 1.0 + 1e-6) throw ContractError("round_schedule: s_t + s_r exceeds one");
  constexpr double kFloor = 1e-6;
  const double vt = weights[Side::kT] * s[Side::kT];
  const double vr = weights[Side::kR] * s[Side::kR];
  const Side first = vr > vt ? Side::kR : Side::kT;
  for (Side k : {first, other(first)}) {
    if (!(s[k] > kFloor)) continue;
    PerSide<bool> cand{};
    cand[k] = true;
    if (feasible(cand)) return cand;
  }
  return PerSide<bool>{};
}

Beams matched_beams(const SlotProblem& slot, const TarcProfile& profile, const PerSide<bool>& info_use,
                    const PerSide<bool>& energy_use) {
  const ChannelSet& ch = slot.channels;
  Beams b = Beams::zeros(ch.n_t());
  int count = 0;
  for (Side s : kSides) count += static_cast<int>(info_use[s]) + static_cast<int>(energy_use[s]);
  if (count == 0) return b;
  const double amp = std::sqrt(slot.power_budget / count);
  auto matched = [&](const VectorXcd& h, Side s) {
    const VectorXcd c = coefficients(profile, s);
    const VectorXcd a = ch.g.adjoint() * (c.conjugate().asDiagonal() * h);
    const double n = a.norm();
    VectorXcd w = VectorXcd::Zero(ch.n_t());
    if (n > 0.0)
      w = a * (amp / n);
    else
      w(0) = amp;
    return w;
  };
  for (Side s : kSides) {
    if (info_use[s]) b.info[s] = matched(ch.f[s], s);
    if (energy_use[s]) b.energy[s] = matched(ch.u[s], s);
  }
  return b;
}

namespace {

using Clock = std::chrono::steady_clock;

bool active(const SlotProblem& slot, Side k) { return slot.availability[k] && slot.weights[k] > 0.0; }

double max_weight(const SlotProblem& slot) {
  double w = 0.0;
  for (Side k : kSides)
    if (active(slot, k)) w = std::max(w, slot.weights[k]);
  return w;
}

double weighted_sum(const SlotProblem& slot, const PerSide<double>& s) {
  double v = 0.0;
  for (Side k : kSides)
    if (active(slot, k)) v += slot.weights[k] * s[k];
  return v;
}

void cap_power(Beams& b, double budget) {
  const double p = b.power();
  if (p > budget) {
    const double f = std::sqrt(budget / p);
    for (Side s : kSides) {
      b.info[s] *= f;
      b.energy[s] *= f;
    }
  }
}

enum class Goal { kWeighted, kMinSlack };

struct SurfaceSolve {
  TarcResult r;
  double slack = 0.0;  // min normalized slack, min-slack goal only
};

// Surface subproblem with either free amplitudes (optionally penalized
// towards binary values around `anchor`) or a fixed partition.
struct SurfaceSpec {
  const VectorXd* fixed_t = nullptr;
  const PerSide<VectorXd>* anchor = nullptr;
  double mu = 0.0;
};

MatrixXcd restrict_to(const MatrixXcd& a, const std::vector<int>& idx) {
  const int n = static_cast<int>(idx.size());
  MatrixXcd out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = a(idx[i], idx[j]);
  return out;
}

SurfaceSolve solve_surface(const SlotProblem& slot, const LiftedForms& forms, const SurfaceSpec& spec, Goal goal,
                           const PerSide<double>& targets, const conic::Settings& solver) {
  const ChannelSet& ch = slot.channels;
  const int m = ch.m();
  const double e_min = slot.energy_min;
  const double wmax = max_weight(slot);

  SurfaceSolve out;
  PerSide<std::vector<int>> index;
  for (Side k : kSides)
    for (int i = 0; i < m; ++i) {
      const bool on = spec.fixed_t == nullptr || (k == Side::kT ? (*spec.fixed_t)(i) > 0.5 : (*spec.fixed_t)(i) <= 0.5);
      if (on) index[k].push_back(i);
    }

  PerSide<MatrixXcd> info_coef, energy_coef;
  for (Side k : kSides) {
    info_coef[k] = restrict_to(forms.info[k], index[k]) / (ch.sigma2_info[k] * slot.gamma_th);
    if (e_min > 0.0) energy_coef[k] = restrict_to(forms.energy[k], index[k]) / e_min;
  }

  auto finish_trivial = [&]() {
    out.r.status = Status::kOptimal;
    for (Side k : kSides) {
      VectorXd a(m);
      for (int i = 0; i < m; ++i)
        a(i) = spec.fixed_t == nullptr ? 0.5 : (k == Side::kT ? (*spec.fixed_t)(i) : 1.0 - (*spec.fixed_t)(i));
      out.r.alpha[k] = a;
      out.r.lifted.phi[k] = a.cast<Complex>().asDiagonal();
    }
    out.slack = std::numeric_limits<double>::infinity();
  };

  if (e_min > 0.0)
    for (Side k : kSides)
      if (index[k].empty()) {
        out.r.status = Status::kInfeasible;
        return out;
      }

  ConicProblem p;
  PerSide<PsdVar> phi;
  for (Side k : kSides)
    if (!index[k].empty()) phi[k] = p.add_psd(static_cast<int>(index[k].size()));

  if (spec.fixed_t != nullptr) {
    for (Side k : kSides)
      for (int i = 0; i < phi[k].order; ++i) p.add_equality(LinearExpr().add_diagonal(phi[k], i, 1.0), 1.0);
  } else {
    for (int i = 0; i < m; ++i)
      p.add_equality(LinearExpr().add_diagonal(phi[Side::kT], i, 1.0).add_diagonal(phi[Side::kR], i, 1.0), 1.0);
  }

  LinearExpr objective;
  PerSide<ScalarVar> s;
  PerSide<bool> s_used{};
  ScalarVar tau;
  if (goal == Goal::kWeighted) {
    for (Side k : kSides) {
      s_used[k] = active(slot, k) && !index[k].empty();
      if (!s_used[k]) continue;
      s[k] = p.add_scalar();
      p.add_less_equal(LinearExpr().add(s[k], 1.0), 1.0);
      p.add_greater_equal(LinearExpr().add(phi[k], info_coef[k]).add(s[k], -1.0), 0.0);
      objective.add(s[k], slot.weights[k] / wmax);
    }
    if (s_used[Side::kT] && s_used[Side::kR])
      p.add_less_equal(LinearExpr().add(s[Side::kT], 1.0).add(s[Side::kR], 1.0), 1.0);
    if (e_min > 0.0)
      for (Side k : kSides) p.add_greater_equal(LinearExpr().add(phi[k], energy_coef[k]), 1.0);
  } else {
    tau = p.add_scalar();  // 1 + min slack
    int constrained = 0;
    for (Side k : kSides) {
      if (!(targets[k] > 0.0)) continue;
      LinearExpr e;
      if (!index[k].empty()) e.add(phi[k], info_coef[k]);
      p.add_greater_equal(e.add(tau, -targets[k]), 0.0);
      ++constrained;
    }
    if (e_min > 0.0)
      for (Side k : kSides) {
        p.add_greater_equal(LinearExpr().add(phi[k], energy_coef[k]).add(tau, -1.0), 0.0);
        ++constrained;
      }
    if (constrained == 0) {
      finish_trivial();
      return out;
    }
    objective.add(tau, 1.0);
  }

  if (spec.anchor != nullptr && spec.fixed_t == nullptr && spec.mu > 0.0)
    for (Side k : kSides)
      for (int i = 0; i < m; ++i) objective.add_diagonal(phi[k], i, -spec.mu * (1.0 - 2.0 * (*spec.anchor)[k](i)));

  p.maximize(objective);
  const ConicSolution sol = p.solve(solver);
  out.r.status = sol.status;
  if (!sol.optimal()) return out;

  for (Side k : kSides) {
    MatrixXcd full = MatrixXcd::Zero(m, m);
    if (!index[k].empty()) {
      const MatrixXcd& v = sol.value(phi[k]);
      const MatrixXcd h = 0.5 * (v + v.adjoint());
      for (std::size_t i = 0; i < index[k].size(); ++i)
        for (std::size_t j = 0; j < index[k].size(); ++j) full(index[k][i], index[k][j]) = h(i, j);
    }
    for (int i = 0; i < m; ++i) full(i, i) = Complex(full(i, i).real(), 0.0);
    out.r.alpha[k] = full.diagonal().real().cwiseMax(0.0).cwiseMin(1.0);
    out.r.lifted.phi[k] = std::move(full);
  }
  if (spec.fixed_t != nullptr) {
    out.r.alpha[Side::kT] = *spec.fixed_t;
    out.r.alpha[Side::kR] = VectorXd::Ones(m) - *spec.fixed_t;
  }
  if (goal == Goal::kWeighted) {
    for (Side k : kSides) out.r.s[k] = s_used[k] ? std::clamp(sol.value(s[k]), 0.0, 1.0) : 0.0;
    out.r.objective = weighted_sum(slot, out.r.s);
  } else {
    out.slack = sol.value(tau) - 1.0;
  }
  return out;
}

double goal_value(const SurfaceSolve& r, Goal goal) { return goal == Goal::kWeighted ? r.r.objective : r.slack; }

// Penalty loop plus fixed-partition candidates for the switching mode.
SurfaceSolve solve_surface_ms(const SlotProblem& slot, const LiftedForms& forms, Goal goal,
                              const PerSide<double>& targets, double mu_normalized, int max_penalty_iters,
                              const VectorXd* previous, const conic::Settings& solver) {
  const int m = slot.channels.m();
  PerSide<VectorXd> anchor;
  for (Side k : kSides) anchor[k] = VectorXd::Constant(m, 0.5);

  std::optional<SurfaceSolve> best;
  bool binary = false;
  int used = 0;
  std::optional<VectorXd> penalty_partition;
  double mu = mu_normalized;
  std::optional<SurfaceSolve> last;
  for (int j = 1; j <= max_penalty_iters; ++j) {
    SurfaceSpec spec;
    spec.anchor = &anchor;
    spec.mu = mu;
    SurfaceSolve r = solve_surface(slot, forms, spec, goal, targets, solver);
    if (r.r.status != Status::kOptimal) break;
    used = j;
    last = std::move(r);
    if (binarity_gap(last->r.alpha[Side::kT]) <= 1e-3 && binarity_gap(last->r.alpha[Side::kR]) <= 1e-3) {
      binary = true;
      break;
    }
    anchor = last->r.alpha;
    mu *= 2.0;
  }

  auto consider = [&](SurfaceSolve&& r) {
    if (r.r.status != Status::kOptimal) return;
    if (!best || goal_value(r, goal) > goal_value(*best, goal)) best = std::move(r);
  };
  auto solve_fixed = [&](const VectorXd& alpha_t) {
    SurfaceSpec spec;
    spec.fixed_t = &alpha_t;
    return solve_surface(slot, forms, spec, goal, targets, solver);
  };

  std::vector<VectorXd> tried;
  auto fresh = [&](const VectorXd& a) {
    for (const VectorXd& t : tried)
      if (t == a) return false;
    tried.push_back(a);
    return true;
  };
  if (last) {
    VectorXd a(m);
    for (int i = 0; i < m; ++i) a(i) = last->r.alpha[Side::kT](i) > 0.5 ? 1.0 : 0.0;
    if (fresh(a)) consider(solve_fixed(a));
  }
  if (previous != nullptr && fresh(*previous)) consider(solve_fixed(*previous));
  const VectorXd conventional = make_conventional(m).amplitude[Side::kT];
  if (fresh(conventional)) consider(solve_fixed(conventional));

  SurfaceSolve out;
  if (best) out = std::move(*best);
  else out.r.status = Status::kInfeasible;
  out.r.binary = binary;
  out.r.penalty_iterations = used;
  return out;
}

double ms_penalty_scale(const SlotProblem& slot, Goal goal) {
  if (goal == Goal::kMinSlack) return 2e3;
  const double w = max_weight(slot);
  return w > 0.0 ? 1e3 * (w + 1.0) / w : 1e3;
}

class SlotSolver {
 public:
  SlotSolver(const SlotProblem& slot, const OptimizerSettings& settings, Rng& rng)
      : slot_(slot), settings_(settings), rng_(rng), start_(Clock::now()) {
    if (slot.mode == Mode::kConventional) conventional_ = make_conventional(slot.channels.m()).amplitude[Side::kT];
  }

  SlotDecision run();

 private:
  SurfaceSolve surface(const Beams& beams, Goal goal, const PerSide<double>& targets, const VectorXd* previous) const {
    const LiftedForms forms = build_lifted_forms(slot_.channels, beams);
    switch (slot_.mode) {
      case Mode::kES:
        return solve_surface(slot_, forms, SurfaceSpec{}, goal, targets, settings_.solver);
      case Mode::kConventional: {
        SurfaceSpec spec;
        spec.fixed_t = &conventional_;
        return solve_surface(slot_, forms, spec, goal, targets, settings_.solver);
      }
      case Mode::kMS:
        return solve_surface_ms(slot_, forms, goal, targets, ms_penalty_scale(slot_, goal),
                                settings_.max_penalty_iters, previous, settings_.solver);
    }
    return {};
  }

  bool expired() const {
    return std::chrono::duration<double>(Clock::now() - start_).count() > settings_.time_budget_seconds;
  }

  struct SlackState {
    bool ok = false;
    double slack = -std::numeric_limits<double>::infinity();
    LiftedProfile lifted;
    PerSide<VectorXd> alpha;
    Beams beams;
    bool binary = true;
  };

  // Alternates the two subproblems on the max-min slack of the energy
  // constraints (and of the info constraints in `targets`).
  SlackState maximize_slack(Beams beams, const PerSide<double>& targets, bool stop_when_feasible) const {
    SlackState st;
    std::optional<VectorXd> partition;
    double prev = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < settings_.max_ao_iters; ++it) {
      const SurfaceSolve sf = surface(beams, Goal::kMinSlack, targets, partition ? &*partition : nullptr);
      if (sf.r.status != Status::kOptimal) break;
      if (slot_.mode == Mode::kMS) partition = sf.r.alpha[Side::kT];
      st.binary = st.binary && sf.r.binary;
      const ScaResult sca = solve_beamforming_sca(slot_, sf.r.lifted, targets, beams, settings_, true);
      if (sca.status != Status::kOptimal) break;
      beams = sca.beams;
      const double slack = sca.min_slack_trace.empty() ? std::numeric_limits<double>::infinity()
                                                       : sca.min_slack_trace.back();
      st.lifted = sf.r.lifted;
      st.alpha = sf.r.alpha;
      st.beams = beams;
      st.slack = slack;
      st.ok = slack >= 0.0;
      if (stop_when_feasible && st.ok) break;
      if (!std::isfinite(slack) || std::abs(slack - prev) < settings_.tolerance * std::max(1.0, std::abs(slack))) break;
      prev = slack;
      if (expired()) break;
    }
    return st;
  }

  struct Finalized {
    PerSide<bool> schedule{};
    TarcProfile tarc;
    Beams beams;
  };

  // Rank-one recovery, beam polishing and exact verification for one
  // candidate schedule.
  bool finalize(const LiftedProfile& lifted, const PerSide<VectorXd>& alpha, const Beams& relaxed_beams,
                const PerSide<bool>& schedule, Finalized& out) const {
    const ChannelSet& ch = slot_.channels;
    const double e_min = slot_.energy_min;
    const bool energy = e_min > 0.0;

    auto min_slack = [&](const TarcProfile& p, const Beams& b) {
      double v = std::numeric_limits<double>::infinity();
      for (Side k : kSides) {
        const VectorXcd c = coefficients(p, k);
        if (schedule[k]) v = std::min(v, snr(ch.f[k], c, ch.g, b.info[k], ch.sigma2_info[k]) / slot_.gamma_th - 1.0);
        if (energy) v = std::min(v, harvested_energy(ch.u[k], c, ch.g, b.energy[k]) / e_min - 1.0);
      }
      return std::isfinite(v) ? v : 0.0;
    };

    Beams start = relaxed_beams;
    for (Side k : kSides) {
      if (!schedule[k]) start.info[k].setZero();
      if (!energy) start.energy[k].setZero();
    }
    PerSide<VectorXd> binary_alpha;
    for (Side k : kSides) binary_alpha[k] = alpha[k].array().round().matrix();
    const PerSide<VectorXd>* fixed = slot_.mode == Mode::kES ? nullptr : &binary_alpha;
    const TarcProfile profile = extract_profile(
        lifted, slot_.mode, fixed, [&](const TarcProfile& p) { return min_slack(p, start); },
        settings_.randomizations, rng_);

    out.schedule = schedule;
    out.tarc = profile;
    if (!energy && !schedule[Side::kT] && !schedule[Side::kR]) {
      out.beams = Beams::zeros(ch.n_t());
      return true;
    }

    PerSide<bool> need_info{}, need_energy{};
    for (Side k : kSides) {
      need_info[k] = schedule[k] && start.info[k].norm() < 1e-9;
      need_energy[k] = energy && start.energy[k].norm() < 1e-9;
    }
    const Beams fill = matched_beams(slot_, profile, need_info, need_energy);
    for (Side k : kSides) {
      if (need_info[k]) start.info[k] = fill.info[k];
      if (need_energy[k]) start.energy[k] = fill.energy[k];
    }
    cap_power(start, slot_.power_budget);

    LiftedProfile rank_one;
    for (Side k : kSides) rank_one.phi[k] = lift(to_vector(profile, k));
    PerSide<double> s{};
    for (Side k : kSides) s[k] = schedule[k] ? 1.0 : 0.0;
    const ScaResult sca = solve_beamforming_sca(slot_, rank_one, s, start, settings_, true);
    if (sca.status != Status::kOptimal) return false;
    Beams b = sca.beams;
    for (Side k : kSides) {
      if (!schedule[k]) b.info[k].setZero();
      if (!energy) b.energy[k].setZero();
    }
    cap_power(b, slot_.power_budget);

    for (Side k : kSides) {
      const VectorXcd c = coefficients(profile, k);
      if (schedule[k] && !(snr(ch.f[k], c, ch.g, b.info[k], ch.sigma2_info[k]) >= slot_.gamma_th)) return false;
      if (energy && !(harvested_energy(ch.u[k], c, ch.g, b.energy[k]) >= e_min)) return false;
    }
    out.beams = std::move(b);
    return true;
  }

  SlotDecision infeasible() const {
    SlotDecision d;
    d.beams = Beams::zeros(slot_.channels.n_t());
    d.tarc = default_profile();
    d.status = SlotStatus::kInfeasible;
    return d;
  }

  TarcProfile default_profile() const {
    const int m = slot_.channels.m();
    if (slot_.mode == Mode::kES) return make_uniform_split(m);
    TarcProfile p = make_conventional(m);
    p.mode = slot_.mode;
    return p;
  }

  const SlotProblem& slot_;
  const OptimizerSettings& settings_;
  Rng& rng_;
  Clock::time_point start_;
  VectorXd conventional_;
};

SlotDecision SlotSolver::run() {
  const int m = slot_.channels.m();
  const bool energy = slot_.energy_min > 0.0;
  const double wmax = max_weight(slot_);
  PerSide<bool> info_use{}, energy_use{};
  for (Side k : kSides) {
    info_use[k] = active(slot_, k);
    energy_use[k] = energy;
  }
  Beams beams = matched_beams(slot_, make_uniform_split(m), info_use, energy_use);
  const PerSide<double> no_targets{};

  if (wmax <= 0.0) {
    SlotDecision d = infeasible();
    d.ao_iterations = 1;
    d.ao_converged = true;
    d.objective_trace = {0.0};
    if (!energy) {
      d.status = SlotStatus::kOptimal;
      return d;
    }
    const SlackState st = maximize_slack(beams, no_targets, false);
    d.binary = st.binary;
    Finalized f;
    if (st.alpha[Side::kT].size() == m && finalize(st.lifted, st.alpha, st.beams, PerSide<bool>{}, f)) {
      d.tarc = f.tarc;
      d.beams = f.beams;
      d.status = expired() ? SlotStatus::kMaxIterations : SlotStatus::kOptimal;
    }
    return d;
  }

  SurfaceSolve p4 = surface(beams, Goal::kWeighted, no_targets, nullptr);
  if (p4.r.status != Status::kOptimal) {
    const SlackState st = maximize_slack(beams, no_targets, true);
    if (st.ok) {
      beams = st.beams;
      p4 = surface(beams, Goal::kWeighted, no_targets, nullptr);
    }
    if (p4.r.status != Status::kOptimal) {
      SlotDecision d = infeasible();
      d.ao_iterations = 1;
      return d;
    }
  }

  SlotDecision d;
  d.objective_trace.push_back(p4.r.objective);
  d.binary = p4.r.binary;
  LiftedProfile lifted = p4.r.lifted;
  PerSide<VectorXd> alpha = p4.r.alpha;
  PerSide<double> s = p4.r.s;
  bool converged = false;
  bool timed_out = false;
  double prev = 0.0;
  int it = 0;
  for (it = 1; it <= settings_.max_ao_iters; ++it) {
    const ScaResult p5 = solve_beamforming_sca(slot_, lifted, s, beams, settings_, false);
    if (p5.status != Status::kOptimal || p5.objective < d.objective_trace.back()) {
      converged = true;
      break;
    }
    beams = p5.beams;
    s = p5.s;
    d.objective_trace.push_back(p5.objective);
    if (p5.objective / wmax >= 1.0 - 1e-9 ||
        (it >= 2 && std::abs(p5.objective - prev) / wmax < settings_.tolerance)) {
      converged = true;
      break;
    }
    prev = p5.objective;
    if (expired()) {
      timed_out = true;
      break;
    }
    if (it == settings_.max_ao_iters) break;
    const VectorXd* previous = slot_.mode == Mode::kMS ? &alpha[Side::kT] : nullptr;
    SurfaceSolve next = surface(beams, Goal::kWeighted, no_targets, previous);
    if (next.r.status != Status::kOptimal || next.r.objective < d.objective_trace.back()) {
      converged = true;
      break;
    }
    p4 = std::move(next);
    d.binary = d.binary && p4.r.binary;
    d.objective_trace.push_back(p4.r.objective);
    lifted = p4.r.lifted;
    alpha = p4.r.alpha;
    s = p4.r.s;
  }
  d.ao_iterations = std::min(it, settings_.max_ao_iters);
  d.ao_converged = converged;
  d.relaxed_schedule = s;

  Finalized chosen;
  bool found = false;
  const PerSide<bool> rounded = round_schedule(s, slot_.weights, [&](const PerSide<bool>& cand) {
    Finalized f;
    if (!finalize(lifted, alpha, beams, cand, f)) return false;
    chosen = std::move(f);
    found = true;
    return true;
  });
  if (!found) found = finalize(lifted, alpha, beams, rounded, chosen);
  if (!found) {
    SlotDecision bad = infeasible();
    bad.ao_iterations = d.ao_iterations;
    bad.objective_trace = d.objective_trace;
    bad.relaxed_schedule = s;
    bad.binary = d.binary;
    return bad;
  }
  d.schedule = chosen.schedule;
  d.beams = chosen.beams;
  d.tarc = chosen.tarc;
  d.objective = 0.0;
  for (Side k : kSides)
    if (d.schedule[k]) d.objective += slot_.weights[k];
  d.status = (converged && !timed_out) ? SlotStatus::kOptimal : SlotStatus::kMaxIterations;
  return d;
}

}  // namespace

TarcResult solve_tarc_scheduling_es(const SlotProblem& slot, const Beams& beams, const OptimizerSettings& settings) {
  slot.validate();
  const LiftedForms forms = build_lifted_forms(slot.channels, beams);
  SurfaceSpec spec;
  VectorXd conv;
  if (slot.mode == Mode::kConventional) {
    conv = make_conventional(slot.channels.m()).amplitude[Side::kT];
    spec.fixed_t = &conv;
  }
  return solve_surface(slot, forms, spec, Goal::kWeighted, PerSide<double>{}, settings.solver).r;
}

TarcResult solve_tarc_scheduling_fixed(const SlotProblem& slot, const Beams& beams, const VectorXd& alpha_t,
                                       const OptimizerSettings& settings) {
  slot.validate();
  if (alpha_t.size() != slot.channels.m()) throw std::invalid_argument("solve_tarc_scheduling_fixed: partition length");
  const LiftedForms forms = build_lifted_forms(slot.channels, beams);
  SurfaceSpec spec;
  spec.fixed_t = &alpha_t;
  return solve_surface(slot, forms, spec, Goal::kWeighted, PerSide<double>{}, settings.solver).r;
}

TarcResult solve_tarc_scheduling_ms(const SlotProblem& slot, const Beams& beams, double mu, int max_penalty_iters,
                                    const OptimizerSettings& settings, const VectorXd* previous) {
  slot.validate();
  if (!(mu > 0.0)) throw std::invalid_argument("solve_tarc_scheduling_ms: mu must be positive");
  if (max_penalty_iters < 1) throw std::invalid_argument("solve_tarc_scheduling_ms: need at least one iteration");
  const LiftedForms forms = build_lifted_forms(slot.channels, beams);
  const double w = max_weight(slot);
  const double mu_normalized = w > 0.0 ? mu / w : mu;
  return solve_surface_ms(slot, forms, Goal::kWeighted, PerSide<double>{}, mu_normalized, max_penalty_iters, previous,
                          settings.solver)
      .r;
}

ScaResult solve_beamforming_sca(const SlotProblem& slot, const LiftedProfile& phi, const PerSide<double>& s_in,
                                const Beams& start, const OptimizerSettings& settings, bool fixed_schedule) {
  const ChannelSet& ch = slot.channels;
  const int n_t = ch.n_t();
  const double e_min = slot.energy_min;
  const bool energy = e_min > 0.0;
  const double wmax = max_weight(slot);
  const double root_budget = std::sqrt(slot.power_budget);
  for (Side k : kSides)
    if (phi.phi[k].rows() != ch.m() || phi.phi[k].cols() != ch.m())
      throw std::invalid_argument("solve_beamforming_sca: lifted profile does not match M");

  PerSide<MatrixXcd> qi, qe;
  for (Side k : kSides) {
    const MatrixXcd b = cascade(ch.f[k], ch.g);
    qi[k] = b.adjoint() * phi.phi[k] * b / (ch.sigma2_info[k] * slot.gamma_th);
    qi[k] = 0.5 * (qi[k] + qi[k].adjoint()).eval();
    if (energy) {
      const MatrixXcd be = cascade(ch.u[k], ch.g);
      qe[k] = be.adjoint() * phi.phi[k] * be / e_min;
      qe[k] = 0.5 * (qe[k] + qe[k].adjoint()).eval();
    }
  }

  struct Block {
    bool info;
    Side side;
  };
  std::vector<Block> blocks;
  PerSide<double> s{};
  for (Side k : kSides) {
    const bool use = fixed_schedule ? s_in[k] > 0.0 : active(slot, k);
    s[k] = use ? std::clamp(s_in[k], 0.0, 1.0) : 0.0;
    if (use) blocks.push_back({true, k});
  }
  if (energy)
    for (Side k : kSides) blocks.push_back({false, k});

  ScaResult out;
  out.beams = Beams::zeros(n_t);
  out.s = s;
  if (blocks.empty()) {
    out.status = Status::kOptimal;
    return out;
  }

  Beams cur = start;
  for (Side k : kSides) {
    if (cur.info[k].size() != n_t || cur.energy[k].size() != n_t)
      throw std::invalid_argument("solve_beamforming_sca: start beam length does not match N_t");
  }
  {
    Beams trimmed = Beams::zeros(n_t);
    for (const Block& bl : blocks)
      (bl.info ? trimmed.info[bl.side] : trimmed.energy[bl.side]) = (bl.info ? cur.info : cur.energy)[bl.side];
    cur = trimmed;
  }
  cap_power(cur, slot.power_budget);

  const int dim = static_cast<int>(blocks.size()) * n_t;
  auto pack = [&](const Beams& b) {
    VectorXcd x(dim);
    for (std::size_t i = 0; i < blocks.size(); ++i)
      x.segment(static_cast<Eigen::Index>(i) * n_t, n_t) = blocks[i].info ? b.info[blocks[i].side] : b.energy[blocks[i].side];
    return x;
  };
  auto unpack = [&](const VectorXcd& x) {
    Beams b = Beams::zeros(n_t);
    for (std::size_t i = 0; i < blocks.size(); ++i)
      (blocks[i].info ? b.info[blocks[i].side] : b.energy[blocks[i].side]) =
          x.segment(static_cast<Eigen::Index>(i) * n_t, n_t);
    return b;
  };
  auto form_of = [&](const Block& bl) -> const MatrixXcd& { return bl.info ? qi[bl.side] : qe[bl.side]; };
  // Coefficient of Re(c^H x) and constant of the tangent at x0 for one block.
  auto tangent = [&](std::size_t i, const VectorXcd& x0, VectorXcd& coef, double& c0) {
    const VectorXcd w0 = x0.segment(static_cast<Eigen::Index>(i) * n_t, n_t);
    const VectorXcd qw0 = form_of(blocks[i]) * w0;
    coef = VectorXcd::Zero(dim);
    coef.segment(static_cast<Eigen::Index>(i) * n_t, n_t) = 2.0 * qw0;
    c0 = w0.dot(qw0).real();
  };
  auto true_min_slack = [&](const Beams& b) {
    double v = std::numeric_limits<double>::infinity();
    for (const Block& bl : blocks) {
      if (bl.info) {
        if (s[bl.side] > 0.0)
          v = std::min(v, b.info[bl.side].dot(qi[bl.side] * b.info[bl.side]).real() / s[bl.side] - 1.0);
      } else {
        v = std::min(v, b.energy[bl.side].dot(qe[bl.side] * b.energy[bl.side]).real() - 1.0);
      }
    }
    return v;
  };

  bool any_info = false;
  for (const Block& bl : blocks) any_info = any_info || bl.info;

  for (int it = 1; it <= settings.max_sca_iters; ++it) {
    const VectorXcd x0 = pack(cur);
    const PerSide<double> s_prev = s;

    if (!fixed_schedule && any_info) {
      ConicProblem pa;
      const SocVar xb = pa.add_soc(dim);
      pa.add_equality(LinearExpr().add_t(xb, 1.0), root_budget);
      PerSide<ScalarVar> sv;
      PerSide<bool> used{};
      for (std::size_t i = 0; i < blocks.size(); ++i) {
        VectorXcd coef;
        double c0 = 0.0;
        tangent(i, x0, coef, c0);
        if (blocks[i].info) {
          const Side k = blocks[i].side;
          used[k] = true;
          sv[k] = pa.add_scalar();
          pa.add_less_equal(LinearExpr().add(sv[k], 1.0), 1.0);
          pa.add_greater_equal(LinearExpr().add_x(xb, coef).add(sv[k], -1.0), c0);
        } else {
          pa.add_greater_equal(LinearExpr().add_x(xb, coef), 1.0 + c0);
        }
      }
      LinearExpr obj;
      for (Side k : kSides)
        if (used[k]) obj.add(sv[k], slot.weights[k] / wmax);
      if (used[Side::kT] && used[Side::kR])
        pa.add_less_equal(LinearExpr().add(sv[Side::kT], 1.0).add(sv[Side::kR], 1.0), 1.0);
      pa.maximize(obj);
      const ConicSolution sol = pa.solve(settings.solver);
      if (!sol.optimal()) {
        if (it == 1) out.status = sol.status;
        break;
      }
      for (Side k : kSides) s[k] = used[k] ? std::clamp(sol.value(sv[k]), 0.0, 1.0) : 0.0;
    }

    ConicProblem pb;
    const SocVar xb = pb.add_soc(dim);
    pb.add_equality(LinearExpr().add_t(xb, 1.0), root_budget);
    const ScalarVar tau = pb.add_scalar();
    int constrained = 0;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const double target = blocks[i].info ? s[blocks[i].side] : 1.0;
      if (!(target > 0.0)) continue;
      VectorXcd coef;
      double c0 = 0.0;
      tangent(i, x0, coef, c0);
      pb.add_greater_equal(LinearExpr().add_x(xb, coef).add(tau, -target), c0);
      ++constrained;
    }
    Beams next = Beams::zeros(n_t);
    if (constrained > 0) {
      pb.maximize(LinearExpr().add(tau, 1.0));
      const ConicSolution sol = pb.solve(settings.solver);
      if (!sol.optimal()) {
        if (it == 1) out.status = sol.status;
        s = s_prev;
        break;
      }
      next = unpack(sol.x(xb));
      for (Side k : kSides)
        if (!(s[k] > 0.0)) next.info[k].setZero();
    }
    cur = next;
    out.status = Status::kOptimal;
    out.iterations = it;
    out.min_slack_trace.push_back(true_min_slack(cur));

    const double dx = (pack(cur) - x0).norm() / root_budget;
    const double ds = std::max(std::abs(s[Side::kT] - s_prev[Side::kT]), std::abs(s[Side::kR] - s_prev[Side::kR]));
    if (dx < settings.tolerance && ds < settings.tolerance) break;
  }

  out.beams = cur;
  out.s = s;
  out.objective = weighted_sum(slot, s);
  return out;
}

SlotDecision alternating_optimize(const SlotProblem& slot, const OptimizerSettings& settings, Rng& rng) {
  slot.validate();
  SlotSolver solver(slot, settings, rng);
  return solver.run();
}

}  // namespace starris
