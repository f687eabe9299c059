#pragma once

// Per-slot joint scheduling, surface configuration and beamforming.
//
// The slot problem alternates two convex subproblems. The first fixes the
// beams and optimizes the relaxed schedule together with the lifted surface
// matrices (a complex SDP). The second fixes the surface and optimizes the
// relaxed schedule and the beams through successive convex approximation of
// the quadratic SNR and energy constraints (a sequence of SOCPs). After the
// alternation, a rank-one surface profile is recovered, the schedule is
// rounded and every original constraint is re-verified.
//
// Complexity per slot is O(T_AO T_S M^3.5 log(1/eps)), dominated by the SDP.

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "starris/channel.hpp"
#include "starris/conic_solver.hpp"
#include "starris/star_ris.hpp"

namespace starris {

enum class SlotStatus { kOptimal, kInfeasible, kMaxIterations };

const char* to_string(SlotStatus status);

struct SlotProblem {
  ChannelSet channels;
  PerSide<double> weights{};        // (A - z) b
  PerSide<bool> availability{};     // b
  double gamma_th = 1.0;            // linear
  double energy_min = 0.0;          // linear
  double power_budget = 1.0;
  Mode mode = Mode::kES;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct Beams {
  PerSide<Eigen::VectorXcd> info;    // omega
  PerSide<Eigen::VectorXcd> energy;  // vartheta

  static Beams zeros(int n_t);
  double power() const;
};

struct LiftedForms {
  PerSide<Eigen::MatrixXcd> info;    // P_I^k = p p^H, p = diag(f^H) G omega
  PerSide<Eigen::MatrixXcd> energy;  // V_E^k = v v^H, v = diag(u^H) G vartheta
};

LiftedForms build_lifted_forms(const ChannelSet& channels, const Beams& beams);

struct OptimizerSettings {
  int max_ao_iters = 20;
  int max_sca_iters = 30;
  int max_penalty_iters = 10;
  double tolerance = 1e-3;
  int randomizations = 50;
  double time_budget_seconds = 10.0;
  conic::Settings solver = default_solver_settings();

  static conic::Settings default_solver_settings() {
    conic::Settings s;
    s.feasibility_tol = 1e-8;
    s.gap_abs_tol = 1e-7;
    s.gap_rel_tol = 1e-7;
    s.infeasibility_tol = 1e-8;
    return s;
  }
};

// Relaxed output of the surface / scheduling subproblem.
struct TarcResult {
  conic::Status status = conic::Status::kNumericalFailure;
  PerSide<double> s{};
  LiftedProfile lifted;
  PerSide<Eigen::VectorXd> alpha;
  double objective = 0.0;  // sum_k weight_k s_k
  // Switching mode only.
  bool binary = true;
  int penalty_iterations = 0;
};

// Maximizes sum_k weight_k s_k over the relaxed schedule and the lifted
// surface with free amplitudes. A CONVENTIONAL slot is solved with its fixed
// element partition instead.
TarcResult solve_tarc_scheduling_es(const SlotProblem& slot, const Beams& beams, const OptimizerSettings& settings = {});

// Same problem with the partition alpha_t[m] in {0, 1} fixed by `alpha_t`.
TarcResult solve_tarc_scheduling_fixed(const SlotProblem& slot, const Beams& beams, const Eigen::VectorXd& alpha_t,
                                       const OptimizerSettings& settings = {});

// Switching mode. The penalty loop starts at alpha = 1/2 with constant mu
// (in weight units), doubles it every round and stops once every amplitude is
// within 1e-3 of {0, 1}. The rounded partition is then re-solved with fixed
// amplitudes. The conventional partition and `previous` (when given) are
// solved as further candidates and the best one is returned; `binary` reports
// whether the penalty loop itself reached a binary point.
TarcResult solve_tarc_scheduling_ms(const SlotProblem& slot, const Beams& beams, double mu, int max_penalty_iters,
                                    const OptimizerSettings& settings = {},
                                    const Eigen::VectorXd* previous = nullptr);

// g(a0, a) = a0^2 + (1 - 2 a0) a, i.e. a minus the tangent of a^2 at a0.
// g(a0, a) - (a - a^2) = (a - a0)^2 >= 0.
double penalty_surrogate(double a0, double a);

// 2 Re(w0^H Q w) - w0^H Q w0, the tangent of w^H Q w at w0.
double linearized_quadratic(const Eigen::MatrixXcd& q, const Eigen::VectorXcd& w0, const Eigen::VectorXcd& w);

struct ScaResult {
  conic::Status status = conic::Status::kNumericalFailure;
  PerSide<double> s{};
  Beams beams;
  double objective = 0.0;  // sum_k weight_k s_k
  int iterations = 0;
  // True min normalized slack of the targeted constraints after each
  // iteration, evaluated on the quadratic forms of the fixed surface.
  std::vector<double> min_slack_trace;
};

// Beamforming subproblem for a fixed lifted surface. Each iteration
// linearizes the quadratic constraints at the current beams, re-optimizes the
// relaxed schedule (unless `fixed_schedule`), then fixes the schedule and
// maximizes the minimum normalized slack under the power budget.
ScaResult solve_beamforming_sca(const SlotProblem& slot, const LiftedProfile& phi, const PerSide<double>& s,
                                const Beams& start, const OptimizerSettings& settings = {},
                                bool fixed_schedule = false);

struct SlotDecision {
  PerSide<bool> schedule{};
  Beams beams;
  TarcProfile tarc;
  SlotStatus status = SlotStatus::kInfeasible;
  double objective = 0.0;  // sum_k weight_k schedule_k
  // Weighted alternation rounds; slots without a schedulable stream count one.
  int ao_iterations = 0;
  PerSide<double> relaxed_schedule{};
  // Relaxed objective after each subproblem: surface, beams, surface, ...
  std::vector<double> objective_trace;
  bool ao_converged = false;
  bool binary = true;
};

SlotDecision alternating_optimize(const SlotProblem& slot, const OptimizerSettings& settings, Rng& rng);

// Candidates in order: the stream with larger weight_k s_k (t on ties), the
// other stream, none. Streams with s_k <= 1e-6 are not tried. Returns the
// first candidate accepted by `feasible`; none is returned without a check.
PerSide<bool> round_schedule(const PerSide<double>& s, const PerSide<double>& weights,
                             const std::function<bool(const PerSide<bool>&)>& feasible);

// Matched-filter beams through `profile`: each beam in `use` points along its
// user's cascaded channel, the budget split equally among them.
Beams matched_beams(const SlotProblem& slot, const TarcProfile& profile, const PerSide<bool>& info_use,
                    const PerSide<bool>& energy_use);

}  // namespace starris
