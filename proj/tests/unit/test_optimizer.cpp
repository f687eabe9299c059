#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "starris/channel.hpp"
#include "starris/optimizer.hpp"
#include "starris/star_ris.hpp"

using namespace starris;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

namespace {

VectorXcd random_vector(int n, Rng& rng) {
  std::normal_distribution<double> g;
  VectorXcd v(n);
  for (int i = 0; i < n; ++i) v(i) = Complex(g(rng), g(rng));
  return v;
}

VectorXcd constant(int n, double v) { return VectorXcd::Constant(n, Complex(v, 0.0)); }

// Single element, single antenna, every channel coefficient equal to one.
SlotProblem unit_slot(double gamma, double energy, PerSide<double> weights) {
  SlotProblem slot;
  slot.channels.g = MatrixXcd::Ones(1, 1);
  for (Side k : kSides) {
    slot.channels.f[k] = constant(1, 1.0);
    slot.channels.u[k] = constant(1, 1.0);
  }
  slot.weights = weights;
  slot.availability = {{true, true}};
  slot.gamma_th = gamma;
  slot.energy_min = energy;
  slot.power_budget = 4.0;
  return slot;
}

Beams unit_beams() {
  Beams b = Beams::zeros(1);
  for (Side k : kSides) {
    b.info[k] = constant(1, 1.0);
    b.energy[k] = constant(1, 1.0);
  }
  return b;
}

// Brute force over alpha_t on a 1e-3 grid and s in {0, 1}^2 with s_t + s_r <= 1
// for the single-element instance of unit_slot (all gains one, sigma2 = 1).
struct GridResult {
  bool feasible = false;
  double best = -1.0;
};

GridResult unit_grid_oracle(double gamma, double energy, PerSide<double> w) {
  GridResult out;
  for (int i = 0; i <= 1000; ++i) {
    const double at = i / 1000.0;
    const double ar = 1.0 - at;
    if (at < energy || ar < energy) continue;
    for (int st = 0; st <= 1; ++st)
      for (int sr = 0; sr + st <= 1; ++sr) {
        if (at < st * gamma || ar < sr * gamma) continue;
        out.feasible = true;
        out.best = std::max(out.best, w[Side::kT] * st + w[Side::kR] * sr);
      }
  }
  return out;
}

SlotProblem random_slot(Rng& rng, int m, int n_t, Mode mode, double sigma2 = 0.0316) {
  NoiseLevels noise;
  noise.info = {{sigma2, sigma2}};
  SlotProblem slot;
  slot.channels = sample_channel_set(Geometry{}, m, n_t, rng, noise);
  std::uniform_int_distribution<int> w(1, 10);
  slot.weights = {{static_cast<double>(w(rng)), static_cast<double>(w(rng))}};
  slot.availability = {{true, true}};
  slot.gamma_th = db_to_linear(0.0);
  slot.energy_min = db_to_linear(-20.0);
  slot.power_budget = 3.0;
  slot.mode = mode;
  return slot;
}

}  // namespace

TEST_CASE("build_lifted_forms: zero beams, rank one, trace identity") {
  Rng rng(1);
  ChannelSet ch = sample_channel_set(Geometry{}, 6, 3, rng);
  Beams zero = Beams::zeros(3);
  const LiftedForms z = build_lifted_forms(ch, zero);
  for (Side k : kSides) CHECK(z.info[k].norm() == 0.0);

  for (int trial = 0; trial < 20; ++trial) {
    ch = sample_channel_set(Geometry{}, 6, 3, rng);
    Beams b = Beams::zeros(3);
    for (Side k : kSides) {
      b.info[k] = random_vector(3, rng);
      b.energy[k] = random_vector(3, rng);
    }
    const LiftedForms lf = build_lifted_forms(ch, b);
    const VectorXcd l = random_vector(6, rng);
    for (Side k : kSides) {
      Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(lf.info[k]);
      const VectorXd ev = eig.eigenvalues();
      CHECK(std::abs(ev(4)) <= 1e-10 * ev(5));

      // |f^H Phi G w|^2 with Phi = diag(conj(l)).
      const VectorXcd c = l.conjugate();
      const double direct = std::norm(ch.f[k].dot(c.asDiagonal() * (ch.g * b.info[k])));
      const double lifted = (lf.info[k] * lift(l)).trace().real();
      CHECK(std::abs(lifted - direct) <= 1e-9 * direct);
      const double e_direct = std::norm(ch.u[k].dot(c.asDiagonal() * (ch.g * b.energy[k])));
      CHECK(std::abs((lf.energy[k] * lift(l)).trace().real() - e_direct) <= 1e-9 * e_direct);
    }
  }
}

TEST_CASE("ES subproblem on a single element matches the grid oracle") {
  const PerSide<double> w{{2.0, 1.0}};
  const GridResult grid = unit_grid_oracle(0.5, 0.2, w);
  REQUIRE(grid.feasible);
  CHECK(grid.best == 2.0);
  const TarcResult r = solve_tarc_scheduling_es(unit_slot(0.5, 0.2, w), unit_beams());
  REQUIRE(r.status == conic::Status::kOptimal);
  CHECK(r.objective == doctest::Approx(grid.best).epsilon(1e-6));
  CHECK(r.s[Side::kT] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.alpha[Side::kT](0) >= 0.5 - 1e-6);
  CHECK(r.alpha[Side::kT](0) <= 0.8 + 1e-6);

  const PerSide<double> wr{{1.0, 3.0}};
  const GridResult grid_r = unit_grid_oracle(0.5, 0.2, wr);
  const TarcResult rr = solve_tarc_scheduling_es(unit_slot(0.5, 0.2, wr), unit_beams());
  REQUIRE(rr.status == conic::Status::kOptimal);
  CHECK(rr.objective == doctest::Approx(grid_r.best).epsilon(1e-6));
  CHECK(rr.s[Side::kR] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("ES subproblem reports infeasible energy thresholds") {
  const PerSide<double> w{{2.0, 1.0}};
  CHECK_FALSE(unit_grid_oracle(0.5, 0.6, w).feasible);
  const TarcResult r = solve_tarc_scheduling_es(unit_slot(0.5, 0.6, w), unit_beams());
  CHECK(r.status == conic::Status::kInfeasible);
}

TEST_CASE("zero weights give a zero schedule") {
  SlotProblem slot = unit_slot(0.5, 0.2, {{0.0, 0.0}});
  const TarcResult r = solve_tarc_scheduling_es(slot, unit_beams());
  REQUIRE(r.status == conic::Status::kOptimal);
  CHECK(r.s[Side::kT] == 0.0);
  CHECK(r.s[Side::kR] == 0.0);

  Rng rng(2);
  const SlotDecision d = alternating_optimize(slot, OptimizerSettings{}, rng);
  CHECK_FALSE(d.schedule[Side::kT]);
  CHECK_FALSE(d.schedule[Side::kR]);
  CHECK(d.objective == 0.0);
  CHECK(d.ao_iterations == 1);
}

TEST_CASE("penalty surrogate bounds a - a^2 and is tight at the expansion point") {
  CHECK(penalty_surrogate(0.5, 0.5) == 0.25);
  for (int i = 0; i <= 1000; ++i) {
    const double a = i / 1000.0;
    CHECK(penalty_surrogate(0.0, a) == a);
  }
  double worst = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double a0 = i / 1000.0;
    CHECK(std::abs(penalty_surrogate(a0, a0) - (a0 - a0 * a0)) <= 1e-12);
    for (int j = 0; j <= 1000; ++j) {
      const double a = j / 1000.0;
      worst = std::min(worst, penalty_surrogate(a0, a) - (a - a * a));
    }
  }
  CHECK(worst >= -1e-15);
}

TEST_CASE("linearized quadratic: tight at the expansion point and a global underestimate") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const VectorXcd p = random_vector(4, rng);
    const MatrixXcd q = p * p.adjoint();
    const VectorXcd w0 = random_vector(4, rng);
    const double exact = w0.dot(q * w0).real();
    CHECK(std::abs(linearized_quadratic(q, w0, w0) - exact) <= 1e-10 * std::abs(exact));
  }
  for (int trial = 0; trial < 100; ++trial) {
    const MatrixXcd a = MatrixXcd::Random(4, 4);
    const MatrixXcd q = a * a.adjoint();
    const VectorXcd w0 = random_vector(4, rng);
    const VectorXcd w = random_vector(4, rng);
    CHECK(linearized_quadratic(q, w0, w) <= w.dot(q * w).real() + 1e-12);
  }
}

TEST_CASE("scalar SCA iteration converges to the threshold fixed point") {
  // |w|^2 >= 4 with c = 1: each step solves the linearized constraint with equality.
  MatrixXcd q(1, 1);
  q << 1.0;
  VectorXcd w(1);
  w << 1.0;
  int it = 0;
  for (; it < 10 && std::abs(std::abs(w(0)) - 2.0) > 1e-3; ++it) {
    VectorXcd one(1);
    one << w(0) + 1.0;
    const double at = linearized_quadratic(q, w, w);
    const double slope = linearized_quadratic(q, w, one) - at;
    w(0) += (4.0 - at) / slope;
  }
  CHECK(it <= 10);
  CHECK(std::abs(std::abs(w(0)) - 2.0) <= 1e-3);
}

TEST_CASE("SCA keeps the power budget and does not lose slack") {
  Rng rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    SlotProblem slot = random_slot(rng, 4, 2, Mode::kES);
    const TarcProfile half = make_uniform_split(4);
    LiftedProfile lp;
    for (Side k : kSides) lp.phi[k] = lift(to_vector(half, k));
    const Beams start = matched_beams(slot, half, {{true, false}}, {{true, true}});
    const ScaResult r = solve_beamforming_sca(slot, lp, {{1.0, 0.0}}, start, OptimizerSettings{}, true);
    REQUIRE(r.status == conic::Status::kOptimal);
    CHECK(r.beams.power() <= slot.power_budget + 1e-6);
    for (std::size_t i = 1; i < r.min_slack_trace.size(); ++i)
      CHECK(r.min_slack_trace[i] >= r.min_slack_trace[i - 1] - 1e-6);
  }
}

TEST_CASE("feasible-set inclusion: ES >= MS >= CONVENTIONAL") {
  Rng rng(4);
  const OptimizerSettings settings;
  for (int trial = 0; trial < 5; ++trial) {
    SlotProblem slot = random_slot(rng, 4, 2, Mode::kES);
    slot.energy_min = db_to_linear(-40.0);
    const Beams beams = matched_beams(slot, make_uniform_split(4), {{true, true}}, {{true, true}});
    const TarcResult es = solve_tarc_scheduling_es(slot, beams, settings);
    slot.mode = Mode::kMS;
    const TarcResult ms = solve_tarc_scheduling_ms(slot, beams, 1e3, 10, settings);
    slot.mode = Mode::kConventional;
    const TarcResult conv = solve_tarc_scheduling_es(slot, beams, settings);
    REQUIRE(es.status == conic::Status::kOptimal);
    REQUIRE(ms.status == conic::Status::kOptimal);
    REQUIRE(conv.status == conic::Status::kOptimal);
    CHECK(binarity_gap(ms.alpha[Side::kT]) == 0.0);
    CHECK(ms.objective <= es.objective + 1e-6);
    CHECK(conv.objective <= ms.objective + 1e-6);
  }
}

TEST_CASE("round_schedule examples") {
  auto yes = [](const PerSide<bool>&) { return true; };
  PerSide<bool> r = round_schedule({{0.7, 0.2}}, {{1.0, 1.0}}, yes);
  CHECK(r[Side::kT]);
  CHECK_FALSE(r[Side::kR]);

  r = round_schedule({{0.0, 0.0}}, {{1.0, 1.0}}, yes);
  CHECK_FALSE(r[Side::kT]);
  CHECK_FALSE(r[Side::kR]);

  std::vector<PerSide<bool>> tried;
  auto record = [&](const PerSide<bool>& c) {
    tried.push_back(c);
    return false;
  };
  r = round_schedule({{0.5, 0.5}}, {{1.0, 3.0}}, record);
  REQUIRE(tried.size() == 2);
  CHECK(tried[0][Side::kR]);
  CHECK(tried[1][Side::kT]);
  CHECK_FALSE(r[Side::kT]);
  CHECK_FALSE(r[Side::kR]);

  tried.clear();
  round_schedule({{0.5, 0.5}}, {{2.0, 2.0}}, record);
  CHECK(tried[0][Side::kT]);

  CHECK_THROWS_AS(round_schedule({{0.8, 0.8}}, {{1.0, 1.0}}, yes), ContractError);
}

TEST_CASE("alternating optimization: monotone trace, exclusion, verified constraints") {
  Rng rng(31);
  const OptimizerSettings settings;
  for (int trial = 0; trial < 10; ++trial) {
    const SlotProblem slot = random_slot(rng, 4, 2, trial % 2 ? Mode::kMS : Mode::kES);
    Rng opt(trial);
    const SlotDecision d = alternating_optimize(slot, settings, opt);
    for (std::size_t i = 1; i < d.objective_trace.size(); ++i)
      CHECK(d.objective_trace[i] >= d.objective_trace[i - 1] - 1e-6);
    CHECK_FALSE((d.schedule[Side::kT] && d.schedule[Side::kR]));
    CHECK(d.beams.power() <= slot.power_budget + 1e-6);
    if (d.status != SlotStatus::kOptimal) continue;
    for (Side k : kSides) {
      const VectorXcd c = coefficients(d.tarc, k);
      CHECK(harvested_energy(slot.channels.u[k], c, slot.channels.g, d.beams.energy[k]) >= slot.energy_min - 1e-5);
      if (d.schedule[k])
        CHECK(snr(slot.channels.f[k], c, slot.channels.g, d.beams.info[k], slot.channels.sigma2_info[k]) >=
              slot.gamma_th - 1e-5);
    }
  }
}

TEST_CASE("weights (5, 1) on an instance feasible for both streams schedule t") {
  Rng rng(41);
  SlotProblem slot = random_slot(rng, 4, 2, Mode::kES, 1e-3);
  slot.weights = {{5.0, 1.0}};
  const OptimizerSettings settings;

  // Enumeration oracle: each single stream on its own must be feasible.
  for (Side k : kSides) {
    SlotProblem alone = slot;
    alone.availability = {{false, false}};
    alone.availability[k] = true;
    alone.weights = {{0.0, 0.0}};
    alone.weights[k] = 1.0;
    Rng r(7);
    const SlotDecision d = alternating_optimize(alone, settings, r);
    REQUIRE(d.schedule[k]);
  }
  Rng r(7);
  const SlotDecision d = alternating_optimize(slot, settings, r);
  CHECK(d.status == SlotStatus::kOptimal);
  CHECK(d.schedule[Side::kT]);
  CHECK_FALSE(d.schedule[Side::kR]);
  CHECK(d.objective == 5.0);
}

TEST_CASE("slot problem validation") {
  SlotProblem slot = unit_slot(0.5, 0.2, {{1.0, 1.0}});
  CHECK_NOTHROW(slot.validate());
  slot.gamma_th = 0.0;
  CHECK_THROWS_AS(slot.validate(), std::invalid_argument);
  slot = unit_slot(0.5, 0.2, {{-1.0, 1.0}});
  CHECK_THROWS_AS(slot.validate(), std::invalid_argument);
  slot = unit_slot(0.5, 0.2, {{1.0, 1.0}});
  slot.power_budget = 0.0;
  CHECK_THROWS_AS(slot.validate(), std::invalid_argument);
}
