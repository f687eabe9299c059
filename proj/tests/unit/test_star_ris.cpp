#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

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

TarcProfile es_profile(const VectorXd& alpha_t, const VectorXd& theta_t, const VectorXd& theta_r) {
  TarcProfile p;
  p.mode = Mode::kES;
  p.amplitude[Side::kT] = alpha_t;
  p.amplitude[Side::kR] = VectorXd::Ones(alpha_t.size()) - alpha_t;
  p.phase[Side::kT] = theta_t;
  p.phase[Side::kR] = theta_r;
  return p;
}

TarcProfile random_es_profile(int m, Rng& rng) {
  std::uniform_real_distribution<double> u;
  VectorXd a(m), tt(m), tr(m);
  for (int i = 0; i < m; ++i) {
    a(i) = u(rng);
    tt(i) = 2.0 * std::numbers::pi * u(rng);
    tr(i) = 2.0 * std::numbers::pi * u(rng);
  }
  return es_profile(a, tt, tr);
}

}  // namespace

TEST_CASE("to_vector examples") {
  VectorXd a(3), t(3);
  a << 0.25, 1.0, 0.0;
  t << 0.0, 0.0, 1.3;
  const TarcProfile p = es_profile(a, t, VectorXd::Zero(3));
  const VectorXcd l = to_vector(p, Side::kT);
  CHECK(std::abs(l(0) - Complex(0.5, 0.0)) < 1e-15);
  CHECK(std::abs(l(1) - Complex(1.0, 0.0)) < 1e-15);
  CHECK(std::abs(l(2)) == 0.0);

  const TarcProfile ones = es_profile(VectorXd::Ones(4), VectorXd::Zero(4), VectorXd::Zero(4));
  CHECK((to_vector(ones, Side::kT) - VectorXcd::Ones(4)).norm() == 0.0);
}

TEST_CASE("to_vector conjugates the phase and coefficients undo it") {
  VectorXd a(1), t(1);
  a << 1.0;
  t << 0.7;
  const TarcProfile p = es_profile(a, t, VectorXd::Zero(1));
  CHECK(std::abs(to_vector(p, Side::kT)(0) - std::polar(1.0, -0.7)) < 1e-15);
  CHECK(std::abs(coefficients(p, Side::kT)(0) - std::polar(1.0, 0.7)) < 1e-15);
}

TEST_CASE("profile_from_vectors inverts to_vector") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const TarcProfile p = random_es_profile(6, rng);
    const TarcProfile q = profile_from_vectors(Mode::kES, to_vector(p, Side::kT), to_vector(p, Side::kR));
    for (Side k : kSides) {
      CHECK((q.amplitude[k] - p.amplitude[k]).norm() < 1e-12);
      CHECK((to_vector(q, k) - to_vector(p, k)).norm() < 1e-12);
    }
  }
}

TEST_CASE("lift: outer product, rank one, trace") {
  VectorXcd e(2);
  e << 1.0, 0.0;
  MatrixXcd expect = MatrixXcd::Zero(2, 2);
  expect(0, 0) = 1.0;
  CHECK((lift(e) - expect).norm() == 0.0);

  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const VectorXcd l = random_vector(7, rng);
    const MatrixXcd phi = lift(l);
    Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(phi);
    const VectorXd ev = eig.eigenvalues();
    CHECK(std::abs(ev(ev.size() - 2)) <= 1e-10 * ev(ev.size() - 1));
    CHECK(std::abs(phi.trace().real() - l.squaredNorm()) <= 1e-12 * l.squaredNorm());
  }
}

TEST_CASE("lifted diagonal equals the amplitudes") {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const TarcProfile p = random_es_profile(8, rng);
    LiftedProfile lp;
    for (Side k : kSides) {
      lp.phi[k] = lift(to_vector(p, k));
      CHECK((lp.phi[k].diagonal().real() - p.amplitude[k]).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK(lp.phi[k].diagonal().imag().cwiseAbs().maxCoeff() <= 1e-12);
    }
    CHECK_NOTHROW(lp.validate());
    CHECK((p.amplitude[Side::kT].sum() + p.amplitude[Side::kR].sum()) == doctest::Approx(8.0).epsilon(1e-14));
  }
}

TEST_CASE("LiftedProfile validation rejects broken diagonals and non-PSD input") {
  LiftedProfile lp;
  lp.phi[Side::kT] = MatrixXcd::Identity(2, 2);
  lp.phi[Side::kR] = MatrixXcd::Identity(2, 2);
  CHECK_THROWS_AS(lp.validate(), std::invalid_argument);
  lp.phi[Side::kT] = 0.5 * MatrixXcd::Identity(2, 2);
  lp.phi[Side::kR] = 0.5 * MatrixXcd::Identity(2, 2);
  CHECK_NOTHROW(lp.validate());
  lp.phi[Side::kT](0, 1) = 0.9;
  lp.phi[Side::kT](1, 0) = 0.9;
  CHECK_THROWS_AS(lp.validate(), std::invalid_argument);
}

TEST_CASE("extract_rank_one recovers a rank-one input up to a global phase") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    VectorXcd l = random_vector(6, rng);
    for (int i = 0; i < l.size(); ++i) l(i) /= std::max(1.0, std::abs(l(i)));
    const VectorXcd c = extract_rank_one(lift(l), [](const VectorXcd&) { return 0.0; }, 50, rng);
    CHECK(std::abs(std::abs(c.dot(l)) - l.squaredNorm()) <= 1e-8);
  }
}

TEST_CASE("extract_rank_one clips entry magnitudes") {
  Rng rng(4);
  const MatrixXcd phi = 0.5 * MatrixXcd::Identity(2, 2);
  const VectorXcd c = extract_rank_one(phi, [](const VectorXcd& v) { return std::abs(v(0)); }, 50, rng);
  CHECK(std::norm(c(0)) <= 1.0 + 1e-15);
  CHECK(std::norm(c(1)) <= 1.0 + 1e-15);

  MatrixXcd big = 9.0 * MatrixXcd::Ones(3, 3);
  const VectorXcd d = extract_rank_one(big, [](const VectorXcd& v) { return v.norm(); }, 10, rng);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(d(i)) <= 1.0 + 1e-15);
}

TEST_CASE("extract_rank_one dominates the principal candidate on rank-2 inputs") {
  Rng rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    const VectorXcd a = random_vector(5, rng);
    const VectorXcd b = random_vector(5, rng);
    const MatrixXcd phi = 0.2 * (lift(a) + lift(b));
    const VectorXcd target = random_vector(5, rng);
    auto objective = [&](const VectorXcd& v) { return std::norm(target.dot(v)); };

    Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(phi);
    VectorXcd principal = std::sqrt(eig.eigenvalues()(4)) * eig.eigenvectors().col(4);
    for (int i = 0; i < 5; ++i)
      if (std::abs(principal(i)) > 1.0) principal(i) /= std::abs(principal(i));

    const VectorXcd best = extract_rank_one(phi, objective, 50, rng);
    CHECK(objective(best) >= objective(principal) - 1e-12);
  }
}

TEST_CASE("extract_rank_one is phase covariant") {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    VectorXcd l = random_vector(4, rng);
    l /= 2.0 * l.cwiseAbs().maxCoeff();
    const VectorXcd target = random_vector(4, rng);
    auto objective = [&](const VectorXcd& v) { return std::norm(target.dot(v)); };
    const VectorXcd rotated = std::polar(1.0, 1.234) * l;
    Rng r1(1), r2(1);
    const double v1 = objective(extract_rank_one(lift(l), objective, 0, r1));
    const double v2 = objective(extract_rank_one(lift(rotated), objective, 0, r2));
    CHECK(std::abs(v1 - v2) <= 1e-10 * std::max(1.0, v1));
  }
}

TEST_CASE("extract_rank_one rejects indefinite input") {
  Rng rng(1);
  MatrixXcd phi = MatrixXcd::Identity(2, 2);
  phi(1, 1) = -0.5;
  CHECK_THROWS_AS(extract_rank_one(phi, [](const VectorXcd&) { return 0.0; }, 5, rng), std::invalid_argument);
}

TEST_CASE("make_conventional examples") {
  const TarcProfile two = make_conventional(2);
  CHECK(two.mode == Mode::kConventional);
  CHECK(two.amplitude[Side::kR](0) == 1.0);
  CHECK(two.amplitude[Side::kR](1) == 0.0);
  CHECK(two.amplitude[Side::kT](0) == 0.0);
  CHECK(two.amplitude[Side::kT](1) == 1.0);

  const TarcProfile five = make_conventional(5);
  CHECK(five.amplitude[Side::kR].sum() == 3.0);
  CHECK(five.amplitude[Side::kT].sum() == 2.0);
  CHECK((five.amplitude[Side::kT] + five.amplitude[Side::kR] - VectorXd::Ones(5)).norm() == 0.0);
  CHECK_NOTHROW(five.validate());

  CHECK_THROWS_AS(make_conventional(1), std::invalid_argument);
}

TEST_CASE("binarity gap and MS validation") {
  VectorXd a(4);
  a << 0.0, 1.0, 1.0, 0.0;
  CHECK(binarity_gap(a) == 0.0);
  a(2) = 0.7;
  CHECK(binarity_gap(a) == doctest::Approx(0.3));

  TarcProfile p = es_profile(a, VectorXd::Zero(4), VectorXd::Zero(4));
  CHECK_NOTHROW(p.validate());
  p.mode = Mode::kMS;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = es_profile(VectorXd::Constant(4, 0.5), VectorXd::Zero(4), VectorXd::Zero(4));
  p.amplitude[Side::kR](0) = 0.6;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("extract_profile keeps energy conservation and fixed partitions") {
  Rng rng(12);
  const TarcProfile truth = random_es_profile(6, rng);
  LiftedProfile lp;
  for (Side k : kSides) lp.phi[k] = lift(to_vector(truth, k));
  const TarcProfile es = extract_profile(lp, Mode::kES, nullptr, [](const TarcProfile&) { return 0.0; }, 20, rng);
  CHECK_NOTHROW(es.validate(1e-9));
  CHECK((es.amplitude[Side::kT] - truth.amplitude[Side::kT]).norm() < 1e-8);

  const TarcProfile conv = make_conventional(6);
  const TarcProfile ms = extract_profile(lp, Mode::kMS, &conv.amplitude, [](const TarcProfile&) { return 0.0; }, 20, rng);
  CHECK_NOTHROW(ms.validate());
  for (Side k : kSides) CHECK((ms.amplitude[k] - conv.amplitude[k]).norm() == 0.0);
}
