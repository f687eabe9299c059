#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "starris/channel.hpp"
#include "starris/optimizer.hpp"
#include "starris/star_ris.hpp"

using namespace starris;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;

namespace {

VectorXcd random_vector(int n, Rng& rng) {
  std::normal_distribution<double> g;
  VectorXcd v(n);
  for (int i = 0; i < n; ++i) v(i) = Complex(g(rng), g(rng));
  return v;
}

MatrixXcd random_matrix(int r, int c, Rng& rng) {
  std::normal_distribution<double> g;
  MatrixXcd a(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) a(i, j) = Complex(g(rng), g(rng));
  return a;
}

// Long-hand evaluation of f^H diag(c) G w as an explicit double sum.
Complex gain_by_sum(const VectorXcd& f, const VectorXcd& c, const MatrixXcd& g, const VectorXcd& w) {
  Complex acc = 0.0;
  for (int m = 0; m < f.size(); ++m)
    for (int n = 0; n < w.size(); ++n) acc += std::conj(f(m)) * c(m) * g(m, n) * w(n);
  return acc;
}

}  // namespace

TEST_CASE("path_loss values") {
  CHECK(path_loss(1.0, 2.2) == 1.0);
  CHECK(path_loss(10.0, 2.0) == doctest::Approx(0.01).epsilon(1e-15));
  // exp(-1.1 ln 20): the RIS to IU_r distance is sqrt(20)
  const double d = distance(Point2{8, 0}, Point2{12, -2});
  CHECK(d == doctest::Approx(std::sqrt(20.0)).epsilon(1e-15));
  CHECK(path_loss(d, 2.2) == doctest::Approx(std::exp(-1.1 * std::log(20.0))).epsilon(1e-13));
  CHECK(path_loss(d, 2.2) == doctest::Approx(0.0370567).epsilon(1e-6));
}

TEST_CASE("path_loss rejects non-positive distances and is decreasing") {
  CHECK_THROWS_AS(path_loss(0.0, 2.0), std::domain_error);
  CHECK_THROWS_AS(path_loss(-1.0, 2.0), std::domain_error);
  double prev = path_loss(0.5, 2.2);
  for (double d = 0.6; d < 50.0; d += 0.1) {
    const double v = path_loss(d, 2.2);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("sample_channel_set: shapes, magnitudes and determinism") {
  const Geometry geom;
  Rng a(42), b(42);
  const ChannelSet x = sample_channel_set(geom, 6, 3, a);
  const ChannelSet y = sample_channel_set(geom, 6, 3, b);
  CHECK(x.m() == 6);
  CHECK(x.n_t() == 3);
  CHECK(x.g == y.g);
  for (Side s : kSides) {
    CHECK(x.f[s] == y.f[s]);
    CHECK(x.u[s] == y.u[s]);
  }
  // RIS (8,0) to EU_t (10,2): d = sqrt(8), alpha_e = 2 -> |entry| = 1/sqrt(8)
  for (int i = 0; i < 6; ++i) CHECK(std::abs(x.u[Side::kT](i)) == doctest::Approx(1.0 / std::sqrt(8.0)).epsilon(1e-12));
  CHECK(std::abs(x.u[Side::kT](0)) == doctest::Approx(0.353553).epsilon(1e-6));
  const double g_amp = std::sqrt(std::pow(1.0 / 8.0, 2.2));
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 3; ++j) CHECK(std::abs(x.g(i, j)) == doctest::Approx(g_amp).epsilon(1e-12));
  const double f_amp = std::sqrt(std::pow(1.0 / std::sqrt(20.0), 2.2));
  for (int i = 0; i < 6; ++i) CHECK(std::abs(x.f[Side::kR](i)) == doctest::Approx(f_amp).epsilon(1e-12));
}

TEST_CASE("sample_channel_set: phases are uniform") {
  const Geometry geom;
  Rng rng(5);
  double sum = 0.0;
  int count = 0;
  while (count < 10000) {
    const ChannelSet c = sample_channel_set(geom, 10, 1, rng);
    for (int i = 0; i < 10; ++i) {
      double ph = std::arg(c.f[Side::kT](i));
      if (ph < 0) ph += 2.0 * std::numbers::pi;
      sum += ph;
      ++count;
    }
  }
  CHECK(std::abs(sum / count - std::numbers::pi) < 0.1);
}

TEST_CASE("geometry validation") {
  Geometry g;
  CHECK_NOTHROW(g.validate());
  Geometry bad = g;
  bad.ris = bad.bs;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = g;
  bad.info_user[Side::kT] = Point2{12, -1};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = g;
  bad.energy_user[Side::kR] = Point2{10, 3};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  Rng rng(1);
  CHECK_THROWS_AS(sample_channel_set(g, 0, 2, rng), std::invalid_argument);
}

TEST_CASE("cascade") {
  MatrixXcd g(1, 1);
  g << 2.0;
  VectorXcd f(1);
  f << 1.0;
  CHECK(std::abs(cascade(f, g)(0, 0) - Complex(2.0, 0.0)) < 1e-15);
  f << std::polar(1.0, std::numbers::pi / 2);
  CHECK(std::abs(cascade(f, g)(0, 0) - std::polar(2.0, -std::numbers::pi / 2)) < 1e-15);
  const MatrixXcd id = MatrixXcd::Identity(3, 3);
  CHECK((cascade(VectorXcd::Ones(3), id) - id).norm() == 0.0);
  CHECK_THROWS_AS(cascade(VectorXcd::Ones(2), id), std::invalid_argument);
}

TEST_CASE("snr and harvested energy: scalar cases") {
  const VectorXcd one = VectorXcd::Ones(1);
  const MatrixXcd g = MatrixXcd::Ones(1, 1);
  VectorXcd w(1);
  w << std::sqrt(3.0);
  CHECK(snr(one, one, g, w, 1.0) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(snr(one, one, g, VectorXcd::Zero(1), 1.0) == 0.0);
  VectorXcd v(1);
  v << 2.0;
  CHECK(harvested_energy(one, one, g, v) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(harvested_energy(one, VectorXcd::Zero(1), g, v) == 0.0);
  CHECK_THROWS_AS(snr(one, one, g, w, 0.0), std::invalid_argument);
}

TEST_CASE("snr matches the explicit double sum and is phase invariant") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const VectorXcd f = random_vector(7, rng), c = random_vector(7, rng), w = random_vector(3, rng);
    const MatrixXcd g = random_matrix(7, 3, rng);
    const double ref = std::norm(gain_by_sum(f, c, g, w)) / 0.7;
    CHECK(snr(f, c, g, w, 0.7) == doctest::Approx(ref).epsilon(1e-12));
    const Complex rot = std::polar(1.0, 0.37 * trial);
    CHECK(snr(rot * f, c, g, w, 0.7) == doctest::Approx(ref).epsilon(1e-10));
    CHECK(harvested_energy(f, c, g, rot * w) == doctest::Approx(std::norm(gain_by_sum(f, c, g, w))).epsilon(1e-12));
  }
}

TEST_CASE("snr equals the lifted quadratic form for rank-one profiles") {
  Rng rng(21);
  const Geometry geom;
  for (int trial = 0; trial < 20; ++trial) {
    const ChannelSet ch = sample_channel_set(geom, 8, 4, rng);
    Beams beams = Beams::zeros(4);
    for (Side s : kSides) {
      beams.info[s] = random_vector(4, rng);
      beams.energy[s] = random_vector(4, rng);
    }
    TarcProfile p = make_uniform_split(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 8; ++i) {
      p.amplitude[Side::kT](i) = u(rng);
      p.amplitude[Side::kR](i) = 1.0 - p.amplitude[Side::kT](i);
      for (Side s : kSides) p.phase[s](i) = 2.0 * std::numbers::pi * u(rng);
    }
    const LiftedForms forms = build_lifted_forms(ch, beams);
    for (Side s : kSides) {
      const MatrixXcd phi = lift(to_vector(p, s));
      const double direct = snr(ch.f[s], coefficients(p, s), ch.g, beams.info[s], ch.sigma2_info[s]);
      const double lifted = (forms.info[s] * phi).trace().real() / ch.sigma2_info[s];
      CHECK(lifted == doctest::Approx(direct).epsilon(1e-10));
      const double e_direct = harvested_energy(ch.u[s], coefficients(p, s), ch.g, beams.energy[s]);
      CHECK((forms.energy[s] * phi).trace().real() == doctest::Approx(e_direct).epsilon(1e-10));
    }
  }
}
