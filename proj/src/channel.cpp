#include "starris/channel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace starris {

double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

void Geometry::validate() const {
  auto positive = [](double d, const char* field) {
    if (!(d > 0.0)) throw std::invalid_argument(std::string("geometry: zero distance for ") + field);
  };
  positive(distance(bs, ris), "bs_pos/ris_pos");
  positive(distance(ris, info_user[Side::kT]), "iu_t_pos");
  positive(distance(ris, info_user[Side::kR]), "iu_r_pos");
  positive(distance(ris, energy_user[Side::kT]), "eu_t_pos");
  positive(distance(ris, energy_user[Side::kR]), "eu_r_pos");
  for (double a : {exponent_info, exponent_energy, exponent_bs_ris})
    if (!(a >= 0.0) || !std::isfinite(a)) throw std::invalid_argument("geometry: path-loss exponents must be finite and >= 0");
  if (!(info_user[Side::kT].y > ris.y)) throw std::invalid_argument("geometry: iu_t_pos must lie on the transmission side (y > ris y)");
  if (!(energy_user[Side::kT].y > ris.y)) throw std::invalid_argument("geometry: eu_t_pos must lie on the transmission side (y > ris y)");
  if (!(info_user[Side::kR].y < ris.y)) throw std::invalid_argument("geometry: iu_r_pos must lie on the reflection side (y < ris y)");
  if (!(energy_user[Side::kR].y < ris.y)) throw std::invalid_argument("geometry: eu_r_pos must lie on the reflection side (y < ris y)");
}

double path_loss(double d, double alpha) {
  if (!(d > 0.0)) throw std::domain_error("path_loss: distance must be positive");
  if (!(alpha >= 0.0)) throw std::domain_error("path_loss: exponent must be non-negative");
  return std::pow(1.0 / d, alpha);
}

namespace {

Complex random_phase(double amplitude, Rng& rng) {
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  return std::polar(amplitude, phase(rng));
}

Eigen::VectorXcd sample_link(double amplitude, int m, Rng& rng) {
  Eigen::VectorXcd v(m);
  for (int i = 0; i < m; ++i) v(i) = random_phase(amplitude, rng);
  return v;
}

}  // namespace

ChannelSet sample_channel_set(const Geometry& geom, int m, int n_t, Rng& rng, const NoiseLevels& noise) {
  if (m < 1 || n_t < 1) throw std::invalid_argument("sample_channel_set: m and n_t must be >= 1");
  geom.validate();
  ChannelSet ch;
  const double a_g = std::sqrt(path_loss(distance(geom.bs, geom.ris), geom.exponent_bs_ris));
  ch.g.resize(m, n_t);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n_t; ++j) ch.g(i, j) = random_phase(a_g, rng);
  for (Side s : kSides)
    ch.f[s] = sample_link(std::sqrt(path_loss(distance(geom.ris, geom.info_user[s]), geom.exponent_info)), m, rng);
  for (Side s : kSides)
    ch.u[s] = sample_link(std::sqrt(path_loss(distance(geom.ris, geom.energy_user[s]), geom.exponent_energy)), m, rng);
  ch.sigma2_info = noise.info;
  ch.sigma2_energy = noise.energy;
  return ch;
}

Eigen::MatrixXcd cascade(const Eigen::VectorXcd& side, const Eigen::MatrixXcd& g) {
  if (side.size() != g.rows()) throw std::invalid_argument("cascade: channel length does not match G rows");
  return side.conjugate().asDiagonal() * g;
}

namespace {

Complex effective_gain(const Eigen::VectorXcd& h, const Eigen::VectorXcd& coefficients, const Eigen::MatrixXcd& g,
                       const Eigen::VectorXcd& w) {
  if (h.size() != g.rows() || coefficients.size() != g.rows() || w.size() != g.cols())
    throw std::invalid_argument("link budget: dimension mismatch");
  const Eigen::VectorXcd gw = g * w;
  Complex acc = 0.0;
  for (Eigen::Index i = 0; i < h.size(); ++i) acc += std::conj(h(i)) * coefficients(i) * gw(i);
  return acc;
}

}  // namespace

double snr(const Eigen::VectorXcd& f, const Eigen::VectorXcd& coefficients, const Eigen::MatrixXcd& g,
           const Eigen::VectorXcd& w, double sigma2) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("snr: noise variance must be positive");
  return std::norm(effective_gain(f, coefficients, g, w)) / sigma2;
}

double harvested_energy(const Eigen::VectorXcd& u, const Eigen::VectorXcd& coefficients, const Eigen::MatrixXcd& g,
                        const Eigen::VectorXcd& v) {
  return std::norm(effective_gain(u, coefficients, g, v));
}

}  // namespace starris
