#pragma once

#include <Eigen/Dense>

#include "starris/types.hpp"

namespace starris {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

double distance(Point2 a, Point2 b);

// Deployment of the base station, the surface and the four users. Users of
// side t sit on the positive-y half-plane relative to the surface, users of
// side r on the negative one.
struct Geometry {
  Point2 bs{0.0, 0.0};
  Point2 ris{8.0, 0.0};
  PerSide<Point2> info_user{{Point2{12.0, 2.0}, Point2{12.0, -2.0}}};
  PerSide<Point2> energy_user{{Point2{10.0, 2.0}, Point2{10.0, -2.0}}};
  double exponent_info = 2.2;
  double exponent_energy = 2.0;
  double exponent_bs_ris = 2.2;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct NoiseLevels {
  PerSide<double> info{{1.0, 1.0}};
  PerSide<double> energy{{1.0, 1.0}};  // carried, unused by harvested_energy
};

// One slot's channel realization. All paths go through the surface.
struct ChannelSet {
  Eigen::MatrixXcd g;                // BS -> surface, M x N_t
  PerSide<Eigen::VectorXcd> f;       // surface -> information user, length M
  PerSide<Eigen::VectorXcd> u;       // surface -> energy user, length M
  PerSide<double> sigma2_info{{1.0, 1.0}};
  PerSide<double> sigma2_energy{{1.0, 1.0}};

  int m() const { return static_cast<int>(g.rows()); }
  int n_t() const { return static_cast<int>(g.cols()); }
};

// (1/d)^alpha; throws std::domain_error for d <= 0 or alpha < 0.
double path_loss(double d, double alpha);

// Entries are sqrt(path_loss) * exp(j phi) with phi uniform on [0, 2 pi).
// Draw order: G row-major, f_t, f_r, u_t, u_r.
ChannelSet sample_channel_set(const Geometry& geom, int m, int n_t, Rng& rng, const NoiseLevels& noise = {});

// diag(side^H) g: row i is conj(side[i]) * g.row(i).
Eigen::MatrixXcd cascade(const Eigen::VectorXcd& side, const Eigen::MatrixXcd& g);

// |f^H diag(coefficients) g w|^2 / sigma2, with coefficients the diagonal of
// the surface response on the user's side.
double snr(const Eigen::VectorXcd& f, const Eigen::VectorXcd& coefficients, const Eigen::MatrixXcd& g,
           const Eigen::VectorXcd& w, double sigma2);

// |u^H diag(coefficients) g v|^2; receiver noise is neglected.
double harvested_energy(const Eigen::VectorXcd& u, const Eigen::VectorXcd& coefficients, const Eigen::MatrixXcd& g,
                        const Eigen::VectorXcd& v);

}  // namespace starris
