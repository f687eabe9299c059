#pragma once

#include <functional>

#include <Eigen/Dense>

#include "starris/types.hpp"

namespace starris {

enum class Mode { kES, kMS, kConventional };

const char* to_string(Mode mode);

// Per-element amplitudes and phases of both sides of the surface.
struct TarcProfile {
  Mode mode = Mode::kES;
  PerSide<Eigen::VectorXd> amplitude;  // alpha, in [0, 1]
  PerSide<Eigen::VectorXd> phase;      // theta, in [0, 2 pi)

  int size() const { return static_cast<int>(amplitude[Side::kT].size()); }
  // Throws std::invalid_argument on shape, range, conservation or binarity violations.
  void validate(double tol = 1e-9) const;
};

struct LiftedProfile {
  PerSide<Eigen::MatrixXcd> phi;

  // Throws std::invalid_argument when Hermitian, PSD or diagonal-sum checks fail.
  void validate(double tol = 1e-6) const;
};

// sqrt(alpha) exp(-j theta) per element.
Eigen::VectorXcd to_vector(const TarcProfile& profile, Side side);
// sqrt(alpha) exp(+j theta): the diagonal of the surface response, as taken by snr().
Eigen::VectorXcd coefficients(const TarcProfile& profile, Side side);

Eigen::MatrixXcd lift(const Eigen::VectorXcd& l);

// Inverse of to_vector: alpha = |l|^2, theta = -arg(l) wrapped to [0, 2 pi).
TarcProfile profile_from_vectors(Mode mode, const Eigen::VectorXcd& l_t, const Eigen::VectorXcd& l_r);

// Best of the scaled principal eigenvector and `num_randomizations` Gaussian
// draws with covariance phi, each with entry magnitudes clipped to [0, 1].
// Ties keep the earliest candidate. Throws std::invalid_argument if phi has an
// eigenvalue below -1e-8 max(1, lambda_max).
Eigen::VectorXcd extract_rank_one(const Eigen::MatrixXcd& phi,
                                  const std::function<double(const Eigen::VectorXcd&)>& objective_eval,
                                  int num_randomizations, Rng& rng);

// Joint recovery of both sides. For ES, each candidate pair is turned into a
// profile twice: with amplitudes from the lifted diagonal, and with amplitudes
// from the candidate magnitudes renormalized so that alpha_t + alpha_r = 1.
// For MS and CONVENTIONAL the amplitudes of `fixed_amplitudes` are kept and
// only phases are taken from the candidates.
TarcProfile extract_profile(const LiftedProfile& lifted, Mode mode, const PerSide<Eigen::VectorXd>* fixed_amplitudes,
                            const std::function<double(const TarcProfile&)>& objective_eval, int num_randomizations,
                            Rng& rng);

// First ceil(m/2) elements reflect only, the rest transmit only; zero phases.
TarcProfile make_conventional(int m);

// Profile with alpha = 0.5 on both sides and zero phases.
TarcProfile make_uniform_split(int m);

// max_m min(alpha_m, 1 - alpha_m)
double binarity_gap(const Eigen::VectorXd& alpha);

}  // namespace starris
