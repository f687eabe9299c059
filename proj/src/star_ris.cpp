#include "starris/star_ris.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace starris {

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::kES:
      return "es";
    case Mode::kMS:
      return "ms";
    case Mode::kConventional:
      return "conv";
  }
  return "?";
}

void TarcProfile::validate(double tol) const {
  const Eigen::Index m = amplitude[Side::kT].size();
  if (m < 1) throw std::invalid_argument("tarc profile: empty");
  for (Side s : kSides)
    if (amplitude[s].size() != m || phase[s].size() != m)
      throw std::invalid_argument("tarc profile: amplitude and phase vectors differ in length");
  for (Eigen::Index i = 0; i < m; ++i) {
    const double at = amplitude[Side::kT](i), ar = amplitude[Side::kR](i);
    if (at < -tol || at > 1 + tol || ar < -tol || ar > 1 + tol)
      throw std::invalid_argument("tarc profile: amplitude outside [0, 1]");
    if (std::abs(at + ar - 1.0) > tol) throw std::invalid_argument("tarc profile: alpha_t + alpha_r != 1");
    if (mode != Mode::kES && std::min(at, 1.0 - at) > tol)
      throw std::invalid_argument("tarc profile: non-binary amplitude in a switching profile");
    for (Side s : kSides)
      if (!(phase[s](i) >= 0.0 && phase[s](i) < 2.0 * std::numbers::pi))
        throw std::invalid_argument("tarc profile: phase outside [0, 2 pi)");
  }
  if (mode == Mode::kConventional) {
    const Eigen::Index reflect = (m + 1) / 2;
    for (Eigen::Index i = 0; i < m; ++i)
      if ((i < reflect) != (amplitude[Side::kR](i) > 0.5))
        throw std::invalid_argument("tarc profile: conventional partition violated");
  }
}

void LiftedProfile::validate(double tol) const {
  const Eigen::Index m = phi[Side::kT].rows();
  for (Side s : kSides) {
    const Eigen::MatrixXcd& p = phi[s];
    if (p.rows() != m || p.cols() != m) throw std::invalid_argument("lifted profile: shape mismatch");
    if ((p - p.adjoint()).norm() > 1e-10 * std::max(1.0, p.norm()))
      throw std::invalid_argument("lifted profile: not Hermitian");
    for (Eigen::Index i = 0; i < m; ++i)
      if (std::abs(p(i, i).imag()) > 1e-12) throw std::invalid_argument("lifted profile: complex diagonal");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(p, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-8) throw std::invalid_argument("lifted profile: not PSD");
  }
  for (Eigen::Index i = 0; i < m; ++i)
    if (std::abs(phi[Side::kT](i, i).real() + phi[Side::kR](i, i).real() - 1.0) > tol)
      throw std::invalid_argument("lifted profile: diagonals do not sum to one");
}

Eigen::VectorXcd to_vector(const TarcProfile& profile, Side side) {
  const Eigen::VectorXd& a = profile.amplitude[side];
  const Eigen::VectorXd& t = profile.phase[side];
  Eigen::VectorXcd l(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) l(i) = std::polar(std::sqrt(std::max(a(i), 0.0)), -t(i));
  return l;
}

Eigen::VectorXcd coefficients(const TarcProfile& profile, Side side) { return to_vector(profile, side).conjugate(); }

Eigen::MatrixXcd lift(const Eigen::VectorXcd& l) { return l * l.adjoint(); }

namespace {

double wrap_phase(double x) {
  const double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(x, two_pi);
  if (r < 0.0) r += two_pi;
  if (r >= two_pi) r = 0.0;
  return r;
}

Eigen::VectorXd phases_of(const Eigen::VectorXcd& l) {
  Eigen::VectorXd th(l.size());
  for (Eigen::Index i = 0; i < l.size(); ++i) th(i) = wrap_phase(-std::arg(l(i)));
  return th;
}

void clip_magnitudes(Eigen::VectorXcd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v(i));
    if (a > 1.0) v(i) /= a;
  }
}

// Eigen-decomposition based candidate generator shared by the single and
// joint extraction routines.
class CandidateSource {
 public:
  explicit CandidateSource(const Eigen::MatrixXcd& phi) {
    const Eigen::MatrixXcd h = 0.5 * (phi + phi.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(h);
    if (eig.info() != Eigen::Success) throw std::invalid_argument("extract_rank_one: eigen-decomposition failed");
    const Eigen::VectorXd& lam = eig.eigenvalues();
    const double top = lam.size() > 0 ? lam.maxCoeff() : 0.0;
    if (lam.size() > 0 && lam.minCoeff() < -1e-8 * std::max(1.0, top))
      throw std::invalid_argument("extract_rank_one: matrix is not positive semidefinite");
    root_ = eig.eigenvectors() * lam.cwiseMax(0.0).cwiseSqrt().asDiagonal();
    const Eigen::Index last = lam.size() - 1;
    principal_ = std::sqrt(std::max(top, 0.0)) * eig.eigenvectors().col(last);
  }

  Eigen::VectorXcd principal() const {
    Eigen::VectorXcd v = principal_;
    clip_magnitudes(v);
    return v;
  }

  Eigen::VectorXcd draw(Rng& rng) const {
    std::normal_distribution<double> n(0.0, std::sqrt(0.5));
    Eigen::VectorXcd g(root_.cols());
    for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = Complex(n(rng), n(rng));
    Eigen::VectorXcd v = root_ * g;
    clip_magnitudes(v);
    return v;
  }

 private:
  Eigen::MatrixXcd root_;
  Eigen::VectorXcd principal_;
};

}  // namespace

TarcProfile profile_from_vectors(Mode mode, const Eigen::VectorXcd& l_t, const Eigen::VectorXcd& l_r) {
  if (l_t.size() != l_r.size()) throw std::invalid_argument("profile_from_vectors: length mismatch");
  TarcProfile p;
  p.mode = mode;
  p.amplitude[Side::kT] = l_t.cwiseAbs2();
  p.amplitude[Side::kR] = l_r.cwiseAbs2();
  p.phase[Side::kT] = phases_of(l_t);
  p.phase[Side::kR] = phases_of(l_r);
  return p;
}

Eigen::VectorXcd extract_rank_one(const Eigen::MatrixXcd& phi,
                                  const std::function<double(const Eigen::VectorXcd&)>& objective_eval,
                                  int num_randomizations, Rng& rng) {
  if (phi.rows() != phi.cols()) throw std::invalid_argument("extract_rank_one: matrix is not square");
  if (num_randomizations < 0) throw std::invalid_argument("extract_rank_one: negative randomization count");
  const CandidateSource source(phi);
  Eigen::VectorXcd best = source.principal();
  double best_value = objective_eval(best);
  for (int k = 0; k < num_randomizations; ++k) {
    Eigen::VectorXcd c = source.draw(rng);
    const double v = objective_eval(c);
    if (v > best_value) {
      best_value = v;
      best = std::move(c);
    }
  }
  return best;
}

TarcProfile extract_profile(const LiftedProfile& lifted, Mode mode, const PerSide<Eigen::VectorXd>* fixed_amplitudes,
                            const std::function<double(const TarcProfile&)>& objective_eval, int num_randomizations,
                            Rng& rng) {
  const Eigen::Index m = lifted.phi[Side::kT].rows();
  if (mode != Mode::kES && fixed_amplitudes == nullptr)
    throw std::invalid_argument("extract_profile: switching modes need fixed amplitudes");
  const CandidateSource src_t(lifted.phi[Side::kT]);
  const CandidateSource src_r(lifted.phi[Side::kR]);

  PerSide<Eigen::VectorXd> diag_amp;
  if (mode == Mode::kES) {
    for (Side s : kSides) diag_amp[s] = lifted.phi[s].diagonal().real().cwiseMax(0.0).cwiseMin(1.0);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double sum = diag_amp[Side::kT](i) + diag_amp[Side::kR](i);
      if (sum > 0.0) {
        diag_amp[Side::kT](i) /= sum;
        diag_amp[Side::kR](i) = 1.0 - diag_amp[Side::kT](i);
      } else {
        diag_amp[Side::kT](i) = diag_amp[Side::kR](i) = 0.5;
      }
    }
  } else {
    diag_amp = *fixed_amplitudes;
  }

  TarcProfile best;
  double best_value = -std::numeric_limits<double>::infinity();
  bool have = false;
  auto consider = [&](TarcProfile&& p) {
    const double v = objective_eval(p);
    if (!have || v > best_value) {
      best_value = v;
      best = std::move(p);
      have = true;
    }
  };
  auto build = [&](const Eigen::VectorXcd& lt, const Eigen::VectorXcd& lr) {
    TarcProfile p;
    p.mode = mode;
    p.amplitude = diag_amp;
    p.phase[Side::kT] = phases_of(lt);
    p.phase[Side::kR] = phases_of(lr);
    consider(TarcProfile(p));
    if (mode == Mode::kES) {
      TarcProfile q = p;
      for (Eigen::Index i = 0; i < m; ++i) {
        const double at = std::norm(lt(i)), ar = std::norm(lr(i));
        const double sum = at + ar;
        q.amplitude[Side::kT](i) = sum > 0.0 ? at / sum : 0.5;
        q.amplitude[Side::kR](i) = 1.0 - q.amplitude[Side::kT](i);
      }
      consider(std::move(q));
    }
  };
  build(src_t.principal(), src_r.principal());
  for (int k = 0; k < num_randomizations; ++k) {
    const Eigen::VectorXcd lt = src_t.draw(rng);
    const Eigen::VectorXcd lr = src_r.draw(rng);
    build(lt, lr);
  }
  return best;
}

TarcProfile make_conventional(int m) {
  if (m < 2) throw std::invalid_argument("make_conventional: m must be >= 2");
  TarcProfile p;
  p.mode = Mode::kConventional;
  const int reflect = (m + 1) / 2;
  p.amplitude[Side::kR] = Eigen::VectorXd::Zero(m);
  p.amplitude[Side::kR].head(reflect).setOnes();
  p.amplitude[Side::kT] = Eigen::VectorXd::Ones(m) - p.amplitude[Side::kR];
  for (Side s : kSides) p.phase[s] = Eigen::VectorXd::Zero(m);
  return p;
}

TarcProfile make_uniform_split(int m) {
  if (m < 1) throw std::invalid_argument("make_uniform_split: m must be >= 1");
  TarcProfile p;
  p.mode = Mode::kES;
  for (Side s : kSides) {
    p.amplitude[s] = Eigen::VectorXd::Constant(m, 0.5);
    p.phase[s] = Eigen::VectorXd::Zero(m);
  }
  return p;
}

double binarity_gap(const Eigen::VectorXd& alpha) {
  double g = 0.0;
  for (Eigen::Index i = 0; i < alpha.size(); ++i) g = std::max(g, std::min(alpha(i), 1.0 - alpha(i)));
  return g;
}

}  // namespace starris
