#include "starris/conic_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace starris::conic {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void make_hermitian(MatrixXcd& m) {
  m = (0.5 * (m + m.adjoint())).eval();
}

// Nesterov-Todd scaling of one second-order cone block: W = eta * H(wbar),
// H(w) = [[w0, w1'], [w1, I + w1 w1' / (1 + w0)]], w0^2 - |w1|^2 = 1.
struct SocScale {
  double eta = 1.0;
  VectorXd wbar;
};

// Nesterov-Todd scaling of one Hermitian block: W(dX) = R^-1 dX R^-H and
// W^-T(dZ) = R^H dZ R, with R^-1 X R^-H = R^H Z R = diag(lambda).
struct PsdScale {
  MatrixXcd r;
  MatrixXcd rinv;
  MatrixXcd w;  // R R^H, the NT scaling point
  VectorXd lambda;
};

struct Scaling {
  VectorXd lp_d;  // sqrt(x / z)
  std::vector<SocScale> soc;
  std::vector<PsdScale> psd;
  ConeVector lambda;
};

VectorXd hyperbolic(const VectorXd& wbar, const VectorXd& v, double sign) {
  const auto q = v.size();
  VectorXd out(q);
  const double w0 = wbar(0);
  const double a = wbar.tail(q - 1).dot(v.tail(q - 1));
  out(0) = w0 * v(0) + sign * a;
  out.tail(q - 1) = v.tail(q - 1) + (sign * v(0) + a / (1.0 + w0)) * wbar.tail(q - 1);
  return out;
}

double soc_residual(const VectorXd& x) {
  const double n1 = x.tail(x.size() - 1).norm();
  return (x(0) - n1) * (x(0) + n1);
}

bool factor_hermitian(const MatrixXcd& a, MatrixXcd& l) {
  Eigen::LLT<MatrixXcd> llt(a);
  if (llt.info() == Eigen::Success) {
    l = llt.matrixL();
    if (l.allFinite()) return true;
  }
  Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(a);
  if (eig.info() != Eigen::Success) return false;
  VectorXd d = eig.eigenvalues();
  const double floor = 1e-300 + 1e-15 * std::max(1.0, d.cwiseAbs().maxCoeff());
  if (d.minCoeff() <= 0.0) return false;
  for (auto& v : d.array()) v = std::sqrt(std::max(v, floor));
  // Any square root works for the NT construction; it need not be triangular.
  l = eig.eigenvectors() * d.asDiagonal();
  return true;
}

bool compute_scaling(const ConeLayout& layout, const ConeVector& x, const ConeVector& z,
                     Scaling& s) {
  s.lambda = ConeVector::zeros(layout);
  if (layout.lp > 0) {
    if ((x.lp.array() <= 0.0).any() || (z.lp.array() <= 0.0).any()) return false;
    s.lp_d = (x.lp.array() / z.lp.array()).sqrt();
    s.lambda.lp = (x.lp.array() * z.lp.array()).sqrt();
  }
  s.soc.resize(layout.soc.size());
  for (std::size_t k = 0; k < layout.soc.size(); ++k) {
    const VectorXd& xk = x.soc[k];
    const VectorXd& zk = z.soc[k];
    const double xr2 = soc_residual(xk);
    const double zr2 = soc_residual(zk);
    if (!(xr2 > 0.0) || !(zr2 > 0.0) || xk(0) <= 0.0 || zk(0) <= 0.0) return false;
    const double xr = std::sqrt(xr2);
    const double zr = std::sqrt(zr2);
    const VectorXd xb = xk / xr;
    const VectorXd zb = zk / zr;
    const double gamma = std::sqrt(0.5 * (1.0 + xb.dot(zb)));
    VectorXd wbar(xk.size());
    wbar(0) = (zb(0) + xb(0)) / (2.0 * gamma);
    wbar.tail(xk.size() - 1) =
        (zb.tail(xk.size() - 1) - xb.tail(xk.size() - 1)) / (2.0 * gamma);
    s.soc[k].eta = std::sqrt(zr / xr);
    s.soc[k].wbar = wbar;
    s.lambda.soc[k] = s.soc[k].eta * hyperbolic(wbar, xk, 1.0);
  }
  s.psd.resize(layout.psd.size());
  for (std::size_t k = 0; k < layout.psd.size(); ++k) {
    MatrixXcd lx, lz;
    if (!factor_hermitian(x.psd[k], lx) || !factor_hermitian(z.psd[k], lz)) return false;
    const MatrixXcd a = lz.adjoint() * lx;
    VectorXd sigma;
    MatrixXcd u, v;
    // Gram eigenproblem, with a full SVD fallback for ill-conditioned pairs.
    Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(a.adjoint() * a);
    if (eig.info() == Eigen::Success && eig.eigenvalues().minCoeff() > 1e-12 * eig.eigenvalues().maxCoeff()) {
      sigma = eig.eigenvalues().cwiseSqrt();
      v = eig.eigenvectors();
      u = a * v * sigma.cwiseInverse().asDiagonal();
    } else {
      Eigen::JacobiSVD<MatrixXcd> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
      sigma = svd.singularValues();
      u = svd.matrixU();
      v = svd.matrixV();
    }
    if (!(sigma.minCoeff() > 0.0) || !sigma.allFinite()) return false;
    const VectorXd isq = sigma.cwiseSqrt().cwiseInverse();
    PsdScale& p = s.psd[k];
    p.r = lx * v * isq.asDiagonal();
    p.rinv = isq.asDiagonal() * u.adjoint() * lz.adjoint();
    p.w = p.r * p.r.adjoint();
    make_hermitian(p.w);
    p.lambda = sigma;
    s.lambda.psd[k] = sigma.cast<Complex>().asDiagonal();
  }
  return true;
}

// W dx
ConeVector scale_x(const Scaling& s, const ConeVector& v) {
  ConeVector out = v;
  if (v.lp.size() > 0) out.lp = v.lp.array() / s.lp_d.array();
  for (std::size_t k = 0; k < v.soc.size(); ++k)
    out.soc[k] = s.soc[k].eta * hyperbolic(s.soc[k].wbar, v.soc[k], 1.0);
  for (std::size_t k = 0; k < v.psd.size(); ++k) {
    out.psd[k] = s.psd[k].rinv * v.psd[k] * s.psd[k].rinv.adjoint();
    make_hermitian(out.psd[k]);
  }
  return out;
}

// W^-T dz
ConeVector scale_z(const Scaling& s, const ConeVector& v) {
  ConeVector out = v;
  if (v.lp.size() > 0) out.lp = v.lp.array() * s.lp_d.array();
  for (std::size_t k = 0; k < v.soc.size(); ++k)
    out.soc[k] = hyperbolic(s.soc[k].wbar, v.soc[k], -1.0) / s.soc[k].eta;
  for (std::size_t k = 0; k < v.psd.size(); ++k) {
    out.psd[k] = s.psd[k].r.adjoint() * v.psd[k] * s.psd[k].r;
    make_hermitian(out.psd[k]);
  }
  return out;
}

// W^-1 v, mapping a scaled vector back to x-space
ConeVector unscale_x(const Scaling& s, const ConeVector& v) {
  ConeVector out = v;
  if (v.lp.size() > 0) out.lp = v.lp.array() * s.lp_d.array();
  for (std::size_t k = 0; k < v.soc.size(); ++k)
    out.soc[k] = hyperbolic(s.soc[k].wbar, v.soc[k], -1.0) / s.soc[k].eta;
  for (std::size_t k = 0; k < v.psd.size(); ++k) {
    out.psd[k] = s.psd[k].r * v.psd[k] * s.psd[k].r.adjoint();
    make_hermitian(out.psd[k]);
  }
  return out;
}

// H^-1 u = W^-1 W^-T u
ConeVector apply_hinv(const Scaling& s, const ConeVector& u) {
  return unscale_x(s, scale_z(s, u));
}

// H^-1 applied to a single constraint row, exploiting diagonal-only blocks.
ConeVector hinv_row(const ConeLayout& layout, const Scaling& s, const Row& row) {
  ConeVector out = ConeVector::zeros(layout);
  for (const auto& [i, v] : row.lp) out.lp(i) += s.lp_d(i) * s.lp_d(i) * v;
  for (const auto& c : row.soc) {
    const SocScale& sc = s.soc[c.block];
    const VectorXd t = hyperbolic(sc.wbar, c.coef, -1.0);
    out.soc[c.block] += hyperbolic(sc.wbar, t, -1.0) / (sc.eta * sc.eta);
  }
  for (const auto& c : row.psd) {
    const MatrixXcd& w = s.psd[c.block].w;
    MatrixXcd& o = out.psd[c.block];
    if (c.dense.size() > 0) o += w * c.dense * w;
    for (const auto& [p, v] : c.diagonal) o += v * (w.col(p) * w.row(p));
  }
  for (auto& m : out.psd) make_hermitian(m);
  return out;
}

ConeVector jordan(const ConeVector& u, const ConeVector& v) {
  ConeVector out = u;
  if (u.lp.size() > 0) out.lp = u.lp.cwiseProduct(v.lp);
  for (std::size_t k = 0; k < u.soc.size(); ++k) {
    const auto q = u.soc[k].size();
    out.soc[k](0) = u.soc[k].dot(v.soc[k]);
    out.soc[k].tail(q - 1) = u.soc[k](0) * v.soc[k].tail(q - 1) + v.soc[k](0) * u.soc[k].tail(q - 1);
  }
  for (std::size_t k = 0; k < u.psd.size(); ++k) {
    out.psd[k] = 0.5 * (u.psd[k] * v.psd[k] + v.psd[k] * u.psd[k]);
  }
  return out;
}

// Solves lambda o d = r for d, lambda being the scaled point.
ConeVector jordan_solve(const Scaling& s, const ConeVector& r) {
  const ConeVector& lam = s.lambda;
  ConeVector out = r;
  if (r.lp.size() > 0) out.lp = r.lp.array() / lam.lp.array();
  for (std::size_t k = 0; k < r.soc.size(); ++k) {
    const VectorXd& l = lam.soc[k];
    const VectorXd& rk = r.soc[k];
    const auto q = l.size();
    const double det = soc_residual(l);
    const double l1r1 = l.tail(q - 1).dot(rk.tail(q - 1));
    const double d0 = (l(0) * rk(0) - l1r1) / det;
    out.soc[k](0) = d0;
    out.soc[k].tail(q - 1) = (rk.tail(q - 1) - d0 * l.tail(q - 1)) / l(0);
  }
  for (std::size_t k = 0; k < r.psd.size(); ++k) {
    const VectorXd& l = s.psd[k].lambda;
    const auto n = l.size();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) out.psd[k](i, j) = 2.0 * r.psd[k](i, j) / (l(i) + l(j));
  }
  return out;
}

double soc_step(const VectorXd& l, const VectorXd& d) {
  const auto q = l.size();
  const double a = d(0) * d(0) - d.tail(q - 1).squaredNorm();
  const double b = l(0) * d(0) - l.tail(q - 1).dot(d.tail(q - 1));
  const double c = soc_residual(l);
  // f(alpha) = a alpha^2 + 2 b alpha + c, f(0) = c > 0; first positive root.
  double best = kInf;
  if (std::abs(a) < 1e-300) {
    if (b < 0.0) best = -c / (2.0 * b);
  } else {
    const double disc = b * b - a * c;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      const double qv = -(b + std::copysign(sq, b));
      const double r1 = qv / a;
      const double r2 = c / qv;
      for (double root : {r1, r2})
        if (std::isfinite(root) && root > 0.0) best = std::min(best, root);
    }
  }
  if (d(0) < 0.0) best = std::min(best, -l(0) / d(0));
  return best;
}

double step_to_boundary(const Scaling& s, const ConeVector& d) {
  double alpha = kInf;
  const ConeVector& lam = s.lambda;
  for (Eigen::Index i = 0; i < d.lp.size(); ++i)
    if (d.lp(i) < 0.0) alpha = std::min(alpha, -lam.lp(i) / d.lp(i));
  for (std::size_t k = 0; k < d.soc.size(); ++k) alpha = std::min(alpha, soc_step(lam.soc[k], d.soc[k]));
  for (std::size_t k = 0; k < d.psd.size(); ++k) {
    const VectorXd isq = s.psd[k].lambda.cwiseSqrt().cwiseInverse();
    MatrixXcd m = isq.asDiagonal() * d.psd[k] * isq.asDiagonal();
    make_hermitian(m);
    Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(m, Eigen::EigenvaluesOnly);
    const double mn = eig.eigenvalues().minCoeff();
    if (mn < 0.0) alpha = std::min(alpha, -1.0 / mn);
  }
  return alpha;
}

VectorXd apply_a(const StandardForm& p, const ConeVector& x) {
  VectorXd out(p.rows.size());
  for (std::size_t i = 0; i < p.rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = p.rows[i].dot(x);
  return out;
}

ConeVector apply_at(const StandardForm& p, const VectorXd& y) {
  ConeVector out = ConeVector::zeros(p.layout);
  for (std::size_t i = 0; i < p.rows.size(); ++i) p.rows[i].accumulate(y(static_cast<Eigen::Index>(i)), out);
  return out;
}

struct Direction {
  ConeVector dx, dz;
  VectorXd dy;
  double dtau = 0.0;
  double dkappa = 0.0;
};

class SchurSolver {
 public:
  bool factor(const MatrixXd& s) {
    const auto m = s.rows();
    if (m == 0) return true;
    const double reg = 1e-13 * std::max(1.0, s.diagonal().cwiseAbs().maxCoeff());
    matrix_ = s;
    regularized_ = s + reg * MatrixXd::Identity(m, m);
    llt_.compute(regularized_);
    use_llt_ = llt_.info() == Eigen::Success;
    if (!use_llt_) {
      ldlt_.compute(regularized_);
      if (ldlt_.info() != Eigen::Success) return false;
    }
    return true;
  }

  VectorXd solve(const VectorXd& rhs) const {
    if (rhs.size() == 0) return rhs;
    VectorXd x = use_llt_ ? VectorXd(llt_.solve(rhs)) : VectorXd(ldlt_.solve(rhs));
    // One step of iterative refinement against the unregularized matrix.
    const VectorXd r = rhs - matrix_ * x;
    x += use_llt_ ? VectorXd(llt_.solve(r)) : VectorXd(ldlt_.solve(r));
    return x;
  }

 private:
  MatrixXd matrix_;
  MatrixXd regularized_;
  Eigen::LLT<MatrixXd> llt_;
  Eigen::LDLT<MatrixXd> ldlt_;
  bool use_llt_ = true;
};

void validate(const StandardForm& p) {
  const ConeLayout& l = p.layout;
  auto check_vec = [&](const ConeVector& v, const char* what) {
    bool ok = v.lp.size() == l.lp && v.soc.size() == l.soc.size() && v.psd.size() == l.psd.size();
    for (std::size_t k = 0; ok && k < l.soc.size(); ++k) ok = v.soc[k].size() == l.soc[k];
    for (std::size_t k = 0; ok && k < l.psd.size(); ++k)
      ok = v.psd[k].rows() == l.psd[k] && v.psd[k].cols() == l.psd[k];
    if (!ok) throw std::invalid_argument(std::string("conic: ") + what + " does not match the cone layout");
  };
  check_vec(p.c, "objective");
  for (int q : l.soc)
    if (q < 1) throw std::invalid_argument("conic: second-order cone of dimension < 1");
  if (static_cast<std::size_t>(p.b.size()) != p.rows.size())
    throw std::invalid_argument("conic: right-hand side size differs from the row count");
  for (const Row& r : p.rows) {
    for (const auto& [i, v] : r.lp)
      if (i < 0 || i >= l.lp) throw std::invalid_argument("conic: row references an unknown LP entry");
    for (const auto& c : r.soc)
      if (c.block < 0 || c.block >= static_cast<int>(l.soc.size()) || c.coef.size() != l.soc[c.block])
        throw std::invalid_argument("conic: row references an unknown SOC block");
    for (const auto& c : r.psd) {
      if (c.block < 0 || c.block >= static_cast<int>(l.psd.size()))
        throw std::invalid_argument("conic: row references an unknown PSD block");
      const int n = l.psd[c.block];
      if (c.dense.size() > 0 && (c.dense.rows() != n || c.dense.cols() != n))
        throw std::invalid_argument("conic: PSD coefficient has the wrong order");
      for (const auto& [i, v] : c.diagonal)
        if (i < 0 || i >= n) throw std::invalid_argument("conic: PSD diagonal index out of range");
    }
  }
}

}  // namespace

int ConeLayout::degree() const {
  int d = lp + static_cast<int>(soc.size());
  for (int n : psd) d += n;
  return d;
}

ConeVector ConeVector::zeros(const ConeLayout& layout) {
  ConeVector v;
  v.lp = VectorXd::Zero(layout.lp);
  for (int q : layout.soc) v.soc.push_back(VectorXd::Zero(q));
  for (int n : layout.psd) v.psd.push_back(MatrixXcd::Zero(n, n));
  return v;
}

ConeVector ConeVector::identity(const ConeLayout& layout) {
  ConeVector v = zeros(layout);
  v.lp.setOnes();
  for (auto& s : v.soc) s(0) = 1.0;
  for (auto& m : v.psd) m.setIdentity();
  return v;
}

void ConeVector::axpy(double alpha, const ConeVector& other) {
  lp += alpha * other.lp;
  for (std::size_t k = 0; k < soc.size(); ++k) soc[k] += alpha * other.soc[k];
  for (std::size_t k = 0; k < psd.size(); ++k) psd[k] += alpha * other.psd[k];
}

void ConeVector::scale(double alpha) {
  lp *= alpha;
  for (auto& s : soc) s *= alpha;
  for (auto& m : psd) m *= alpha;
}

double inner(const ConeVector& u, const ConeVector& v) {
  double s = u.lp.dot(v.lp);
  for (std::size_t k = 0; k < u.soc.size(); ++k) s += u.soc[k].dot(v.soc[k]);
  for (std::size_t k = 0; k < u.psd.size(); ++k) s += (u.psd[k].conjugate().cwiseProduct(v.psd[k])).sum().real();
  return s;
}

double norm(const ConeVector& u) { return std::sqrt(std::max(0.0, inner(u, u))); }

double Row::dot(const ConeVector& x) const {
  double s = 0.0;
  for (const auto& [i, v] : lp) s += v * x.lp(i);
  for (const auto& c : soc) s += c.coef.dot(x.soc[c.block]);
  for (const auto& c : psd) {
    const MatrixXcd& m = x.psd[c.block];
    if (c.dense.size() > 0) s += (c.dense.conjugate().cwiseProduct(m)).sum().real();
    for (const auto& [i, v] : c.diagonal) s += v * m(i, i).real();
  }
  return s;
}

void Row::accumulate(double alpha, ConeVector& out) const {
  for (const auto& [i, v] : lp) out.lp(i) += alpha * v;
  for (const auto& c : soc) out.soc[c.block] += alpha * c.coef;
  for (const auto& c : psd) {
    MatrixXcd& m = out.psd[c.block];
    if (c.dense.size() > 0) m += alpha * c.dense;
    for (const auto& [i, v] : c.diagonal) m(i, i) += alpha * v;
  }
}

double Row::squared_norm() const {
  double s = 0.0;
  for (const auto& [i, v] : lp) s += v * v;
  for (const auto& c : soc) s += c.coef.squaredNorm();
  for (const auto& c : psd) {
    if (c.dense.size() == 0) {
      for (const auto& [i, v] : c.diagonal) s += v * v;
      continue;
    }
    MatrixXcd m = c.dense;
    for (const auto& [i, v] : c.diagonal) m(i, i) += v;
    s += m.squaredNorm();
  }
  return s;
}

std::string to_string(Status status) {
  switch (status) {
    case Status::kOptimal: return "optimal";
    case Status::kInfeasible: return "infeasible";
    case Status::kUnbounded: return "unbounded";
    case Status::kNumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

Solution solve(const StandardForm& p, const Settings& settings) {
  validate(p);
  const ConeLayout& layout = p.layout;
  const auto m = static_cast<Eigen::Index>(p.rows.size());
  const double nu = layout.degree();

  ConeVector x = ConeVector::identity(layout);
  ConeVector z = ConeVector::identity(layout);
  VectorXd y = VectorXd::Zero(m);
  double tau = 1.0;
  double kappa = 1.0;

  const double bnorm = std::max(1.0, p.b.norm());
  const double cnorm = std::max(1.0, norm(p.c));

  Solution sol;
  struct Snapshot {
    bool valid = false;
    double merit = kInf;
    ConeVector x, z;
    VectorXd y;
    double tau = 1.0;
  } best;

  auto finish = [&](Status status, const ConeVector& xs, const ConeVector& zs, const VectorXd& ys, double t) {
    sol.status = status;
    sol.x = xs;
    sol.z = zs;
    sol.y = ys;
    if (status == Status::kOptimal) {
      sol.x.scale(1.0 / t);
      sol.z.scale(1.0 / t);
      sol.y /= t;
    }
    sol.primal_objective = inner(p.c, sol.x);
    sol.dual_objective = p.b.dot(sol.y);
    sol.gap = inner(sol.x, sol.z);
    const VectorXd rp = apply_a(p, sol.x) - (status == Status::kOptimal ? p.b : VectorXd::Zero(m));
    ConeVector rd = apply_at(p, sol.y);
    rd.axpy(1.0, sol.z);
    if (status == Status::kOptimal) rd.axpy(-1.0, p.c);
    sol.primal_residual = rp.norm() / bnorm;
    sol.dual_residual = norm(rd) / cnorm;
    return sol;
  };

  for (int it = 0; it <= settings.max_iterations; ++it) {
    sol.iterations = it;
    const VectorXd ax = apply_a(p, x);
    const ConeVector aty = apply_at(p, y);
    const VectorXd rp = p.b * tau - ax;
    ConeVector rd = p.c;
    rd.scale(tau);
    rd.axpy(-1.0, aty);
    rd.axpy(-1.0, z);
    const double ctx = inner(p.c, x);
    const double bty = p.b.dot(y);
    const double rg = kappa + ctx - bty;
    const double xz = inner(x, z);
    const double mu = (xz + tau * kappa) / (nu + 1.0);

    const double pres = rp.norm() / tau / bnorm;
    const double dres = norm(rd) / tau / cnorm;
    const double pcost = ctx / tau;
    const double dcost = bty / tau;
    const double gap = xz / (tau * tau);
    const double relgap = std::min(gap, std::abs(pcost - dcost)) / std::max(1.0, std::min(std::abs(pcost), std::abs(dcost)));

    if (!std::isfinite(pres) || !std::isfinite(dres) || !std::isfinite(gap)) break;

    const double merit = std::max({pres, dres, relgap});
    if (merit < best.merit) best = {true, merit, x, z, y, tau};

    if (pres <= settings.feasibility_tol && dres <= settings.feasibility_tol &&
        (gap <= settings.gap_abs_tol || relgap <= settings.gap_rel_tol)) {
      return finish(Status::kOptimal, x, z, y, tau);
    }
    // Certificates: A'y + z = 0 with b'y > 0 (primal infeasible),
    // Ax = 0 with c'x < 0 (dual infeasible).
    if (bty > 0.0) {
      ConeVector cert = aty;
      cert.axpy(1.0, z);
      if (norm(cert) / bty <= settings.infeasibility_tol * cnorm && tau < kappa) {
        const double sc = 1.0 / bty;
        ConeVector zs = z;
        zs.scale(sc);
        sol.iterations = it;
        return finish(Status::kInfeasible, ConeVector::zeros(layout), zs, y * sc, 1.0);
      }
    }
    if (ctx < 0.0) {
      if (ax.norm() / -ctx <= settings.infeasibility_tol * bnorm && tau < kappa) {
        ConeVector xs = x;
        xs.scale(-1.0 / ctx);
        return finish(Status::kUnbounded, xs, ConeVector::zeros(layout), VectorXd::Zero(m), 1.0);
      }
    }
    if (it == settings.max_iterations) break;

    Scaling sc;
    if (!compute_scaling(layout, x, z, sc)) break;

    // Schur complement A H^-1 A'.
    std::vector<ConeVector> hrows;
    hrows.reserve(p.rows.size());
    for (const Row& r : p.rows) hrows.push_back(hinv_row(layout, sc, r));
    MatrixXd schur(m, m);
    for (Eigen::Index j = 0; j < m; ++j)
      for (Eigen::Index i = 0; i <= j; ++i) {
        const double v = 0.5 * (p.rows[i].dot(hrows[j]) + p.rows[j].dot(hrows[i]));
        schur(i, j) = v;
        schur(j, i) = v;
      }
    SchurSolver schur_solver;
    if (!schur_solver.factor(schur)) break;

    const ConeVector hc = apply_hinv(sc, p.c);
    const VectorXd dy2 = schur_solver.solve(p.b + apply_a(p, hc));
    ConeVector dx2 = apply_hinv(sc, apply_at(p, dy2));
    dx2.axpy(-1.0, hc);
    const double denom = p.b.dot(dy2) - inner(p.c, dx2) + kappa / tau;

    auto solve_newton = [&](const VectorXd& rp_hat, const ConeVector& rd_hat, double rg_hat, const ConeVector& xi,
                            double rtk) {
      Direction d;
      const ConeVector wxi = unscale_x(sc, xi);
      const ConeVector hrd = apply_hinv(sc, rd_hat);
      const VectorXd rhs = rp_hat + apply_a(p, hrd) - apply_a(p, wxi);
      const VectorXd dy1 = schur_solver.solve(rhs);
      ConeVector dx1 = apply_hinv(sc, apply_at(p, dy1));
      dx1.axpy(-1.0, hrd);
      dx1.axpy(1.0, wxi);
      d.dtau = (rg_hat - p.b.dot(dy1) + inner(p.c, dx1) + rtk / tau) / denom;
      d.dy = dy1 + d.dtau * dy2;
      d.dx = dx1;
      d.dx.axpy(d.dtau, dx2);
      d.dz = rd_hat;
      d.dz.axpy(-1.0, apply_at(p, d.dy));
      d.dz.axpy(d.dtau, p.c);
      d.dkappa = (rtk - kappa * d.dtau) / tau;
      return d;
    };

    auto max_step = [&](const Direction& d, ConeVector& dxs, ConeVector& dzs) {
      dxs = scale_x(sc, d.dx);
      dzs = scale_z(sc, d.dz);
      double a = std::min(step_to_boundary(sc, dxs), step_to_boundary(sc, dzs));
      if (d.dtau < 0.0) a = std::min(a, -tau / d.dtau);
      if (d.dkappa < 0.0) a = std::min(a, -kappa / d.dkappa);
      return a;
    };

    // Affine-scaling predictor.
    ConeVector neg_lambda = sc.lambda;
    neg_lambda.scale(-1.0);
    const Direction aff = solve_newton(rp, rd, rg, neg_lambda, -tau * kappa);
    ConeVector dxs_a, dzs_a;
    const double alpha_a = std::min(1.0, max_step(aff, dxs_a, dzs_a));
    const double sigma = std::pow(1.0 - alpha_a, 3);

    // Mehrotra corrector.
    ConeVector rc = jordan(sc.lambda, sc.lambda);
    rc.scale(-1.0);
    rc.axpy(-1.0, jordan(dxs_a, dzs_a));
    rc.axpy(sigma * mu, ConeVector::identity(layout));
    const ConeVector xi = jordan_solve(sc, rc);
    const double rtk = -tau * kappa - aff.dtau * aff.dkappa + sigma * mu;
    ConeVector rd_c = rd;
    rd_c.scale(1.0 - sigma);
    const Direction dir = solve_newton((1.0 - sigma) * rp, rd_c, (1.0 - sigma) * rg, xi, rtk);
    ConeVector dxs, dzs;
    const double alpha_max = max_step(dir, dxs, dzs);
    const double alpha = std::min(1.0, settings.step_fraction * alpha_max);
    if (!(alpha > 1e-12) || !std::isfinite(alpha)) break;

    x.axpy(alpha, dir.dx);
    z.axpy(alpha, dir.dz);
    y += alpha * dir.dy;
    tau += alpha * dir.dtau;
    kappa += alpha * dir.dkappa;
    for (auto& mx : x.psd) make_hermitian(mx);
    for (auto& mz : z.psd) make_hermitian(mz);
    if (!(tau > 0.0) || !(kappa > 0.0)) break;
  }

  if (best.valid && best.merit <= settings.reduced_tol) {
    finish(Status::kOptimal, best.x, best.z, best.y, best.tau);
    sol.reduced_accuracy = true;
    return sol;
  }
  return finish(Status::kNumericalFailure, x, z, y, tau);
}

}  // namespace starris::conic
