#pragma once

// Primal-dual interior-point solver for linear programs over the product cone
//
//   K = R+^l  x  Q^{q_1} x ... x Q^{q_k}  x  H+^{n_1} x ... x H+^{n_p}
//
// where Q^q is the real second-order cone {(t, x) : |x| <= t} of dimension q
// and H+^n is the cone of n x n complex Hermitian positive semidefinite
// matrices. Problems are given in standard form
//
//   minimize <c, x>   subject to   <a_i, x> = b_i,  x in K
//
// and are solved through the homogeneous self-dual embedding, so primal and
// dual infeasibility are detected from certificates rather than iteration
// caps.

#include <complex>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace starris::conic {

using Complex = std::complex<double>;

struct ConeLayout {
  int lp = 0;
  std::vector<int> soc;  // real dimension of each block, leading t included
  std::vector<int> psd;  // order of each Hermitian block

  // Barrier degree: l + number of SOC blocks + sum of PSD orders.
  int degree() const;
};

// A point in the product cone's ambient space.
struct ConeVector {
  Eigen::VectorXd lp;
  std::vector<Eigen::VectorXd> soc;
  std::vector<Eigen::MatrixXcd> psd;

  static ConeVector zeros(const ConeLayout& layout);
  static ConeVector identity(const ConeLayout& layout);

  // this += alpha * other
  void axpy(double alpha, const ConeVector& other);
  void scale(double alpha);
};

// <u, v> = u_lp . v_lp + sum u_soc . v_soc + sum Re tr(U^H V)
double inner(const ConeVector& u, const ConeVector& v);
double norm(const ConeVector& u);

// Coefficient of one PSD block in a constraint row. The block contributes
// Re tr(C X) with C = dense + diag(diagonal); either part may be empty.
struct PsdCoefficient {
  int block = 0;
  std::vector<std::pair<int, double>> diagonal;
  Eigen::MatrixXcd dense;  // Hermitian, or 0x0 when absent
};

struct SocCoefficient {
  int block = 0;
  Eigen::VectorXd coef;
};

struct Row {
  std::vector<std::pair<int, double>> lp;
  std::vector<SocCoefficient> soc;
  std::vector<PsdCoefficient> psd;

  double dot(const ConeVector& x) const;
  // out += alpha * row
  void accumulate(double alpha, ConeVector& out) const;
  double squared_norm() const;
};

struct StandardForm {
  ConeLayout layout;
  ConeVector c;
  std::vector<Row> rows;
  Eigen::VectorXd b;
};

enum class Status {
  kOptimal,
  kInfeasible,  // primal infeasible: a Farkas certificate was found
  kUnbounded,   // dual infeasible
  kNumericalFailure,
};

std::string to_string(Status status);

struct Settings {
  double feasibility_tol = 1e-9;
  double gap_abs_tol = 1e-9;
  double gap_rel_tol = 1e-9;
  double infeasibility_tol = 1e-9;
  // Accuracy accepted as "optimal, reduced accuracy" when the method stalls.
  double reduced_tol = 1e-6;
  int max_iterations = 100;
  double step_fraction = 0.99;
};

struct Solution {
  Status status = Status::kNumericalFailure;
  bool reduced_accuracy = false;
  ConeVector x;
  ConeVector z;
  Eigen::VectorXd y;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double primal_residual = 0.0;  // |Ax - b| / max(1, |b|)
  double dual_residual = 0.0;    // |A'y + z - c| / max(1, |c|)
  double gap = 0.0;              // <x, z>
  int iterations = 0;
};

// Throws std::invalid_argument when rows or c do not match the layout.
Solution solve(const StandardForm& problem, const Settings& settings = {});

}  // namespace starris::conic
