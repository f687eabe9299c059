#pragma once

// Modeling front end for the conic solver. Variables come in three kinds:
// real scalars (bounded below or free), complex Hermitian PSD matrices, and
// second-order-cone blocks (t, x) with x a complex vector and |x| <= t.
// Constraints are linear equalities and inequalities of affine expressions;
// cone membership is implied by the variable kind. The problem is compiled to
// standard form (slacks for inequalities, shifts for lower bounds, splitting
// for free scalars) before it is handed to the interior-point method.

#include <vector>

#include <Eigen/Dense>

#include "starris/conic_solver.hpp"

namespace starris::conic {

struct ScalarVar {
  int id = -1;
};

struct PsdVar {
  int block = -1;
  int order = 0;
};

struct SocVar {
  int block = -1;
  int size = 0;  // complex length of x
};

// Affine expression: sum of scalar terms, Re tr(C X) terms for PSD variables,
// coef_t * t + Re(c^H x) terms for SOC variables, and a constant.
class LinearExpr {
 public:
  LinearExpr() = default;
  explicit LinearExpr(double constant) : constant_(constant) {}

  LinearExpr& add(ScalarVar v, double coef);
  // Adds Re tr(C X); C must be Hermitian.
  LinearExpr& add(PsdVar v, const Eigen::MatrixXcd& coef);
  LinearExpr& add_diagonal(PsdVar v, int index, double coef);
  LinearExpr& add_t(SocVar v, double coef);
  // Adds Re(c^H x).
  LinearExpr& add_x(SocVar v, const Eigen::VectorXcd& coef);
  LinearExpr& add_constant(double c);

  double constant() const { return constant_; }

 private:
  friend class ConicProblem;
  struct PsdDense {
    int block;
    Eigen::MatrixXcd coef;
  };
  struct PsdDiag {
    int block;
    int index;
    double coef;
  };
  struct SocTerm {
    int block;
    double t_coef;
    Eigen::VectorXcd x_coef;  // empty when only t is referenced
  };
  std::vector<std::pair<int, double>> scalars_;
  std::vector<PsdDense> psd_dense_;
  std::vector<PsdDiag> psd_diag_;
  std::vector<SocTerm> soc_;
  double constant_ = 0.0;
};

class ConicSolution {
 public:
  Status status = Status::kNumericalFailure;
  bool reduced_accuracy = false;
  double objective = 0.0;  // in the sense requested (maximized or minimized)
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;

  bool optimal() const { return status == Status::kOptimal; }
  double value(ScalarVar v) const { return scalars_.at(v.id); }
  const Eigen::MatrixXcd& value(PsdVar v) const { return psd_.at(v.block); }
  double t(SocVar v) const { return soc_t_.at(v.block); }
  const Eigen::VectorXcd& x(SocVar v) const { return soc_x_.at(v.block); }

 private:
  friend class ConicProblem;
  std::vector<double> scalars_;
  std::vector<Eigen::MatrixXcd> psd_;
  std::vector<double> soc_t_;
  std::vector<Eigen::VectorXcd> soc_x_;
};

class ConicProblem {
 public:
  // x >= lower
  ScalarVar add_scalar(double lower = 0.0);
  ScalarVar add_free_scalar();
  PsdVar add_psd(int order);
  SocVar add_soc(int size);

  void add_equality(const LinearExpr& e, double rhs);
  void add_greater_equal(const LinearExpr& e, double rhs);
  void add_less_equal(const LinearExpr& e, double rhs);

  void minimize(const LinearExpr& e);
  void maximize(const LinearExpr& e);

  int num_constraints() const { return static_cast<int>(constraints_.size()); }

  StandardForm compile() const;
  ConicSolution solve(const Settings& settings = {}) const;

 private:
  struct ScalarInfo {
    bool free;
    double lower;
    int lp_index;  // for free scalars, lp_index is x+ and lp_index + 1 is x-
  };
  struct Constraint {
    LinearExpr expr;
    double rhs;
    int sense;  // 0: ==, +1: >=, -1: <=
  };

  Row to_row(const LinearExpr& e, double& shift) const;

  std::vector<ScalarInfo> scalars_;
  std::vector<int> psd_orders_;
  std::vector<int> soc_sizes_;
  std::vector<Constraint> constraints_;
  LinearExpr objective_;
  bool maximize_ = false;
  int lp_count_ = 0;
};

}  // namespace starris::conic
