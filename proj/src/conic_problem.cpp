#include "starris/conic_problem.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace starris::conic {

LinearExpr& LinearExpr::add(ScalarVar v, double coef) {
  if (v.id < 0) throw std::invalid_argument("LinearExpr: unknown scalar variable");
  scalars_.emplace_back(v.id, coef);
  return *this;
}

LinearExpr& LinearExpr::add(PsdVar v, const Eigen::MatrixXcd& coef) {
  if (v.block < 0 || coef.rows() != v.order || coef.cols() != v.order)
    throw std::invalid_argument("LinearExpr: PSD coefficient does not match the variable order");
  psd_dense_.push_back({v.block, coef});
  return *this;
}

LinearExpr& LinearExpr::add_diagonal(PsdVar v, int index, double coef) {
  if (v.block < 0 || index < 0 || index >= v.order)
    throw std::invalid_argument("LinearExpr: PSD diagonal index out of range");
  psd_diag_.push_back({v.block, index, coef});
  return *this;
}

LinearExpr& LinearExpr::add_t(SocVar v, double coef) {
  if (v.block < 0) throw std::invalid_argument("LinearExpr: unknown SOC variable");
  soc_.push_back({v.block, coef, Eigen::VectorXcd()});
  return *this;
}

LinearExpr& LinearExpr::add_x(SocVar v, const Eigen::VectorXcd& coef) {
  if (v.block < 0 || coef.size() != v.size)
    throw std::invalid_argument("LinearExpr: SOC coefficient does not match the variable size");
  soc_.push_back({v.block, 0.0, coef});
  return *this;
}

LinearExpr& LinearExpr::add_constant(double c) {
  constant_ += c;
  return *this;
}

ScalarVar ConicProblem::add_scalar(double lower) {
  if (!std::isfinite(lower)) throw std::invalid_argument("ConicProblem: scalar lower bound must be finite");
  scalars_.push_back({false, lower, lp_count_});
  lp_count_ += 1;
  return {static_cast<int>(scalars_.size()) - 1};
}

ScalarVar ConicProblem::add_free_scalar() {
  scalars_.push_back({true, 0.0, lp_count_});
  lp_count_ += 2;
  return {static_cast<int>(scalars_.size()) - 1};
}

PsdVar ConicProblem::add_psd(int order) {
  if (order < 1) throw std::invalid_argument("ConicProblem: PSD order must be positive");
  psd_orders_.push_back(order);
  return {static_cast<int>(psd_orders_.size()) - 1, order};
}

SocVar ConicProblem::add_soc(int size) {
  if (size < 0) throw std::invalid_argument("ConicProblem: SOC size must be non-negative");
  soc_sizes_.push_back(size);
  return {static_cast<int>(soc_sizes_.size()) - 1, size};
}

void ConicProblem::add_equality(const LinearExpr& e, double rhs) { constraints_.push_back({e, rhs, 0}); }
void ConicProblem::add_greater_equal(const LinearExpr& e, double rhs) { constraints_.push_back({e, rhs, +1}); }
void ConicProblem::add_less_equal(const LinearExpr& e, double rhs) { constraints_.push_back({e, rhs, -1}); }

void ConicProblem::minimize(const LinearExpr& e) {
  objective_ = e;
  maximize_ = false;
}

void ConicProblem::maximize(const LinearExpr& e) {
  objective_ = e;
  maximize_ = true;
}

Row ConicProblem::to_row(const LinearExpr& e, double& shift) const {
  Row row;
  shift = 0.0;
  std::map<int, double> lp;
  for (const auto& [id, coef] : e.scalars_) {
    if (id >= static_cast<int>(scalars_.size())) throw std::invalid_argument("ConicProblem: foreign scalar variable");
    const ScalarInfo& s = scalars_[id];
    if (s.free) {
      lp[s.lp_index] += coef;
      lp[s.lp_index + 1] -= coef;
    } else {
      lp[s.lp_index] += coef;
      shift += coef * s.lower;
    }
  }
  for (const auto& [i, v] : lp)
    if (v != 0.0) row.lp.emplace_back(i, v);

  std::map<int, PsdCoefficient> psd;
  for (const auto& d : e.psd_dense_) {
    if (d.block >= static_cast<int>(psd_orders_.size())) throw std::invalid_argument("ConicProblem: foreign PSD variable");
    PsdCoefficient& c = psd[d.block];
    c.block = d.block;
    if (c.dense.size() == 0) c.dense = Eigen::MatrixXcd::Zero(psd_orders_[d.block], psd_orders_[d.block]);
    c.dense += 0.5 * (d.coef + d.coef.adjoint());
  }
  for (const auto& d : e.psd_diag_) {
    if (d.block >= static_cast<int>(psd_orders_.size())) throw std::invalid_argument("ConicProblem: foreign PSD variable");
    PsdCoefficient& c = psd[d.block];
    c.block = d.block;
    c.diagonal.emplace_back(d.index, d.coef);
  }
  for (auto& [b, c] : psd) {
    // Fold diagonal terms into a dense coefficient when one exists.
    if (c.dense.size() > 0) {
      for (const auto& [i, v] : c.diagonal) c.dense(i, i) += v;
      c.diagonal.clear();
    } else {
      std::map<int, double> merged;
      for (const auto& [i, v] : c.diagonal) merged[i] += v;
      c.diagonal.assign(merged.begin(), merged.end());
    }
    row.psd.push_back(std::move(c));
  }

  std::map<int, Eigen::VectorXd> soc;
  for (const auto& t : e.soc_) {
    if (t.block >= static_cast<int>(soc_sizes_.size())) throw std::invalid_argument("ConicProblem: foreign SOC variable");
    const int n = soc_sizes_[t.block];
    auto it = soc.find(t.block);
    if (it == soc.end()) it = soc.emplace(t.block, Eigen::VectorXd::Zero(1 + 2 * n)).first;
    it->second(0) += t.t_coef;
    for (Eigen::Index i = 0; i < t.x_coef.size(); ++i) {
      it->second(1 + 2 * i) += t.x_coef(i).real();
      it->second(2 + 2 * i) += t.x_coef(i).imag();
    }
  }
  for (auto& [b, v] : soc) row.soc.push_back({b, std::move(v)});
  return row;
}

StandardForm ConicProblem::compile() const {
  StandardForm sf;
  int slack_count = 0;
  for (const auto& c : constraints_)
    if (c.sense != 0) ++slack_count;
  sf.layout.lp = lp_count_ + slack_count;
  for (int n : soc_sizes_) sf.layout.soc.push_back(1 + 2 * n);
  sf.layout.psd = psd_orders_;

  std::vector<double> rhs;
  int slack = lp_count_;
  for (const auto& c : constraints_) {
    double shift = 0.0;
    Row row = to_row(c.expr, shift);
    if (c.sense != 0) row.lp.emplace_back(slack++, c.sense > 0 ? -1.0 : 1.0);
    double b = c.rhs - c.expr.constant() - shift;
    const double n = std::sqrt(row.squared_norm());
    if (n > 0.0) {
      for (auto& [i, v] : row.lp) v /= n;
      for (auto& s : row.soc) s.coef /= n;
      for (auto& p : row.psd) {
        if (p.dense.size() > 0) p.dense /= n;
        for (auto& [i, v] : p.diagonal) v /= n;
      }
      b /= n;
    }
    sf.rows.push_back(std::move(row));
    rhs.push_back(b);
  }
  sf.b = Eigen::Map<Eigen::VectorXd>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));

  double shift = 0.0;
  const Row obj = to_row(objective_, shift);
  sf.c = ConeVector::zeros(sf.layout);
  obj.accumulate(maximize_ ? -1.0 : 1.0, sf.c);
  const double cn = norm(sf.c);
  if (cn > 1.0) sf.c.scale(1.0 / cn);
  return sf;
}

ConicSolution ConicProblem::solve(const Settings& settings) const {
  ConicSolution out;
  StandardForm sf = compile();

  // A constraint without variables is either redundant or contradictory.
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < sf.rows.size(); ++i) {
    const Row& r = sf.rows[i];
    if (r.lp.empty() && r.soc.empty() && r.psd.empty()) {
      if (std::abs(sf.b(static_cast<Eigen::Index>(i))) > 1e-12) {
        out.status = Status::kInfeasible;
        return out;
      }
      continue;
    }
    keep.push_back(i);
  }
  if (keep.size() != sf.rows.size()) {
    std::vector<Row> rows;
    Eigen::VectorXd b(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
      rows.push_back(sf.rows[keep[k]]);
      b(static_cast<Eigen::Index>(k)) = sf.b(static_cast<Eigen::Index>(keep[k]));
    }
    sf.rows = std::move(rows);
    sf.b = b;
  }

  const Solution sol = conic::solve(sf, settings);
  out.status = sol.status;
  out.reduced_accuracy = sol.reduced_accuracy;
  out.iterations = sol.iterations;
  out.primal_residual = sol.primal_residual;
  out.dual_residual = sol.dual_residual;
  if (sol.status != Status::kOptimal) return out;

  out.scalars_.resize(scalars_.size());
  for (std::size_t i = 0; i < scalars_.size(); ++i) {
    const ScalarInfo& s = scalars_[i];
    out.scalars_[i] = s.free ? sol.x.lp(s.lp_index) - sol.x.lp(s.lp_index + 1) : s.lower + sol.x.lp(s.lp_index);
  }
  out.psd_ = sol.x.psd;
  for (std::size_t b = 0; b < soc_sizes_.size(); ++b) {
    const Eigen::VectorXd& v = sol.x.soc[b];
    Eigen::VectorXcd x(soc_sizes_[b]);
    for (int i = 0; i < soc_sizes_[b]; ++i) x(i) = Complex(v(1 + 2 * i), v(2 + 2 * i));
    out.soc_t_.push_back(v(0));
    out.soc_x_.push_back(std::move(x));
  }

  double shift = 0.0;
  const Row obj = to_row(objective_, shift);
  out.objective = obj.dot(sol.x) + shift + objective_.constant();
  return out;
}

}  // namespace starris::conic
