#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace hdvplan {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

/// minimize 1/2 x'Px + q'x  subject to  l <= Ax <= u.
/// P is stored as the full symmetric matrix. Bounds may be +-infinity;
/// rows with l == u are equalities.
struct QpProblem {
  SparseMatrix P;
  Eigen::VectorXd q;
  SparseMatrix A;
  Eigen::VectorXd l;
  Eigen::VectorXd u;

  Eigen::Index num_variables() const { return q.size(); }
  Eigen::Index num_constraints() const { return l.size(); }
  /// Throws ValidationError on inconsistent dimensions or l > u.
  void validate() const;
};

struct QpSettings {
  double eps_abs = 1e-6;
  double eps_rel = 1e-6;
  int max_iter = 4000;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  bool adaptive_rho = true;
  int adaptive_rho_interval = 25;
  int scaling_iterations = 10;
  double eps_primal_infeasible = 1e-5;
  double eps_dual_infeasible = 1e-5;
  bool polish = true;
  int polish_refine_iterations = 50;  // upper bound; stops once the KKT residual stalls
};

enum class QpStatus { solved, max_iterations, primal_infeasible, dual_infeasible };

const char* to_string(QpStatus status);

struct QpResiduals {
  double primal = 0.0;  // ||Ax - proj_[l,u](Ax)||_inf
  double dual = 0.0;    // ||Px + q + A'y||_inf
};

/// Residuals of a primal/dual pair; the same function fills
/// QpSolution::residuals.
QpResiduals qp_residuals(const QpProblem& qp, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

struct QpSolution {
  QpStatus status = QpStatus::max_iterations;
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  QpResiduals residuals;
  int iterations = 0;
  bool polished = false;
  double objective = 0.0;
};

struct QpWarmStart {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
};

/// Operator-splitting (ADMM) solver with Ruiz equilibration, adaptive rho,
/// infeasibility detection and active-set polishing. Deterministic for
/// identical inputs.
QpSolution solve_qp(const QpProblem& qp, const QpSettings& settings = {},
                    const QpWarmStart* warm_start = nullptr);

}  // namespace hdvplan
