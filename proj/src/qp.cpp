#include "hdvplan/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/SparseCholesky>

#include "hdvplan/errors.hpp"

namespace hdvplan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr double kRhoEqualityFactor = 1e3;
constexpr double kMinScaling = 1e-4;
constexpr double kMaxScaling = 1e4;
constexpr double kPolishDelta = 1e-6;

using Vec = Eigen::VectorXd;

double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

Vec col_inf_norms(const SparseMatrix& M) {
  Vec out = Vec::Zero(M.cols());
  for (Eigen::Index j = 0; j < M.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(M, j); it; ++it) out[j] = std::max(out[j], std::abs(it.value()));
  return out;
}

Vec row_inf_norms(const SparseMatrix& M) {
  Vec out = Vec::Zero(M.rows());
  for (Eigen::Index j = 0; j < M.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(M, j); it; ++it)
      out[it.row()] = std::max(out[it.row()], std::abs(it.value()));
  return out;
}

void scale_in_place(SparseMatrix& M, const Vec& left, const Vec& right) {
  for (Eigen::Index j = 0; j < M.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(M, j); it; ++it) it.valueRef() *= left[it.row()] * right[j];
}

double limit_scaling(double v) {
  if (v < kMinScaling) return 1.0;
  return std::min(v, kMaxScaling);
}

Vec clamp(const Vec& v, const Vec& lo, const Vec& hi) { return v.cwiseMax(lo).cwiseMin(hi); }

/// Problem data after Ruiz equilibration: P' = c D P D, q' = c D q,
/// A' = E A D, l' = E l, u' = E u.
struct Scaled {
  SparseMatrix P, A;
  Vec q, l, u;
  Vec D, E, Dinv, Einv;
  double c = 1.0;
  double cinv = 1.0;
};

Scaled equilibrate(const QpProblem& qp, int iterations) {
  Scaled s;
  s.P = qp.P;
  s.A = qp.A;
  s.q = qp.q;
  const auto n = qp.num_variables();
  const auto m = qp.num_constraints();
  s.D = Vec::Ones(n);
  s.E = Vec::Ones(m);
  for (int it = 0; it < iterations; ++it) {
    Vec d = col_inf_norms(s.P).cwiseMax(col_inf_norms(s.A));
    Vec e = row_inf_norms(s.A);
    for (Eigen::Index j = 0; j < n; ++j) d[j] = 1.0 / std::sqrt(limit_scaling(d[j]));
    for (Eigen::Index i = 0; i < m; ++i) e[i] = 1.0 / std::sqrt(limit_scaling(e[i]));
    scale_in_place(s.P, d, d);
    scale_in_place(s.A, e, d);
    s.q = d.cwiseProduct(s.q);
    s.D = s.D.cwiseProduct(d);
    s.E = s.E.cwiseProduct(e);

    const Vec pcols = col_inf_norms(s.P);
    const double mean_p = n > 0 ? pcols.mean() : 0.0;
    const double cost = 1.0 / limit_scaling(std::max(mean_p, inf_norm(s.q)));
    s.P *= cost;
    s.q *= cost;
    s.c *= cost;
  }
  s.cinv = 1.0 / s.c;
  s.Dinv = s.D.cwiseInverse();
  s.Einv = s.E.cwiseInverse();
  s.l = qp.l;
  s.u = qp.u;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (std::isfinite(s.l[i])) s.l[i] *= s.E[i];
    if (std::isfinite(s.u[i])) s.u[i] *= s.E[i];
  }
  return s;
}

SparseMatrix identity(Eigen::Index n, double value) {
  SparseMatrix I(n, n);
  I.reserve(Eigen::VectorXi::Constant(n, 1));
  for (Eigen::Index j = 0; j < n; ++j) I.insert(j, j) = value;
  I.makeCompressed();
  return I;
}

Vec rho_vector(const Scaled& s, double rho) {
  Vec out(s.l.size());
  for (Eigen::Index i = 0; i < s.l.size(); ++i) {
    if (!std::isfinite(s.l[i]) && !std::isfinite(s.u[i]))
      out[i] = kRhoMin;
    else if (s.l[i] == s.u[i])
      out[i] = kRhoEqualityFactor * rho;
    else
      out[i] = rho;
  }
  return out;
}

/// Factorisation of P + sigma I + A' diag(rho) A.
class ReducedSystem {
 public:
  ReducedSystem(const Scaled& s, double sigma) : s_(s), sigma_(sigma) {}

  bool factor(const Vec& rho) {
    SparseMatrix RA = rho.asDiagonal() * s_.A;
    SparseMatrix K = SparseMatrix(s_.A.transpose()) * RA;
    K += s_.P;
    K += identity(s_.P.rows(), sigma_);
    if (!analysed_) {
      llt_.analyzePattern(K);
      analysed_ = true;
    }
    llt_.factorize(K);
    return llt_.info() == Eigen::Success;
  }

  Vec solve(const Vec& rhs) const { return llt_.solve(rhs); }

 private:
  const Scaled& s_;
  double sigma_;
  bool analysed_ = false;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> llt_;
};

struct Iterate {
  Vec x, z, y;
};

struct ResidualInfo {
  double primal = 0.0, dual = 0.0;
  double primal_scale = 0.0, dual_scale = 0.0;
  // Same quantities in the equilibrated space; these drive the rho update.
  double scaled_primal = 0.0, scaled_dual = 0.0;
  double scaled_primal_scale = 0.0, scaled_dual_scale = 0.0;
};

ResidualInfo admm_residuals(const Scaled& s, const Iterate& it) {
  ResidualInfo r;
  const Vec Ax = s.A * it.x;
  const Vec Px = s.P * it.x;
  const Vec Aty = s.A.transpose() * it.y;
  r.primal = inf_norm(s.Einv.cwiseProduct(Ax - it.z));
  r.primal_scale = std::max(inf_norm(s.Einv.cwiseProduct(Ax)), inf_norm(s.Einv.cwiseProduct(it.z)));
  r.dual = s.cinv * inf_norm(s.Dinv.cwiseProduct(Px + s.q + Aty));
  r.dual_scale = s.cinv * std::max({inf_norm(s.Dinv.cwiseProduct(Px)), inf_norm(s.Dinv.cwiseProduct(Aty)),
                                    inf_norm(s.Dinv.cwiseProduct(s.q))});
  r.scaled_primal = inf_norm(Ax - it.z);
  r.scaled_primal_scale = std::max(inf_norm(Ax), inf_norm(it.z));
  r.scaled_dual = inf_norm(Px + s.q + Aty);
  r.scaled_dual_scale = std::max({inf_norm(Px), inf_norm(Aty), inf_norm(s.q)});
  return r;
}

bool primal_infeasible(const QpProblem& qp, const Scaled& s, Vec dy, double eps) {
  for (Eigen::Index i = 0; i < dy.size(); ++i) {
    if (!std::isfinite(qp.u[i])) dy[i] = std::min(dy[i], 0.0);
    if (!std::isfinite(qp.l[i])) dy[i] = std::max(dy[i], 0.0);
  }
  const Vec dy_unscaled = s.cinv * s.E.cwiseProduct(dy);
  const double norm = inf_norm(dy_unscaled);
  if (norm < 1e-12) return false;
  double support = 0.0;
  for (Eigen::Index i = 0; i < dy.size(); ++i) {
    if (dy_unscaled[i] > 0.0) support += qp.u[i] * dy_unscaled[i];
    if (dy_unscaled[i] < 0.0) support += qp.l[i] * dy_unscaled[i];
  }
  if (!(support < -eps * norm)) return false;
  const Vec Atdy = s.cinv * s.Dinv.cwiseProduct(s.A.transpose() * dy);
  return inf_norm(Atdy) <= eps * norm;
}

bool dual_infeasible(const QpProblem& qp, const Scaled& s, const Vec& dx, double eps) {
  const Vec dx_unscaled = s.D.cwiseProduct(dx);
  const double norm = inf_norm(dx_unscaled);
  if (norm < 1e-12) return false;
  const double qdx = s.cinv * s.q.dot(dx);
  if (!(qdx < -eps * norm)) return false;
  if (inf_norm(s.cinv * s.Dinv.cwiseProduct(s.P * dx)) > eps * norm) return false;
  const Vec Adx = s.Einv.cwiseProduct(s.A * dx);
  for (Eigen::Index i = 0; i < Adx.size(); ++i) {
    if (std::isfinite(qp.u[i]) && Adx[i] > eps * norm) return false;
    if (std::isfinite(qp.l[i]) && Adx[i] < -eps * norm) return false;
  }
  return true;
}

struct Polished {
  Vec x, y;
};

/// Solves the equality-constrained problem on the active set guessed from
/// the ADMM iterate, with iterative refinement of the regularised KKT system.
std::optional<Polished> polish(const Scaled& s, const Iterate& it, int refine) {
  const auto n = s.P.rows();
  std::vector<Eigen::Index> active;
  std::vector<double> target;
  for (Eigen::Index i = 0; i < s.l.size(); ++i) {
    const bool equality = s.l[i] == s.u[i];
    const bool lower = equality || it.z[i] - s.l[i] < -it.y[i];
    const bool upper = !equality && s.u[i] - it.z[i] < it.y[i];
    if (lower || upper) {
      active.push_back(i);
      target.push_back(lower ? s.l[i] : s.u[i]);
    }
  }
  const auto k = static_cast<Eigen::Index>(active.size());
  std::vector<Eigen::Index> slot(static_cast<std::size_t>(s.l.size()), -1);
  for (Eigen::Index r = 0; r < k; ++r) slot[static_cast<std::size_t>(active[static_cast<std::size_t>(r)])] = r;

  std::vector<Eigen::Triplet<double>> reg, exact;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (SparseMatrix::InnerIterator p(s.P, j); p; ++p) {
      reg.emplace_back(p.row(), j, p.value());
      exact.emplace_back(p.row(), j, p.value());
    }
    reg.emplace_back(j, j, kPolishDelta);
  }
  for (Eigen::Index j = 0; j < s.A.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator a(s.A, j); a; ++a) {
      const auto r = slot[static_cast<std::size_t>(a.row())];
      if (r < 0) continue;
      for (auto* list : {&reg, &exact}) {
        list->emplace_back(n + r, j, a.value());
        list->emplace_back(j, n + r, a.value());
      }
    }
  }
  for (Eigen::Index r = 0; r < k; ++r) reg.emplace_back(n + r, n + r, -kPolishDelta);

  SparseMatrix Kreg(n + k, n + k), Kexact(n + k, n + k);
  Kreg.setFromTriplets(reg.begin(), reg.end());
  Kexact.setFromTriplets(exact.begin(), exact.end());

  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldl(Kreg);
  if (ldl.info() != Eigen::Success) return std::nullopt;

  Vec rhs(n + k);
  rhs.head(n) = -s.q;
  for (Eigen::Index r = 0; r < k; ++r) rhs[n + r] = target[static_cast<std::size_t>(r)];
  Vec sol = ldl.solve(rhs);
  double last = inf_norm(rhs - Kexact * sol);
  for (int i = 0; i < refine && last > 1e-14 * std::max(1.0, inf_norm(rhs)); ++i) {
    const Vec candidate = sol + ldl.solve(rhs - Kexact * sol);
    const double residual = inf_norm(rhs - Kexact * candidate);
    if (!(residual < last)) break;
    sol = candidate;
    last = residual;
  }
  if (!sol.allFinite()) return std::nullopt;

  Polished out;
  out.x = sol.head(n);
  out.y = Vec::Zero(s.l.size());
  for (Eigen::Index r = 0; r < k; ++r) out.y[active[static_cast<std::size_t>(r)]] = sol[n + r];
  return out;
}

double objective(const QpProblem& qp, const Vec& x) { return 0.5 * x.dot(qp.P * x) + qp.q.dot(x); }

bool multipliers_consistent(const QpProblem& qp, const Vec& x, const Vec& y, double tol) {
  const Vec Ax = qp.A * x;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (qp.l[i] == qp.u[i]) continue;
    const double scale = std::max(1.0, std::abs(Ax[i]));
    if (y[i] > tol && std::abs(Ax[i] - qp.u[i]) > tol * scale) return false;
    if (y[i] < -tol && std::abs(Ax[i] - qp.l[i]) > tol * scale) return false;
  }
  return true;
}

}  // namespace

const char* to_string(QpStatus status) {
  switch (status) {
    case QpStatus::solved: return "solved";
    case QpStatus::max_iterations: return "max_iterations";
    case QpStatus::primal_infeasible: return "primal_infeasible";
    case QpStatus::dual_infeasible: return "dual_infeasible";
  }
  return "unknown";
}

void QpProblem::validate() const {
  const auto n = q.size();
  const auto m = l.size();
  if (P.rows() != n || P.cols() != n) throw ValidationError("QP: P must be n x n");
  if (A.cols() != n || A.rows() != m || u.size() != m) throw ValidationError("QP: A/l/u dimensions");
  for (Eigen::Index i = 0; i < m; ++i)
    if (!(l[i] <= u[i])) throw ValidationError("QP: l > u", static_cast<std::size_t>(i));
  if (!q.allFinite()) throw ValidationError("QP: q not finite");
}

QpResiduals qp_residuals(const QpProblem& qp, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const Vec Ax = qp.A * x;
  const Vec violation = Ax - clamp(Ax, qp.l, qp.u);
  const Vec stationarity = qp.P * x + qp.q + qp.A.transpose() * y;
  return {inf_norm(violation), inf_norm(stationarity)};
}

QpSolution solve_qp(const QpProblem& qp, const QpSettings& settings, const QpWarmStart* warm_start) {
  qp.validate();
  const auto n = qp.num_variables();
  const auto m = qp.num_constraints();
  const Scaled s = equilibrate(qp, settings.scaling_iterations);

  double rho = std::clamp(settings.rho, kRhoMin, kRhoMax);
  Vec rho_vec = rho_vector(s, rho);
  ReducedSystem system(s, settings.sigma);
  system.factor(rho_vec);

  Iterate it{Vec::Zero(n), Vec::Zero(m), Vec::Zero(m)};
  if (warm_start != nullptr && warm_start->x.size() == n) it.x = s.Dinv.cwiseProduct(warm_start->x);
  if (warm_start != nullptr && warm_start->y.size() == m)
    it.y = s.c * s.Einv.cwiseProduct(warm_start->y);
  it.z = clamp(s.A * it.x, s.l, s.u);

  QpSolution out;
  out.status = QpStatus::max_iterations;

  const double alpha = settings.alpha;
  int k = 0;
  // Polished pair, or nothing when the active-set guess is wrong.
  auto try_polish = [&]() -> std::optional<std::pair<Vec, Vec>> {
    auto pol = polish(s, it, settings.polish_refine_iterations);
    if (!pol) return std::nullopt;
    Vec x = s.D.cwiseProduct(pol->x);
    Vec y = s.cinv * s.E.cwiseProduct(pol->y);
    if (!multipliers_consistent(qp, x, y, settings.eps_abs)) return std::nullopt;
    return std::make_pair(std::move(x), std::move(y));
  };
  auto within_tolerance = [&](const Vec& x, const Vec& y, const QpResiduals& res) {
    const Vec Ax = qp.A * x;
    const double primal_scale = std::max(inf_norm(Ax), inf_norm(clamp(Ax, qp.l, qp.u)));
    const double dual_scale =
        std::max({inf_norm(qp.P * x), inf_norm(qp.A.transpose() * y), inf_norm(qp.q)});
    return res.primal <= settings.eps_abs + settings.eps_rel * primal_scale &&
           res.dual <= settings.eps_abs + settings.eps_rel * dual_scale;
  };

  while (k < settings.max_iter) {
    ++k;
    const Vec rhs = settings.sigma * it.x - s.q + s.A.transpose() * (rho_vec.cwiseProduct(it.z) - it.y);
    const Vec x_tilde = system.solve(rhs);
    const Vec z_tilde = s.A * x_tilde;
    const Vec x_next = alpha * x_tilde + (1.0 - alpha) * it.x;
    const Vec z_relaxed = alpha * z_tilde + (1.0 - alpha) * it.z;
    const Vec z_next = clamp(z_relaxed + it.y.cwiseQuotient(rho_vec), s.l, s.u);
    const Vec y_next = it.y + rho_vec.cwiseProduct(z_relaxed - z_next);
    const Vec dx = x_next - it.x;
    const Vec dy = y_next - it.y;
    it.x = x_next;
    it.z = z_next;
    it.y = y_next;

    const auto r = admm_residuals(s, it);
    if (r.primal <= settings.eps_abs + settings.eps_rel * r.primal_scale &&
        r.dual <= settings.eps_abs + settings.eps_rel * r.dual_scale) {
      out.status = QpStatus::solved;
      break;
    }
    if (primal_infeasible(qp, s, dy, settings.eps_primal_infeasible)) {
      out.status = QpStatus::primal_infeasible;
      break;
    }
    if (dual_infeasible(qp, s, dx, settings.eps_dual_infeasible)) {
      out.status = QpStatus::dual_infeasible;
      break;
    }
    if (k % settings.adaptive_rho_interval != 0) continue;

    // Long chains of equality rows converge slowly under ADMM; once the
    // active set has settled an equality-constrained solve finishes the job.
    if (settings.polish) {
      if (auto pol = try_polish()) {
        const auto res = qp_residuals(qp, pol->first, pol->second);
        if (within_tolerance(pol->first, pol->second, res)) {
          out.status = QpStatus::solved;
          out.iterations = k;
          out.x = std::move(pol->first);
          out.y = std::move(pol->second);
          out.residuals = res;
          out.polished = true;
          out.objective = objective(qp, out.x);
          return out;
        }
      }
    }
    if (settings.adaptive_rho && r.dual > 0.0) {
      // Balance the residuals relative to their own stopping thresholds.
      const double ratio = (r.primal / (settings.eps_abs + settings.eps_rel * r.primal_scale)) /
                           (r.dual / (settings.eps_abs + settings.eps_rel * r.dual_scale));
      const double candidate = std::clamp(rho * std::sqrt(ratio), kRhoMin, kRhoMax);
      if (candidate > 5.0 * rho || candidate < 0.2 * rho) {
        rho = candidate;
        rho_vec = rho_vector(s, rho);
        system.factor(rho_vec);
      }
    }
  }
  out.iterations = k;
  out.x = s.D.cwiseProduct(it.x);
  out.y = s.cinv * s.E.cwiseProduct(it.y);
  out.residuals = qp_residuals(qp, out.x, out.y);

  const bool can_polish = out.status == QpStatus::solved || out.status == QpStatus::max_iterations;
  if (settings.polish && can_polish) {
    if (auto pol = try_polish()) {
      const auto res = qp_residuals(qp, pol->first, pol->second);
      const bool better_primal = res.primal <= out.residuals.primal + 1e-12 || res.primal < 1e-10;
      const bool better_dual = res.dual <= out.residuals.dual + 1e-12 || res.dual < 1e-10;
      if (better_primal && better_dual) {
        if (out.status == QpStatus::max_iterations && within_tolerance(pol->first, pol->second, res))
          out.status = QpStatus::solved;
        out.x = std::move(pol->first);
        out.y = std::move(pol->second);
        out.residuals = res;
        out.polished = true;
      }
    }
  }
  out.objective = objective(qp, out.x);
  return out;
}

}  // namespace hdvplan
