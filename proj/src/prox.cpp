#include "smurf/prox.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace smurf {

void AdmmSettings::validate() const {
  if (!(rho0 > 0.0)) throw InputError("ADMM rho0 must be positive");
  if (!(eps_abs >= 0.0 && eps_rel >= 0.0)) throw InputError("ADMM tolerances must be nonnegative");
  if (!(relaxation > 1.0 && relaxation < 2.0)) throw InputError("ADMM relaxation must lie in (1, 2)");
  if (!(mu_rho > 1.0)) throw InputError("ADMM mu_rho must exceed 1");
  if (!(eta_rho > 1.0)) throw InputError("ADMM eta_rho must exceed 1");
  if (max_iter < 1) throw InputError("ADMM max_iter must be positive");
}

EigenCache::EigenCache(const SparseMatrix& G) {
  const Matrix dense = Matrix(G);
  if (!dense.allFinite()) throw InputError("penalty matrix contains non-finite entries");
  const Matrix gram = dense.transpose() * dense;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(gram);
  if (solver.info() != Eigen::Success) throw NumericError("eigendecomposition of G^T G failed");
  Q_ = solver.eigenvectors();
  // G^T G is positive semidefinite; round-off negatives are clamped.
  ell_ = solver.eigenvalues().cwiseMax(0.0);
}

void EigenCache::apply_inverse(const Vector& v, double rho, Vector& out) const {
  Vector coef = Q_.transpose() * v;
  coef.array() *= rho * ell_.array() / (1.0 + rho * ell_.array());
  out = v - Q_ * coef;
}

EigenCache build_eigen_cache(const SparseMatrix& G) { return EigenCache(G); }

double soft_threshold(double x, double threshold) {
  if (threshold < 0.0) throw InputError("soft threshold must be nonnegative");
  const double ax = std::abs(x);
  if (ax <= threshold) return 0.0;
  return x * (1.0 - threshold / ax);
}

Vector soft_threshold(const Vector& beta_tilde, const Vector& thresholds) {
  if (beta_tilde.size() != thresholds.size()) throw InputError("threshold length mismatch");
  Vector out(beta_tilde.size());
  for (Index i = 0; i < beta_tilde.size(); ++i) out[i] = soft_threshold(beta_tilde[i], thresholds[i]);
  return out;
}

Vector group_soft_threshold(const Vector& beta_tilde, double threshold) {
  if (threshold < 0.0) throw InputError("group soft threshold must be nonnegative");
  const double norm = beta_tilde.norm();
  if (norm <= threshold) return Vector::Zero(beta_tilde.size());
  return beta_tilde * (1.0 - threshold / norm);
}

ProxResult prox_gen_fused(const Vector& beta_tilde, const SparseMatrix& G, double slambda,
                          const EigenCache& cache, const AdmmSettings& settings, const Vector& warm_x) {
  const Index d = beta_tilde.size();
  const Index m = G.rows();
  if (G.cols() != d) throw InputError("penalty matrix width differs from block size");
  if (cache.dimension() != d) throw InputError("eigen cache was built for a different block");
  if (!(slambda >= 0.0)) throw InputError("prox scale s*lambda must be nonnegative");

  ProxResult result;
  result.report.rho = settings.rho0;
  if (slambda == 0.0 || m == 0) {
    result.x = beta_tilde;
    result.report.converged = true;
    return result;
  }

  // Fully fused answer: the projection onto null(G) is optimal when the
  // least-norm dual for the remainder fits inside the box |u| <= s*lambda.
  {
    const Vector& ell = cache.eigenvalues();
    const Matrix& Q = cache.eigenvectors();
    const double cut = 1e-10 * std::max(ell.maxCoeff(), 1.0);
    const Vector c = Q.transpose() * beta_tilde;
    Vector null_part = Vector::Zero(d), y_coef = Vector::Zero(d);
    for (Index k = 0; k < d; ++k) {
      if (ell[k] <= cut)
        null_part[k] = c[k];
      else
        y_coef[k] = c[k] / ell[k];
    }
    const Vector u = G * (Q * y_coef);
    if (u.cwiseAbs().maxCoeff() <= slambda) {
      result.x = Q * null_part;
      result.report.converged = true;
      return result;
    }
  }

  const double xi = settings.relaxation;
  const double sqrt_m = std::sqrt(static_cast<double>(m));
  const double sqrt_d = std::sqrt(static_cast<double>(d));
  double rho = settings.rho0;

  Vector x = warm_x.size() == d ? warm_x : beta_tilde;
  Vector z = G * x;
  Vector u = Vector::Zero(m);
  Vector z_prev(m), Gx(m), zhat(m), rhs(d), r(m), s(d);

  for (int it = 1; it <= settings.max_iter; ++it) {
    rhs = beta_tilde + rho * (G.transpose() * (z - u));
    cache.apply_inverse(rhs, rho, x);
    Gx = G * x;

    z_prev.swap(z);
    zhat = xi * Gx + (1.0 - xi) * z_prev;
    const double kappa = slambda / rho;
    z = zhat + u;
    for (Index k = 0; k < m; ++k) {
      const double a = std::abs(z[k]);
      z[k] = a <= kappa ? 0.0 : z[k] * (1.0 - kappa / a);
    }
    u += zhat - z;

    r = Gx - z;
    s = -rho * (G.transpose() * (z - z_prev));
    const double r_norm = r.norm();
    const double s_norm = s.norm();
    const double eps_pri = sqrt_m * settings.eps_abs + settings.eps_rel * std::max(Gx.norm(), z.norm());
    const double eps_dual = sqrt_d * settings.eps_rel + settings.eps_abs * rho * (G.transpose() * u).norm();

    auto& rep = result.report;
    rep.iterations = it;
    rep.primal_residual = r_norm;
    rep.dual_residual = s_norm;
    rep.eps_primal = eps_pri;
    rep.eps_dual = eps_dual;
    rep.rho = rho;
    if (r_norm <= eps_pri && s_norm <= eps_dual) {
      rep.converged = true;
      break;
    }

    const double r_ratio = r_norm / eps_pri;
    const double s_ratio = s_norm / eps_dual;
    double rho_new = rho;
    if (r_ratio >= settings.mu_rho * s_ratio)
      rho_new = rho * settings.eta_rho;
    else if (s_ratio >= settings.mu_rho * r_ratio)
      rho_new = rho / settings.eta_rho;
    if (rho_new != rho) {
      u *= rho / rho_new;
      rho = rho_new;
    }
  }
  result.x = std::move(x);
  return result;
}

}  // namespace smurf
