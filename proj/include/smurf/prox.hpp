#pragma once

#include "smurf/model.hpp"

namespace smurf {

/// ADMM parameters for the (generalized) fused lasso proximal operator.
struct AdmmSettings {
  double rho0 = 1.0;
  double eps_abs = 1e-12;
  double eps_rel = 1e-10;
  /// Over-relaxation factor xi, in (1, 2).
  double relaxation = 1.5;
  double mu_rho = 10.0;
  double eta_rho = 2.0;
  int max_iter = 10000;

  void validate() const;
};

/// Eigendecomposition G^T G = Q diag(ell) Q^T, computed once per penalty
/// matrix and reused for every rho.
class EigenCache {
 public:
  EigenCache() = default;
  explicit EigenCache(const SparseMatrix& G);

  const Matrix& eigenvectors() const noexcept { return Q_; }
  const Vector& eigenvalues() const noexcept { return ell_; }
  Index dimension() const noexcept { return ell_.size(); }

  /// out = (I + rho G^T G)^{-1} v via I - rho Q diag(ell / (1 + rho ell)) Q^T.
  void apply_inverse(const Vector& v, double rho, Vector& out) const;

 private:
  Matrix Q_;
  Vector ell_;
};

EigenCache build_eigen_cache(const SparseMatrix& G);

struct AdmmReport {
  int iterations = 0;
  bool converged = false;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double eps_primal = 0.0;
  double eps_dual = 0.0;
  double rho = 1.0;
};

struct ProxResult {
  Vector x;
  AdmmReport report;
};

inline double prox_identity(double beta_tilde_0) { return beta_tilde_0; }

/// S(x; t) = x (1 - t/|x|)_+, exactly +0.0 when |x| <= t.
double soft_threshold(double x, double threshold);
Vector soft_threshold(const Vector& beta_tilde, const Vector& thresholds);

/// Block-wise S_grp(x; t) = x (1 - t/||x||_2)_+.
Vector group_soft_threshold(const Vector& beta_tilde, double threshold);

/// argmin_x 1/2 ||beta_tilde - x||^2 + slambda ||G x||_1 by over-relaxed ADMM
/// with residual balancing. `warm_x` seeds x; z starts at G warm_x and u at 0.
/// Hitting max_iter is reported through report.converged, not thrown.
ProxResult prox_gen_fused(const Vector& beta_tilde, const SparseMatrix& G, double slambda,
                          const EigenCache& cache, const AdmmSettings& settings,
                          const Vector& warm_x);

}  // namespace smurf
