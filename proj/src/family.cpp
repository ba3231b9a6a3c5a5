#include "smurf/family.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>

namespace smurf {

namespace {

double softplus(double eta) { return std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta))); }

double sigmoid(double eta) {
  const double e = std::clamp(eta, -kEtaClamp, kEtaClamp);
  return 1.0 / (1.0 + std::exp(-e));
}

// exp(eta) continued linearly above the clamp so loss and gradient agree.
double poisson_cumulant(double eta) {
  if (eta <= kEtaClamp) return std::exp(eta);
  return std::exp(kEtaClamp) * (1.0 + (eta - kEtaClamp));
}

Matrix with_intercept(const Matrix& X) {
  Matrix A(X.rows(), X.cols() + 1);
  A.col(0).setOnes();
  A.rightCols(X.cols()) = X;
  return A;
}

Vector irls_weights(Family family, const Vector& mu) {
  switch (family) {
    case Family::Gaussian: return Vector::Ones(mu.size());
    case Family::Binomial: return (mu.array() * (1.0 - mu.array())).matrix();
    case Family::Poisson: return mu;
  }
  return Vector::Ones(mu.size());
}

}  // namespace

Vector linear_predictor(const Vector& beta, const Matrix& X, const Vector& offset) {
  if (beta.size() != X.cols() + 1)
    throw InputError("coefficient length " + std::to_string(beta.size()) + " does not match design with " +
                     std::to_string(X.cols()) + " columns");
  Vector eta = X * beta.tail(X.cols());
  eta.array() += beta[0];
  if (offset.size() == eta.size()) eta += offset;
  return eta;
}

Vector mean_from_eta(Family family, const Vector& eta) {
  Vector mu(eta.size());
  switch (family) {
    case Family::Gaussian:
      mu = eta;
      break;
    case Family::Binomial:
      for (Index i = 0; i < eta.size(); ++i) mu[i] = sigmoid(eta[i]);
      break;
    case Family::Poisson:
      for (Index i = 0; i < eta.size(); ++i) mu[i] = std::exp(std::clamp(eta[i], -kEtaClamp, kEtaClamp));
      break;
  }
  return mu;
}

double loss_kernel(Family family, const Vector& y, const Vector& eta) {
  const Index n = y.size();
  if (n == 0) return 0.0;
  double total = 0.0;
  switch (family) {
    case Family::Gaussian:
      total = 0.5 * (y - eta).squaredNorm();
      break;
    case Family::Binomial:
      for (Index i = 0; i < n; ++i) total += softplus(eta[i]) - y[i] * eta[i];
      break;
    case Family::Poisson:
      for (Index i = 0; i < n; ++i) total += poisson_cumulant(eta[i]) - y[i] * eta[i];
      break;
  }
  return total / static_cast<double>(n);
}

double loss_constant(Family family, const Vector& y) {
  if (family != Family::Poisson || y.size() == 0) return 0.0;
  double total = 0.0;
  for (Index i = 0; i < y.size(); ++i) total += std::lgamma(y[i] + 1.0);
  return total / static_cast<double>(y.size());
}

double loss_from_eta(Family family, const Vector& y, const Vector& eta) {
  return loss_kernel(family, y, eta) + loss_constant(family, y);
}

double log_likelihood(Family family, const Vector& y, const Vector& mu) {
  if (y.size() != mu.size()) throw InputError("response and mean lengths differ");
  double ll = 0.0;
  switch (family) {
    case Family::Gaussian:
      ll = -0.5 * (y - mu).squaredNorm();
      break;
    case Family::Binomial:
      for (Index i = 0; i < y.size(); ++i)
        ll += y[i] > 0.5 ? std::log(mu[i]) : std::log1p(-mu[i]);
      break;
    case Family::Poisson:
      for (Index i = 0; i < y.size(); ++i) {
        if (y[i] > 0.0) ll += y[i] * std::log(mu[i]);
        ll -= mu[i] + std::lgamma(y[i] + 1.0);
      }
      break;
  }
  return ll;
}

double loss(const Vector& beta, const ModelSpec& spec) {
  if (!beta.allFinite()) throw InputError("coefficients must be finite");
  return loss_from_eta(spec.family(), spec.response(), linear_predictor(beta, spec.X(), spec.offset()));
}

Vector gradient(const Vector& beta, const ModelSpec& spec) {
  if (!beta.allFinite()) throw InputError("coefficients must be finite");
  const Vector eta = linear_predictor(beta, spec.X(), spec.offset());
  const Vector resid = mean_from_eta(spec.family(), eta) - spec.response();
  const double inv_n = 1.0 / static_cast<double>(spec.n());
  Vector g(beta.size());
  g[0] = resid.sum() * inv_n;
  g.tail(spec.p()) = spec.X().transpose() * resid * inv_n;
  return g;
}

Vector predict_mean(const Vector& beta, const DesignMatrix& design, Family family) {
  const Vector offset = design.offset.size() == design.rows() ? design.offset : Vector::Zero(design.rows());
  return mean_from_eta(family, linear_predictor(beta, design.values, offset));
}

IrlsResult irls_fit(Family family, const Matrix& X, const Vector& y, const Vector& offset, double ridge,
                    const IrlsSettings& settings) {
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw InputError("ridge penalty must be nonnegative");
  const Index n = X.rows();
  const Index q = X.cols() + 1;
  if (y.size() != n) throw InputError("response length differs from design rows");
  const Vector off = offset.size() == n ? offset : Vector::Zero(n);
  const Matrix A = with_intercept(X);
  const double inv_n = 1.0 / static_cast<double>(n);

  if (ridge == 0.0) {
    Eigen::ColPivHouseholderQR<Matrix> qr(A);
    qr.setThreshold(1e-10);
    if (qr.rank() < q)
      throw NumericError("design is rank deficient (rank " + std::to_string(qr.rank()) + " < " +
                         std::to_string(q) + "); use a nonzero ridge penalty");
  }

  Vector beta = Vector::Zero(q);
  const double ybar = y.mean();
  if (family == Family::Binomial) {
    const double p = std::clamp(ybar, 1e-6, 1.0 - 1e-6);
    beta[0] = std::log(p / (1.0 - p));
  } else if (family == Family::Poisson) {
    beta[0] = std::log(std::max(ybar, 1e-6) / std::max(off.array().exp().mean(), 1e-300));
  } else {
    beta[0] = (y - off).mean();
  }

  auto penalized = [&](const Vector& b, const Vector& eta) {
    return loss_from_eta(family, y, eta) + 0.5 * ridge * b.tail(q - 1).squaredNorm();
  };

  IrlsResult result;
  Vector eta = A * beta + off;
  double objective = penalized(beta, eta);
  Matrix H(q, q);
  for (int it = 0; it < settings.max_iter; ++it) {
    const Vector mu = mean_from_eta(family, eta);
    Vector grad = A.transpose() * (mu - y) * inv_n;
    grad.tail(q - 1) += ridge * beta.tail(q - 1);
    result.gradient_norm = grad.norm();
    result.iterations = it;
    if (result.gradient_norm < settings.gradient_tolerance) {
      result.converged = true;
      break;
    }

    const Vector w = irls_weights(family, mu);
    const Matrix Aw = A.array().colwise() * (w.array() * inv_n).sqrt();
    H.setZero();
    H.selfadjointView<Eigen::Lower>().rankUpdate(Aw.transpose());
    H.diagonal().tail(q - 1).array() += ridge;
    Eigen::LLT<Matrix, Eigen::Lower> llt(H);
    Vector step;
    if (llt.info() == Eigen::Success) {
      step = llt.solve(grad);
    } else {
      if (ridge == 0.0) throw NumericError("singular weighted normal equations; use a nonzero ridge penalty");
      step = H.selfadjointView<Eigen::Lower>().ldlt().solve(grad);
    }
    if (!step.allFinite()) throw NumericError("IRLS produced a non-finite Newton step");

    // Step halving on the penalized objective.
    double t = 1.0;
    bool improved = false;
    for (int half = 0; half < 40; ++half) {
      const Vector candidate = beta - t * step;
      const Vector eta_c = A * candidate + off;
      const double obj = penalized(candidate, eta_c);
      if (std::isfinite(obj) && obj <= objective) {
        beta = candidate;
        eta = eta_c;
        improved = obj < objective;
        objective = obj;
        break;
      }
      t *= 0.5;
    }
    if (!improved) {
      // No representable decrease left: objective is at its floating-point floor.
      const Vector mu_end = mean_from_eta(family, eta);
      Vector g_end = A.transpose() * (mu_end - y) * inv_n;
      g_end.tail(q - 1) += ridge * beta.tail(q - 1);
      result.gradient_norm = g_end.norm();
      result.converged = result.gradient_norm < std::sqrt(settings.gradient_tolerance);
      result.iterations = it + 1;
      break;
    }
  }
  result.beta = std::move(beta);
  return result;
}

IrlsResult irls_fit(const ModelSpec& spec, double ridge, const IrlsSettings& settings) {
  return irls_fit(spec.family(), spec.X(), spec.response(), spec.offset(), ridge, settings);
}

}  // namespace smurf
