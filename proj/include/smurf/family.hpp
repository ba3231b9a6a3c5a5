#pragma once

#include <string>
#include <vector>

#include "smurf/model.hpp"

namespace smurf {

/// Linear predictors beyond +-30 are numerically saturated for the logit and
/// log links; exponentials are evaluated at the clamped value.
inline constexpr double kEtaClamp = 30.0;

/// eta = beta0 + X beta + offset.
Vector linear_predictor(const Vector& beta, const Matrix& X, const Vector& offset);

Vector mean_from_eta(Family family, const Vector& eta);

/// Scaled negative log-likelihood f = -(1/n) log L evaluated from eta.
/// Gaussian uses (1/2n)||y - eta||^2; Poisson includes log(y!).
double loss_from_eta(Family family, const Vector& y, const Vector& eta);
/// loss_from_eta without the eta-free part (log(y!)/n for Poisson).
double loss_kernel(Family family, const Vector& y, const Vector& eta);
double loss_constant(Family family, const Vector& y);

/// Unscaled log-likelihood of observations y under means mu. Gaussian uses
/// unit dispersion without the 2*pi constant, so that -2 log L is the
/// residual sum of squares.
double log_likelihood(Family family, const Vector& y, const Vector& mu);
inline double deviance(Family family, const Vector& y, const Vector& mu) {
  return -2.0 * log_likelihood(family, y, mu);
}

double loss(const Vector& beta, const ModelSpec& spec);
/// (1/n) [1 X]^T (mu - y), intercept component first.
Vector gradient(const Vector& beta, const ModelSpec& spec);
Vector predict_mean(const Vector& beta, const DesignMatrix& design, Family family);

struct FitDiagnostics {
  double log_likelihood = 0.0;
  double deviance = 0.0;
  int df = 0;
  int iterations = 0;
};

struct IrlsSettings {
  double gradient_tolerance = 1e-10;
  int max_iter = 100;
};

struct IrlsResult {
  Vector beta;
  int iterations = 0;
  double gradient_norm = 0.0;
  bool converged = false;
};

/// Newton/IRLS minimizer of f(beta) + (ridge/2)||beta_{-0}||^2 on raw
/// matrices. With ridge == 0 a rank-deficient design raises NumericError.
IrlsResult irls_fit(Family family, const Matrix& X, const Vector& y, const Vector& offset,
                    double ridge, const IrlsSettings& settings = {});

/// Same on the spec's original-scale design.
IrlsResult irls_fit(const ModelSpec& spec, double ridge, const IrlsSettings& settings = {});

}  // namespace smurf
