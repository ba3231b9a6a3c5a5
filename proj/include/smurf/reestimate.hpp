#pragma once

#include <string>
#include <vector>

#include "smurf/model.hpp"
#include "smurf/solver.hpp"
#include "smurf/structure.hpp"

namespace smurf {

/// Design columns that share one free parameter in the refit.
struct CollapseGroup {
  std::size_t block = 0;
  std::vector<Index> columns;
  /// Regularized value of the group.
  double value = 0.0;
};

/// Reduced parametrization implied by a regularized fit: zero coefficients
/// are dropped, every connected fused cluster away from zero and from the
/// reference level becomes one parameter, and each remaining Lasso or Group
/// Lasso coefficient keeps its own parameter. Unpenalized columns are kept.
struct CollapsePlan {
  std::vector<CollapseGroup> groups;
  Index coefficient_count = 0;
};

CollapsePlan build_collapse_plan(const ModelSpec& spec, const Vector& beta, double tol = kFusionTolerance);

/// n x (1 + groups) design of the plan: intercept column then summed columns.
Matrix collapsed_design(const ModelSpec& spec, const CollapsePlan& plan);

/// Broadcasts reduced coefficients (intercept first) to the full vector.
Vector expand_reduced(const CollapsePlan& plan, const Vector& reduced);

struct ReestimateResult {
  CoefficientVector coefficients;
  CollapsePlan plan;
  Vector reduced;
  double log_likelihood = 0.0;
  double regularized_log_likelihood = 0.0;
  int df = 0;
  bool ridge_fallback = false;
  std::vector<std::string> warnings;
};

/// Unpenalized maximum likelihood on the collapsed design. A rank-deficient
/// reduced design falls back to a ridge of 1e-8 with a warning.
ReestimateResult reestimate(const ModelSpec& spec, const Vector& beta, double tol = kFusionTolerance);
ReestimateResult reestimate(const ModelSpec& spec, const FitResult& fit, double tol = kFusionTolerance);

inline constexpr double kReestimateFallbackRidge = 1e-8;

}  // namespace smurf
