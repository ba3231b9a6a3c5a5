#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "smurf/model.hpp"

namespace oracle {

using smurf::Index;
using smurf::Matrix;
using smurf::Vector;

/// Exact minimizer of 1/2||b - x||^2 + t * sum_e w_e |x_l - x_i| over a graph
/// on `levels` nodes, the optional reference node pinned at 0. `b` holds the
/// non-reference nodes in column order. Enumerates every ordered grouping of
/// the nodes, solves each for its cluster values in closed form and keeps the
/// candidate with the smallest true objective.
Vector fused_prox_bruteforce(const Vector& b, const smurf::Graph& graph, const Vector& weights, double t,
                             std::optional<int> reference);

/// The fused prox objective at x (same conventions as above).
double fused_prox_objective(const Vector& x, const Vector& b, const smurf::Graph& graph, const Vector& weights,
                            double t, std::optional<int> reference);

/// -(1/n) log L summed observation by observation from textbook densities.
double naive_scaled_loss(smurf::Family family, const Vector& y, const Vector& eta);

/// Central differences of f at x with step h.
Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x, double h);

/// Fraction of (positive, negative) pairs ranked correctly, ties counting 1/2.
double pairwise_auc(const std::vector<double>& score, const std::vector<int>& label);

/// Area under the cumulative capture curve computed by explicit cumulation.
double lorenz_bruteforce(const std::vector<double>& score, const std::vector<double>& outcome);

/// Exact optimum of f + lambda * penalty restricted to the zero/fusion
/// pattern of `beta_std` (standardized scale): Newton on the cluster values,
/// with the penalty linear in them once signs are fixed. Supports Lasso and
/// fused blocks. Returns original-scale coefficients.
Vector polish_on_pattern(const smurf::ModelSpec& spec, const std::vector<Vector>& weights, double lambda,
                         const Vector& beta_std, double tol);

/// Least squares with intercept through the normal equations.
Vector ols_normal_equations(const Matrix& X, const Vector& y);

/// Random dense design with an intercept block and one Lasso block per
/// column (penalty `kind`).
smurf::ModelSpec random_numeric_spec(smurf::Family family, Index n, Index p, std::uint64_t seed,
                                     bool with_offset = false);

/// Dummy-coded factor spec: one block per entry of `levels`, each with a
/// reference level 0 and the given penalty, plus an intercept.
struct FactorSpecOptions {
  std::vector<int> levels;
  std::vector<smurf::PenaltyKind> penalties;
  smurf::Family family = smurf::Family::Binomial;
  Index n = 400;
  std::uint64_t seed = 1;
  double signal = 0.5;
};
smurf::ModelSpec random_factor_spec(const FactorSpecOptions& options);

}  // namespace oracle
