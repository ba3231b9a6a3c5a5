#pragma once

#include <optional>
#include <vector>

#include "smurf/model.hpp"
#include "smurf/penalty.hpp"
#include "smurf/prox.hpp"
#include "smurf/structure.hpp"

namespace smurf {

struct SolverSettings {
  /// Relative objective change that ends the iterations.
  double eps = 1e-8;
  int max_iter = 10000;
  /// Backtracking factor in (0, 1).
  double tau = 0.5;
  /// Initial step size; 0.1 * n when unset.
  std::optional<double> step_init;
  /// Backtracking stops once the step falls below this.
  double step_floor = 1e-14;
  /// Near-zeros and near-fusions in the returned coefficients are snapped
  /// with this tolerance; 0 returns the raw iterate.
  double snap_tolerance = kFusionTolerance;
  bool record_trace = true;
  AdmmSettings admm;

  void validate() const;
};

/// Iterates of the accelerated proximal gradient loop, on the standardized
/// coefficient scale.
struct SolverState {
  Vector beta_curr;
  Vector beta_prev;
  Vector theta;
  double alpha_curr = 1.0;
  double step = 0.0;
  std::vector<double> objective_trace;
  int restart_count = 0;
  bool converged = false;
};

/// True when the candidate objective exceeds the previous one by more than
/// the factor (1 + eps).
bool restart_check(double candidate_objective, double previous_objective, double eps);
bool restart_check(const SolverState& state, double candidate_objective, double eps);

/// (1 + sqrt(1 + 4 alpha^2)) / 2.
double next_alpha(double alpha);

/// Advances alpha and moves theta along beta_curr - beta_prev. Returns the
/// extrapolation coefficient (alpha_k - 1) / alpha_{k+1}.
double accelerate(SolverState& state);

struct TraceRecord {
  int iteration = 0;
  double objective = 0.0;
  double step = 0.0;
  int restarts = 0;
};

struct FitResult {
  /// Original-scale coefficients, intercept first.
  CoefficientVector coefficients;
  /// Same on the scale the penalties act on.
  Vector beta_standardized;
  double lambda = 0.0;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  double step = 0.0;
  /// Unscaled g_j per block (without lambda).
  std::vector<double> block_penalties;
  std::vector<TraceRecord> trace;
  int restarts = 0;
  int admm_calls = 0;
  int admm_nonconverged = 0;
  int admm_max_iterations = 0;
};

/// f(beta) + lambda * sum_j g_j(beta_j) for original-scale coefficients.
double objective(const Vector& beta, const ModelSpec& spec, const PenaltySet& penalties, double lambda);

/// Accelerated proximal gradient with backtracking and adaptive restarts.
/// `beta_init` is on the original scale; the zero vector when absent.
FitResult smurf_fit(const ModelSpec& spec, const PenaltySet& penalties, double lambda,
                    const SolverSettings& settings = {}, const std::optional<Vector>& beta_init = std::nullopt);

/// Convenience overload building the penalties from per-block weights.
FitResult smurf_fit(const ModelSpec& spec, double lambda, const std::vector<Vector>& weights,
                    const SolverSettings& settings = {}, const std::optional<Vector>& beta_init = std::nullopt);

}  // namespace smurf
