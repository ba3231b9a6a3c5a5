#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "smurf/model.hpp"
#include "smurf/penalty.hpp"
#include "smurf/solver.hpp"
#include "smurf/structure.hpp"
#include "smurf/weights.hpp"

namespace smurf {

/// Strictly decreasing lambda values.
struct LambdaGrid {
  std::vector<double> values;
  double lambda_max = 0.0;
  double ratio = 0.0;
  int count = 0;
};

/// Log-spaced grid from lambda_max down to ratio * lambda_max.
LambdaGrid make_lambda_grid(double lambda_max, int count, double ratio);

struct GridOptions {
  int count = 50;
  double ratio = 1e-4;
};

/// True when every penalized block is fully sparse (Lasso/Group) or forms a
/// single fusion cluster (fused blocks; zero when a reference level exists).
bool is_collapsed(const Vector& beta_std, const std::vector<PredictorBlock>& blocks,
                  const std::vector<BlockSlice>& layout, double tol = kFusionTolerance);

/// lambda_max is the smallest anchor, reached by halving or doubling from
/// ||grad f(intercept-only)||_inf / min(weights), whose probe fit collapses
/// every penalized block.
LambdaGrid default_lambda_grid(const ModelSpec& spec, const PenaltySet& penalties, const GridOptions& options = {},
                               const SolverSettings& settings = {});

enum class CriterionKind { AIC, BIC, Deviance, MSPE, DSS };

std::string_view to_string(CriterionKind kind);
CriterionKind parse_criterion(std::string_view name);

/// Tuning criteria on evaluation data y with predicted means mu.
/// `df` is used by AIC/BIC; `gaussian_variance` is the variance used by DSS
/// for Gaussian responses. Observations with zero DSS variance are skipped.
double criterion(CriterionKind kind, Family family, const Vector& y, const Vector& mu, int df,
                 double gaussian_variance = 1.0);

/// Evaluation callback: (y, mu, df, gaussian_variance) -> value, smaller is better.
using CriterionFn = std::function<double(const Vector&, const Vector&, int, double)>;
CriterionFn criterion_fn(CriterionKind kind, Family family);

/// Per-observation fold index in [0, K): a seeded shuffle followed by a
/// round-robin over each response level (quintile bins for Gaussian).
std::vector<int> stratified_kfold(const Vector& y, Family family, int K, std::uint64_t seed);

/// Stratified single split; true marks a validation observation.
std::vector<bool> stratified_split(const Vector& y, Family family, double validation_fraction, std::uint64_t seed);

/// Warm-started fits along the grid (each fit starts from the previous one).
/// Stops after index `last` when given.
std::vector<FitResult> fit_path(const ModelSpec& spec, const PenaltySet& penalties, const std::vector<double>& lambdas,
                                const SolverSettings& settings = {}, std::optional<std::size_t> last = std::nullopt);

enum class TuningMethod { InAIC, InBIC, OutDeviance, OutMSPE, OutDSS, CV, CV1se };

std::string_view to_string(TuningMethod method);
TuningMethod parse_tuning_method(std::string_view name);

struct TuningOptions {
  WeightScheme scheme = WeightScheme::Equal;
  WeightOptions weight_options;
  GridOptions grid;
  /// Replaces the default grid when set.
  std::optional<std::vector<double>> lambdas;
  int folds = 10;
  double validation_fraction = 0.25;
  std::uint64_t seed = 1;
  SolverSettings solver;
  int jobs = 1;
  /// Criterion for the cv protocols.
  CriterionKind cv_criterion = CriterionKind::Deviance;
  /// Overrides the criterion of any protocol (used for custom measures).
  CriterionFn custom_criterion;
};

struct TuningResult {
  TuningMethod method = TuningMethod::CV;
  std::vector<double> lambdas;
  /// Criterion per lambda (mean over folds for cv).
  std::vector<double> value;
  /// Standard deviation across folds (0 for single-sample protocols).
  std::vector<double> sd;
  /// df per lambda (mean over folds for cv).
  std::vector<double> df;
  /// Fits per lambda that entered the criterion.
  std::vector<int> valid;
  std::size_t index_min = 0;
  std::size_t index_1se = 0;
  double lambda_min = 0.0;
  double lambda_1se = 0.0;
  double selected_lambda = 0.0;
  int nonconverged_fits = 0;
  /// Full-data fit at the selected lambda.
  FitResult final_fit;
  std::vector<Vector> weights;
  std::vector<std::string> warnings;
};

/// argmin and one-standard-error selections over a criterion curve.
void select_lambda(TuningResult& result);

TuningResult in_sample_tune(const ModelSpec& spec, TuningMethod method, const TuningOptions& options);
TuningResult out_of_sample_tune(const ModelSpec& spec, TuningMethod method, const TuningOptions& options);
TuningResult cross_validate(const ModelSpec& spec, TuningMethod method, const TuningOptions& options);

/// Dispatches on the protocol.
TuningResult tune(const ModelSpec& spec, TuningMethod method, const TuningOptions& options);

}  // namespace smurf
