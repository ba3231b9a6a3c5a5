#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "smurf/config.hpp"
#include "smurf/model.hpp"
#include "smurf/table.hpp"
#include "smurf/tuning.hpp"

namespace smurf {

/// One predictor of the credit-scoring scenario.
struct CreditPredictor {
  std::string name;
  std::vector<std::string> levels;
  PenaltyKind penalty = PenaltyKind::FusedLasso;
  std::optional<int> reference;
  std::optional<Graph> graph;
  /// True coefficient per level (reference level included, at 0).
  std::vector<double> truth;
};

/// Credit worthiness scenario: ordinal age, stability, salary and loan,
/// binary sex, nominal prof and drink, and a 7 x 10 salary-band by loan-band
/// interaction. Response paid = 1 when all payments were on time.
struct SimulationScenario {
  Index n = 10000;
  std::uint64_t seed = 1;

  /// age, stability, salary, loan, sex, prof, drink, salxloan.
  static const std::vector<CreditPredictor>& predictors();
  /// Full coefficient vector (intercept first) of the canonical model.
  static Vector true_beta();
  /// Salary band (grid row) of a salary level and loan band (grid column)
  /// of a loan level.
  static int salary_band(int salary_level);
  static int loan_band(int loan_level);
};

/// Raw draws: level index per predictor (scenario order) and the response.
struct CreditData {
  std::vector<std::vector<int>> levels;
  Vector paid;

  Index n() const noexcept { return paid.size(); }
};

CreditData simulate_credit_data(const SimulationScenario& scenario);

/// Blocks of the canonical model (intercept first).
std::vector<PredictorBlock> credit_blocks();
/// Dummy-coded design of the canonical model.
DesignMatrix credit_design(const CreditData& data);
ModelSpec credit_spec(const CreditData& data);

std::pair<DesignMatrix, Vector> simulate_credit_dataset(const SimulationScenario& scenario);

/// Level labels per predictor plus the response column `paid`.
Table credit_table(const CreditData& data);
/// Config describing the canonical model over credit_table's columns.
ModelConfig credit_config();

/// Coefficient mean squared error ||beta - beta_hat||^2 / length.
double coefficient_mse(const Vector& beta_hat, const Vector& beta_true);

/// Per-block false positive and false negative rates. Fused blocks count
/// graph-edge differences (reference level at 0); Lasso and Group Lasso
/// blocks count coefficients. A rate with an empty denominator is 0.
struct SelectionRates {
  std::string predictor;
  double fpr = 0.0;
  double fnr = 0.0;
  int true_zero = 0;
  int true_nonzero = 0;
};
std::vector<SelectionRates> fpr_fnr(const Vector& beta_hat, const Vector& beta_true,
                                    const std::vector<PredictorBlock>& blocks, const std::vector<BlockSlice>& layout,
                                    double tol = kFusionTolerance);

/// Mann-Whitney AUC with midranks for ties. Throws when only one class is
/// present.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Area under the cumulative capture-rate curve: observations sorted by
/// decreasing prediction (ties by index), trapezoids from (0, 0).
double lorenz_aucc(const std::vector<double>& predictions, const std::vector<double>& observed);

struct StudySetting {
  WeightScheme scheme = WeightScheme::Combined;
  TuningMethod method = TuningMethod::CV1se;

  std::string label() const;
};
StudySetting parse_study_setting(std::string_view label);

inline constexpr const char* kBaselineLabel = "GLM.ridge";

struct StudyOptions {
  std::vector<StudySetting> settings{StudySetting{}};
  int replicates = 10;
  Index n = 10000;
  Index holdout = 5000;
  std::uint64_t seed = 1;
  int folds = 10;
  GridOptions grid;
  SolverSettings solver;
  int jobs = 1;
  bool baseline = true;
  double baseline_ridge = 1e-6;
};

struct ReplicateRecord {
  std::string setting;
  int replicate = 0;
  bool ok = false;
  std::string error;
  double mse = 0.0;
  double auc = 0.0;
  double df = 0.0;
  double lambda = 0.0;
  int nonconverged = 0;
  double seconds = 0.0;
  std::vector<SelectionRates> rates;
};

struct StudyReport {
  StudyOptions options;
  double oracle_auc = 0.0;
  std::vector<ReplicateRecord> records;
  std::vector<std::string> log;

  std::vector<double> metric(const std::string& setting, const std::function<double(const ReplicateRecord&)>& f) const;
};

double median(std::vector<double> values);

using StudyProgress = std::function<void(const ReplicateRecord&)>;

/// Replicates run concurrently; a failing replicate is recorded and the
/// study continues.
StudyReport run_study(const StudyOptions& options, const StudyProgress& progress = {});

/// mse.csv, auc.csv, df.csv, fpr.csv, fnr.csv (setting, replicate, ...),
/// summary.csv of medians, failures.csv and a README-style header file.
void write_study_report(const StudyReport& report, const std::filesystem::path& dir);

}  // namespace smurf
