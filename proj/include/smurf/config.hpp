#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "smurf/model.hpp"
#include "smurf/solver.hpp"
#include "smurf/table.hpp"
#include "smurf/tuning.hpp"
#include "smurf/weights.hpp"

namespace smurf {

struct GraphConfig {
  std::string type = "chain";  // chain | grid | complete | edges
  int rows = 0;
  int cols = 0;
  std::filesystem::path path;
};

struct PredictorConfig {
  enum class Type { Numeric, Factor };

  std::string name;
  Type type = Type::Factor;
  /// Numeric: one design column per entry.
  std::vector<std::string> columns;
  /// Factor: data column and level order (taken from the data when empty).
  std::string column;
  std::vector<std::string> levels;
  std::optional<std::string> reference;
  PenaltyKind penalty = PenaltyKind::Lasso;
  std::optional<GraphConfig> graph;
};

/// Model description read from a JSON document. Unknown keys are rejected
/// at every level.
struct ModelConfig {
  Family family = Family::Gaussian;
  std::string response;
  std::optional<std::string> offset;
  std::vector<PredictorConfig> predictors;
  WeightScheme weights = WeightScheme::Equal;
  WeightOptions weight_options;
  SolverSettings solver;
  /// Tuning defaults; command-line flags override them.
  std::optional<TuningMethod> method;
  TuningOptions tuning;
  /// Directory that relative edge-list paths resolve against.
  std::filesystem::path base_dir;
};

ModelConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ModelConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ModelConfig& config);

/// Design, response and blocks for `table` under `config`. Factor cells
/// outside the declared levels and non-numeric cells are errors naming the
/// line.
ModelSpec build_spec(const Table& table, const ModelConfig& config);

/// Design rows only (no response needed), for scoring new data.
DesignMatrix build_design(const Table& table, const ModelConfig& config);

}  // namespace smurf
