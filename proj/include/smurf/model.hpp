#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "smurf/errors.hpp"

namespace smurf {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class Family { Gaussian, Binomial, Poisson };

std::string_view to_string(Family family);
Family parse_family(std::string_view name);

enum class PenaltyKind { None, Lasso, GroupLasso, FusedLasso, GeneralizedFusedLasso };

std::string_view to_string(PenaltyKind kind);
PenaltyKind parse_penalty_kind(std::string_view name);

/// True for penalties acting on coefficient differences.
constexpr bool is_fusion(PenaltyKind kind) {
  return kind == PenaltyKind::FusedLasso || kind == PenaltyKind::GeneralizedFusedLasso;
}

/// Undirected edge between two levels, stored with first < second.
struct Edge {
  int first = 0;
  int second = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Fusion graph over the levels of one predictor.
class Graph {
 public:
  enum class Kind { Chain, Grid, Complete, Explicit };

  static Graph chain(int levels);
  /// Levels laid out row-major: level = row * cols + col.
  static Graph grid(int rows, int cols);
  static Graph complete(int levels);
  /// Rejects self-edges, out-of-range indices and duplicates.
  static Graph from_edges(int levels, std::vector<Edge> edges);

  Kind kind() const noexcept { return kind_; }
  int levels() const noexcept { return levels_; }
  int grid_rows() const noexcept { return rows_; }
  int grid_cols() const noexcept { return cols_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  Index edge_count() const noexcept { return static_cast<Index>(edges_.size()); }

 private:
  Graph(Kind kind, int levels, std::vector<Edge> edges, int rows = 0, int cols = 0)
      : kind_(kind), levels_(levels), rows_(rows), cols_(cols), edges_(std::move(edges)) {}

  Kind kind_;
  int levels_;
  int rows_;
  int cols_;
  std::vector<Edge> edges_;
};

std::string_view to_string(Graph::Kind kind);

/// Reads `level_i,level_l` lines (zero-based). Blank lines and lines starting
/// with '#' are skipped.
Graph read_edge_list(std::istream& in, int levels);

/// One predictor: a contiguous range of design columns sharing a penalty.
///
/// Levels are indexed over the full level set; when a reference level is
/// declared its column is absent from the design, so column k maps to level
/// k (k < reference) or k + 1 (k >= reference).
struct PredictorBlock {
  std::string id;
  Index first_column = 0;
  Index column_count = 0;
  PenaltyKind penalty = PenaltyKind::Lasso;
  std::optional<Graph> graph;
  std::optional<int> reference_level;
  bool dummy_coded = false;
  std::vector<std::string> level_labels;
  /// n_{j,i} per level (including the reference); filled by validate_spec
  /// for dummy-coded blocks.
  std::vector<double> level_counts;

  int level_count() const;
  int level_of_column(Index column) const;
  std::optional<Index> column_of_level(int level) const;

  static PredictorBlock intercept();
};

struct ColumnMeta {
  std::string predictor;
  std::string level;
};

/// Dense n x p model matrix without the intercept column.
struct DesignMatrix {
  Matrix values;
  std::vector<ColumnMeta> columns;
  /// Known additive term of the linear predictor (e.g. log exposure).
  /// Empty means zero.
  Vector offset;

  Index rows() const noexcept { return values.rows(); }
  Index cols() const noexcept { return values.cols(); }
};

/// Per-column centering and scaling applied to Lasso and Group Lasso
/// columns. Untouched columns carry mean 0 and scale 1.
struct StandardizationRecord {
  Vector mean;
  Vector scale;

  static StandardizationRecord identity(Index p);
  bool is_identity() const;
};

/// Returns the standardized copy of the design together with the record.
/// Only Lasso and Group Lasso columns are transformed (population standard
/// deviation); a constant column is an error naming the predictor.
std::pair<Matrix, StandardizationRecord> standardize_columns(
    const Matrix& design, const std::vector<PredictorBlock>& blocks);

/// Maps coefficients on the original scale to the standardized scale.
Vector standardize_coefficients(const Vector& beta, const StandardizationRecord& record);
/// Inverse of standardize_coefficients; the intercept absorbs the centering.
Vector destandardize_coefficients(const Vector& beta_std, const StandardizationRecord& record);

/// Position of one block inside the full coefficient vector (index 0 is the
/// intercept).
struct BlockSlice {
  Index offset = 0;
  Index size = 0;
};

std::vector<BlockSlice> coefficient_layout(const std::vector<PredictorBlock>& blocks);

std::vector<Vector> partition(const Vector& beta, const std::vector<PredictorBlock>& blocks);
Vector recombine(const std::vector<Vector>& parts);

struct CoefficientVector {
  Vector beta;
  std::vector<BlockSlice> layout;

  auto block(std::size_t j) const { return beta.segment(layout[j].offset, layout[j].size); }
  double intercept() const { return beta[0]; }
};

/// Validated model: design, response, family and predictor blocks.
/// Immutable after construction.
class ModelSpec {
 public:
  const DesignMatrix& design() const noexcept { return design_; }
  const Matrix& X() const noexcept { return design_.values; }
  const Vector& offset() const noexcept { return design_.offset; }
  const Vector& response() const noexcept { return response_; }
  Family family() const noexcept { return family_; }
  const std::vector<PredictorBlock>& blocks() const noexcept { return blocks_; }
  const std::vector<BlockSlice>& layout() const noexcept { return layout_; }
  const StandardizationRecord& standardization() const noexcept { return standardization_; }

  Index n() const noexcept { return design_.rows(); }
  Index p() const noexcept { return design_.cols(); }
  Index coefficient_count() const noexcept { return design_.cols() + 1; }

  /// Rows `rows` as a new validated spec (level counts and standardization
  /// recomputed on the subset).
  ModelSpec subset(std::span<const Index> rows) const;

 private:
  friend ModelSpec validate_spec(DesignMatrix, Vector, Family, std::vector<PredictorBlock>);

  DesignMatrix design_;
  Vector response_;
  Family family_ = Family::Gaussian;
  std::vector<PredictorBlock> blocks_;
  std::vector<BlockSlice> layout_;
  StandardizationRecord standardization_;
};

/// Checks the design/block layout and the response against the family.
/// Throws SpecError listing every violation. Blocks are returned ordered as
/// intercept first, then by first column.
ModelSpec validate_spec(DesignMatrix design, Vector response, Family family,
                        std::vector<PredictorBlock> blocks);

/// First-order difference matrix D(w), (levels-1) x levels, with the
/// reference column removed when given.
SparseMatrix build_difference_matrix(int levels, const Vector& weights,
                                     std::optional<int> reference = std::nullopt);

/// G(w): one row per edge (i, l) with -w at column i and +w at column l.
SparseMatrix build_graph_matrix(const Graph& graph, const Vector& weights,
                                std::optional<int> reference = std::nullopt);

}  // namespace smurf
