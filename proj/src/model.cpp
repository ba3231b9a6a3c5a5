#include "smurf/model.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <set>
#include <sstream>

namespace smurf {

namespace {

std::string join_issues(const std::vector<std::string>& issues) {
  std::string out = "invalid model specification";
  for (const auto& issue : issues) {
    out += "\n  - ";
    out += issue;
  }
  return out;
}

}  // namespace

SpecError::SpecError(std::vector<std::string> issues)
    : InputError(join_issues(issues)), issues_(std::move(issues)) {}

std::string_view to_string(Family family) {
  switch (family) {
    case Family::Gaussian: return "gaussian";
    case Family::Binomial: return "binomial";
    case Family::Poisson: return "poisson";
  }
  return "?";
}

Family parse_family(std::string_view name) {
  if (name == "gaussian") return Family::Gaussian;
  if (name == "binomial") return Family::Binomial;
  if (name == "poisson") return Family::Poisson;
  throw InputError("unknown family '" + std::string(name) + "'");
}

std::string_view to_string(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::None: return "none";
    case PenaltyKind::Lasso: return "lasso";
    case PenaltyKind::GroupLasso: return "grouplasso";
    case PenaltyKind::FusedLasso: return "flasso";
    case PenaltyKind::GeneralizedFusedLasso: return "gflasso";
  }
  return "?";
}

PenaltyKind parse_penalty_kind(std::string_view name) {
  if (name == "none") return PenaltyKind::None;
  if (name == "lasso") return PenaltyKind::Lasso;
  if (name == "grouplasso") return PenaltyKind::GroupLasso;
  if (name == "flasso") return PenaltyKind::FusedLasso;
  if (name == "gflasso") return PenaltyKind::GeneralizedFusedLasso;
  throw InputError("unknown penalty '" + std::string(name) + "'");
}

std::string_view to_string(Graph::Kind kind) {
  switch (kind) {
    case Graph::Kind::Chain: return "chain";
    case Graph::Kind::Grid: return "grid";
    case Graph::Kind::Complete: return "complete";
    case Graph::Kind::Explicit: return "explicit";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Graph

Graph Graph::chain(int levels) {
  if (levels < 1) throw InputError("chain graph needs at least one level");
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(levels - 1));
  for (int i = 0; i + 1 < levels; ++i) edges.push_back({i, i + 1});
  return Graph(Kind::Chain, levels, std::move(edges));
}

Graph Graph::grid(int rows, int cols) {
  if (rows < 1 || cols < 1) throw InputError("grid graph needs positive dimensions");
  std::vector<Edge> edges;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int here = r * cols + c;
      if (c + 1 < cols) edges.push_back({here, here + 1});
      if (r + 1 < rows) edges.push_back({here, here + cols});
    }
  }
  return Graph(Kind::Grid, rows * cols, std::move(edges), rows, cols);
}

Graph Graph::complete(int levels) {
  if (levels < 1) throw InputError("complete graph needs at least one level");
  std::vector<Edge> edges;
  for (int i = 0; i < levels; ++i)
    for (int l = i + 1; l < levels; ++l) edges.push_back({i, l});
  return Graph(Kind::Complete, levels, std::move(edges));
}

Graph Graph::from_edges(int levels, std::vector<Edge> edges) {
  if (levels < 1) throw InputError("graph needs at least one level");
  std::set<std::pair<int, int>> seen;
  for (auto& e : edges) {
    if (e.first == e.second)
      throw InputError("self-edge on level " + std::to_string(e.first));
    if (e.first < 0 || e.second < 0 || e.first >= levels || e.second >= levels)
      throw InputError("edge (" + std::to_string(e.first) + ", " + std::to_string(e.second) +
                       ") out of range for " + std::to_string(levels) + " levels");
    if (e.first > e.second) std::swap(e.first, e.second);
    if (!seen.emplace(e.first, e.second).second)
      throw InputError("duplicate edge (" + std::to_string(e.first) + ", " +
                       std::to_string(e.second) + ")");
  }
  return Graph(Kind::Explicit, levels, std::move(edges));
}

Graph read_edge_list(std::istream& in, int levels) {
  std::vector<Edge> edges;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    Edge e;
    std::string rest;
    if (!(fields >> e.first >> e.second) || (fields >> rest))
      throw InputError("edge list line " + std::to_string(line_no) + ": expected 'i,l'");
    edges.push_back(e);
  }
  return Graph::from_edges(levels, std::move(edges));
}

// ---------------------------------------------------------------------------
// PredictorBlock

int PredictorBlock::level_count() const {
  if (penalty == PenaltyKind::None) return 1;
  return static_cast<int>(column_count) + (reference_level ? 1 : 0);
}

int PredictorBlock::level_of_column(Index column) const {
  const int k = static_cast<int>(column);
  if (reference_level && k >= *reference_level) return k + 1;
  return k;
}

std::optional<Index> PredictorBlock::column_of_level(int level) const {
  if (reference_level) {
    if (level == *reference_level) return std::nullopt;
    return level > *reference_level ? level - 1 : level;
  }
  return level;
}

PredictorBlock PredictorBlock::intercept() {
  PredictorBlock b;
  b.id = "(Intercept)";
  b.penalty = PenaltyKind::None;
  b.column_count = 0;
  return b;
}

// ---------------------------------------------------------------------------
// Standardization

StandardizationRecord StandardizationRecord::identity(Index p) {
  return {Vector::Zero(p), Vector::Ones(p)};
}

bool StandardizationRecord::is_identity() const {
  return (mean.array() == 0.0).all() && (scale.array() == 1.0).all();
}

std::pair<Matrix, StandardizationRecord> standardize_columns(
    const Matrix& design, const std::vector<PredictorBlock>& blocks) {
  auto record = StandardizationRecord::identity(design.cols());
  Matrix out = design;
  const double n = static_cast<double>(design.rows());
  for (const auto& block : blocks) {
    if (block.penalty != PenaltyKind::Lasso && block.penalty != PenaltyKind::GroupLasso) continue;
    for (Index k = 0; k < block.column_count; ++k) {
      const Index c = block.first_column + k;
      if (c < 0 || c >= design.cols())
        throw InputError("predictor '" + block.id + "' references a column outside the design");
      const double mean = design.col(c).mean();
      const double var = (design.col(c).array() - mean).square().sum() / n;
      const double sd = std::sqrt(var);
      if (!(sd > 1e-12 * std::max(1.0, std::abs(mean))))
        throw InputError("predictor '" + block.id + "': column " + std::to_string(k) +
                         " is constant and cannot be standardized");
      record.mean[c] = mean;
      record.scale[c] = sd;
      out.col(c) = (design.col(c).array() - mean) / sd;
    }
  }
  return {std::move(out), std::move(record)};
}

Vector standardize_coefficients(const Vector& beta, const StandardizationRecord& record) {
  if (beta.size() != record.mean.size() + 1)
    throw InputError("coefficient vector does not match the standardization record");
  Vector out(beta.size());
  const auto slopes = beta.tail(beta.size() - 1).array();
  out.tail(beta.size() - 1) = (slopes * record.scale.array()).matrix();
  out[0] = beta[0] + (slopes * record.mean.array()).sum();
  return out;
}

Vector destandardize_coefficients(const Vector& beta_std, const StandardizationRecord& record) {
  if (beta_std.size() != record.mean.size() + 1)
    throw InputError("coefficient vector does not match the standardization record");
  Vector out(beta_std.size());
  const Vector slopes = (beta_std.tail(beta_std.size() - 1).array() / record.scale.array()).matrix();
  out.tail(beta_std.size() - 1) = slopes;
  out[0] = beta_std[0] - (slopes.array() * record.mean.array()).sum();
  return out;
}

// ---------------------------------------------------------------------------
// Partition

std::vector<BlockSlice> coefficient_layout(const std::vector<PredictorBlock>& blocks) {
  std::vector<BlockSlice> layout;
  layout.reserve(blocks.size());
  for (const auto& b : blocks) {
    if (b.penalty == PenaltyKind::None)
      layout.push_back({0, 1});
    else
      layout.push_back({1 + b.first_column, b.column_count});
  }
  return layout;
}

std::vector<Vector> partition(const Vector& beta, const std::vector<PredictorBlock>& blocks) {
  Index total = 0;
  for (const auto& b : blocks) total += b.penalty == PenaltyKind::None ? 1 : b.column_count;
  if (beta.size() != total)
    throw InputError("coefficient vector has length " + std::to_string(beta.size()) +
                     ", blocks expect " + std::to_string(total));
  std::vector<Vector> parts;
  parts.reserve(blocks.size());
  for (const auto& slice : coefficient_layout(blocks))
    parts.emplace_back(beta.segment(slice.offset, slice.size));
  return parts;
}

Vector recombine(const std::vector<Vector>& parts) {
  Index total = 0;
  for (const auto& part : parts) total += part.size();
  Vector beta(total);
  Index at = 0;
  for (const auto& part : parts) {
    beta.segment(at, part.size()) = part;
    at += part.size();
  }
  return beta;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

void check_response(Family family, const Vector& y, std::vector<std::string>& issues) {
  for (Index i = 0; i < y.size(); ++i) {
    const double v = y[i];
    if (!std::isfinite(v)) {
      issues.push_back("response " + std::to_string(i) + " is not finite");
      return;
    }
    if (family == Family::Binomial && v != 0.0 && v != 1.0) {
      issues.push_back("binomial response must be 0 or 1 (observation " + std::to_string(i) + ")");
      return;
    }
    if (family == Family::Poisson && (v < 0.0 || v != std::floor(v))) {
      issues.push_back("poisson response must be a nonnegative integer (observation " +
                       std::to_string(i) + ")");
      return;
    }
  }
}

}  // namespace

ModelSpec validate_spec(DesignMatrix design, Vector response, Family family,
                        std::vector<PredictorBlock> blocks) {
  std::vector<std::string> issues;
  const Index n = design.rows();
  const Index p = design.cols();

  if (response.size() != n)
    issues.push_back("response length " + std::to_string(response.size()) +
                     " differs from design rows " + std::to_string(n));
  if (design.offset.size() == 0) design.offset = Vector::Zero(n);
  if (design.offset.size() != n) issues.push_back("offset length differs from design rows");
  if (!design.columns.empty() && static_cast<Index>(design.columns.size()) != p)
    issues.push_back("column metadata length differs from design columns");
  if (!design.values.allFinite()) issues.push_back("design contains non-finite values");
  if (design.offset.size() == n && !design.offset.allFinite())
    issues.push_back("offset contains non-finite values");
  if (response.size() == n) check_response(family, response, issues);

  const auto intercepts = std::count_if(blocks.begin(), blocks.end(), [](const PredictorBlock& b) {
    return b.penalty == PenaltyKind::None;
  });
  if (intercepts != 1)
    issues.push_back("expected exactly one intercept block, found " + std::to_string(intercepts));

  std::stable_sort(blocks.begin(), blocks.end(), [](const PredictorBlock& a, const PredictorBlock& b) {
    const bool ai = a.penalty == PenaltyKind::None;
    const bool bi = b.penalty == PenaltyKind::None;
    if (ai != bi) return ai;
    return a.first_column < b.first_column;
  });

  std::vector<int> owner(static_cast<std::size_t>(std::max<Index>(p, 0)), -1);
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    auto& b = blocks[j];
    const std::string name = "predictor '" + b.id + "'";
    if (b.penalty == PenaltyKind::None) {
      if (b.column_count != 0) issues.push_back(name + ": intercept block cannot own design columns");
      continue;
    }
    if (b.column_count < 1) {
      issues.push_back(name + ": no columns");
      continue;
    }
    if (b.first_column < 0 || b.first_column + b.column_count > p) {
      issues.push_back(name + ": column range outside the design");
      continue;
    }
    for (Index c = b.first_column; c < b.first_column + b.column_count; ++c) {
      auto& o = owner[static_cast<std::size_t>(c)];
      if (o >= 0)
        issues.push_back(name + " overlaps predictor '" + blocks[static_cast<std::size_t>(o)].id +
                         "' at column " + std::to_string(c));
      else
        o = static_cast<int>(j);
    }

    const int levels = b.level_count();
    if (b.reference_level && (*b.reference_level < 0 || *b.reference_level >= levels))
      issues.push_back(name + ": reference level out of range");

    if (is_fusion(b.penalty)) {
      if (levels < 2) issues.push_back(name + ": fused penalty needs at least 2 levels");
      if (!b.graph) {
        if (b.penalty == PenaltyKind::FusedLasso && levels >= 1)
          b.graph = Graph::chain(levels);
        else
          issues.push_back(name + ": generalized fused lasso requires a graph");
      }
      if (b.graph) {
        if (b.penalty == PenaltyKind::FusedLasso && b.graph->kind() != Graph::Kind::Chain)
          issues.push_back(name + ": fused lasso uses a chain graph");
        if (b.graph->levels() != levels)
          issues.push_back(name + ": graph has " + std::to_string(b.graph->levels()) +
                           " levels, block has " + std::to_string(levels));
        for (const auto& e : b.graph->edges()) {
          if (e.first < 0 || e.second >= levels || e.second < 0 || e.first >= levels) {
            issues.push_back(name + ": graph edge (" + std::to_string(e.first) + ", " +
                             std::to_string(e.second) + ") out of range");
            break;
          }
        }
      }
    } else if (b.graph) {
      issues.push_back(name + ": " + std::string(to_string(b.penalty)) + " blocks carry no graph");
    }

    if (!b.level_labels.empty() && static_cast<int>(b.level_labels.size()) != levels)
      issues.push_back(name + ": level label count differs from level count");

    if (b.dummy_coded && n > 0) {
      const auto cols = design.values.middleCols(b.first_column, b.column_count);
      const bool binary = ((cols.array() == 0.0) || (cols.array() == 1.0)).all();
      const Vector row_sums = cols.rowwise().sum();
      if (!binary) {
        issues.push_back(name + ": dummy-coded columns must be 0/1");
      } else if ((row_sums.array() > 1.0).any()) {
        issues.push_back(name + ": more than one active level in a row");
      } else if (!b.reference_level && (row_sums.array() != 1.0).any()) {
        issues.push_back(name + ": rows without an active level need a reference level");
      } else {
        b.level_counts.assign(static_cast<std::size_t>(levels), 0.0);
        for (Index k = 0; k < b.column_count; ++k)
          b.level_counts[static_cast<std::size_t>(b.level_of_column(k))] = cols.col(k).sum();
        if (b.reference_level)
          b.level_counts[static_cast<std::size_t>(*b.reference_level)] =
              static_cast<double>(n) - row_sums.sum();
      }
    }
  }
  for (Index c = 0; c < p; ++c)
    if (owner[static_cast<std::size_t>(c)] < 0)
      issues.push_back("design column " + std::to_string(c) + " belongs to no predictor");

  StandardizationRecord record = StandardizationRecord::identity(p);
  if (issues.empty()) {
    try {
      record = standardize_columns(design.values, blocks).second;
    } catch (const InputError& e) {
      issues.push_back(e.what());
    }
  }
  if (!issues.empty()) throw SpecError(std::move(issues));

  ModelSpec spec;
  spec.design_ = std::move(design);
  spec.response_ = std::move(response);
  spec.family_ = family;
  spec.blocks_ = std::move(blocks);
  spec.layout_ = coefficient_layout(spec.blocks_);
  spec.standardization_ = std::move(record);
  return spec;
}

ModelSpec ModelSpec::subset(std::span<const Index> rows) const {
  DesignMatrix d;
  d.values.resize(static_cast<Index>(rows.size()), p());
  d.offset.resize(static_cast<Index>(rows.size()));
  Vector y(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Index r = rows[i];
    if (r < 0 || r >= n()) throw InputError("subset row out of range");
    d.values.row(static_cast<Index>(i)) = design_.values.row(r);
    d.offset[static_cast<Index>(i)] = design_.offset[r];
    y[static_cast<Index>(i)] = response_[r];
  }
  d.columns = design_.columns;
  auto blocks = blocks_;
  for (auto& b : blocks) b.level_counts.clear();
  return validate_spec(std::move(d), std::move(y), family_, std::move(blocks));
}

// ---------------------------------------------------------------------------
// Difference matrices

SparseMatrix build_graph_matrix(const Graph& graph, const Vector& weights,
                                std::optional<int> reference) {
  if (weights.size() != graph.edge_count())
    throw InputError("graph has " + std::to_string(graph.edge_count()) + " edges but " +
                     std::to_string(weights.size()) + " weights were given");
  for (Index i = 0; i < weights.size(); ++i)
    if (!(std::isfinite(weights[i]) && weights[i] > 0.0))
      throw InputError("penalty weights must be positive and finite");
  const int levels = graph.levels();
  if (reference && (*reference < 0 || *reference >= levels))
    throw InputError("reference level out of range");

  auto column = [&](int level) -> int {
    if (!reference) return level;
    if (level == *reference) return -1;
    return level > *reference ? level - 1 : level;
  };

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(2 * graph.edges().size());
  for (std::size_t r = 0; r < graph.edges().size(); ++r) {
    const auto& e = graph.edges()[r];
    const double w = weights[static_cast<Index>(r)];
    if (const int c = column(e.first); c >= 0) triplets.emplace_back(static_cast<int>(r), c, -w);
    if (const int c = column(e.second); c >= 0) triplets.emplace_back(static_cast<int>(r), c, w);
  }
  SparseMatrix G(graph.edge_count(), levels - (reference ? 1 : 0));
  G.setFromTriplets(triplets.begin(), triplets.end());
  return G;
}

SparseMatrix build_difference_matrix(int levels, const Vector& weights, std::optional<int> reference) {
  if (levels < 2) throw InputError("difference matrix needs at least 2 levels");
  return build_graph_matrix(Graph::chain(levels), weights, reference);
}

}  // namespace smurf
