#pragma once

#include <memory>
#include <vector>

#include "smurf/model.hpp"
#include "smurf/prox.hpp"

namespace smurf {

/// Penalty g_j for one block, on the standardized coefficient scale.
///
/// Weight layout: Lasso one per column, Group Lasso a single weight, fused
/// penalties one per graph edge (edges over all levels, reference included).
struct BlockPenalty {
  PenaltyKind kind = PenaltyKind::None;
  Vector weights;
  SparseMatrix matrix;
  std::shared_ptr<const EigenCache> cache;

  double value(const Eigen::Ref<const Vector>& beta_j) const;
};

/// Per-block penalties aligned with ModelSpec::blocks().
class PenaltySet {
 public:
  PenaltySet() = default;
  explicit PenaltySet(std::vector<BlockPenalty> blocks) : blocks_(std::move(blocks)) {}

  const std::vector<BlockPenalty>& blocks() const noexcept { return blocks_; }
  const BlockPenalty& operator[](std::size_t j) const { return blocks_[j]; }
  std::size_t size() const noexcept { return blocks_.size(); }

  /// Per-block penalty values for a standardized-scale coefficient vector.
  std::vector<double> block_values(const Vector& beta_std, const std::vector<BlockSlice>& layout) const;
  /// sum_j g_j(beta_j) on the standardized scale.
  double total(const Vector& beta_std, const std::vector<BlockSlice>& layout) const;

 private:
  std::vector<BlockPenalty> blocks_;
};

/// Number of weights a block expects.
Index weight_count(const PredictorBlock& block);

/// Builds penalty matrices and eigen caches from per-block weights (one
/// entry per spec block; the intercept entry is ignored).
PenaltySet make_penalties(const ModelSpec& spec, const std::vector<Vector>& weights);

/// All-ones weights for every block.
std::vector<Vector> unit_weights(const ModelSpec& spec);

}  // namespace smurf
