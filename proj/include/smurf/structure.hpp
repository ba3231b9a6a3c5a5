#pragma once

#include <vector>

#include "smurf/model.hpp"

namespace smurf {

/// Coefficients within this distance of zero are reported as zero, and
/// regularized differences within it as fused.
inline constexpr double kFusionTolerance = 1e-7;

/// Block coefficients expanded over all levels; the reference level is 0.
Vector expand_levels(const PredictorBlock& block, const Eigen::Ref<const Vector>& beta_j);

/// Connected components of the fusion graph restricted to edges whose level
/// values differ by at most `tol`. Returns a component id per level,
/// numbered in order of first appearance.
std::vector<int> fusion_components(const Vector& level_values, const Graph& graph, double tol);

/// Collapses near-fusions to their component mean (the reference level's
/// component to 0) and near-zeros to exactly 0. Acts on the scale the
/// penalties act on.
Vector snap_coefficients(const Vector& beta, const std::vector<PredictorBlock>& blocks,
                         const std::vector<BlockSlice>& layout, double tol = kFusionTolerance);

/// Fused dummy-coded blocks without a reference level can move by a common
/// constant against the intercept without changing the objective. Shifts each
/// such block so its median level value is 0 and moves the constant into the
/// intercept (coefficient 0).
void center_free_blocks(Vector& beta, const std::vector<PredictorBlock>& blocks, const std::vector<BlockSlice>& layout);

/// Number of distinct nonzero values within one block, grouping sorted
/// values whose gaps are at most `tol`.
int distinct_nonzero(const Eigen::Ref<const Vector>& values, double tol = kFusionTolerance);

/// Degrees of freedom: distinct nonzero values summed over blocks, plus one
/// for a nonzero intercept.
int df_estimate(const Vector& beta, const std::vector<PredictorBlock>& blocks,
                const std::vector<BlockSlice>& layout, double tol = kFusionTolerance);

}  // namespace smurf
