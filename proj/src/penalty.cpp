#include "smurf/penalty.hpp"

#include <cmath>

namespace smurf {

double BlockPenalty::value(const Eigen::Ref<const Vector>& beta_j) const {
  switch (kind) {
    case PenaltyKind::None: return 0.0;
    case PenaltyKind::Lasso: return (weights.array() * beta_j.array().abs()).sum();
    case PenaltyKind::GroupLasso: return weights[0] * beta_j.norm();
    case PenaltyKind::FusedLasso:
    case PenaltyKind::GeneralizedFusedLasso: return (matrix * beta_j).lpNorm<1>();
  }
  return 0.0;
}

std::vector<double> PenaltySet::block_values(const Vector& beta_std,
                                             const std::vector<BlockSlice>& layout) const {
  std::vector<double> out(blocks_.size(), 0.0);
  for (std::size_t j = 0; j < blocks_.size(); ++j)
    out[j] = blocks_[j].value(beta_std.segment(layout[j].offset, layout[j].size));
  return out;
}

double PenaltySet::total(const Vector& beta_std, const std::vector<BlockSlice>& layout) const {
  double sum = 0.0;
  for (std::size_t j = 0; j < blocks_.size(); ++j)
    sum += blocks_[j].value(beta_std.segment(layout[j].offset, layout[j].size));
  return sum;
}

Index weight_count(const PredictorBlock& block) {
  switch (block.penalty) {
    case PenaltyKind::None: return 0;
    case PenaltyKind::Lasso: return block.column_count;
    case PenaltyKind::GroupLasso: return 1;
    case PenaltyKind::FusedLasso:
    case PenaltyKind::GeneralizedFusedLasso: return block.graph ? block.graph->edge_count() : 0;
  }
  return 0;
}

PenaltySet make_penalties(const ModelSpec& spec, const std::vector<Vector>& weights) {
  const auto& blocks = spec.blocks();
  if (weights.size() != blocks.size())
    throw InputError("expected " + std::to_string(blocks.size()) + " weight vectors, got " +
                     std::to_string(weights.size()));
  std::vector<BlockPenalty> out;
  out.reserve(blocks.size());
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const auto& b = blocks[j];
    BlockPenalty pen;
    pen.kind = b.penalty;
    if (b.penalty != PenaltyKind::None) {
      const Index expected = weight_count(b);
      if (weights[j].size() != expected)
        throw InputError("predictor '" + b.id + "' expects " + std::to_string(expected) + " weights, got " +
                         std::to_string(weights[j].size()));
      for (Index i = 0; i < expected; ++i)
        if (!(std::isfinite(weights[j][i]) && weights[j][i] > 0.0))
          throw InputError("predictor '" + b.id + "': penalty weights must be positive and finite");
      pen.weights = weights[j];
      if (is_fusion(b.penalty)) {
        pen.matrix = build_graph_matrix(*b.graph, pen.weights, b.reference_level);
        pen.cache = std::make_shared<const EigenCache>(pen.matrix);
      }
    }
    out.push_back(std::move(pen));
  }
  return PenaltySet(std::move(out));
}

std::vector<Vector> unit_weights(const ModelSpec& spec) {
  std::vector<Vector> out;
  out.reserve(spec.blocks().size());
  for (const auto& b : spec.blocks()) out.push_back(Vector::Ones(weight_count(b)));
  return out;
}

}  // namespace smurf
