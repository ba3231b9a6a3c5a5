#include "smurf/structure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace smurf {

namespace {

int find_root(std::vector<int>& parent, int i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

}  // namespace

Vector expand_levels(const PredictorBlock& block, const Eigen::Ref<const Vector>& beta_j) {
  if (beta_j.size() != block.column_count)
    throw InputError("block '" + block.id + "' expects " + std::to_string(block.column_count) + " coefficients");
  Vector levels = Vector::Zero(block.level_count());
  for (Index k = 0; k < beta_j.size(); ++k) levels[block.level_of_column(k)] = beta_j[k];
  return levels;
}

std::vector<int> fusion_components(const Vector& level_values, const Graph& graph, double tol) {
  const int L = graph.levels();
  if (level_values.size() != L) throw InputError("level values do not match the graph");
  std::vector<int> parent(static_cast<std::size_t>(L));
  std::iota(parent.begin(), parent.end(), 0);
  for (const auto& e : graph.edges()) {
    if (std::abs(level_values[e.first] - level_values[e.second]) > tol) continue;
    const int a = find_root(parent, e.first);
    const int b = find_root(parent, e.second);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::vector<int> label(static_cast<std::size_t>(L), -1);
  std::vector<int> out(static_cast<std::size_t>(L));
  int next = 0;
  for (int i = 0; i < L; ++i) {
    const int r = find_root(parent, i);
    if (label[r] < 0) label[r] = next++;
    out[i] = label[r];
  }
  return out;
}

void center_free_blocks(Vector& beta, const std::vector<PredictorBlock>& blocks, const std::vector<BlockSlice>& layout) {
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const auto& b = blocks[j];
    if (!is_fusion(b.penalty) || !b.dummy_coded || b.reference_level || layout[j].size == 0) continue;
    auto seg = beta.segment(layout[j].offset, layout[j].size);
    std::vector<double> v(seg.begin(), seg.end());
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double c = v[mid];
    if (v.size() % 2 == 0) c = 0.5 * (c + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
    if (c == 0.0) continue;
    seg.array() -= c;
    beta[0] += c;
  }
}

Vector snap_coefficients(const Vector& beta, const std::vector<PredictorBlock>& blocks,
                         const std::vector<BlockSlice>& layout, double tol) {
  Vector out = beta;
  if (!(tol > 0.0)) return out;
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const auto& b = blocks[j];
    auto seg = out.segment(layout[j].offset, layout[j].size);
    if (b.penalty == PenaltyKind::None) continue;
    if (!is_fusion(b.penalty) || !b.graph) {
      for (Index k = 0; k < seg.size(); ++k)
        if (std::abs(seg[k]) <= tol) seg[k] = 0.0;
      continue;
    }
    const Vector levels = expand_levels(b, seg);
    const auto comp = fusion_components(levels, *b.graph, tol);
    const int ncomp = *std::max_element(comp.begin(), comp.end()) + 1;
    Vector sum = Vector::Zero(ncomp);
    Vector count = Vector::Zero(ncomp);
    for (int i = 0; i < levels.size(); ++i) {
      sum[comp[i]] += levels[i];
      count[comp[i]] += 1.0;
    }
    Vector value = sum.cwiseQuotient(count);
    if (b.reference_level) value[comp[*b.reference_level]] = 0.0;
    for (Index c = 0; c < ncomp; ++c)
      if (std::abs(value[c]) <= tol) value[c] = 0.0;
    for (Index k = 0; k < seg.size(); ++k) seg[k] = value[comp[b.level_of_column(k)]];
  }
  return out;
}

int distinct_nonzero(const Eigen::Ref<const Vector>& values, double tol) {
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(values.size()));
  for (Index i = 0; i < values.size(); ++i)
    if (std::abs(values[i]) > tol) v.push_back(values[i]);
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  int count = 1;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] - v[i - 1] > tol) ++count;
  return count;
}

int df_estimate(const Vector& beta, const std::vector<PredictorBlock>& blocks,
                const std::vector<BlockSlice>& layout, double tol) {
  if (beta.size() < 1) throw InputError("empty coefficient vector");
  int df = std::abs(beta[0]) > tol ? 1 : 0;
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    if (layout[j].offset == 0) continue;
    df += distinct_nonzero(beta.segment(layout[j].offset, layout[j].size), tol);
  }
  return df;
}

}  // namespace smurf
