#include "smurf/reestimate.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "smurf/family.hpp"

namespace smurf {

CollapsePlan build_collapse_plan(const ModelSpec& spec, const Vector& beta, double tol) {
  if (beta.size() != spec.coefficient_count()) throw InputError("coefficient vector does not match the model");
  CollapsePlan plan;
  plan.coefficient_count = spec.coefficient_count();
  const auto& blocks = spec.blocks();
  const auto& layout = spec.layout();
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const auto& b = blocks[j];
    const auto& sl = layout[j];
    if (sl.offset == 0) continue;  // intercept
    const auto seg = beta.segment(sl.offset, sl.size);
    if (b.penalty == PenaltyKind::None) {
      for (Index k = 0; k < sl.size; ++k) plan.groups.push_back({j, {b.first_column + k}, seg[k]});
      continue;
    }
    if (!is_fusion(b.penalty) || !b.graph) {
      for (Index k = 0; k < sl.size; ++k)
        if (std::abs(seg[k]) > tol) plan.groups.push_back({j, {b.first_column + k}, seg[k]});
      continue;
    }
    const Vector levels = expand_levels(b, seg);
    const auto comp = fusion_components(levels, *b.graph, tol);
    const int ref_comp = b.reference_level ? comp[static_cast<std::size_t>(*b.reference_level)] : -1;
    std::map<int, CollapseGroup> by_comp;
    for (Index k = 0; k < sl.size; ++k) {
      const int c = comp[static_cast<std::size_t>(b.level_of_column(k))];
      if (c == ref_comp) continue;
      auto& g = by_comp[c];
      g.block = j;
      g.columns.push_back(b.first_column + k);
      g.value += seg[k];
    }
    for (auto& [c, g] : by_comp) {
      g.value /= static_cast<double>(g.columns.size());
      if (std::abs(g.value) > tol) plan.groups.push_back(std::move(g));
    }
  }
  return plan;
}

Matrix collapsed_design(const ModelSpec& spec, const CollapsePlan& plan) {
  Matrix Z(spec.n(), static_cast<Index>(plan.groups.size()));
  for (std::size_t g = 0; g < plan.groups.size(); ++g) {
    auto col = Z.col(static_cast<Index>(g));
    col.setZero();
    for (Index c : plan.groups[g].columns) col += spec.X().col(c);
  }
  return Z;
}

Vector expand_reduced(const CollapsePlan& plan, const Vector& reduced) {
  if (reduced.size() != static_cast<Index>(plan.groups.size()) + 1)
    throw InputError("reduced coefficients do not match the collapse plan");
  Vector beta = Vector::Zero(plan.coefficient_count);
  beta[0] = reduced[0];
  for (std::size_t g = 0; g < plan.groups.size(); ++g)
    for (Index c : plan.groups[g].columns) beta[c + 1] = reduced[static_cast<Index>(g) + 1];
  return beta;
}

ReestimateResult reestimate(const ModelSpec& spec, const Vector& beta, double tol) {
  ReestimateResult r;
  r.plan = build_collapse_plan(spec, beta, tol);
  const Matrix Z = collapsed_design(spec, r.plan);
  IrlsResult fit;
  try {
    fit = irls_fit(spec.family(), Z, spec.response(), spec.offset(), 0.0);
  } catch (const NumericError&) {
    r.ridge_fallback = true;
    r.warnings.push_back("collapsed design is rank deficient; refit with ridge 1e-8");
    fit = irls_fit(spec.family(), Z, spec.response(), spec.offset(), kReestimateFallbackRidge);
  }
  if (!fit.converged) r.warnings.push_back("re-estimation did not reach its gradient tolerance");
  r.reduced = fit.beta;
  r.coefficients.beta = expand_reduced(r.plan, fit.beta);
  r.coefficients.layout = spec.layout();
  r.df = df_estimate(r.coefficients.beta, spec.blocks(), spec.layout(), tol);
  const auto& y = spec.response();
  r.log_likelihood = log_likelihood(spec.family(), y, predict_mean(r.coefficients.beta, spec.design(), spec.family()));
  r.regularized_log_likelihood = log_likelihood(spec.family(), y, predict_mean(beta, spec.design(), spec.family()));
  return r;
}

ReestimateResult reestimate(const ModelSpec& spec, const FitResult& fit, double tol) {
  return reestimate(spec, fit.coefficients.beta, tol);
}

}  // namespace smurf
