#include "smurf/weights.hpp"

#include <algorithm>
#include <cmath>

#include "smurf/family.hpp"
#include "smurf/penalty.hpp"

namespace smurf {

namespace {

double capped_inverse(double magnitude, double cap) {
  if (magnitude <= 0.0) return cap;
  return std::min(1.0 / magnitude, cap);
}

// Block coefficients expanded to all levels, reference level at 0.
Vector level_values(const Vector& beta_hat, const PredictorBlock& block) {
  Vector levels = Vector::Zero(block.level_count());
  for (Index k = 0; k < beta_hat.size(); ++k) levels[block.level_of_column(k)] = beta_hat[k];
  return levels;
}

}  // namespace

std::string_view to_string(WeightScheme scheme) {
  switch (scheme) {
    case WeightScheme::Equal: return "eq";
    case WeightScheme::Adaptive: return "ad";
    case WeightScheme::Standardization: return "st";
    case WeightScheme::Combined: return "ad.st";
  }
  return "?";
}

WeightScheme parse_weight_scheme(std::string_view name) {
  if (name == "eq") return WeightScheme::Equal;
  if (name == "ad") return WeightScheme::Adaptive;
  if (name == "st") return WeightScheme::Standardization;
  if (name == "ad.st") return WeightScheme::Combined;
  throw InputError("unknown weight scheme '" + std::string(name) + "' (expected eq, ad, st or ad.st)");
}

Vector adaptive_weights(const Vector& beta_hat, const PredictorBlock& block, double cap) {
  if (beta_hat.size() != block.column_count)
    throw InputError("initial estimate length differs from block '" + block.id + "'");
  switch (block.penalty) {
    case PenaltyKind::None: return Vector();
    case PenaltyKind::Lasso: {
      Vector w(beta_hat.size());
      for (Index i = 0; i < w.size(); ++i) w[i] = capped_inverse(std::abs(beta_hat[i]), cap);
      return w;
    }
    case PenaltyKind::GroupLasso: return Vector::Constant(1, capped_inverse(beta_hat.norm(), cap));
    case PenaltyKind::FusedLasso:
    case PenaltyKind::GeneralizedFusedLasso: {
      if (!block.graph) throw InputError("block '" + block.id + "' has no graph");
      const Vector levels = level_values(beta_hat, block);
      const auto& edges = block.graph->edges();
      Vector w(static_cast<Index>(edges.size()));
      for (std::size_t e = 0; e < edges.size(); ++e)
        w[static_cast<Index>(e)] = capped_inverse(std::abs(levels[edges[e].second] - levels[edges[e].first]), cap);
      return w;
    }
  }
  return Vector();
}

Vector standardization_weights(const PredictorBlock& block, double n) {
  if (!is_fusion(block.penalty)) return equal_weights(block);
  if (!(n > 0.0)) throw InputError("standardization weights need a positive observation count");
  if (!block.graph) throw InputError("block '" + block.id + "' has no graph");
  if (static_cast<int>(block.level_counts.size()) != block.level_count())
    throw InputError("block '" + block.id + "' has no level counts; standardization weights need dummy coding");
  const auto& edges = block.graph->edges();
  const double factor = block.penalty == PenaltyKind::GeneralizedFusedLasso
                            ? static_cast<double>(block.level_count() - 1) / static_cast<double>(edges.size())
                            : 1.0;
  Vector w(static_cast<Index>(edges.size()));
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const double pair = block.level_counts[static_cast<std::size_t>(edges[e].first)] +
                        block.level_counts[static_cast<std::size_t>(edges[e].second)];
    // A pair of empty levels is weighted as if it held one observation.
    w[static_cast<Index>(e)] = factor * std::sqrt(std::max(pair, 1.0) / n);
  }
  return w;
}

Vector combined_weights(const Vector& adaptive, const Vector& standardization, double cap) {
  if (adaptive.size() != standardization.size()) throw InputError("weight vectors differ in length");
  return (adaptive.array() * standardization.array()).min(cap).matrix();
}

Vector equal_weights(const PredictorBlock& block) { return Vector::Ones(weight_count(block)); }

Vector initial_estimate(const ModelSpec& spec, double ridge) {
  const auto fit = irls_fit(spec, ridge);
  return standardize_coefficients(fit.beta, spec.standardization());
}

std::vector<Vector> compute_weights(const ModelSpec& spec, WeightScheme scheme, const WeightOptions& options) {
  const bool adaptive = scheme == WeightScheme::Adaptive || scheme == WeightScheme::Combined;
  const bool standardized = scheme == WeightScheme::Standardization || scheme == WeightScheme::Combined;
  Vector beta_hat;
  if (adaptive) beta_hat = initial_estimate(spec, options.initial_ridge);

  const auto& blocks = spec.blocks();
  std::vector<Vector> out;
  out.reserve(blocks.size());
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const auto& b = blocks[j];
    if (b.penalty == PenaltyKind::None) {
      out.emplace_back();
      continue;
    }
    Vector w = equal_weights(b);
    const auto& slice = spec.layout()[j];
    if (adaptive) w = adaptive_weights(beta_hat.segment(slice.offset, slice.size), b, options.cap);
    if (standardized) {
      const Vector st = standardization_weights(b, static_cast<double>(spec.n()));
      w = adaptive ? combined_weights(w, st, options.cap) : st;
    }
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace smurf
