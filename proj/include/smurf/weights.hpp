#pragma once

#include <string_view>
#include <vector>

#include "smurf/model.hpp"

namespace smurf {

enum class WeightScheme { Equal, Adaptive, Standardization, Combined };

std::string_view to_string(WeightScheme scheme);
/// Accepts the short setting names eq, ad, st and ad.st.
WeightScheme parse_weight_scheme(std::string_view name);

/// Upper bound on any weight; an initial estimate of exactly zero (or a zero
/// difference) maps here instead of to infinity.
inline constexpr double kDefaultWeightCap = 1e10;
/// Ridge strength of the initial fit behind adaptive weights.
inline constexpr double kDefaultInitialRidge = 1e-6;

struct WeightOptions {
  double cap = kDefaultWeightCap;
  double initial_ridge = kDefaultInitialRidge;
};

/// Inverse initial estimates with gamma = 1: per coefficient (Lasso), per
/// block norm (Group Lasso) or per graph edge difference (fused penalties,
/// the reference level counting as 0). `beta_hat` holds the block's
/// coefficients on the scale the penalty acts on.
Vector adaptive_weights(const Vector& beta_hat, const PredictorBlock& block, double cap = kDefaultWeightCap);

/// sqrt((n_i + n_l) / n) per edge, times (p_j - 1) / r_G for the generalized
/// fused lasso; ones for Lasso and Group Lasso.
Vector standardization_weights(const PredictorBlock& block, double n);

Vector combined_weights(const Vector& adaptive, const Vector& standardization, double cap = kDefaultWeightCap);

Vector equal_weights(const PredictorBlock& block);

/// Ridge-stabilized unpenalized fit mapped to the standardized scale.
Vector initial_estimate(const ModelSpec& spec, double ridge = kDefaultInitialRidge);

/// One weight vector per spec block under `scheme`.
std::vector<Vector> compute_weights(const ModelSpec& spec, WeightScheme scheme, const WeightOptions& options = {});

}  // namespace smurf
