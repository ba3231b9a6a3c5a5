#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "smurf/family.hpp"
#include "smurf/reestimate.hpp"

using namespace smurf;

namespace {

ModelSpec chain_spec() {
  oracle::FactorSpecOptions o;
  o.levels = {6, 3};
  o.penalties = {PenaltyKind::FusedLasso, PenaltyKind::Lasso};
  o.n = 300;
  o.seed = 2;
  return oracle::random_factor_spec(o);
}

}  // namespace

TEST_CASE("collapse plan groups connected fused clusters") {
  const auto spec = chain_spec();
  // block 1: levels 0..5 with reference 0, columns for levels 1..5
  // level values (0, 0, 0.5, 0.5, -0.3, 0.5); block 2: (0, 0.2)
  Vector beta(spec.coefficient_count());
  beta << 0.1, 0.0, 0.5, 0.5, -0.3, 0.5, 0.0, 0.2;
  const auto plan = build_collapse_plan(spec, beta);
  REQUIRE(plan.groups.size() == 4);
  CHECK(plan.groups[0].columns == std::vector<Index>{1, 2});
  CHECK(plan.groups[0].value == doctest::Approx(0.5));
  CHECK(plan.groups[1].columns == std::vector<Index>{3});
  // same value as the first cluster but not connected to it
  CHECK(plan.groups[2].columns == std::vector<Index>{4});
  CHECK(plan.groups[3].columns == std::vector<Index>{6});

  const Matrix Z = collapsed_design(spec, plan);
  CHECK((Z.col(0) - spec.X().col(1) - spec.X().col(2)).norm() == 0.0);

  const Vector back = expand_reduced(plan, Vector{{0.1, 0.5, -0.3, 0.5, 0.2}});
  CHECK((back - beta).norm() == 0.0);
  CHECK_THROWS_AS(expand_reduced(plan, Vector::Zero(3)), InputError);
}

TEST_CASE("re-estimation keeps the pattern and raises the likelihood") {
  for (auto fam : {Family::Gaussian, Family::Binomial, Family::Poisson}) {
    oracle::FactorSpecOptions o;
    o.levels = {7, 5, 4};
    o.penalties = {PenaltyKind::FusedLasso, PenaltyKind::GeneralizedFusedLasso, PenaltyKind::GroupLasso};
    o.family = fam;
    o.n = 500;
    o.seed = 13;
    const auto spec = oracle::random_factor_spec(o);
    const auto pen = make_penalties(spec, unit_weights(spec));
    const auto fit = smurf_fit(spec, pen, 0.01);
    const auto re = reestimate(spec, fit);
    CHECK(!re.ridge_fallback);
    CHECK(re.df == df_estimate(fit.coefficients.beta, spec.blocks(), spec.layout()));
    CHECK(re.log_likelihood >= re.regularized_log_likelihood - 1e-9 * std::abs(re.regularized_log_likelihood));

    // zero pattern unchanged
    for (Index i = 1; i < fit.coefficients.beta.size(); ++i)
      if (fit.coefficients.beta[i] == 0.0) CHECK(re.coefficients.beta[i] == 0.0);

    // stationary for the unpenalized reduced problem
    const Matrix Z = collapsed_design(spec, re.plan);
    Matrix A(spec.n(), Z.cols() + 1);
    A << Vector::Ones(spec.n()), Z;
    const Vector mu = predict_mean(re.coefficients.beta, spec.design(), spec.family());
    const Vector g = A.transpose() * (mu - spec.response()) / static_cast<double>(spec.n());
    CHECK(g.norm() < 1e-8);
  }
}

TEST_CASE("rank-deficient collapsed design falls back to ridge") {
  DesignMatrix d;
  const Index n = 50;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  d.values.resize(n, 2);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    d.values(i, 0) = z(rng);
    d.values(i, 1) = d.values(i, 0);
    y[i] = d.values(i, 0) + z(rng);
  }
  PredictorBlock x;
  x.id = "x";
  x.column_count = 2;
  x.penalty = PenaltyKind::Lasso;
  const auto spec = validate_spec(std::move(d), std::move(y), Family::Gaussian, {PredictorBlock::intercept(), x});
  const auto re = reestimate(spec, Vector{{0.0, 0.4, 0.4}});
  CHECK(re.ridge_fallback);
  REQUIRE(!re.warnings.empty());
  CHECK(std::isfinite(re.coefficients.beta.norm()));
}
