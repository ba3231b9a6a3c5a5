#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "oracles.hpp"
#include "smurf/family.hpp"
#include "smurf/tuning.hpp"

using namespace smurf;

namespace {

ModelSpec small_factor_spec(Family fam, std::uint64_t seed, Index n = 400) {
  oracle::FactorSpecOptions o;
  o.levels = {6, 4, 3};
  o.penalties = {PenaltyKind::FusedLasso, PenaltyKind::GeneralizedFusedLasso, PenaltyKind::Lasso};
  o.family = fam;
  o.n = n;
  o.seed = seed;
  return oracle::random_factor_spec(o);
}

}  // namespace

TEST_CASE("lambda grid is log spaced") {
  const auto g = make_lambda_grid(2.0, 5, 1e-4);
  REQUIRE(g.values.size() == 5);
  CHECK(g.values.front() == 2.0);
  CHECK(g.values.back() == doctest::Approx(2e-4));
  for (std::size_t k = 1; k < 5; ++k) CHECK(g.values[k] / g.values[k - 1] == doctest::Approx(0.1));
  CHECK_THROWS_AS(make_lambda_grid(1.0, 1, 0.1), InputError);
  CHECK_THROWS_AS(make_lambda_grid(1.0, 5, 1.0), InputError);
  CHECK_THROWS_AS(make_lambda_grid(-1.0, 5, 0.1), InputError);
}

TEST_CASE("criteria closed forms") {
  const Vector y{{1.0, 2.0, 3.0}};
  const Vector mu{{1.0, 1.0, 1.0}};
  const auto g = Family::Gaussian;
  CHECK(criterion(CriterionKind::Deviance, g, y, mu, 2) == doctest::Approx(5.0));
  CHECK(criterion(CriterionKind::AIC, g, y, mu, 2) == doctest::Approx(9.0));
  CHECK(criterion(CriterionKind::BIC, g, y, mu, 2) == doctest::Approx(5.0 + 2.0 * std::log(3.0)));
  CHECK(criterion(CriterionKind::MSPE, g, y, mu, 2) == doctest::Approx(std::sqrt(5.0) / 3.0));
  CHECK(criterion(CriterionKind::DSS, g, y, mu, 2, 2.0) == doctest::Approx(2.5 + 3.0 * std::log(2.0)));

  const Vector yb{{1.0, 0.0}};
  const Vector pb{{0.8, 0.4}};
  CHECK(criterion(CriterionKind::Deviance, Family::Binomial, yb, pb, 1) ==
        doctest::Approx(-2.0 * (std::log(0.8) + std::log(0.6))));
  CHECK(criterion(CriterionKind::DSS, Family::Binomial, yb, pb, 1) ==
        doctest::Approx(0.04 / 0.16 + std::log(0.16) + 0.16 / 0.24 + std::log(0.24)));

  const Vector yp{{0.0, 3.0}};
  const Vector mp{{0.0, 2.0}};
  // zero variance observation is skipped
  CHECK(criterion(CriterionKind::DSS, Family::Poisson, yp, mp, 1) == doctest::Approx(0.5 + std::log(2.0)));

  for (auto k : {CriterionKind::AIC, CriterionKind::BIC, CriterionKind::Deviance, CriterionKind::MSPE, CriterionKind::DSS})
    CHECK(parse_criterion(to_string(k)) == k);
  CHECK_THROWS_AS(parse_criterion("R2"), InputError);
}

TEST_CASE("tuning method names") {
  for (auto m : {TuningMethod::InAIC, TuningMethod::InBIC, TuningMethod::OutDeviance, TuningMethod::OutMSPE,
                 TuningMethod::OutDSS, TuningMethod::CV, TuningMethod::CV1se})
    CHECK(parse_tuning_method(to_string(m)) == m);
  CHECK_THROWS_AS(parse_tuning_method("cv.min"), InputError);
}

TEST_CASE("stratified folds balance sizes and classes") {
  std::mt19937 rng(5);
  std::bernoulli_distribution coin(0.3);
  Vector y(1003);
  for (Index i = 0; i < y.size(); ++i) y[i] = coin(rng) ? 1.0 : 0.0;
  const int K = 10;
  const auto fold = stratified_kfold(y, Family::Binomial, K, 42);
  std::vector<int> size(K, 0), pos(K, 0);
  for (std::size_t i = 0; i < fold.size(); ++i) {
    REQUIRE(fold[i] >= 0);
    REQUIRE(fold[i] < K);
    ++size[static_cast<std::size_t>(fold[i])];
    if (y[static_cast<Index>(i)] > 0.5) ++pos[static_cast<std::size_t>(fold[i])];
  }
  CHECK(*std::max_element(size.begin(), size.end()) - *std::min_element(size.begin(), size.end()) <= 1);
  CHECK(*std::max_element(pos.begin(), pos.end()) - *std::min_element(pos.begin(), pos.end()) <= 1);

  CHECK(stratified_kfold(y, Family::Binomial, K, 42) == fold);
  CHECK(stratified_kfold(y, Family::Binomial, K, 43) != fold);
  CHECK_THROWS_AS(stratified_kfold(y, Family::Binomial, 1, 1), InputError);

  Vector yg(500);
  std::normal_distribution<double> z;
  for (Index i = 0; i < yg.size(); ++i) yg[i] = z(rng);
  const auto gf = stratified_kfold(yg, Family::Gaussian, 5, 3);
  std::vector<int> gs(5, 0);
  for (int f : gf) ++gs[static_cast<std::size_t>(f)];
  for (int s : gs) CHECK(s == 100);

  const auto val = stratified_split(y, Family::Binomial, 0.25, 9);
  const auto nval = std::count(val.begin(), val.end(), true);
  CHECK(std::abs(static_cast<double>(nval) - 0.25 * 1003.0) <= 1.0);
  CHECK_THROWS_AS(stratified_split(y, Family::Binomial, 1.5, 9), InputError);
}

TEST_CASE("argmin and one-standard-error selection") {
  TuningResult r;
  r.lambdas = {5, 4, 3, 2, 1};
  r.value = {10, 6, 5.5, 5, 5.2};
  r.sd = {1, 1, 1, 0.6, 1};
  r.valid = {10, 10, 10, 10, 10};
  select_lambda(r);
  CHECK(r.index_min == 3);
  CHECK(r.index_1se == 2);
  CHECK(r.lambda_min == 2);
  CHECK(r.lambda_1se == 3);

  r.valid = {10, 10, 0, 10, 10};
  select_lambda(r);
  CHECK(r.index_1se == 3);

  r.valid = {0, 0, 0, 0, 0};
  CHECK_THROWS_AS(select_lambda(r), NumericError);
}

TEST_CASE("default grid starts at the collapse boundary") {
  for (auto fam : {Family::Gaussian, Family::Binomial, Family::Poisson}) {
    const auto spec = small_factor_spec(fam, 11);
    const auto pen = make_penalties(spec, compute_weights(spec, WeightScheme::Combined));
    const auto grid = default_lambda_grid(spec, pen, {20, 1e-3});
    REQUIRE(grid.values.size() == 20);
    CHECK(grid.values.back() == doctest::Approx(grid.lambda_max * 1e-3));
    SolverSettings s;
    s.record_trace = false;
    const auto at = smurf_fit(spec, pen, grid.lambda_max, s);
    const auto below = smurf_fit(spec, pen, grid.lambda_max / 2.0, s);
    CHECK(is_collapsed(at.beta_standardized, spec.blocks(), spec.layout()));
    CHECK(!is_collapsed(below.beta_standardized, spec.blocks(), spec.layout()));
  }
}

TEST_CASE("warm path agrees with cold fits") {
  const auto spec = small_factor_spec(Family::Binomial, 4);
  const auto pen = make_penalties(spec, unit_weights(spec));
  const std::vector<double> lambdas{0.05, 0.02, 0.008, 0.003};
  SolverSettings s;
  s.eps = 1e-12;
  const auto path = fit_path(spec, pen, lambdas, s);
  REQUIRE(path.size() == 4);
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    const auto cold = smurf_fit(spec, pen, lambdas[k], s);
    CHECK(path[k].lambda == lambdas[k]);
    CHECK(std::abs(path[k].objective - cold.objective) <= 1e-9 * std::abs(cold.objective));
  }
  CHECK(fit_path(spec, pen, lambdas, s, 1).size() == 2);
}

TEST_CASE("cross-validation protocol") {
  const auto spec = small_factor_spec(Family::Binomial, 21, 500);
  TuningOptions o;
  o.scheme = WeightScheme::Combined;
  o.grid = {15, 1e-3};
  o.folds = 5;
  o.seed = 3;
  const auto r = tune(spec, TuningMethod::CV1se, o);
  REQUIRE(r.lambdas.size() == 15);
  REQUIRE(r.value.size() == 15);
  REQUIRE(r.sd.size() == 15);
  REQUIRE(r.df.size() == 15);
  CHECK(r.index_1se <= r.index_min);
  CHECK(r.selected_lambda == r.lambda_1se);
  CHECK(r.final_fit.lambda == r.selected_lambda);
  CHECK(r.final_fit.converged);
  for (std::size_t k = 0; k < 15; ++k) {
    CHECK(std::isfinite(r.value[k]));
    CHECK(r.valid[k] == 5);
    if (k >= 1) CHECK(r.sd[k] >= 0.0);
  }
  // df grows along the path on average
  CHECK(r.df.front() <= r.df.back());

  // the chosen fit matches a full-data fit at that lambda
  const auto pen = make_penalties(spec, r.weights);
  SolverSettings s;
  const auto direct = smurf_fit(spec, pen, r.selected_lambda, s);
  CHECK(std::abs(direct.objective - r.final_fit.objective) <= 1e-6 * std::abs(direct.objective));

  auto o2 = o;
  o2.jobs = 3;
  const auto r2 = tune(spec, TuningMethod::CV1se, o2);
  CHECK(r2.value == r.value);
  CHECK(r2.index_1se == r.index_1se);

  const auto rmin = tune(spec, TuningMethod::CV, o);
  CHECK(rmin.selected_lambda == rmin.lambda_min);
  CHECK(rmin.index_min == r.index_min);
}

TEST_CASE("in-sample and out-of-sample protocols") {
  const auto spec = small_factor_spec(Family::Poisson, 8, 400);
  TuningOptions o;
  o.scheme = WeightScheme::Adaptive;
  o.grid = {12, 1e-3};
  const auto aic = tune(spec, TuningMethod::InAIC, o);
  REQUIRE(aic.value.size() == 12);
  // criterion recomputed from the chosen fit
  const Vector mu = predict_mean(aic.final_fit.coefficients.beta, spec.design(), spec.family());
  const int df = df_estimate(aic.final_fit.coefficients.beta, spec.blocks(), spec.layout());
  CHECK(aic.value[aic.index_min] ==
        doctest::Approx(criterion(CriterionKind::AIC, spec.family(), spec.response(), mu, df)));
  const auto bic = tune(spec, TuningMethod::InBIC, o);
  // heavier complexity charge never picks a larger model
  CHECK(bic.df[bic.index_min] <= aic.df[aic.index_min]);

  for (auto m : {TuningMethod::OutDeviance, TuningMethod::OutMSPE, TuningMethod::OutDSS}) {
    const auto r = tune(spec, m, o);
    CHECK(r.final_fit.lambda == r.lambdas[r.index_min]);
    CHECK(std::isfinite(r.value[r.index_min]));
  }

  auto custom = o;
  custom.custom_criterion = [](const Vector& y, const Vector& mu, int, double) { return (y - mu).cwiseAbs().sum(); };
  const auto mae = tune(spec, TuningMethod::OutDeviance, custom);
  CHECK(std::isfinite(mae.value[mae.index_min]));

  auto fixed = o;
  fixed.lambdas = std::vector<double>{0.1, 0.01};
  CHECK(tune(spec, TuningMethod::InAIC, fixed).lambdas.size() == 2);
  fixed.lambdas = std::vector<double>{0.01, 0.1};
  CHECK_THROWS_AS(tune(spec, TuningMethod::InAIC, fixed), InputError);
}
