#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "smurf/penalty.hpp"
#include "smurf/weights.hpp"

using namespace smurf;

namespace {

PredictorBlock factor_block(PenaltyKind kind, int levels, std::optional<int> reference, std::vector<double> counts) {
  PredictorBlock b;
  b.id = "f";
  b.first_column = 0;
  b.column_count = levels - (reference ? 1 : 0);
  b.penalty = kind;
  b.reference_level = reference;
  b.dummy_coded = true;
  b.graph = kind == PenaltyKind::FusedLasso ? Graph::chain(levels) : Graph::complete(levels);
  b.level_counts = std::move(counts);
  return b;
}

PredictorBlock lasso_block(Index cols, PenaltyKind kind = PenaltyKind::Lasso) {
  PredictorBlock b;
  b.id = "x";
  b.column_count = cols;
  b.penalty = kind;
  return b;
}

}  // namespace

TEST_CASE("weight scheme names") {
  for (auto s : {WeightScheme::Equal, WeightScheme::Adaptive, WeightScheme::Standardization, WeightScheme::Combined})
    CHECK(parse_weight_scheme(to_string(s)) == s);
  CHECK(parse_weight_scheme("ad.st") == WeightScheme::Combined);
  CHECK_THROWS_AS(parse_weight_scheme("adaptive"), InputError);
}

TEST_CASE("adaptive weights invert the initial estimate") {
  const auto lasso = lasso_block(3);
  const Vector w = adaptive_weights(Vector{{0.5, -2.0, 0.0}}, lasso);
  CHECK(w[0] == doctest::Approx(2.0));
  CHECK(w[1] == doctest::Approx(0.5));
  CHECK(w[2] == kDefaultWeightCap);

  const auto group = lasso_block(2, PenaltyKind::GroupLasso);
  const Vector g = adaptive_weights(Vector{{3.0, 4.0}}, group);
  REQUIRE(g.size() == 1);
  CHECK(g[0] == doctest::Approx(0.2));

  // levels (0, 1, 1, 3) with the reference at level 0
  const auto fused = factor_block(PenaltyKind::FusedLasso, 4, 0, {1, 1, 1, 1});
  const Vector f = adaptive_weights(Vector{{1.0, 1.0, 3.0}}, fused, 1e6);
  REQUIRE(f.size() == 3);
  CHECK(f[0] == doctest::Approx(1.0));
  CHECK(f[1] == 1e6);
  CHECK(f[2] == doctest::Approx(0.5));

  CHECK_THROWS_AS(adaptive_weights(Vector{{1.0}}, lasso), InputError);
}

TEST_CASE("standardization weights from level counts") {
  const auto fused = factor_block(PenaltyKind::FusedLasso, 3, 0, {10, 30, 0});
  const Vector w = standardization_weights(fused, 40.0);
  REQUIRE(w.size() == 2);
  CHECK(w[0] == doctest::Approx(1.0));
  CHECK(w[1] == doctest::Approx(std::sqrt(30.0 / 40.0)));

  // complete graph on 4 levels: 6 edges, factor 3/6
  const auto gfl = factor_block(PenaltyKind::GeneralizedFusedLasso, 4, std::nullopt, {5, 5, 10, 20});
  const Vector v = standardization_weights(gfl, 40.0);
  REQUIRE(v.size() == 6);
  const auto& edges = gfl.graph->edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const double pair = gfl.level_counts[static_cast<std::size_t>(edges[e].first)] +
                        gfl.level_counts[static_cast<std::size_t>(edges[e].second)];
    CHECK(v[static_cast<Index>(e)] == doctest::Approx(0.5 * std::sqrt(pair / 40.0)));
  }

  const auto empty_pair = factor_block(PenaltyKind::FusedLasso, 3, 0, {10, 0, 0});
  CHECK(standardization_weights(empty_pair, 16.0)[1] == doctest::Approx(0.25));

  CHECK(standardization_weights(lasso_block(4), 10.0) == Vector::Ones(4));
}

TEST_CASE("combined weights are products with the cap") {
  const Vector c = combined_weights(Vector{{2.0, 1e10}}, Vector{{0.5, 4.0}});
  CHECK(c[0] == doctest::Approx(1.0));
  CHECK(c[1] == kDefaultWeightCap);
  CHECK_THROWS_AS(combined_weights(Vector{{1.0}}, Vector{{1.0, 2.0}}), InputError);
}

TEST_CASE("compute_weights covers every block") {
  oracle::FactorSpecOptions o;
  o.levels = {5, 4, 3};
  o.penalties = {PenaltyKind::FusedLasso, PenaltyKind::GeneralizedFusedLasso, PenaltyKind::GroupLasso};
  o.n = 300;
  o.seed = 7;
  const auto spec = oracle::random_factor_spec(o);
  for (auto scheme : {WeightScheme::Equal, WeightScheme::Adaptive, WeightScheme::Standardization, WeightScheme::Combined}) {
    const auto w = compute_weights(spec, scheme);
    REQUIRE(w.size() == spec.blocks().size());
    for (std::size_t j = 0; j < w.size(); ++j) {
      const auto& b = spec.blocks()[j];
      if (b.penalty == PenaltyKind::None) {
        CHECK(w[j].size() == 0);
        continue;
      }
      CHECK(w[j].size() == weight_count(b));
      CHECK((w[j].array() > 0.0).all());
      CHECK((w[j].array() <= kDefaultWeightCap).all());
    }
  }

  const auto ad = compute_weights(spec, WeightScheme::Adaptive);
  const auto st = compute_weights(spec, WeightScheme::Standardization);
  const auto both = compute_weights(spec, WeightScheme::Combined);
  for (std::size_t j = 1; j < both.size(); ++j)
    CHECK((both[j] - combined_weights(ad[j], st[j])).norm() <= 1e-12 * both[j].norm());

  // adaptive weights use the standardized-scale initial estimate
  const Vector init = initial_estimate(spec);
  const auto& s1 = spec.layout()[1];
  CHECK((ad[1] - adaptive_weights(init.segment(s1.offset, s1.size), spec.blocks()[1])).norm() == 0.0);
}
