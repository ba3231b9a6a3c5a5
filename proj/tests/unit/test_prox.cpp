#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "smurf/prox.hpp"

using namespace smurf;

namespace {

ProxResult fused(const Vector& b, const Graph& g, const Vector& w, double t, std::optional<int> ref = std::nullopt,
                 const AdmmSettings& settings = {}) {
  const SparseMatrix G = build_graph_matrix(g, w, ref);
  const EigenCache cache(G);
  return prox_gen_fused(b, G, t, cache, settings, b);
}

Vector random_vector(Index d, std::mt19937& rng, double scale = 1.0) {
  std::normal_distribution<double> z(0.0, scale);
  Vector v(d);
  for (Index i = 0; i < d; ++i) v[i] = z(rng);
  return v;
}

}  // namespace

TEST_CASE("identity prox") {
  CHECK(prox_identity(0.0) == 0.0);
  CHECK(prox_identity(3.7) == 3.7);
  CHECK(prox_identity(-1.2) == -1.2);
}

TEST_CASE("soft threshold examples") {
  CHECK(soft_threshold(3.0, 1.0) == 2.0);
  const double z = soft_threshold(0.5, 1.0);
  CHECK(z == 0.0);
  CHECK(!std::signbit(z));
  CHECK(!std::signbit(soft_threshold(-0.5, 1.0)));
  CHECK(soft_threshold(-2.0, 0.5) == -1.5);
  CHECK_THROWS_AS(soft_threshold(1.0, -0.1), InputError);
}

TEST_CASE("group soft threshold examples") {
  Vector b(2);
  b << 3, 4;
  CHECK(group_soft_threshold(b, 5.0) == Vector::Zero(2));
  const Vector half = group_soft_threshold(b, 2.5);
  CHECK(half[0] == doctest::Approx(1.5));
  CHECK(half[1] == doctest::Approx(2.0));
  CHECK_THROWS_AS(group_soft_threshold(b, -1.0), InputError);

  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-3, 3), t(0, 2);
  for (int i = 0; i < 200; ++i) {
    const double x = u(rng), th = t(rng);
    Vector one(1);
    one << x;
    CHECK(group_soft_threshold(one, th)[0] == doctest::Approx(soft_threshold(x, th)).epsilon(1e-15));
  }
}

TEST_CASE("fused prox with zero scale returns the input") {
  Vector b(3);
  b << 0.3, -1.0, 2.0;
  CHECK(fused(b, Graph::chain(3), Vector::Ones(2), 0.0).x == b);
}

TEST_CASE("two-point chain examples") {
  Vector b(2);
  b << 0, 1;
  const auto r1 = fused(b, Graph::chain(2), Vector::Ones(1), 0.2);
  CHECK(r1.report.converged);
  CHECK(r1.x[0] == doctest::Approx(0.2).epsilon(1e-8));
  CHECK(r1.x[1] == doctest::Approx(0.8).epsilon(1e-8));
  const auto r2 = fused(b, Graph::chain(2), Vector::Ones(1), 0.6);
  CHECK(std::abs(r2.x[0] - 0.5) < 1e-8);
  CHECK(std::abs(r2.x[1] - 0.5) < 1e-8);
  CHECK(std::abs(r2.x[0] - r2.x[1]) < 1e-8);
}

TEST_CASE("eigen cache") {
  const EigenCache c(build_graph_matrix(Graph::chain(3), Vector::Ones(2)));
  CHECK(c.eigenvalues()[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(c.eigenvalues()[1] == doctest::Approx(1.0));
  CHECK(c.eigenvalues()[2] == doctest::Approx(3.0));

  Vector w(1);
  w << 1.7;
  const EigenCache single(build_graph_matrix(Graph::chain(2), w, 0));
  CHECK(single.dimension() == 1);
  CHECK(single.eigenvalues()[0] == doctest::Approx(1.7 * 1.7));

  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(0.2, 3.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Graph g = trial % 2 ? Graph::complete(5) : Graph::grid(2, 3);
    Vector ww(g.edge_count());
    for (Index e = 0; e < ww.size(); ++e) ww[e] = u(rng);
    const SparseMatrix G = build_graph_matrix(g, ww, trial % 3 == 0 ? std::optional<int>(0) : std::nullopt);
    const EigenCache cache(G);
    const Matrix Gd = Matrix(G);
    const Matrix rec = cache.eigenvectors() * cache.eigenvalues().asDiagonal() * cache.eigenvectors().transpose();
    CHECK((rec - Gd.transpose() * Gd).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(cache.eigenvalues().minCoeff() >= 0.0);
    // (I + rho G^T G)^{-1} applied through the cache
    const Vector v = random_vector(Gd.cols(), rng);
    Vector out;
    cache.apply_inverse(v, 2.5, out);
    const Matrix A = Matrix::Identity(Gd.cols(), Gd.cols()) + 2.5 * Gd.transpose() * Gd;
    CHECK((A * out - v).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("fused prox matches enumeration oracle and meets residual tolerances") {
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> u(0.2, 2.0), t(0.01, 1.0);
  const AdmmSettings settings;
  for (int trial = 0; trial < 30; ++trial) {
    const Graph g = trial % 3 == 0 ? Graph::chain(5) : trial % 3 == 1 ? Graph::complete(4) : Graph::grid(2, 3);
    const std::optional<int> ref = trial % 2 ? std::optional<int>(0) : std::nullopt;
    Vector w(g.edge_count());
    for (Index e = 0; e < w.size(); ++e) w[e] = u(rng);
    const Index d = g.levels() - (ref ? 1 : 0);
    const Vector b = random_vector(d, rng);
    const double sl = t(rng);
    const auto res = fused(b, g, w, sl, ref, settings);
    const Vector expect = oracle::fused_prox_bruteforce(b, g, w, sl, ref);
    CHECK((res.x - expect).cwiseAbs().maxCoeff() < 1e-5);
    CHECK(res.report.converged);
    CHECK(res.report.primal_residual <= res.report.eps_primal);
    CHECK(res.report.dual_residual <= res.report.eps_dual);
  }
}

TEST_CASE("a fully fused prox is exact") {
  Vector b(4);
  b << 0.1, 2.0, -1.0, 0.5;
  const auto free = fused(b, Graph::complete(4), Vector::Ones(6), 10.0);
  CHECK(free.report.iterations == 0);
  CHECK((free.x.array() == b.mean()).all());
  const auto pinned = fused(b.head(3), Graph::chain(4), Vector::Ones(3), 10.0, 0);
  CHECK((pinned.x.array() == 0.0).all());
  // the boundary case: dual norm just above the scale goes through ADMM
  Vector c(2);
  c << -1.0, 1.0;
  const auto edge = fused(c, Graph::chain(2), Vector::Ones(1), 0.999);
  CHECK(edge.report.iterations > 0);
  CHECK(edge.x[1] - edge.x[0] == doctest::Approx(0.002).epsilon(1e-6));
}

TEST_CASE("prox optimality under random perturbations") {
  std::mt19937 rng(4);
  const Graph g = Graph::complete(4);
  Vector w = Vector::Ones(g.edge_count());
  const Vector b = random_vector(4, rng);
  const auto res = fused(b, g, w, 0.3);
  const double f0 = oracle::fused_prox_objective(res.x, b, g, w, 0.3, std::nullopt);
  for (int k = 0; k < 200; ++k) {
    Vector delta = random_vector(4, rng);
    delta *= 1e-4 / delta.norm();
    CHECK(oracle::fused_prox_objective(res.x + delta, b, g, w, 0.3, std::nullopt) >= f0 - 1e-10);
  }
}

TEST_CASE("prox operators are nonexpansive") {
  std::mt19937 rng(8);
  const Graph g = Graph::chain(5);
  const Vector w = Vector::Ones(4);
  for (int k = 0; k < 30; ++k) {
    const Vector a = random_vector(5, rng), b = random_vector(5, rng);
    const Vector th = Vector::Constant(5, 0.4);
    CHECK((soft_threshold(a, th) - soft_threshold(b, th)).norm() <= (a - b).norm() + 1e-12);
    CHECK((group_soft_threshold(a, 0.7) - group_soft_threshold(b, 0.7)).norm() <= (a - b).norm() + 1e-12);
    CHECK((fused(a, g, w, 0.3).x - fused(b, g, w, 0.3).x).norm() <= (a - b).norm() + 1e-8);
  }
}

TEST_CASE("ADMM non-convergence is flagged, not thrown") {
  AdmmSettings tight;
  tight.max_iter = 2;
  Vector b(4);
  b << 0.1, 2.0, -1.0, 0.5;
  ProxResult r;
  CHECK_NOTHROW(r = fused(b, Graph::complete(4), Vector::Ones(6), 0.5, std::nullopt, tight));
  CHECK(!r.report.converged);
  CHECK(r.report.iterations == 2);
}

TEST_CASE("ADMM settings validation") {
  AdmmSettings s;
  s.relaxation = 2.0;
  CHECK_THROWS_AS(s.validate(), InputError);
  s = {};
  s.eta_rho = 1.0;
  CHECK_THROWS_AS(s.validate(), InputError);
  s = {};
  s.mu_rho = 0.5;
  CHECK_THROWS_AS(s.validate(), InputError);
  CHECK_NOTHROW(AdmmSettings{}.validate());
}
