#include <doctest.h>

#include <cmath>
#include <sstream>

#include "test_support.hpp"
#include "ticert/error.hpp"
#include "ticert/sanov.hpp"
#include "ticert/spectral.hpp"

using namespace ticert;
using namespace ticert::testing;

namespace {

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

// Two-state symmetric unit-rate chain: I(nu | mu) = (sqrt(nu_1) - sqrt(nu_0))^2.
double two_state_fisher(double nu0) {
  const double d = std::sqrt(1.0 - nu0) - std::sqrt(nu0);
  return d * d;
}

// sup over nu = (1/2 + delta, 1/2 - delta) of G(nu) - I(nu | mu), on a grid.
template <typename G>
double grid_sup(G&& g, int points = 10000) {
  double best = -1e300;
  for (int i = 0; i <= points; ++i) {
    const double nu0 = static_cast<double>(i) / points;
    best = std::max(best, g(nu0) - two_state_fisher(nu0));
  }
  return best;
}

LaplaceFunctional zero_functional() {
  return {"zero", [](const ProbabilityVector&) { return 0.0; }, 0.0};
}

// (1/n) log sum over E^n of mu^n(x) exp(n F(L_n x)), by direct enumeration.
double brute_sanov(const ReversibleChain& chain, const LaplaceFunctional& F,
                   std::size_t n) {
  const TupleCodec codec(chain.size(), n);
  double acc = 0.0;
  for (std::size_t i = 0; i < codec.size(); ++i) {
    Vector w = Vector::Zero(static_cast<Eigen::Index>(chain.size()));
    double p = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      const auto x = codec.coordinate(i, k);
      w[static_cast<Eigen::Index>(x)] += 1.0 / static_cast<double>(n);
      p *= chain.mu()[x];
    }
    acc += p * std::exp(static_cast<double>(n) * F.evaluate(ProbabilityVector(w)));
  }
  return std::log(acc) / static_cast<double>(n);
}

}  // namespace

TEST_CASE("laplace_lhs of the zero functional vanishes") {
  for (const auto& chain : {two_state(), birth_death3(), cycle4()})
    for (std::size_t n = 1; n <= 3; ++n)
      CHECK(laplace_lhs(chain, zero_functional(), n) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("linear functional: n-independent left side equals the base lograte") {
  const auto chain = two_state();
  const auto F = linear_functional(vec2(0.0, 2.0));
  // Q + diag f = [[-1, 1], [1, 1]]: trace 0, determinant -2.
  for (std::size_t n = 1; n <= 6; ++n)
    CHECK(std::abs(laplace_lhs(chain, F, n) - std::sqrt(2.0)) < 1e-9);

  CounterRng rng(11, 0);
  for (const auto& c : {birth_death3(), cycle4()}) {
    const Vector f = random_vector(c.size(), rng, 2.0);
    const double base = fk_lograte(c, f);
    for (std::size_t n = 1; n <= 4; ++n)
      CHECK(std::abs(laplace_lhs(c, linear_functional(f), n) - base) < 1e-8);
  }
}

TEST_CASE("orbit-reduced solver matches the full product solver") {
  const auto bd = birth_death3();
  const auto cyc = cycle4();
  Vector f3(3), f4(4);
  f3 << 0.5, -1.0, 1.5;
  f4 << 1.0, 0.0, -0.5, 0.7;
  for (std::size_t n = 1; n <= 4; ++n) {
    for (const auto& F : {quadratic_functional(f3), clipped_w2_functional(bd, 1.0),
                          linear_functional(f3)}) {
      CHECK(std::abs(laplace_lhs(bd, F, n) - laplace_lhs_reduced(bd, F, n)) < 1e-8);
    }
    for (const auto& F : {quadratic_functional(f4), clipped_w2_functional(cyc, 0.8)}) {
      CHECK(std::abs(laplace_lhs(cyc, F, n) - laplace_lhs_reduced(cyc, F, n)) < 1e-8);
    }
  }
  CHECK(compositions(4, 3).size() == 15);
  CHECK(compositions(6, 2).size() == 7);
}

TEST_CASE("laplace_rhs against closed forms and grid oracles") {
  const auto chain = two_state();
  const auto zero = laplace_rhs(chain, zero_functional());
  CHECK(std::abs(zero.value) < 1e-12);
  CHECK(std::abs(zero.maximizer[0] - 0.5) < 1e-6);

  const auto lin = laplace_rhs(chain, linear_functional(vec2(0.0, 2.0)));
  CHECK(std::abs(lin.value - std::sqrt(2.0)) < 1e-9);
  CHECK(std::abs(lin.maximizer[0] - (2.0 - std::sqrt(2.0)) / 4.0) < 1e-5);
  CHECK(std::abs(lin.maximizer[1] - (2.0 + std::sqrt(2.0)) / 4.0) < 1e-5);

  // Discrete metric: moving |delta| of mass over distance 1 gives W2 = sqrt|delta|.
  const auto clip = laplace_rhs(chain, clipped_w2_functional(chain, 10.0));
  const double clip_grid =
      grid_sup([](double nu0) { return std::min(std::sqrt(std::abs(nu0 - 0.5)), 10.0); });
  CHECK(clip.value >= clip_grid - 1e-9);
  CHECK(clip.value <= clip_grid + 1e-6);

  const auto quad = laplace_rhs(chain, quadratic_functional(vec2(0.0, 2.0)));
  const double quad_grid = grid_sup([](double nu0) {
    const double v = 2.0 * (1.0 - nu0);
    return v * v;
  });
  CHECK(quad.value >= quad_grid - 1e-9);
  CHECK(quad.value <= quad_grid + 1e-6);
}

TEST_CASE("finite-n lower bound mechanism holds for random probes") {
  CounterRng rng(12, 0);
  const auto chain = two_state();
  const auto bd = birth_death3();
  for (const auto& F : {quadratic_functional(vec2(0.0, 2.0)),
                        clipped_w2_functional(chain, 1.0)}) {
    for (std::size_t n = 1; n <= 6; ++n) {
      const double lhs = laplace_lhs(chain, F, n);
      for (int probe = 0; probe < 20; ++probe) {
        const auto nu = random_measure(2, rng);
        CHECK(lhs >= lower_bound_probe(chain, F, n, nu) - 1e-8);
      }
    }
  }
  Vector f3(3);
  f3 << 1.0, -0.5, 0.25;
  const auto F = quadratic_functional(f3);
  for (std::size_t n = 1; n <= 4; ++n) {
    const double lhs = laplace_lhs(bd, F, n);
    for (int probe = 0; probe < 10; ++probe)
      CHECK(lhs >= lower_bound_probe(bd, F, n, random_measure(3, rng)) - 1e-8);
  }
  CHECK_THROWS_AS(lower_bound_probe(bd, F, 8, bd.mu()), Error);
}

TEST_CASE("convergence experiment trends") {
  const auto chain = two_state();
  const std::vector<std::size_t> ns{2, 4, 6};

  const auto lin = convergence_experiment(chain, linear_functional(vec2(0.0, 2.0)), ns, 1.0);
  for (const auto& row : lin.rows) CHECK(std::abs(row.gap) < 1e-6);
  CHECK(lin.lower_trend_ok);
  CHECK(lin.lhs_trend == "constant");

  for (const auto& F : {quadratic_functional(vec2(0.0, 2.0)),
                        clipped_w2_functional(chain, 1.0)}) {
    const auto e = convergence_experiment(chain, F, ns, 1.0);
    CAPTURE(F.name);
    REQUIRE(e.rows.size() == 3);
    CHECK(e.gap_shrinks);
    CHECK(std::abs(e.rows[2].gap) < std::abs(e.rows[0].gap));
    CHECK(e.lower_trend_ok);
    for (const auto& row : e.rows) CHECK(std::isfinite(row.lhs));
  }
}

TEST_CASE("left side does not depend on the recorded t") {
  const auto chain = two_state();
  const auto F = quadratic_functional(vec2(0.0, 1.0));
  const auto a = convergence_experiment(chain, F, {1, 3}, 0.5);
  const auto b = convergence_experiment(chain, F, {1, 3}, 7.0);
  for (std::size_t i = 0; i < a.rows.size(); ++i) CHECK(a.rows[i].lhs == b.rows[i].lhs);
  CHECK(a.t == 0.5);
  CHECK(b.t == 7.0);
}

TEST_CASE("entropy specialization") {
  const auto bd = birth_death3();
  Vector f(3);
  f << 0.3, -1.0, 2.0;
  const auto lin = linear_functional(f);
  // Gibbs: log int e^f dmu, for every n.
  double gibbs = 0.0;
  for (std::size_t x = 0; x < 3; ++x) gibbs += bd.mu()[x] * std::exp(f[static_cast<Eigen::Index>(x)]);
  gibbs = std::log(gibbs);
  for (std::size_t n = 1; n <= 5; ++n) CHECK(std::abs(sanov_lhs(bd, lin, n) - gibbs) < 1e-10);
  CHECK(std::abs(sanov_rhs(bd, lin).value - gibbs) < 1e-8);

  const auto quad = quadratic_functional(f);
  for (std::size_t n = 1; n <= 4; ++n)
    CHECK(std::abs(sanov_lhs(bd, quad, n) - brute_sanov(bd, quad, n)) < 1e-10);

  const auto chain = two_state();
  const auto e = sanov_experiment(chain, quadratic_functional(vec2(0.0, 2.0)), {2, 4, 6, 12});
  CHECK(e.gap_shrinks);
  CHECK(e.lower_trend_ok);
  CHECK(e.rate == "entropy");
}

TEST_CASE("experiment CSV is deterministic") {
  const auto chain = two_state();
  const auto F = clipped_w2_functional(chain, 1.0);
  std::ostringstream a, b;
  write_experiment_csv(a, convergence_experiment(chain, F, {1, 2, 3}, 1.0));
  write_experiment_csv(b, convergence_experiment(chain, F, {1, 2, 3}, 1.0));
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("n,lhs,rhs,gap,wall_time_ms\n", 0) == 0);
}

TEST_CASE("budget and argument errors") {
  const auto bd = birth_death3();
  LaplaceOptions opts;
  opts.budget = 20;
  try {
    laplace_lhs(bd, linear_functional(Vector::Ones(3)), 3, opts);
    FAIL("expected BudgetExceeded");
  } catch (const Error& e) {
    CHECK(e.qualified_code() == "sanov.BudgetExceeded");
  }
  CHECK_THROWS_AS(laplace_lhs(bd, linear_functional(Vector::Ones(3)), 0), Error);
  CHECK_THROWS_AS(clipped_w2_functional(bd, 0.0), Error);
}
