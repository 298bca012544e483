#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

#include "test_support.hpp"
#include "ticert/error.hpp"
#include "ticert/spectral.hpp"
#include "ticert/tensor.hpp"

using namespace ticert;
using namespace ticert::testing;

namespace {

// Top root of the characteristic polynomial of [[f0 - 1, 1], [1, f1 - 1]].
double two_state_root(double f0, double f1) {
  const double tr = f0 + f1 - 2.0;
  return 0.5 * (tr + std::sqrt((f1 - f0) * (f1 - f0) + 4.0));
}

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

// exp(A) for symmetric A through its eigendecomposition.
Matrix expm_by_eigen(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  return es.eigenvectors() * es.eigenvalues().array().exp().matrix().asDiagonal() *
         es.eigenvectors().transpose();
}

// int f g^2 dmu - E(g, g) for g normalized in L^2(mu).
double rayleigh(const ReversibleChain& c, const Vector& f, Vector g) {
  const Vector& mu = c.mu().weights();
  g /= std::sqrt((mu.array() * g.array().square()).sum());
  return (mu.array() * f.array() * g.array().square()).sum() - dirichlet_form(c, g);
}

std::vector<ReversibleChain> fixtures() {
  return {two_state(), birth_death3(), cycle4()};
}

}  // namespace

TEST_CASE("lograte examples") {
  const auto c = two_state();
  CHECK(std::abs(fk_lograte(c, Vector::Zero(2))) <= 1e-14);
  CHECK(std::abs(fk_lograte(c, Vector::Constant(2, 3.5)) - 3.5) <= 1e-14);
  CHECK(std::abs(fk_lograte(c, vec2(0, 2)) - std::sqrt(2.0)) <= 1e-14);
  for (double lam : {-4.0, -1.0, 0.3, 2.0, 7.0})
    CHECK(std::abs(fk_lograte(c, vec2(0, lam)) - two_state_root(0, lam)) <= 1e-13);
  CHECK_THROWS_AS(fk_lograte(c, Vector::Zero(3)), Error);
}

TEST_CASE("symmetrized operator is symmetric and isospectral") {
  CounterRng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const auto c = random_chain(2 + trial % 5, rng);
    const Vector f = random_vector(c.size(), rng, 5.0);
    const FeynmanKacOperator op(c, f);
    CHECK(op.asymmetry() <= 1e-12);
    Matrix gen = c.rates();
    gen.diagonal() += f;
    const Eigen::VectorXcd ev = gen.eigenvalues();
    double top = -1e300;
    for (const auto& z : ev) top = std::max(top, z.real());
    CHECK(std::abs(top - fk_lograte(c, f)) <= 1e-10);
  }
}

TEST_CASE("ground state is the variational maximizer and is positive") {
  CounterRng rng(32);
  for (int trial = 0; trial < 30; ++trial) {
    const auto c = random_chain(2 + trial % 5, rng);
    const Vector f = random_vector(c.size(), rng, 5.0);
    const auto gs = fk_ground_state(c, f);
    CHECK(gs.eigenvector.minCoeff() > 0.0);
    const Vector g = gs.eigenvector.array() / c.mu().weights().array().sqrt();
    CHECK(std::abs(rayleigh(c, f, g) - gs.eigenvalue) <= 1e-10);
    for (int k = 0; k < 20; ++k)
      CHECK(rayleigh(c, f, random_vector(c.size(), rng, 1.0)) <= gs.eigenvalue + 1e-10);
  }
}

TEST_CASE("dual variational formula") {
  const auto c = two_state();
  const auto d = fk_lograte_dual(c, vec2(0, 2));
  CHECK(std::abs(d.value - std::sqrt(2.0)) <= 1e-9);
  CHECK(std::abs(d.maximizer[0] - (2 - std::sqrt(2.0)) / 4) <= 1e-6);
  const auto z = fk_lograte_dual(c, Vector::Zero(2));
  CHECK(std::abs(z.value) <= 1e-12);
  CHECK(std::abs(z.maximizer[0] - 0.5) <= 1e-6);
  const auto k = fk_lograte_dual(cycle4(), Vector::Constant(4, 1.25));
  CHECK(std::abs(k.value - 1.25) <= 1e-12);
  for (std::size_t x = 0; x < 4; ++x)
    CHECK(std::abs(k.maximizer[x] - cycle4().mu()[x]) <= 1e-6);

  CounterRng rng(33);
  for (int trial = 0; trial < 25; ++trial) {
    const auto rc = random_chain(2 + trial % 5, rng);
    const Vector f = random_vector(rc.size(), rng, 5.0);
    CHECK(std::abs(fk_lograte_dual(rc, f).value - fk_lograte(rc, f)) <= 1e-6);
  }
}

TEST_CASE("matrix exponential against the spectral oracle") {
  CounterRng rng(34);
  for (int trial = 0; trial < 20; ++trial) {
    const auto c = random_chain(2 + trial % 6, rng);
    Matrix m = c.symmetrized_rates();
    m.diagonal() += random_vector(c.size(), rng, 5.0);
    for (double t : {0.01, 0.5, 2.0}) {
      const Matrix e = matrix_exponential(t * m);
      const Matrix o = expm_by_eigen(t * m);
      CHECK((e - o).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, o.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("operator norm growth rate does not depend on t") {
  const auto c = two_state();
  for (double t : {0.5, 1.0, 2.0}) {
    CHECK(std::abs(fk_opnorm_expm(c, vec2(0, 2), t) - std::sqrt(2.0)) <= 1e-8);
    CHECK(std::abs(fk_opnorm_expm(c, Vector::Zero(2), t)) <= 1e-12);
  }
  CHECK(std::abs(fk_opnorm_expm(c, Vector::Ones(2), 1.0) - 1.0) <= 1e-12);
  CounterRng rng(35);
  for (int trial = 0; trial < 20; ++trial) {
    const auto rc = random_chain(2 + trial % 5, rng);
    const Vector f = random_vector(rc.size(), rng, 5.0);
    for (double t : {0.5, 1.0, 2.0})
      CHECK(std::abs(fk_opnorm_expm(rc, f, t) - fk_lograte(rc, f)) <= 1e-8);
  }
  CHECK_THROWS_AS(fk_opnorm_expm(c, vec2(0, 1), 0.0), Error);
}

TEST_CASE("monotonicity in the potential") {
  CounterRng rng(36);
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = random_chain(2 + trial % 5, rng);
    const Vector f = random_vector(c.size(), rng, 5.0);
    Vector g = f;
    for (auto& x : g) x += rng.uniform(0.0, 1.0);
    CHECK(fk_lograte(c, f) <= fk_lograte(c, g) + 1e-12);
  }
}

TEST_CASE("product lograte") {
  const auto c = two_state();
  CHECK(std::abs(fk_lograte_product(c, 3, Vector::Zero(8))) <= 1e-9);
  Vector pot(4);
  for (int x = 0; x < 4; ++x) pot[x] = 2.0 * ((x >> 1) & 1) + 2.0 * (x & 1);
  CHECK(std::abs(fk_lograte_product(c, 2, pot) - 2 * std::sqrt(2.0)) <= 1e-7);

  for (const auto& fx : fixtures()) {
    CounterRng rng(37);
    const Vector f = random_vector(fx.size(), rng, 3.0);
    const ProductChain pc(fx, 3);
    Vector sep = Vector::Zero(static_cast<Eigen::Index>(pc.size()));
    for (std::size_t x = 0; x < pc.size(); ++x)
      for (std::size_t k = 0; k < 3; ++k)
        sep[static_cast<Eigen::Index>(x)] += f[static_cast<Eigen::Index>(pc.codec().coordinate(x, k))];
    CHECK(std::abs(fk_lograte_product(fx, 3, sep) - 3 * fk_lograte(fx, f)) <= 1e-6);
  }
}

TEST_CASE("matrix-free product solve against the materialized product") {
  CounterRng rng(38);
  for (int trial = 0; trial < 10; ++trial) {
    const auto c = random_chain(2 + trial % 3, rng);
    const std::size_t n = 2 + trial % 2;
    const ProductChain pc(c, n);
    const Vector pot = random_vector(pc.size(), rng, 4.0);
    const auto dense = pc.materialize();
    CHECK(std::abs(fk_lograte_product(c, n, pot) - fk_lograte(dense, pot)) <= 1e-7);
    Vector x = random_vector(pc.size(), rng, 1.0), y;
    apply_kronecker_sum(c.symmetrized_rates(), n, x, pot, y);
    Matrix m = dense.symmetrized_rates();
    m.diagonal() += pot;
    CHECK((m * x - y).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("budget and dimension errors") {
  const auto c = two_state();
  ProductEigenOptions opts;
  opts.budget = 100;
  try {
    fk_lograte_product(c, 10, Vector::Zero(1024), opts);
    FAIL("expected BudgetExceeded");
  } catch (const Error& e) {
    CHECK(e.qualified_code() == "spectral.BudgetExceeded");
  }
  CHECK_THROWS_AS(fk_lograte_product(c, 2, Vector::Zero(3)), Error);
}
