#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "ticert/error.hpp"
#include "ticert/spectral.hpp"
#include "ticert/tensor.hpp"

using namespace ticert;
using namespace ticert::testing;

namespace {

Vector separable(const ProductChain& pc, const Vector& f) {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(pc.size()));
  for (std::size_t x = 0; x < pc.size(); ++x)
    for (std::size_t k = 0; k < pc.n(); ++k)
      out[static_cast<Eigen::Index>(x)] += f[static_cast<Eigen::Index>(pc.codec().coordinate(x, k))];
  return out;
}

// log sum mu^n e^f by direct summation (no shift).
double naive_log_sum_exp(const Vector& f, const Vector& mu) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) acc += mu[i] * std::exp(f[i]);
  return std::log(acc);
}

}  // namespace

TEST_CASE("empirical measures") {
  const std::vector<std::size_t> a{0, 0, 0}, b{0, 1}, c{2, 0, 2, 1};
  CHECK(empirical_measure(a, 2)[0] == 1.0);
  CHECK(empirical_measure(b, 2)[1] == 0.5);
  const auto m = empirical_measure(c, 3);
  CHECK(m[0] == 0.25);
  CHECK(m[1] == 0.25);
  CHECK(m[2] == 0.5);
  const std::vector<std::size_t> bad{0, 3};
  try {
    empirical_measure(bad, 3);
    FAIL("expected IndexOutOfRange");
  } catch (const Error& e) {
    CHECK(e.qualified_code() == "tensor.IndexOutOfRange");
  }
}

TEST_CASE("product chain structure") {
  const ProductChain pc(birth_death3(), 2);
  CHECK(pc.size() == 9);
  const auto& mu = birth_death3().mu();
  CHECK(std::abs(pc.mu()[5] - mu[1] * mu[2]) <= 1e-16);
  const auto dense = pc.materialize();
  const Matrix& q = dense.rates();
  // Transitions changing both coordinates are absent.
  CHECK(q(0, 4) == 0.0);
  CHECK(q(0, 1) == birth_death3().rates()(0, 1));
  const Matrix flux = pc.mu().weights().asDiagonal() * q;
  CHECK((flux - flux.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(std::abs(pc.space().distance(0, 8) - std::sqrt(8.0)) <= 1e-15);
}

TEST_CASE("sum-form fisher information") {
  const ProductChain pc(two_state(), 2);
  CHECK(fisher_information_product(pc, pc.mu()) == 0.0);
  CHECK(std::abs(fisher_information_product(pc, ProbabilityVector::point_mass(4, 3)) - 2.0) <= 1e-14);

  CounterRng rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    const auto c = random_chain(2 + trial % 3, rng);
    const ProductChain p(c, 2 + trial % 2);
    const auto dense = p.materialize();
    const auto nu = random_measure(p.size(), rng);
    CHECK(std::abs(fisher_information_product(p, nu) - fisher_information(dense, nu)) <= 1e-12);
    const Vector g = fisher_information_product_gradient(p, nu);
    CHECK((g - fisher_information_gradient(dense, nu)).cwiseAbs().maxCoeff() <= 1e-10);
    const auto base_nu = random_measure(c.size(), rng);
    const auto prod = product_measure(base_nu, p.n());
    CHECK(std::abs(fisher_information_product(p, prod) -
                   static_cast<double>(p.n()) * fisher_information(c, base_nu)) <= 1e-10);
  }
}

TEST_CASE("chain rule by disintegration") {
  CounterRng rng(42);
  for (std::size_t n : {2u, 3u}) {
    for (int trial = 0; trial < 50; ++trial) {
      const auto c = random_chain(3, rng);
      const ProductChain pc(c, n);
      const auto nu = random_measure(pc.size(), rng);
      CHECK(std::abs(fisher_information_product(pc, nu) - chain_rule_decomposition(pc, nu)) <= 1e-9);
    }
  }
  const ProductChain pc(cycle4(), 2);
  CHECK(chain_rule_decomposition(pc, pc.mu()) <= 1e-15);
  // Zero-mass conditioning events fall back to mu and carry no weight.
  Vector w = Vector::Zero(16);
  w[5] = 0.5;
  w[6] = 0.5;
  const ProbabilityVector sparse(w);
  CHECK(std::abs(fisher_information_product(pc, sparse) - chain_rule_decomposition(pc, sparse)) <= 1e-12);
  const auto cond = leave_one_out_conditional(pc, sparse, 0, 0);
  CHECK(cond.mass == 0.0);
  CHECK(cond.law[3] == cycle4().mu()[3]);
}

TEST_CASE("tensorized functionals") {
  CounterRng rng(43);
  const auto c = cycle4();
  const auto fisher = BaseFunctional::fisher(c);
  const auto entropy = BaseFunctional::entropy(c.mu());
  const ProductChain pc(c, 2);
  const auto base_nu = random_measure(4, rng);
  const auto prod = product_measure(base_nu, 2);
  for (auto v : {TensorVariant::Unordered, TensorVariant::Ordered}) {
    CHECK(std::abs(tensorize(fisher, v, pc, prod) - 2 * fisher_information(c, base_nu)) <= 1e-12);
    CHECK(std::abs(tensorize(entropy, v, pc, prod) - 2 * relative_entropy(base_nu, c.mu())) <= 1e-12);
  }
  for (int trial = 0; trial < 100; ++trial) {
    const auto rc = random_chain(2 + trial % 2, rng);
    const ProductChain p(rc, 2 + trial % 2);
    const auto nu = random_measure(p.size(), rng);
    const auto fi = BaseFunctional::fisher(rc);
    CHECK(tensorize(fi, TensorVariant::Ordered, p, nu) <=
          tensorize(fi, TensorVariant::Unordered, p, nu) + 1e-10);
    CHECK(std::abs(tensorize(fi, TensorVariant::Unordered, p, nu) -
                   fisher_information_product(p, nu)) <= 1e-10);
    CHECK(std::abs(tensorize(BaseFunctional::entropy(rc.mu()), TensorVariant::Ordered, p, nu) -
                   relative_entropy(nu, p.mu())) <= 1e-10);
  }
}

TEST_CASE("convex conjugates") {
  CounterRng rng(44);
  const auto c = birth_death3();
  const auto fisher = BaseFunctional::fisher(c);
  const auto entropy = BaseFunctional::entropy(c.mu());
  for (std::size_t n : {1u, 2u}) {
    const ProductChain pc(c, n);
    CHECK(std::abs(rho_conjugate(fisher, TensorVariant::Unordered, pc, Vector::Zero(static_cast<Eigen::Index>(pc.size()))).value) <= 1e-12);
    for (int trial = 0; trial < 5; ++trial) {
      const Vector f = random_vector(pc.size(), rng, 3.0);
      const auto r = rho_conjugate(entropy, TensorVariant::Ordered, pc, f);
      CHECK(std::abs(r.value - naive_log_sum_exp(f, pc.mu().weights())) <= 1e-8);
      const auto ru = rho_conjugate(fisher, TensorVariant::Unordered, pc, f);
      CHECK(ru.cross_check.has_value());
      CHECK(std::abs(ru.value - *ru.cross_check) <= 1e-6);
    }
    const Vector fb = random_vector(3, rng, 2.0);
    const auto sep = rho_conjugate(fisher, TensorVariant::Unordered, pc, separable(pc, fb));
    CHECK(std::abs(sep.value - static_cast<double>(n) * fk_lograte(c, fb)) <= 1e-6);
  }
}

TEST_CASE("ordered conjugate dominates the unordered one") {
  CounterRng rng(45);
  const auto c = two_state(1.0, 2.0);
  const auto fisher = BaseFunctional::fisher(c);
  const ProductChain pc(c, 2);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector f = random_vector(pc.size(), rng, 2.0);
    const auto rho = rho_conjugate(fisher, TensorVariant::Unordered, pc, f);
    ConjugateOptions opts;
    opts.ascent.extra_starts.push_back(*rho.maximizer);
    const auto rho_hat = rho_conjugate(fisher, TensorVariant::Ordered, pc, f, opts);
    CHECK(rho_hat.value - rho.value >= -1e-6);
  }
}

TEST_CASE("large products use the eigen and closed-form routes") {
  CounterRng rng(46);
  const auto c = birth_death3();
  const ProductChain pc(c, 6);  // 729 states
  const Vector f = random_vector(pc.size(), rng, 1.0);
  const auto e = rho_conjugate(BaseFunctional::entropy(c.mu()), TensorVariant::Ordered, pc, f);
  CHECK(e.method == "logsumexp");
  CHECK(std::abs(e.value - naive_log_sum_exp(f, pc.mu().weights())) <= 1e-12);
  const auto r = rho_conjugate(BaseFunctional::fisher(c), TensorVariant::Unordered, pc, f);
  CHECK(r.method == "eigen");
  CHECK_THROWS_AS(rho_conjugate(BaseFunctional::fisher(c), TensorVariant::Ordered, pc, f), Error);
}
