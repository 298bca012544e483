#include <doctest.h>

#include <json.hpp>

#include <cmath>

#include "test_support.hpp"
#include "ticert/certify.hpp"
#include "ticert/error.hpp"
#include "ticert/transport.hpp"

using namespace ticert;
using namespace ticert::testing;

namespace {

// W1^2 / I along nu = (p, 1 - p) on the unit two-state chain.
double two_state_w1i_ratio(double p) {
  const double w1 = std::abs(p - 0.5);
  return w1 * w1 / (1.0 - 2.0 * std::sqrt(p * (1.0 - p)));
}

double closed_lograte(double lambda) {
  return 0.5 * ((lambda - 2.0) + std::sqrt(lambda * lambda + 4.0));
}

CertifyOptions quick() {
  CertifyOptions o;
  o.directions = 16;
  o.ledger_probes = 16;
  return o;
}

}  // namespace

TEST_CASE("two-state W1I constant against a grid scan") {
  double grid_sup = 0.0;
  for (int i = 1; i < 100000; ++i) {
    const double p = i / 100000.0;
    if (p == 0.5) continue;
    grid_sup = std::max(grid_sup, two_state_w1i_ratio(p));
  }
  CHECK(std::abs(grid_sup - 0.5) <= 1e-4);
  const auto cert = best_constant(two_state(), Inequality::W1I, 1);
  CHECK(std::abs(cert.constant_lower - grid_sup) <= 1e-4);
  CHECK(std::abs(cert.constant_estimate - 0.5) <= 1e-6);
  CHECK(cert.constant_lower <= cert.constant_estimate);
  CHECK_FALSE(cert.diverged);
  // The witness sits next to mu.
  CHECK(std::abs(cert.witness[0] - 0.5) < 1e-3);
  CHECK(cert.min_slack() >= -1e-8);
}

TEST_CASE("two-state W2I diverges along the approach to mu") {
  // W2^2 = delta and I = 1 - sqrt(1 - 4 delta^2) along (1/2 + delta, 1/2 - delta).
  double previous = 0.0;
  for (double delta = 1e-1; delta >= 1e-6; delta *= 0.1) {
    const double r = delta / (1.0 - std::sqrt(1.0 - 4.0 * delta * delta));
    CHECK(r > 9.0 * previous);
    previous = r;
  }
  const auto cert = best_constant(two_state(), Inequality::W2I, 1, quick());
  CHECK(cert.diverged);
  CHECK(std::isinf(cert.constant_estimate));
  CHECK(cert.constant_lower > 1e5);
  CHECK(cert.dual_ledger.empty());
}

TEST_CASE("witness soundness and the probe table") {
  for (const auto& chain : {two_state(), birth_death3(), cycle4()}) {
    for (auto name : {Inequality::W1I, Inequality::W1H, Inequality::W2H}) {
      const auto cert = best_constant(chain, name, 1, quick());
      const ProductChain pc(chain, 1);
      CHECK(std::abs(transport_information_ratio(pc, name, cert.witness) - cert.constant_lower) <= 1e-9);
      double top = 0.0;
      for (const auto& row : cert.probe_table) top = std::max(top, row.ratio);
      CHECK(top == cert.constant_lower);
      CHECK(cert.constant_lower <= cert.constant_estimate);
    }
  }
}

TEST_CASE("ratio at mu is excluded") {
  const ProductChain pc(two_state(), 1);
  CHECK_THROWS_AS(transport_information_ratio(pc, Inequality::W1I, pc.mu()), Error);
}

TEST_CASE("W1 dual check examples") {
  const auto c = two_state();
  Vector f(2);
  f << 0, 1;
  CHECK(check_w1_dual(c, 0.5, f, 0.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(std::abs(check_w1_dual(c, 0.5, Vector::Constant(2, 0.3), 3.0) - 0.5 * 9 / 4) <= 1e-12);
  double min_slack = 1e300;
  for (int i = -100; i <= 100; ++i) {
    const double lambda = i / 10.0;
    const double slack = check_w1_dual(c, 0.5, f, lambda);
    CHECK(std::abs(slack - (lambda * 0.5 + lambda * lambda / 8 - closed_lograte(lambda))) <= 1e-12);
    CHECK(slack >= -1e-8);
    min_slack = std::min(min_slack, slack);
  }
  CHECK(min_slack <= 1e-3);
  Vector steep(2);
  steep << 0, 2;
  try {
    check_w1_dual(c, 0.5, steep, 1.0);
    FAIL("expected NotLipschitz");
  } catch (const Error& e) {
    CHECK(e.qualified_code() == "certify.NotLipschitz");
  }
}

TEST_CASE("W1H dual check: two-point Hoeffding constant") {
  const auto space = FiniteMetricSpace::discrete({"0", "1"});
  const auto mu = ProbabilityVector::uniform(2);
  Vector f(2);
  f << 0, 1;
  CHECK(check_w1h_dual(space, mu, 0.5, f, 0.0) == 0.0);
  CHECK(std::abs(check_w1h_dual(space, mu, 0.5, Vector::Constant(2, 1.0), 2.0) - 0.5) <= 1e-14);
  bool below_fails = false;
  for (int i = -200; i <= 200; ++i) {
    const double lambda = i / 10.0;
    // log cosh(lambda / 2) <= lambda^2 / 8
    CHECK(check_w1h_dual(space, mu, 0.5, f, lambda) >= -1e-8);
    below_fails = below_fails || check_w1h_dual(space, mu, 0.45, f, lambda) < -1e-8;
  }
  CHECK(below_fails);
  const auto cert = best_constant(two_state(), Inequality::W1H, 1, quick());
  CHECK(std::abs(cert.constant_estimate - 0.5) <= 1e-6);
}

TEST_CASE("dual probes hold at the certified constant") {
  for (const auto& chain : {two_state(), birth_death3(), cycle4()}) {
    for (auto name : {Inequality::W1I, Inequality::W1H}) {
      const auto cert = best_constant(chain, name, 1, quick());
      REQUIRE_FALSE(cert.diverged);
      const auto probes = certify_dual(chain, name, 1, MetricMode::L2,
                                       cert.constant_estimate, 1000, 99);
      double m = 1e300;
      for (const auto& r : probes) m = std::min(m, r.slack);
      CHECK(m >= -1e-8);
    }
  }
}

TEST_CASE("Jensen ordering between W1 and W2 ratios") {
  CounterRng rng(51);
  for (const auto& chain : {birth_death3(), cycle4()}) {
    const ProductChain pc(chain, 1);
    for (int i = 0; i < 50; ++i) {
      const auto nu = random_measure(chain.size(), rng);
      CHECK(transport_information_ratio(pc, Inequality::W1I, nu) <=
            transport_information_ratio(pc, Inequality::W2I, nu) + 1e-12);
    }
    const auto w1 = best_constant(chain, Inequality::W1I, 1, quick());
    const auto w2 = best_constant(chain, Inequality::W2I, 1, quick());
    CHECK(w1.constant_estimate <= w2.constant_lower);
  }
}

TEST_CASE("entropy and information recorded side by side") {
  CounterRng rng(52);
  const auto c = cycle4();
  int entropy_larger = 0;
  for (int i = 0; i < 100; ++i) {
    const auto nu = random_measure(4, rng);
    const double h = relative_entropy(nu, c.mu());
    const double fi = fisher_information(c, nu);
    CHECK(std::isfinite(h));
    CHECK(std::isfinite(fi));
    entropy_larger += h > fi;
  }
  MESSAGE("H > I on " << entropy_larger << " of 100 random measures");
}

TEST_CASE("dimension sweep on the two-state chain") {
  auto opts = quick();
  const auto sweep = dimension_sweep(two_state(), Inequality::W1I, 3, opts);
  REQUIRE(sweep.certificates.size() == 3);
  CHECK(std::abs(sweep.certificates[0].constant_estimate - 0.5) <= 1e-6);
  CHECK(sweep.monotone);
  CHECK(sweep.strictly_increasing);
  CHECK(sweep.quadratic_diverged);
  const auto single = best_constant(two_state(), Inequality::W1I, 1, opts);
  CHECK(single.constant_estimate == sweep.certificates[0].constant_estimate);

  opts.mode = MetricMode::L1;
  const auto l1 = dimension_sweep(two_state(), Inequality::W1I, 3, opts);
  const double c1 = l1.certificates[0].constant_estimate;
  for (std::size_t n = 2; n <= 3; ++n)
    CHECK(l1.certificates[n - 1].constant_estimate <= n * c1 + 1e-6);
  CHECK_THROWS_AS(dimension_sweep(two_state(), Inequality::W2I, 2, opts), Error);
}

TEST_CASE("certificate JSON") {
  const auto cert = best_constant(two_state(), Inequality::W1I, 1, quick());
  const std::string text = certificate_json(cert);
  const auto j = nlohmann::json::parse(text);
  CHECK(j.dump(2) == text);
  CHECK(j["name"] == "W1I");
  CHECK(j["n"] == 1);
  CHECK(j["diverged"] == false);
  CHECK(j["witness"].size() == 2);
  CHECK(j["ledger_summary"].contains("min_slack"));
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  CHECK(std::is_sorted(keys.begin(), keys.end()));
  const auto w2 = best_constant(two_state(), Inequality::W2I, 1, quick());
  CHECK(nlohmann::json::parse(certificate_json(w2))["constant_estimate"].is_null());
}

TEST_CASE("inequality names") {
  CHECK(parse_inequality("w2h") == Inequality::W2H);
  CHECK(to_string(Inequality::W1I) == "W1I");
  CHECK_THROWS_AS(parse_inequality("w3i"), Error);
  CHECK_THROWS_AS(best_constant(two_state(), Inequality::W1I, 20), Error);
}
