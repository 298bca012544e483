#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ticert/chain.hpp"
#include "ticert/tensor.hpp"

namespace ticert {

enum class Inequality { W1I, W2I, W1H, W2H };

std::string to_string(Inequality name);
Inequality parse_inequality(const std::string& text);  // "w1i", "W1I", ...

// Transport order p and whether the information side is Fisher (else entropy).
int transport_order(Inequality name);
bool uses_fisher(Inequality name);

struct DualRecord {
  Vector f;
  double lambda = 0.0;
  double lhs = 0.0;  // lograte(lambda f) or log int e^{lambda f} dmu
  double rhs = 0.0;  // lambda int f dmu + C lambda^2 / 4
  double slack = 0.0;
};

struct ProbeRecord {
  std::string kind;     // "grid", "local", "ascent"
  int direction = -1;   // local probes: direction index
  double delta = 0.0;   // local probes: distance scale
  double ratio = 0.0;
};

struct InequalityCertificate {
  Inequality name = Inequality::W1I;
  std::size_t n = 1;
  MetricMode mode = MetricMode::L2;
  double constant_lower = 0.0;
  ProbabilityVector witness = ProbabilityVector::uniform(1);
  // +infinity when diverged.
  double constant_estimate = 0.0;
  // Limit of the ratio at mu along the best linearized direction (W1 types).
  double local_limit = 0.0;
  bool diverged = false;
  // Smallest ratio growth factor over the last decade of approach along the
  // direction that grew fastest.
  double growth = 0.0;
  std::vector<DualRecord> dual_ledger;
  std::vector<ProbeRecord> probe_table;

  double min_slack() const;
  std::size_t argmin_slack() const;
};

struct CertifyOptions {
  std::size_t budget = 0;  // 0: default_product_budget()
  MetricMode mode = MetricMode::L2;
  int directions = 64;
  std::vector<double> scales{1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  int grid_points = 4000;       // |E^n| = 2
  int grid_resolution = 120;    // |E^n| = 3, per axis
  int ascent_starts = 8;
  int ascent_iterations = 150;
  int linearization_starts = 16;
  int ledger_probes = 64;
  double divergence_growth = 9.9;
  std::uint64_t seed = 0x636572746966ULL;
};

// W_p^2(nu, mu^n) / alpha(nu) with alpha = I(. | mu^n) (sum form) or
// H(. | mu^n); +infinity never occurs for nu != mu^n.
double transport_information_ratio(const ProductChain& chain, Inequality name,
                                   const ProbabilityVector& nu);

InequalityCertificate best_constant(const ReversibleChain& chain, Inequality name,
                                    std::size_t n, const CertifyOptions& options = {});

// slack = lambda int f dmu + C lambda^2 / 4 - lambda_max(L + lambda f).
double check_w1_dual(const ReversibleChain& chain, double c, const Vector& f,
                     double lambda);
double check_w1_dual(const ProductChain& chain, double c, const Vector& f,
                     double lambda);
// slack = lambda int f dmu + C lambda^2 / 4 - log int e^{lambda f} dmu.
double check_w1h_dual(const FiniteMetricSpace& space, const ProbabilityVector& mu,
                      double c, const Vector& f, double lambda);

// Random 1-Lipschitz probe (McShane envelope of random values).
Vector random_lipschitz_probe(const FiniteMetricSpace& space, std::uint64_t seed,
                              std::uint64_t index);

// Dual probes of a W1-type certificate at constant `c`: `count` random
// 1-Lipschitz f, each with lambda uniform in [-lambda_max, lambda_max].
std::vector<DualRecord> certify_dual(const ReversibleChain& chain, Inequality name,
                                     std::size_t n, MetricMode mode, double c,
                                     int count, std::uint64_t seed,
                                     double lambda_max = 10.0);

struct SweepReport {
  std::vector<InequalityCertificate> certificates;
  bool monotone = true;             // C_n >= C_{n-1} - 1e-8
  bool strictly_increasing = true;  // C_n > C_{n-1}
  bool quadratic_diverged = false;  // n = 1 quadratic inequality diverged
};

// Per-n best constants of the W1-type inequality on the product space.
SweepReport dimension_sweep(const ReversibleChain& chain, Inequality name,
                            std::size_t n_max, const CertifyOptions& options = {});

// JSON object with keys constant_estimate, constant_lower, diverged,
// ledger_summary{argmin, min_slack}, n, name, witness.
std::string certificate_json(const InequalityCertificate& cert);

}  // namespace ticert
