#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ticert/chain.hpp"
#include "ticert/rng.hpp"

namespace ticert {

// Piecewise-constant path: states[i] is occupied on [times[i], times[i+1]),
// the last one until `horizon`. times[0] = 0 and times are strictly increasing.
struct PathSample {
  std::vector<double> times;
  std::vector<std::size_t> states;
  double horizon = 0.0;
};

// Exact CTMC sampling: Exp(-Q_xx) holding times, jumps by Q_xy / (-Q_xx).
PathSample simulate_path(const ReversibleChain& chain, std::size_t start,
                         double horizon, std::uint64_t seed);
PathSample simulate_path(const ReversibleChain& chain, std::size_t start,
                         double horizon, CounterRng& rng);

// (1/t) int_0^t f(X_s) ds, exact on the piecewise-constant path.
double time_average(const PathSample& path, const Vector& f);
// Fraction of [0, t] spent in each state.
Vector occupation(const PathSample& path, std::size_t size);
// (1/t) int_0^t f(X^1_s, ..., X^n_s) ds for coordinate paths on a common
// horizon, f indexed row-major on E^n.
double product_time_average(const std::vector<PathSample>& paths,
                            std::size_t base_size, const Vector& f);

inline constexpr double kWilsonZ = 1.959963984540054;

struct WilsonInterval {
  double low = 0.0;
  double high = 1.0;
};
WilsonInterval wilson_interval(std::size_t hits, std::size_t trials,
                               double z = kWilsonZ);

struct DeviationEstimate {
  double r = 0.0;
  double t = 0.0;
  std::size_t n = 1;
  double p_hat = 0.0;
  double wilson_low = 0.0;
  double wilson_high = 1.0;
  std::size_t n_paths = 0;
  double bound = 0.0;      // l2_factor * exp(-t r^2 / C)
  double l2_factor = 1.0;  // ||d nu0 / d mu^n||_{L^2(mu^n)}
  bool violated() const noexcept { return wilson_low > bound; }
};

struct DeviationOptions {
  MetricMode mode = MetricMode::L2;  // metric on E^n for the Lipschitz check
  std::size_t budget = 0;            // 0: default_product_budget()
};

// ||d nu / d mu^n||_{L^2(mu^n)} with mu^n the product of `mu`.
double l2_density_factor(const ProbabilityVector& nu, const ProbabilityVector& mu,
                         std::size_t n);

// P(time average of f minus int f d mu^n >= r) under the law started from
// nu0 on E^n, for each r in r_list, from one set of n_paths replicas. Replica
// i draws from CounterRng(seed, i): the start by inverse CDF over the flat
// index of nu0, then the n coordinate paths in order. f must be 1-Lipschitz
// on E^n for options.mode; c is the transport-information constant.
std::vector<DeviationEstimate> deviation_sweep(
    const ReversibleChain& chain, std::size_t n, const ProbabilityVector& nu0,
    const Vector& f, double t, const std::vector<double>& r_list,
    std::size_t n_paths, std::uint64_t seed, double c,
    const DeviationOptions& options = {});

DeviationEstimate deviation_probability(const ReversibleChain& chain, std::size_t n,
                                        const ProbabilityVector& nu0, const Vector& f,
                                        double t, double r, std::size_t n_paths,
                                        std::uint64_t seed, double c,
                                        const DeviationOptions& options = {});

// Header r,t,n,p_hat,wilson_low,wilson_high,bound,l2_factor.
void write_deviation_csv(std::ostream& out,
                         const std::vector<DeviationEstimate>& rows);

}  // namespace ticert
