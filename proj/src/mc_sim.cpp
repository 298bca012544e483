#include "ticert/mc_sim.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "ticert/error.hpp"
#include "ticert/format.hpp"
#include "ticert/parallel.hpp"
#include "ticert/transport.hpp"

namespace ticert {

namespace {

void check_horizon(double horizon) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    fail("mc_sim", ErrorCode::InvalidArgument, "horizon must be positive and finite");
  }
}

}  // namespace

PathSample simulate_path(const ReversibleChain& chain, std::size_t start,
                         double horizon, std::uint64_t seed) {
  CounterRng rng(seed);
  return simulate_path(chain, start, horizon, rng);
}

PathSample simulate_path(const ReversibleChain& chain, std::size_t start,
                         double horizon, CounterRng& rng) {
  check_horizon(horizon);
  if (start >= chain.size()) {
    fail("mc_sim", ErrorCode::IndexOutOfRange,
         "start state " + std::to_string(start) + " out of range");
  }
  const Matrix& q = chain.rates();
  const auto k = static_cast<Eigen::Index>(chain.size());
  PathSample path;
  path.horizon = horizon;
  path.times.push_back(0.0);
  path.states.push_back(start);
  double now = 0.0;
  auto x = static_cast<Eigen::Index>(start);
  for (;;) {
    const double rate = -q(x, x);
    now += rng.exponential(rate);
    if (now >= horizon) break;
    // Embedded jump by inverse CDF over the off-diagonal row.
    double u = rng.uniform() * rate;
    Eigen::Index next = -1;
    for (Eigen::Index y = 0; y < k; ++y) {
      if (y == x || q(x, y) <= 0.0) continue;
      next = y;
      u -= q(x, y);
      if (u < 0.0) break;
    }
    x = next;
    path.times.push_back(now);
    path.states.push_back(static_cast<std::size_t>(x));
  }
  return path;
}

double time_average(const PathSample& path, const Vector& f) {
  double acc = 0.0;
  for (std::size_t i = 0; i < path.states.size(); ++i) {
    if (path.states[i] >= static_cast<std::size_t>(f.size())) {
      fail("mc_sim", ErrorCode::DimensionMismatch,
           "observable has " + std::to_string(f.size()) + " entries, path visits state " +
               std::to_string(path.states[i]));
    }
    const double end = i + 1 < path.times.size() ? path.times[i + 1] : path.horizon;
    acc += (end - path.times[i]) * f[static_cast<Eigen::Index>(path.states[i])];
  }
  return acc / path.horizon;
}

Vector occupation(const PathSample& path, std::size_t size) {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(size));
  for (std::size_t i = 0; i < path.states.size(); ++i) {
    const double end = i + 1 < path.times.size() ? path.times[i + 1] : path.horizon;
    out[static_cast<Eigen::Index>(path.states[i])] += end - path.times[i];
  }
  return out / path.horizon;
}

double product_time_average(const std::vector<PathSample>& paths,
                            std::size_t base_size, const Vector& f) {
  if (paths.empty()) fail("mc_sim", ErrorCode::InvalidArgument, "no coordinate paths");
  const std::size_t n = paths.size();
  const double horizon = paths.front().horizon;
  std::size_t total = 1;
  for (std::size_t k = 0; k < n; ++k) total *= base_size;
  if (static_cast<std::size_t>(f.size()) != total) {
    fail("mc_sim", ErrorCode::DimensionMismatch,
         "observable has " + std::to_string(f.size()) + " entries, E^n has " +
             std::to_string(total));
  }
  // Merge the jump times of all coordinates; cursor[k] is the current segment.
  std::vector<std::size_t> cursor(n, 0);
  double now = 0.0;
  double acc = 0.0;
  for (;;) {
    std::size_t flat = 0;
    double next = horizon;
    for (std::size_t k = 0; k < n; ++k) {
      flat = flat * base_size + paths[k].states[cursor[k]];
      if (cursor[k] + 1 < paths[k].times.size())
        next = std::min(next, paths[k].times[cursor[k] + 1]);
    }
    acc += (next - now) * f[static_cast<Eigen::Index>(flat)];
    if (next >= horizon) break;
    for (std::size_t k = 0; k < n; ++k)
      if (cursor[k] + 1 < paths[k].times.size() && paths[k].times[cursor[k] + 1] == next)
        ++cursor[k];
    now = next;
  }
  return acc / horizon;
}

WilsonInterval wilson_interval(std::size_t hits, std::size_t trials, double z) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(hits) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  WilsonInterval out;
  out.low = std::clamp(center - half, 0.0, p);
  out.high = std::clamp(center + half, p, 1.0);
  return out;
}

double l2_density_factor(const ProbabilityVector& nu, const ProbabilityVector& mu,
                         std::size_t n) {
  const TupleCodec codec(mu.size(), n);
  if (nu.size() != codec.size()) {
    fail("mc_sim", ErrorCode::DimensionMismatch, "nu0 must live on E^n");
  }
  double acc = 0.0;
  for (std::size_t x = 0; x < codec.size(); ++x) {
    if (nu[x] == 0.0) continue;
    double m = 1.0;
    for (std::size_t k = 0; k < n; ++k) m *= mu[codec.coordinate(x, k)];
    acc += nu[x] * nu[x] / m;
  }
  return std::sqrt(acc);
}

std::vector<DeviationEstimate> deviation_sweep(
    const ReversibleChain& chain, std::size_t n, const ProbabilityVector& nu0,
    const Vector& f, double t, const std::vector<double>& r_list,
    std::size_t n_paths, std::uint64_t seed, double c,
    const DeviationOptions& options) {
  check_horizon(t);
  if (n == 0) fail("mc_sim", ErrorCode::InvalidArgument, "n must be >= 1");
  if (n_paths == 0) fail("mc_sim", ErrorCode::InvalidArgument, "n_paths must be >= 1");
  if (!(c > 0.0)) fail("mc_sim", ErrorCode::InvalidArgument, "constant C must be positive");
  for (double r : r_list)
    if (!(r > 0.0)) fail("mc_sim", ErrorCode::InvalidArgument, "r must be positive");
  const std::size_t budget = options.budget ? options.budget : default_product_budget();
  const auto space = product_space(chain.space(), n, options.mode, budget);
  if (static_cast<std::size_t>(f.size()) != space.size()) {
    fail("mc_sim", ErrorCode::DimensionMismatch, "observable must live on E^n");
  }
  ObservableFunction{f, 1.0}.check(space, "mc_sim");
  const double l2 = l2_density_factor(nu0, chain.mu(), n);

  const TupleCodec codec(chain.size(), n);
  double mean = 0.0;
  for (std::size_t x = 0; x < codec.size(); ++x) {
    double m = 1.0;
    for (std::size_t k = 0; k < n; ++k) m *= chain.mu()[codec.coordinate(x, k)];
    mean += m * f[static_cast<Eigen::Index>(x)];
  }

  Vector cdf(static_cast<Eigen::Index>(codec.size()));
  double run = 0.0;
  for (std::size_t x = 0; x < codec.size(); ++x) cdf[static_cast<Eigen::Index>(x)] = run += nu0[x];

  const auto deviations = parallel_map(n_paths, [&](std::size_t replica) {
    CounterRng rng(seed, replica);
    const double u = rng.uniform() * run;
    const auto* hit = std::upper_bound(cdf.data(), cdf.data() + cdf.size(), u);
    std::size_t flat = static_cast<std::size_t>(hit - cdf.data());
    flat = std::min(flat, codec.size() - 1);
    const auto start = codec.decode(flat);
    std::vector<PathSample> paths;
    paths.reserve(n);
    for (std::size_t k = 0; k < n; ++k) paths.push_back(simulate_path(chain, start[k], t, rng));
    return product_time_average(paths, chain.size(), f) - mean;
  });

  std::vector<DeviationEstimate> out;
  for (double r : r_list) {
    // Integer counts: the estimate is independent of the worker count.
    const auto hits = static_cast<std::size_t>(
        std::count_if(deviations.begin(), deviations.end(), [r](double d) { return d >= r; }));
    DeviationEstimate e;
    e.r = r;
    e.t = t;
    e.n = n;
    e.n_paths = n_paths;
    e.p_hat = static_cast<double>(hits) / static_cast<double>(n_paths);
    const auto ci = wilson_interval(hits, n_paths);
    e.wilson_low = ci.low;
    e.wilson_high = ci.high;
    e.l2_factor = l2;
    e.bound = l2 * std::exp(-t * r * r / c);
    out.push_back(e);
  }
  return out;
}

DeviationEstimate deviation_probability(const ReversibleChain& chain, std::size_t n,
                                        const ProbabilityVector& nu0, const Vector& f,
                                        double t, double r, std::size_t n_paths,
                                        std::uint64_t seed, double c,
                                        const DeviationOptions& options) {
  return deviation_sweep(chain, n, nu0, f, t, {r}, n_paths, seed, c, options).front();
}

void write_deviation_csv(std::ostream& out, const std::vector<DeviationEstimate>& rows) {
  out << "r,t,n,p_hat,wilson_low,wilson_high,bound,l2_factor\n";
  for (const auto& e : rows) {
    out << format_double(e.r) << ',' << format_double(e.t) << ',' << e.n << ','
        << format_double(e.p_hat) << ',' << format_double(e.wilson_low) << ','
        << format_double(e.wilson_high) << ',' << format_double(e.bound) << ','
        << format_double(e.l2_factor) << '\n';
  }
}

}  // namespace ticert
