#include "ticert/simplex_opt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ticert/error.hpp"
#include "ticert/parallel.hpp"
#include "ticert/rng.hpp"

namespace ticert {

namespace {

Vector clamp_normalize(Vector w, double floor) {
  w = w.cwiseMax(floor);
  return w / w.sum();
}

ProbabilityVector dirichlet_start(std::size_t dim, std::uint64_t seed,
                                  std::uint64_t stream) {
  CounterRng rng(seed, stream);
  Vector w(dim);
  for (std::size_t i = 0; i < dim; ++i) w[i] = rng.exponential(1.0);
  return ProbabilityVector::normalized(w);
}

double tangent_norm(const Vector& nu, const Vector& g) {
  const double mean = nu.dot(g);
  return std::sqrt((nu.array() * (g.array() - mean).square()).sum());
}

struct Run {
  double value = -std::numeric_limits<double>::infinity();
  Vector nu;
  double gradient_norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

Run ascend(const SimplexObjective& objective, const Vector& start,
           const SimplexAscentOptions& options) {
  auto grad_of = [&](const ProbabilityVector& p) {
    return objective.gradient ? objective.gradient(p)
                              : finite_difference_gradient(objective.value, p);
  };
  Run run;
  Vector nu = clamp_normalize(start, options.floor);
  ProbabilityVector p(nu, 1e-9);
  double value = objective.value(p);
  Vector g = grad_of(p);
  double eta = 1.0 / (1.0 + (g.array() - nu.dot(g)).abs().maxCoeff());
  int it = 0;
  double gn = tangent_norm(nu, g);
  for (; it < options.max_iterations && gn > options.gradient_tol; ++it) {
    bool accepted = false;
    while (eta > 1e-18) {
      Vector trial =
          nu.array() * (eta * (g.array() - g.maxCoeff())).exp();
      trial = clamp_normalize(trial, options.floor);
      ProbabilityVector tp(trial, 1e-9);
      const double tv = objective.value(tp);
      // Sufficient increase in the mirror geometry. Once the increase drops
      // below the resolution of the objective, a step is accepted when it
      // shrinks the projected gradient instead.
      bool take = tv > value + 1e-4 * eta * gn * gn;
      Vector tg;
      double tgn = 0.0;
      if (!take && std::abs(tv - value) <= 1e-13 * std::max(1.0, std::abs(value))) {
        tg = grad_of(tp);
        tgn = tangent_norm(trial, tg);
        take = tgn < gn;
      }
      if (take) {
        if (tg.size() == 0) {
          tg = grad_of(tp);
          tgn = tangent_norm(trial, tg);
        }
        nu = std::move(trial);
        value = std::max(value, tv);
        g = std::move(tg);
        gn = tgn;
        eta *= 1.5;
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) break;  // step size underflow: floating-point stationary
  }
  run.value = value;
  run.nu = nu;
  run.gradient_norm = gn;
  run.iterations = it;
  return run;
}

}  // namespace

Vector finite_difference_gradient(
    const std::function<double(const ProbabilityVector&)>& objective,
    const ProbabilityVector& at, double step) {
  const auto dim = at.size();
  Vector g(dim);
  const Vector& w = at.weights();
  for (std::size_t x = 0; x < dim; ++x) {
    const double h = step * std::max(w[x], 1e-3);
    Vector up = w, down = w;
    up[x] += h;
    down[x] = std::max(0.0, down[x] - h);
    const double span = up[x] - down[x];
    const double fu = objective(ProbabilityVector(up / up.sum(), 1e-9));
    const double fd = objective(ProbabilityVector(down / down.sum(), 1e-9));
    g[x] = (fu - fd) / span;
  }
  return g;
}

SimplexAscentResult maximize_concave_on_simplex(
    const SimplexObjective& objective, std::size_t dim,
    const SimplexAscentOptions& options) {
  std::vector<Vector> starts;
  for (const auto& s : options.extra_starts) starts.push_back(s.weights());
  for (int r = 0; r < options.restarts; ++r)
    starts.push_back(
        dirichlet_start(dim, options.seed, static_cast<std::uint64_t>(r))
            .weights());
  if (starts.empty()) starts.push_back(Vector::Constant(dim, 1.0 / dim));

  const auto runs = parallel_map(
      starts.size(), [&](std::size_t i) { return ascend(objective, starts[i], options); });
  std::size_t best = 0;
  for (std::size_t i = 1; i < runs.size(); ++i)
    if (runs[i].value > runs[best].value) best = i;
  const auto& run = runs[best];
  if (run.gradient_norm > options.stall_tol) {
    fail(options.module, ErrorCode::OptimizerStalled,
         "simplex ascent stalled: best value " + std::to_string(run.value) +
             ", projected gradient norm " + std::to_string(run.gradient_norm));
  }
  SimplexAscentResult out;
  out.value = run.value;
  out.argmax = ProbabilityVector(run.nu, 1e-9);
  out.gradient_norm = run.gradient_norm;
  out.iterations = run.iterations;
  return out;
}

SimplexAscentResult pattern_search_on_simplex(
    const std::function<double(const ProbabilityVector&)>& objective,
    std::size_t dim, const PatternSearchOptions& options) {
  std::vector<Vector> starts;
  for (const auto& s : options.extra_starts) starts.push_back(s.weights());
  for (int r = 0; r < options.restarts; ++r)
    starts.push_back(
        dirichlet_start(dim, options.seed, static_cast<std::uint64_t>(r))
            .weights());
  if (starts.empty()) starts.push_back(Vector::Constant(dim, 1.0 / dim));

  auto search = [&](std::size_t i) {
    Vector nu = starts[i];
    double value = objective(ProbabilityVector(nu, 1e-9));
    double step = options.initial_step;
    int evals = 0;
    while (step >= options.min_step) {
      bool improved = false;
      for (std::size_t x = 0; x < dim; ++x) {
        for (std::size_t y = 0; y < dim; ++y) {
          if (x == y || nu[y] <= 0.0) continue;
          const double move = std::min(step, nu[y]);
          Vector trial = nu;
          trial[x] += move;
          trial[y] -= move;
          if (trial[y] < 1e-300) trial[y] = 0.0;
          trial /= trial.sum();
          const double tv = objective(ProbabilityVector(trial, 1e-9));
          ++evals;
          if (tv > value) {
            nu = std::move(trial);
            value = tv;
            improved = true;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
    Run run;
    run.value = value;
    run.nu = nu;
    run.gradient_norm = 0.0;
    run.iterations = evals;
    return run;
  };
  const auto runs = parallel_map(starts.size(), search);
  std::size_t best = 0;
  for (std::size_t i = 1; i < runs.size(); ++i)
    if (runs[i].value > runs[best].value) best = i;
  SimplexAscentResult out;
  out.value = runs[best].value;
  out.argmax = ProbabilityVector(runs[best].nu, 1e-9);
  out.iterations = runs[best].iterations;
  return out;
}

}  // namespace ticert
