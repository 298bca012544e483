#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ticert/chain.hpp"

namespace ticert {

// Objective on the probability simplex. `gradient` may be empty, in which
// case central finite differences of the normalized objective are used.
struct SimplexObjective {
  std::function<double(const ProbabilityVector&)> value;
  std::function<Vector(const ProbabilityVector&)> gradient;
};

struct SimplexAscentOptions {
  int restarts = 16;
  std::uint64_t seed = 0x7469636572ULL;
  int max_iterations = 200000;
  double gradient_tol = 1e-8;
  // Above this projected-gradient norm at the iteration cap the run throws
  // OptimizerStalled; between gradient_tol and stall_tol it is accepted.
  double stall_tol = 1e-5;
  double floor = 1e-14;
  std::vector<ProbabilityVector> extra_starts;
  const char* module = "spectral";
};

struct SimplexAscentResult {
  double value = 0.0;
  ProbabilityVector argmax = ProbabilityVector::uniform(1);
  double gradient_norm = 0.0;
  int iterations = 0;
};

// Exponentiated-gradient (mirror) ascent with backtracking for a concave
// objective: nu <- nu * exp(eta g) / Z. Runs from `restarts` Dirichlet(1)
// starts plus `extra_starts`, returns the best. Convergence is declared when
// sqrt(sum_x nu_x (g_x - <nu, g>)^2) <= gradient_tol.
SimplexAscentResult maximize_concave_on_simplex(const SimplexObjective& objective,
                                                std::size_t dim,
                                                const SimplexAscentOptions& options);

struct PatternSearchOptions {
  int restarts = 8;
  std::uint64_t seed = 0x7061747465726EULL;
  double initial_step = 0.25;
  double min_step = 1e-11;
  std::vector<ProbabilityVector> extra_starts;
};

// Gradient-free pattern search over pairwise mass transfers e_x - e_y, for
// non-smooth objectives. The step halves whenever no transfer improves.
SimplexAscentResult pattern_search_on_simplex(
    const std::function<double(const ProbabilityVector&)>& objective,
    std::size_t dim, const PatternSearchOptions& options);

// Central-difference gradient of nu -> objective(nu / sum(nu)).
Vector finite_difference_gradient(
    const std::function<double(const ProbabilityVector&)>& objective,
    const ProbabilityVector& at, double step = 1e-6);

}  // namespace ticert
