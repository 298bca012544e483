#pragma once

#include <cstddef>
#include <iosfwd>

#include "ticert/chain.hpp"

namespace ticert {

// A coupling of `source_marginal` (rows) and `target_marginal` (columns).
struct TransportPlan {
  Matrix plan;
  Vector source_marginal;
  Vector target_marginal;
  int p = 1;
  double cost = 0.0;  // sum plan(x, y) d(x, y)^p
  // Feasible dual potentials: source_potential(x) + target_potential(y) <= d^p.
  Vector source_potential;
  Vector target_potential;
  double duality_gap = 0.0;
};

struct WassersteinResult {
  double distance = 0.0;  // (min cost)^(1/p)
  TransportPlan plan;
};

// W_p(nu, mu) for p in {1, 2} by network simplex on the bipartite transport
// graph. Zero-mass atoms are dropped before the solve and reinserted as zero
// rows/columns. Optimality is certified by a feasible dual within 1e-9.
WassersteinResult wasserstein(const FiniteMetricSpace& space, int p,
                              const ProbabilityVector& nu,
                              const ProbabilityVector& mu);

struct KantorovichDualResult {
  double value = 0.0;
  ObservableFunction potential;  // 1-Lipschitz
};

// max over 1-Lipschitz f of int f d(nu - mu), solved as a dense LP over the
// Lipschitz constraints on the support of nu - mu and extended to the whole
// space by the McShane envelope. Independent of the transport solver.
KantorovichDualResult kantorovich_dual(const FiniteMetricSpace& space,
                                       const ProbabilityVector& nu,
                                       const ProbabilityVector& mu);

// max over 1-Lipschitz f of <f, w> for a signed measure w with zero total
// mass, through the transport duals (c-transform).
KantorovichDualResult lipschitz_dual_potential(const FiniteMetricSpace& space,
                                               const Vector& signed_measure);

// Raw transportation solves on a cost matrix; exposed for tests.
TransportPlan solve_transport(const Matrix& cost, const Vector& supply,
                              const Vector& demand);
// Dense-simplex route on the dual LP, limited to 40 atoms per side.
TransportPlan solve_transport_dense(const Matrix& cost, const Vector& supply,
                                    const Vector& demand);

inline constexpr std::size_t kDefaultProductBudget = 60000;
// kDefaultProductBudget unless the TI_CERT_BUDGET environment variable is set.
std::size_t default_product_budget();

// E^n in row-major order with the l2 or l1 product metric.
FiniteMetricSpace product_space(const FiniteMetricSpace& space, std::size_t n,
                                MetricMode mode,
                                std::size_t budget = default_product_budget());

// CSV rows "x_index,y_index,mass" for the nonzero plan entries.
void write_plan_csv(std::ostream& out, const TransportPlan& plan);

}  // namespace ticert
