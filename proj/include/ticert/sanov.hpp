#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ticert/chain.hpp"
#include "ticert/simplex_opt.hpp"

namespace ticert {

// A bounded functional F on P(E); `bound` is a declared sup |F|.
struct LaplaceFunctional {
  std::string name;
  std::function<double(const ProbabilityVector&)> evaluate;
  double bound = 0.0;
};

LaplaceFunctional linear_functional(const Vector& f);
// (<f, nu>)^2.
LaplaceFunctional quadratic_functional(const Vector& f);
// min(W2(mu, nu), m) on the chain's metric.
LaplaceFunctional clipped_w2_functional(const ReversibleChain& chain, double m);

enum class LaplaceSolver { Auto, Full, Reduced };

struct LaplaceOptions {
  std::size_t budget = 0;  // 0: default_product_budget()
  LaplaceSolver solver = LaplaceSolver::Auto;
  PatternSearchOptions search;
  bool timing = false;  // record wall-clock times (breaks byte reproducibility)
};

// (1/n) lambda_max(L_n + n F(L_n(x))) on E^n.
double laplace_lhs(const ReversibleChain& chain, const LaplaceFunctional& F,
                   std::size_t n, const LaplaceOptions& options = {});

// Same quantity on the multiset (orbit) states of E^n: the product operator
// restricted to permutation-symmetric functions, which contains the ground
// state. Dimension C(n + |E| - 1, |E| - 1).
double laplace_lhs_reduced(const ReversibleChain& chain, const LaplaceFunctional& F,
                           std::size_t n);

struct VariationalResult {
  double value = 0.0;
  ProbabilityVector maximizer = ProbabilityVector::uniform(1);
};

// sup over nu of F(nu) - I(nu | mu), by multi-start pattern search.
VariationalResult laplace_rhs(const ReversibleChain& chain, const LaplaceFunctional& F,
                              const LaplaceOptions& options = {});

// int F(L_n) d nu^n - I(nu | mu) by enumeration of E^n (at most 4096 states):
// the finite-n lower bound that laplace_lhs must dominate.
double lower_bound_probe(const ReversibleChain& chain, const LaplaceFunctional& F,
                         std::size_t n, const ProbabilityVector& nu);

struct LaplaceRow {
  std::size_t n = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  double gap = 0.0;  // lhs - rhs
  double wall_time_ms = 0.0;
};

struct LaplaceExperiment {
  std::string functional;
  std::string rate;  // "fisher" or "entropy"
  double t = 0.0;    // metadata only: the left side does not depend on t
  double rhs = 0.0;
  ProbabilityVector rhs_maximizer = ProbabilityVector::uniform(1);
  std::vector<LaplaceRow> rows;
  // max(0, rhs - lhs(n)) nonincreasing along n_list within 1e-6.
  bool lower_trend_ok = true;
  // |gap| at the last n strictly below |gap| at the first n.
  bool gap_shrinks = false;
  // Shape of lhs along n_list: "constant", "nonincreasing", "nondecreasing"
  // or "mixed" (within 1e-12). Reported only.
  std::string lhs_trend;
};

LaplaceExperiment convergence_experiment(const ReversibleChain& chain,
                                         const LaplaceFunctional& F,
                                         const std::vector<std::size_t>& n_list,
                                         double t, const LaplaceOptions& options = {});

// Entropy counterpart: (1/n) log int e^{n F(L_n)} d mu^n, exact by summing
// over occupation counts with multinomial weights.
double sanov_lhs(const ReversibleChain& chain, const LaplaceFunctional& F,
                 std::size_t n);
// sup over nu of F(nu) - H(nu | mu).
VariationalResult sanov_rhs(const ReversibleChain& chain, const LaplaceFunctional& F,
                            const LaplaceOptions& options = {});
LaplaceExperiment sanov_experiment(const ReversibleChain& chain,
                                   const LaplaceFunctional& F,
                                   const std::vector<std::size_t>& n_list,
                                   const LaplaceOptions& options = {});

// CSV with header n,lhs,rhs,gap,wall_time_ms.
void write_experiment_csv(std::ostream& out, const LaplaceExperiment& experiment);

// All occupation-count vectors of n draws from k states, lexicographic.
std::vector<std::vector<std::size_t>> compositions(std::size_t n, std::size_t k);

}  // namespace ticert
