#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ticert/chain.hpp"
#include "ticert/codec.hpp"
#include "ticert/simplex_opt.hpp"

namespace ticert {

// n independent copies of a reversible chain. The generator acts on one
// coordinate at a time; states are flat row-major indices of E^n.
class ProductChain {
 public:
  ProductChain(ReversibleChain base, std::size_t n,
               MetricMode mode = MetricMode::L2, std::size_t budget = 0);

  const ReversibleChain& base() const noexcept { return base_; }
  std::size_t n() const noexcept { return codec_.n(); }
  std::size_t size() const noexcept { return codec_.size(); }
  const TupleCodec& codec() const noexcept { return codec_; }
  MetricMode mode() const noexcept { return mode_; }
  // mu^n with weight prod_k mu(x_k).
  const ProbabilityVector& mu() const noexcept { return mu_; }
  const FiniteMetricSpace& space() const noexcept { return space_; }

  // The Kronecker-sum generator as a dense ReversibleChain; for tests and
  // small products only (BudgetExceeded above max_states).
  ReversibleChain materialize(std::size_t max_states = 1024) const;

 private:
  ReversibleChain base_;
  TupleCodec codec_;
  MetricMode mode_;
  ProbabilityVector mu_;
  FiniteMetricSpace space_;
};

ProbabilityVector product_measure(const ProbabilityVector& nu, std::size_t n);

ProbabilityVector empirical_measure(std::span<const std::size_t> tuple,
                                    std::size_t base_size);

// Sum-form Fisher information of nu relative to mu^n: only transitions that
// change a single coordinate contribute.
double fisher_information_product(const ProductChain& chain,
                                  const ProbabilityVector& nu);
Vector fisher_information_product_gradient(const ProductChain& chain,
                                           const ProbabilityVector& nu,
                                           double floor = 1e-14);

// Law of coordinate k given all other coordinates of `index` (the coordinate
// k digit of `index` is ignored), with its conditioning mass. Zero-mass
// conditioning events return mu.
struct Conditional {
  ProbabilityVector law;
  double mass = 0.0;
};
Conditional leave_one_out_conditional(const ProductChain& chain,
                                      const ProbabilityVector& nu,
                                      std::size_t k, std::size_t index);

// sum_k E_nu I(nu_{-k} | mu) by disintegration.
double chain_rule_decomposition(const ProductChain& chain,
                                const ProbabilityVector& nu);

enum class FunctionalTag { Fisher, Entropy, Custom };
enum class TensorVariant { Unordered, Ordered };

// A functional alpha on P(E). Custom evaluators must be bounded below.
struct BaseFunctional {
  FunctionalTag tag = FunctionalTag::Custom;
  std::function<double(const ProbabilityVector&)> evaluate;

  static BaseFunctional fisher(const ReversibleChain& chain);
  static BaseFunctional entropy(const ProbabilityVector& mu);
  static BaseFunctional custom(std::function<double(const ProbabilityVector&)> fn);
};

// Unordered: sum_k E_nu alpha(law of x_k given x_{-k}).
// Ordered:   sum_k E_nu alpha(law of x_k given x_1..x_{k-1}).
double tensorize(const BaseFunctional& alpha, TensorVariant variant,
                 const ProductChain& chain, const ProbabilityVector& nu);

struct ConjugateOptions {
  SimplexAscentOptions ascent;
  // Simplex ascent only up to this many product states.
  std::size_t ascent_limit = 256;
};

struct ConjugateResult {
  double value = 0.0;
  std::optional<ProbabilityVector> maximizer;
  // "ascent", "eigen" or "logsumexp".
  std::string method;
  // For Fisher/Unordered: the Feynman-Kac top eigenvalue of the same problem.
  std::optional<double> cross_check;
};

// sup over nu in P(E^n) of <f, nu> - tensorize(alpha, variant, nu).
ConjugateResult rho_conjugate(const BaseFunctional& alpha, TensorVariant variant,
                              const ProductChain& chain, const Vector& f,
                              const ConjugateOptions& options = {});

// log sum_x mu(x) e^{f(x)}, shifted for stability.
double log_sum_exp(const Vector& f, const ProbabilityVector& mu);

}  // namespace ticert
