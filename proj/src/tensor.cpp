#include "ticert/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ticert/error.hpp"
#include "ticert/spectral.hpp"
#include "ticert/transport.hpp"

namespace ticert {

namespace {

void check_dim(const ProductChain& chain, std::size_t got, const char* what) {
  if (got != chain.size()) {
    fail("tensor", ErrorCode::DimensionMismatch,
         std::string(what) + " has " + std::to_string(got) +
             " entries, product space has " + std::to_string(chain.size()));
  }
}

std::size_t resolve_budget(std::size_t budget) {
  return budget ? budget : default_product_budget();
}

std::size_t checked_size(std::size_t base, std::size_t n, std::size_t budget) {
  if (n == 0) fail("tensor", ErrorCode::InvalidArgument, "n must be >= 1");
  const auto total = TupleCodec::checked_power(base, n, budget);
  if (total == 0) {
    fail("tensor", ErrorCode::BudgetExceeded,
         std::to_string(base) + "^" + std::to_string(n) +
             " states exceed the budget of " + std::to_string(budget));
  }
  return total;
}

// Marginal of the first m coordinates (m = 0..n) as a flat vector of
// length |E|^m; row-major order makes each entry a contiguous block sum.
Vector prefix_marginal(const Vector& nu, std::size_t base, std::size_t n,
                       std::size_t m) {
  std::size_t len = 1;
  for (std::size_t i = 0; i < m; ++i) len *= base;
  std::size_t block = 1;
  for (std::size_t i = m; i < n; ++i) block *= base;
  Vector out(static_cast<Eigen::Index>(len));
  for (std::size_t p = 0; p < len; ++p)
    out[static_cast<Eigen::Index>(p)] =
        nu.segment(static_cast<Eigen::Index>(p * block),
                   static_cast<Eigen::Index>(block))
            .sum();
  return out;
}

ProbabilityVector conditional_law(const Vector& joint, double mass,
                                  const ProbabilityVector& fallback) {
  if (mass <= 0.0) return fallback;
  return ProbabilityVector::normalized(joint / mass);
}

}  // namespace

ProductChain::ProductChain(ReversibleChain base, std::size_t n, MetricMode mode,
                           std::size_t budget)
    : base_(std::move(base)),
      codec_(base_.size(), (checked_size(base_.size(), n, resolve_budget(budget)), n)),
      mode_(mode),
      mu_(product_measure(base_.mu(), n)),
      space_(product_space(base_.space(), n, mode, resolve_budget(budget))) {}

ReversibleChain ProductChain::materialize(std::size_t max_states) const {
  if (size() > max_states) {
    fail("tensor", ErrorCode::BudgetExceeded,
         "materializing " + std::to_string(size()) + " states exceeds " +
             std::to_string(max_states));
  }
  const auto total = static_cast<Eigen::Index>(size());
  const Matrix& q = base_.rates();
  const auto e = base_.size();
  Matrix rates = Matrix::Zero(total, total);
  for (std::size_t x = 0; x < size(); ++x) {
    for (std::size_t k = 0; k < n(); ++k) {
      const auto a = codec_.coordinate(x, k);
      const auto s = codec_.stride(k);
      for (std::size_t b = 0; b < e; ++b) {
        if (b == a) continue;
        const std::size_t y = x + b * s - a * s;
        rates(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) +=
            q(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      }
    }
    const auto xi = static_cast<Eigen::Index>(x);
    rates(xi, xi) = 0.0;
    rates(xi, xi) = -rates.row(xi).sum();
  }
  return ReversibleChain(space_, std::move(rates), mu_);
}

ProbabilityVector product_measure(const ProbabilityVector& nu, std::size_t n) {
  Vector w = Vector::Ones(1);
  const Vector& b = nu.weights();
  for (std::size_t k = 0; k < n; ++k) {
    Vector next(w.size() * b.size());
    for (Eigen::Index i = 0; i < w.size(); ++i)
      next.segment(i * b.size(), b.size()) = w[i] * b;
    w = std::move(next);
  }
  return ProbabilityVector(w, 1e-10);
}

ProbabilityVector empirical_measure(std::span<const std::size_t> tuple,
                                    std::size_t base_size) {
  if (tuple.empty()) {
    fail("tensor", ErrorCode::InvalidArgument, "empty tuple");
  }
  Vector w = Vector::Zero(static_cast<Eigen::Index>(base_size));
  for (const auto x : tuple) {
    if (x >= base_size) {
      fail("tensor", ErrorCode::IndexOutOfRange,
           "state " + std::to_string(x) + " outside 0.." +
               std::to_string(base_size - 1));
    }
    w[static_cast<Eigen::Index>(x)] += 1.0;
  }
  return ProbabilityVector(w / static_cast<double>(tuple.size()));
}

double fisher_information_product(const ProductChain& chain,
                                  const ProbabilityVector& nu) {
  check_dim(chain, nu.size(), "nu");
  const Matrix& q = chain.base().rates();
  const Vector& mu = chain.mu().weights();
  const Vector& w = nu.weights();
  const auto& codec = chain.codec();
  const auto e = chain.base().size();
  // Each unordered pair {x, y} differing in one coordinate is visited once
  // (b > a) and weighted by mu(x) q(a, b) = mu(y) q(b, a).
  double acc = 0.0;
  for (std::size_t x = 0; x < chain.size(); ++x) {
    const auto xi = static_cast<Eigen::Index>(x);
    const double fx = w[xi] / mu[xi];
    for (std::size_t k = 0; k < chain.n(); ++k) {
      const auto a = codec.coordinate(x, k);
      const auto s = codec.stride(k);
      for (std::size_t b = a + 1; b < e; ++b) {
        const double rate = q(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        if (rate == 0.0) continue;
        const auto yi = static_cast<Eigen::Index>(x + (b - a) * s);
        acc += mu[xi] * rate * sqrt_gap_squared(fx, w[yi] / mu[yi]);
      }
    }
  }
  return acc;
}

Vector fisher_information_product_gradient(const ProductChain& chain,
                                           const ProbabilityVector& nu,
                                           double floor) {
  check_dim(chain, nu.size(), "nu");
  const Matrix& q = chain.base().rates();
  const Vector& mu = chain.mu().weights();
  const Vector s = (nu.weights().cwiseMax(floor).array() / mu.array()).sqrt();
  const auto& codec = chain.codec();
  const auto e = chain.base().size();
  Vector g = Vector::Zero(s.size());
  for (std::size_t x = 0; x < chain.size(); ++x) {
    const auto xi = static_cast<Eigen::Index>(x);
    double acc = 0.0;
    for (std::size_t k = 0; k < chain.n(); ++k) {
      const auto a = codec.coordinate(x, k);
      const auto st = codec.stride(k);
      for (std::size_t b = 0; b < e; ++b) {
        if (b == a) continue;
        const auto yi = static_cast<Eigen::Index>(x + b * st - a * st);
        acc += q(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) *
               (1.0 - s[yi] / s[xi]);
      }
    }
    g[xi] = acc;
  }
  return g;
}

Conditional leave_one_out_conditional(const ProductChain& chain,
                                      const ProbabilityVector& nu,
                                      std::size_t k, std::size_t index) {
  check_dim(chain, nu.size(), "nu");
  if (k >= chain.n() || index >= chain.size()) {
    fail("tensor", ErrorCode::IndexOutOfRange, "coordinate or index out of range");
  }
  const auto& codec = chain.codec();
  const auto e = chain.base().size();
  const auto s = codec.stride(k);
  const std::size_t origin = index - codec.coordinate(index, k) * s;
  Vector joint(static_cast<Eigen::Index>(e));
  for (std::size_t a = 0; a < e; ++a)
    joint[static_cast<Eigen::Index>(a)] = nu[origin + a * s];
  Conditional out{chain.base().mu(), joint.sum()};
  out.law = conditional_law(joint, out.mass, chain.base().mu());
  return out;
}

namespace {

template <typename Fn>
double sum_unordered(const ProductChain& chain, const ProbabilityVector& nu,
                     Fn&& alpha) {
  const auto& codec = chain.codec();
  const auto e = chain.base().size();
  double total = 0.0;
  for (std::size_t k = 0; k < chain.n(); ++k) {
    const auto s = codec.stride(k);
    for (std::size_t x = 0; x < chain.size(); ++x) {
      if (codec.coordinate(x, k) != 0) continue;
      Vector joint(static_cast<Eigen::Index>(e));
      for (std::size_t a = 0; a < e; ++a)
        joint[static_cast<Eigen::Index>(a)] = nu[x + a * s];
      const double mass = joint.sum();
      if (mass <= 0.0) continue;  // conditional set to mu; weight zero
      total += mass * alpha(conditional_law(joint, mass, chain.base().mu()));
    }
  }
  return total;
}

template <typename Fn>
double sum_ordered(const ProductChain& chain, const ProbabilityVector& nu,
                   Fn&& alpha) {
  const auto e = chain.base().size();
  const auto n = chain.n();
  double total = 0.0;
  Vector previous = Vector::Ones(1);
  for (std::size_t k = 0; k < n; ++k) {
    const Vector next = prefix_marginal(nu.weights(), e, n, k + 1);
    for (Eigen::Index p = 0; p < previous.size(); ++p) {
      const double mass = previous[p];
      if (mass <= 0.0) continue;
      const Vector joint = next.segment(p * static_cast<Eigen::Index>(e),
                                        static_cast<Eigen::Index>(e));
      total += mass * alpha(conditional_law(joint, joint.sum(), chain.base().mu()));
    }
    previous = next;
  }
  return total;
}

}  // namespace

double chain_rule_decomposition(const ProductChain& chain,
                                const ProbabilityVector& nu) {
  check_dim(chain, nu.size(), "nu");
  const auto& base = chain.base();
  return sum_unordered(chain, nu, [&](const ProbabilityVector& c) {
    return fisher_information(base, c);
  });
}

BaseFunctional BaseFunctional::fisher(const ReversibleChain& chain) {
  BaseFunctional out;
  out.tag = FunctionalTag::Fisher;
  out.evaluate = [chain](const ProbabilityVector& nu) {
    return fisher_information(chain, nu);
  };
  return out;
}

BaseFunctional BaseFunctional::entropy(const ProbabilityVector& mu) {
  BaseFunctional out;
  out.tag = FunctionalTag::Entropy;
  out.evaluate = [mu](const ProbabilityVector& nu) {
    return relative_entropy(nu, mu);
  };
  return out;
}

BaseFunctional BaseFunctional::custom(
    std::function<double(const ProbabilityVector&)> fn) {
  BaseFunctional out;
  out.tag = FunctionalTag::Custom;
  out.evaluate = std::move(fn);
  return out;
}

double tensorize(const BaseFunctional& alpha, TensorVariant variant,
                 const ProductChain& chain, const ProbabilityVector& nu) {
  check_dim(chain, nu.size(), "nu");
  if (!alpha.evaluate) {
    fail("tensor", ErrorCode::InvalidArgument, "functional has no evaluator");
  }
  return variant == TensorVariant::Unordered
             ? sum_unordered(chain, nu, alpha.evaluate)
             : sum_ordered(chain, nu, alpha.evaluate);
}

double log_sum_exp(const Vector& f, const ProbabilityVector& mu) {
  if (static_cast<std::size_t>(f.size()) != mu.size()) {
    fail("tensor", ErrorCode::DimensionMismatch, "f and mu lengths differ");
  }
  const double top = f.maxCoeff();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i)
    acc += mu.weights()[i] * std::exp(f[i] - top);
  return top + std::log(acc);
}

ConjugateResult rho_conjugate(const BaseFunctional& alpha, TensorVariant variant,
                              const ProductChain& chain, const Vector& f,
                              const ConjugateOptions& options) {
  check_dim(chain, static_cast<std::size_t>(f.size()), "f");
  const bool fisher_unordered =
      alpha.tag == FunctionalTag::Fisher && variant == TensorVariant::Unordered;
  const bool entropy_ordered =
      alpha.tag == FunctionalTag::Entropy && variant == TensorVariant::Ordered;
  ConjugateResult out;
  if (fisher_unordered) {
    ProductEigenOptions eo;
    eo.budget = chain.size();
    out.cross_check = fk_lograte_product(chain.base(), chain.n(), f, eo);
  }
  if (chain.size() > options.ascent_limit) {
    if (fisher_unordered) {
      out.value = *out.cross_check;
      out.method = "eigen";
      return out;
    }
    if (entropy_ordered) {
      out.value = log_sum_exp(f, chain.mu());
      out.method = "logsumexp";
      return out;
    }
    fail("tensor", ErrorCode::BudgetExceeded,
         "simplex ascent limited to " + std::to_string(options.ascent_limit) +
             " product states");
  }
  SimplexAscentOptions ao = options.ascent;
  ao.module = "tensor";
  ao.extra_starts.push_back(chain.mu());
  SimplexObjective obj;
  obj.value = [&](const ProbabilityVector& nu) {
    return f.dot(nu.weights()) - tensorize(alpha, variant, chain, nu);
  };
  if (fisher_unordered) {
    obj.gradient = [&](const ProbabilityVector& nu) -> Vector {
      return f - fisher_information_product_gradient(chain, nu, ao.floor);
    };
  } else if (entropy_ordered) {
    // The ordered entropy lift is H(. | mu^n) itself.
    const Vector log_mu = chain.mu().weights().array().log();
    obj.gradient = [&, log_mu](const ProbabilityVector& nu) -> Vector {
      const Vector w = nu.weights().cwiseMax(ao.floor);
      return f.array() - (w.array().log() - log_mu.array() + 1.0);
    };
  }
  const auto res = maximize_concave_on_simplex(obj, chain.size(), ao);
  out.value = res.value;
  out.maximizer = res.argmax;
  out.method = "ascent";
  return out;
}

}  // namespace ticert
