#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ticert/codec.hpp"

namespace ticert {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kStructuralTol = 1e-12;
inline constexpr double kDerivedTol = 1e-10;

enum class MetricMode { L2, L1 };

// Named states with a metric. Either a validated dense distance matrix, or an
// n-fold product of a base space whose distances are evaluated on demand, so
// large product spaces never materialize |E|^n x |E|^n matrices.
class FiniteMetricSpace {
 public:
  FiniteMetricSpace(std::vector<std::string> labels, Matrix dist);

  static FiniteMetricSpace discrete(std::vector<std::string> labels);
  // States 0..k-1 on the integer line, d(i, j) = |i - j|.
  static FiniteMetricSpace line(std::size_t k);
  static FiniteMetricSpace product(const FiniteMetricSpace& base, std::size_t n,
                                   MetricMode mode);

  std::size_t size() const noexcept { return size_; }
  const std::vector<std::string>& labels() const;
  double distance(std::size_t x, std::size_t y) const;
  double diameter() const;
  // Dense distance matrix; cost is size()^2.
  Matrix matrix() const;

  bool is_product() const noexcept { return product_ != nullptr; }
  // For product spaces: the base space, copy count and mode.
  const FiniteMetricSpace* base() const;
  std::size_t copies() const;
  MetricMode mode() const;

 private:
  struct ProductInfo;
  FiniteMetricSpace() = default;

  std::size_t size_ = 0;
  std::shared_ptr<const std::vector<std::string>> labels_;
  std::shared_ptr<const Matrix> dist_;
  std::shared_ptr<const ProductInfo> product_;
};

class ProbabilityVector {
 public:
  explicit ProbabilityVector(Vector weights, double tol = kStructuralTol);

  static ProbabilityVector uniform(std::size_t n);
  static ProbabilityVector point_mass(std::size_t n, std::size_t x);
  // Clips negatives to zero and rescales; for optimizer iterates.
  static ProbabilityVector normalized(const Vector& raw);

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(weights_.size());
  }
  const Vector& weights() const noexcept { return weights_; }
  double operator[](std::size_t x) const { return weights_[static_cast<Eigen::Index>(x)]; }

 private:
  Vector weights_;
};

struct ObservableFunction {
  Vector values;
  std::optional<double> lipschitz_bound;

  // Smallest L with |f(x) - f(y)| <= L d(x, y).
  static double lipschitz_constant(const FiniteMetricSpace& space,
                                   const Vector& values);
  // Throws NotLipschitz (module `module`) if the declared or given bound fails.
  void check(const FiniteMetricSpace& space, const std::string& module) const;
};

// Largest 1-Lipschitz function below `values`: f(x) = min_y values(y) + d(x, y).
Vector mcshane_envelope(const FiniteMetricSpace& space, const Vector& values);

class ReversibleChain {
 public:
  // Validates the generator, irreducibility and detailed balance. When `mu`
  // is absent it is computed with stationary_distribution.
  ReversibleChain(FiniteMetricSpace space, Matrix rates,
                  std::optional<ProbabilityVector> mu = std::nullopt);

  std::size_t size() const noexcept { return space_.size(); }
  const FiniteMetricSpace& space() const noexcept { return space_; }
  const Matrix& rates() const noexcept { return rates_; }
  const ProbabilityVector& mu() const noexcept { return mu_; }

  // D^{1/2} Q D^{-1/2} with D = diag(mu); symmetric under detailed balance.
  const Matrix& symmetrized_rates() const noexcept { return sym_rates_; }

 private:
  FiniteMetricSpace space_;
  Matrix rates_;
  ProbabilityVector mu_;
  Matrix sym_rates_;
};

// Generator contract checks shared by the chain constructor and the loader.
void validate_generator(const Matrix& rates);
bool is_strongly_connected(const Matrix& rates);

ProbabilityVector stationary_distribution(const Matrix& rates);

// E(g, g) = 1/2 sum_{x,y} mu_x Q_xy (g_y - g_x)^2.
double dirichlet_form(const ReversibleChain& chain, const Vector& g);
// Polarized double-sum form E(g, h).
double dirichlet_form(const ReversibleChain& chain, const Vector& g,
                      const Vector& h);
// -<g, Q h>_mu, the operator route.
double dirichlet_form_operator(const ReversibleChain& chain, const Vector& g,
                               const Vector& h);

double fisher_information(const ReversibleChain& chain,
                          const ProbabilityVector& nu);
// dI/dnu_x = (-Q s)_x / s_x with s = sqrt(nu / mu); entries at nu_x = 0 are
// evaluated at the clamp floor.
Vector fisher_information_gradient(const ReversibleChain& chain,
                                   const ProbabilityVector& nu,
                                   double floor = 1e-14);

double relative_entropy(const ProbabilityVector& nu,
                        const ProbabilityVector& mu);

// (sqrt(a) - sqrt(b))^2 without cancellation.
inline double sqrt_gap_squared(double a, double b) {
  const double denom = std::sqrt(a) + std::sqrt(b);
  if (denom == 0.0) return 0.0;
  const double d = (a - b) / denom;
  return d * d;
}

}  // namespace ticert
