#include "ticert/chain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <utility>

#include "ticert/error.hpp"

namespace ticert {

namespace {

constexpr const char* kModule = "chain_core";

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

double rate_scale(const Matrix& rates) {
  double scale = 1.0;
  for (Eigen::Index x = 0; x < rates.rows(); ++x)
    scale = std::max(scale, std::abs(rates(x, x)));
  return scale;
}

void require_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    fail(kModule, ErrorCode::DimensionMismatch,
         std::string(what) + " has " + std::to_string(got) +
             " entries, chain has " + std::to_string(want) + " states");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// FiniteMetricSpace

struct FiniteMetricSpace::ProductInfo {
  std::shared_ptr<const FiniteMetricSpace> base;
  TupleCodec codec;
  MetricMode mode;
};

FiniteMetricSpace::FiniteMetricSpace(std::vector<std::string> labels,
                                     Matrix dist) {
  const auto n = labels.size();
  if (n == 0) fail(kModule, ErrorCode::InvalidMetric, "empty state space");
  if (static_cast<std::size_t>(dist.rows()) != n ||
      static_cast<std::size_t>(dist.cols()) != n) {
    fail(kModule, ErrorCode::DimensionMismatch,
         "distance matrix must be " + std::to_string(n) + "x" +
             std::to_string(n));
  }
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = 0; y < n; ++y) {
      const double dxy = dist(x, y);
      if (!std::isfinite(dxy)) {
        fail(kModule, ErrorCode::InvalidMetric, "non-finite distance");
      }
      if (x == y && dxy != 0.0) {
        fail(kModule, ErrorCode::InvalidMetric,
             "d(" + labels[x] + "," + labels[x] + ") must be 0");
      }
      if (x != y && !(dxy > 0.0)) {
        fail(kModule, ErrorCode::InvalidMetric,
             "d(" + labels[x] + "," + labels[y] + ") must be positive");
      }
      if (std::abs(dxy - dist(y, x)) > kStructuralTol) {
        fail(kModule, ErrorCode::InvalidMetric,
             "distance is not symmetric at (" + labels[x] + "," + labels[y] +
                 ")");
      }
    }
  }
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      for (std::size_t z = 0; z < n; ++z) {
        if (dist(x, z) > dist(x, y) + dist(y, z) + kStructuralTol) {
          fail(kModule, ErrorCode::InvalidMetric,
               "triangle inequality fails for (" + labels[x] + "," +
                   labels[y] + "," + labels[z] + ")");
        }
      }
    }
  }
  size_ = n;
  labels_ = std::make_shared<const std::vector<std::string>>(std::move(labels));
  dist_ = std::make_shared<const Matrix>(std::move(dist));
}

FiniteMetricSpace FiniteMetricSpace::discrete(std::vector<std::string> labels) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  Matrix dist = Matrix::Ones(n, n) - Matrix::Identity(n, n);
  return FiniteMetricSpace(std::move(labels), std::move(dist));
}

FiniteMetricSpace FiniteMetricSpace::line(std::size_t k) {
  std::vector<std::string> labels;
  Matrix dist(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    labels.push_back(std::to_string(i));
    for (std::size_t j = 0; j < k; ++j)
      dist(i, j) = std::abs(static_cast<double>(i) - static_cast<double>(j));
  }
  return FiniteMetricSpace(std::move(labels), std::move(dist));
}

FiniteMetricSpace FiniteMetricSpace::product(const FiniteMetricSpace& base,
                                             std::size_t n, MetricMode mode) {
  TupleCodec codec(base.size(), n);
  std::vector<std::string> labels;
  labels.reserve(codec.size());
  const auto& base_labels = base.labels();
  for (std::size_t i = 0; i < codec.size(); ++i) {
    std::string label = "(";
    for (std::size_t k = 0; k < n; ++k) {
      if (k) label += ",";
      label += base_labels[codec.coordinate(i, k)];
    }
    labels.push_back(label + ")");
  }
  FiniteMetricSpace out;
  out.size_ = codec.size();
  out.labels_ =
      std::make_shared<const std::vector<std::string>>(std::move(labels));
  out.product_ = std::make_shared<const ProductInfo>(
      ProductInfo{std::make_shared<const FiniteMetricSpace>(base), codec, mode});
  return out;
}

const std::vector<std::string>& FiniteMetricSpace::labels() const {
  return *labels_;
}

double FiniteMetricSpace::distance(std::size_t x, std::size_t y) const {
  if (!product_) return (*dist_)(x, y);
  const auto& codec = product_->codec;
  double acc = 0.0;
  for (std::size_t k = 0; k < codec.n(); ++k) {
    const double d = product_->base->distance(codec.coordinate(x, k),
                                              codec.coordinate(y, k));
    acc += product_->mode == MetricMode::L2 ? d * d : d;
  }
  return product_->mode == MetricMode::L2 ? std::sqrt(acc) : acc;
}

double FiniteMetricSpace::diameter() const {
  if (product_) {
    const double base_diam = product_->base->diameter();
    const double n = static_cast<double>(product_->codec.n());
    return product_->mode == MetricMode::L2 ? base_diam * std::sqrt(n)
                                            : base_diam * n;
  }
  return dist_->maxCoeff();
}

Matrix FiniteMetricSpace::matrix() const {
  if (dist_) return *dist_;
  Matrix out(size_, size_);
  for (std::size_t x = 0; x < size_; ++x)
    for (std::size_t y = 0; y < size_; ++y) out(x, y) = distance(x, y);
  return out;
}

const FiniteMetricSpace* FiniteMetricSpace::base() const {
  return product_ ? product_->base.get() : nullptr;
}

std::size_t FiniteMetricSpace::copies() const {
  return product_ ? product_->codec.n() : 1;
}

MetricMode FiniteMetricSpace::mode() const {
  return product_ ? product_->mode : MetricMode::L2;
}

// ---------------------------------------------------------------------------
// ProbabilityVector

ProbabilityVector::ProbabilityVector(Vector weights, double tol)
    : weights_(std::move(weights)) {
  if (weights_.size() == 0) {
    fail(kModule, ErrorCode::InvalidMeasure, "empty probability vector");
  }
  for (Eigen::Index i = 0; i < weights_.size(); ++i) {
    if (!std::isfinite(weights_[i]) || weights_[i] < 0.0) {
      fail(kModule, ErrorCode::InvalidMeasure,
           "weight " + std::to_string(i) + " = " + fmt_double(weights_[i]) +
               " is negative or non-finite");
    }
  }
  const double total = weights_.sum();
  if (std::abs(total - 1.0) > tol) {
    fail(kModule, ErrorCode::InvalidMeasure,
         "weights sum to " + fmt_double(total) + ", not 1");
  }
}

ProbabilityVector ProbabilityVector::uniform(std::size_t n) {
  return ProbabilityVector(Vector::Constant(n, 1.0 / static_cast<double>(n)));
}

ProbabilityVector ProbabilityVector::point_mass(std::size_t n, std::size_t x) {
  Vector w = Vector::Zero(n);
  w[x] = 1.0;
  return ProbabilityVector(std::move(w));
}

ProbabilityVector ProbabilityVector::normalized(const Vector& raw) {
  Vector w = raw.cwiseMax(0.0);
  const double total = w.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    fail(kModule, ErrorCode::InvalidMeasure, "cannot normalize zero vector");
  }
  w /= total;
  return ProbabilityVector(std::move(w), 1e-9);
}

// ---------------------------------------------------------------------------
// Observables

double ObservableFunction::lipschitz_constant(const FiniteMetricSpace& space,
                                              const Vector& values) {
  double best = 0.0;
  const auto n = space.size();
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = x + 1; y < n; ++y)
      best = std::max(best, std::abs(values[x] - values[y]) /
                                space.distance(x, y));
  return best;
}

void ObservableFunction::check(const FiniteMetricSpace& space,
                               const std::string& module) const {
  if (static_cast<std::size_t>(values.size()) != space.size()) {
    fail(module, ErrorCode::DimensionMismatch,
         "observable has " + std::to_string(values.size()) + " values for " +
             std::to_string(space.size()) + " states");
  }
  if (!lipschitz_bound) return;
  const double bound = *lipschitz_bound;
  const auto n = space.size();
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = x + 1; y < n; ++y) {
      if (std::abs(values[x] - values[y]) >
          bound * space.distance(x, y) + kStructuralTol) {
        fail(module, ErrorCode::NotLipschitz,
             "|f(" + space.labels()[x] + ") - f(" + space.labels()[y] +
                 ")| exceeds " + fmt_double(bound) + " * d");
      }
    }
  }
}

Vector mcshane_envelope(const FiniteMetricSpace& space, const Vector& values) {
  const auto n = space.size();
  Vector out(n);
  for (std::size_t x = 0; x < n; ++x) {
    double best = values[x];
    for (std::size_t y = 0; y < n; ++y)
      best = std::min(best, values[y] + space.distance(x, y));
    out[x] = best;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Generators

void validate_generator(const Matrix& rates) {
  if (rates.rows() != rates.cols() || rates.rows() == 0) {
    fail(kModule, ErrorCode::NotGenerator, "rate matrix must be square");
  }
  const double scale = rate_scale(rates);
  for (Eigen::Index x = 0; x < rates.rows(); ++x) {
    double row = 0.0;
    for (Eigen::Index y = 0; y < rates.cols(); ++y) {
      if (!std::isfinite(rates(x, y))) {
        fail(kModule, ErrorCode::NotGenerator, "non-finite rate");
      }
      if (x != y && rates(x, y) < 0.0) {
        fail(kModule, ErrorCode::NotGenerator,
             "negative off-diagonal rate at (" + std::to_string(x) + "," +
                 std::to_string(y) + ")");
      }
      row += rates(x, y);
    }
    if (std::abs(row) > kStructuralTol * scale) {
      fail(kModule, ErrorCode::NotGenerator,
           "row " + std::to_string(x) + " sums to " + fmt_double(row));
    }
  }
}

bool is_strongly_connected(const Matrix& rates) {
  const auto n = static_cast<std::size_t>(rates.rows());
  auto reach_all = [&](bool transpose) {
    std::vector<char> seen(n, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      const auto x = stack.back();
      stack.pop_back();
      for (std::size_t y = 0; y < n; ++y) {
        const double r = transpose ? rates(y, x) : rates(x, y);
        if (y != x && r > 0.0 && !seen[y]) {
          seen[y] = 1;
          ++count;
          stack.push_back(y);
        }
      }
    }
    return count == n;
  };
  return reach_all(false) && reach_all(true);
}

ProbabilityVector stationary_distribution(const Matrix& rates) {
  validate_generator(rates);
  if (!is_strongly_connected(rates)) {
    fail(kModule, ErrorCode::NotIrreducible,
         "rate graph is not strongly connected");
  }
  const auto n = rates.rows();
  // mu Q = 0 with the last balance equation replaced by sum(mu) = 1.
  Matrix system = rates.transpose();
  system.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs[n - 1] = 1.0;
  Vector mu = system.fullPivLu().solve(rhs);
  if (mu.minCoeff() <= 0.0) {
    fail(kModule, ErrorCode::InvariantViolation,
         "stationary solve produced a non-positive weight");
  }
  mu /= mu.sum();
  const double residual = (mu.transpose() * rates).cwiseAbs().maxCoeff();
  if (residual > kDerivedTol * rate_scale(rates)) {
    fail(kModule, ErrorCode::InvariantViolation,
         "stationary residual " + fmt_double(residual) + " exceeds tolerance");
  }
  return ProbabilityVector(std::move(mu));
}

// ---------------------------------------------------------------------------
// ReversibleChain

ReversibleChain::ReversibleChain(FiniteMetricSpace space, Matrix rates,
                                 std::optional<ProbabilityVector> mu)
    : space_(std::move(space)),
      rates_(std::move(rates)),
      mu_(mu ? std::move(*mu) : ProbabilityVector::uniform(1)) {
  if (static_cast<std::size_t>(rates_.rows()) != space_.size()) {
    fail(kModule, ErrorCode::DimensionMismatch,
         "rate matrix is " + std::to_string(rates_.rows()) + "x" +
             std::to_string(rates_.cols()) + " for " +
             std::to_string(space_.size()) + " states");
  }
  validate_generator(rates_);
  if (!is_strongly_connected(rates_)) {
    fail(kModule, ErrorCode::NotIrreducible,
         "rate graph is not strongly connected");
  }
  const double scale = rate_scale(rates_);
  if (mu) {
    require_size(mu_.size(), space_.size(), "mu");
    const double residual =
        (mu_.weights().transpose() * rates_).cwiseAbs().maxCoeff();
    if (residual > kDerivedTol * scale) {
      fail(kModule, ErrorCode::InvariantViolation,
           "mu is not invariant: |mu Q|_inf = " + fmt_double(residual));
    }
  } else {
    mu_ = stationary_distribution(rates_);
  }
  const auto n = size();
  for (std::size_t x = 0; x < n; ++x) {
    if (!(mu_[x] > 0.0)) {
      fail(kModule, ErrorCode::InvariantViolation,
           "mu must have full support; mu(" + space_.labels()[x] + ") = 0");
    }
  }
  double worst = 0.0;
  std::size_t wx = 0, wy = 0;
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = x + 1; y < n; ++y) {
      const double v = std::abs(mu_[x] * rates_(x, y) - mu_[y] * rates_(y, x));
      if (v > worst) {
        worst = v;
        wx = x;
        wy = y;
      }
    }
  }
  if (worst > kStructuralTol * scale) {
    fail(kModule, ErrorCode::NotReversible,
         "detailed balance fails; worst pair (" + space_.labels()[wx] + "," +
             space_.labels()[wy] + ") with |mu_x Q_xy - mu_y Q_yx| = " +
             fmt_double(worst));
  }
  sym_rates_.resize(n, n);
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = 0; y < n; ++y) {
      sym_rates_(x, y) =
          mu_[x] * rates_(x, y) / std::sqrt(mu_[x] * mu_[y]);
    }
  }
  sym_rates_ = 0.5 * (sym_rates_ + sym_rates_.transpose()).eval();
}

// ---------------------------------------------------------------------------
// Functionals

double dirichlet_form(const ReversibleChain& chain, const Vector& g) {
  return dirichlet_form(chain, g, g);
}

double dirichlet_form(const ReversibleChain& chain, const Vector& g,
                      const Vector& h) {
  const auto n = chain.size();
  require_size(static_cast<std::size_t>(g.size()), n, "g");
  require_size(static_cast<std::size_t>(h.size()), n, "h");
  const auto& q = chain.rates();
  const auto& mu = chain.mu();
  double acc = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = 0; y < n; ++y) {
      if (x == y) continue;
      acc += mu[x] * q(x, y) * (g[y] - g[x]) * (h[y] - h[x]);
    }
  }
  return 0.5 * acc;
}

double dirichlet_form_operator(const ReversibleChain& chain, const Vector& g,
                               const Vector& h) {
  const auto n = chain.size();
  require_size(static_cast<std::size_t>(g.size()), n, "g");
  require_size(static_cast<std::size_t>(h.size()), n, "h");
  const Vector qh = chain.rates() * h;
  return -(chain.mu().weights().array() * g.array() * qh.array()).sum();
}

double fisher_information(const ReversibleChain& chain,
                          const ProbabilityVector& nu) {
  const auto n = chain.size();
  require_size(nu.size(), n, "nu");
  const auto& q = chain.rates();
  const auto& mu = chain.mu();
  double acc = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    const double fx = nu[x] / mu[x];
    for (std::size_t y = x + 1; y < n; ++y) {
      const double fy = nu[y] / mu[y];
      // mu_x Q_xy = mu_y Q_yx, so the ordered pair sum halves to one term.
      acc += 0.5 * (mu[x] * q(x, y) + mu[y] * q(y, x)) * sqrt_gap_squared(fx, fy);
    }
  }
  return acc;
}

Vector fisher_information_gradient(const ReversibleChain& chain,
                                   const ProbabilityVector& nu, double floor) {
  const auto n = chain.size();
  require_size(nu.size(), n, "nu");
  const auto& q = chain.rates();
  const auto& mu = chain.mu();
  Vector s(n);
  for (std::size_t x = 0; x < n; ++x)
    s[x] = std::sqrt(std::max(nu[x], floor) / mu[x]);
  Vector grad(n);
  for (std::size_t x = 0; x < n; ++x) {
    double acc = 0.0;
    for (std::size_t y = 0; y < n; ++y) {
      if (y != x) acc += q(x, y) * (1.0 - s[y] / s[x]);
    }
    grad[x] = acc;
  }
  return grad;
}

double relative_entropy(const ProbabilityVector& nu,
                        const ProbabilityVector& mu) {
  if (nu.size() != mu.size()) {
    fail(kModule, ErrorCode::DimensionMismatch,
         "relative entropy of measures on " + std::to_string(nu.size()) +
             " and " + std::to_string(mu.size()) + " atoms");
  }
  // Sum of mu_x phi(nu_x / mu_x) with phi(u) = u log u - u + 1 >= 0, which
  // equals sum nu log(nu / mu) for normalized inputs. Near u = 1 the series
  // phi(1 + e) = sum_{k>=2} (-e)^k / (k (k - 1)) avoids cancellation.
  double acc = 0.0;
  for (std::size_t x = 0; x < nu.size(); ++x) {
    if (nu[x] == 0.0) {
      acc += mu[x];
      continue;
    }
    if (mu[x] == 0.0) return std::numeric_limits<double>::infinity();
    const double eps = (nu[x] - mu[x]) / mu[x];
    double phi;
    if (std::abs(eps) < 0.05) {
      phi = 0.0;
      double power = eps * eps;  // (-eps)^k
      for (int k = 2; k <= 16; ++k) {
        phi += power / (k * (k - 1.0));
        power *= -eps;
      }
    } else {
      phi = (1.0 + eps) * std::log1p(eps) - eps;
    }
    acc += mu[x] * phi;
  }
  return std::max(acc, 0.0);
}

}  // namespace ticert
