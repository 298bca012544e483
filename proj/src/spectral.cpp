#include "ticert/spectral.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>

#include "ticert/codec.hpp"
#include "ticert/error.hpp"
#include "ticert/transport.hpp"

namespace ticert {

namespace {

void check_potential(const ReversibleChain& chain, const Vector& f) {
  if (static_cast<std::size_t>(f.size()) != chain.size()) {
    fail("spectral", ErrorCode::DimensionMismatch,
         "potential has " + std::to_string(f.size()) + " entries, chain has " +
             std::to_string(chain.size()) + " states");
  }
  if (!f.allFinite()) {
    fail("spectral", ErrorCode::InvalidArgument, "potential is not finite");
  }
}

Vector sqrt_mu(const ReversibleChain& chain) {
  return chain.mu().weights().cwiseSqrt();
}

}  // namespace

FeynmanKacOperator::FeynmanKacOperator(const ReversibleChain& chain,
                                       const Vector& potential) {
  check_potential(chain, potential);
  const Vector r = sqrt_mu(chain);
  const Matrix& q = chain.rates();
  Matrix m = r.asDiagonal() * q * r.cwiseInverse().asDiagonal();
  asymmetry_ = (m - m.transpose()).cwiseAbs().maxCoeff();
  sym_ = chain.symmetrized_rates();
  sym_.diagonal() += potential;
}

GroundState fk_ground_state(const ReversibleChain& chain, const Vector& f) {
  check_potential(chain, f);
  if (chain.size() > kDenseEigenLimit) {
    ProductEigenOptions opts;
    opts.budget = chain.size();
    const Matrix& m = chain.symmetrized_rates();
    return lanczos_top(
        chain.size(),
        [&](const Vector& x, Vector& y) {
          y.noalias() = m * x;
          y.array() += f.array() * x.array();
        },
        sqrt_mu(chain), opts);
  }
  Matrix m = chain.symmetrized_rates();
  m.diagonal() += f;
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  if (es.info() != Eigen::Success) {
    fail("spectral", ErrorCode::EigenFailure, "dense eigensolver failed");
  }
  const auto last = m.rows() - 1;
  GroundState out;
  out.eigenvalue = es.eigenvalues()[last];
  out.eigenvector = es.eigenvectors().col(last);
  if (out.eigenvector.sum() < 0.0) out.eigenvector = -out.eigenvector;
  out.residual =
      (m * out.eigenvector - out.eigenvalue * out.eigenvector).norm();
  return out;
}

double fk_lograte(const ReversibleChain& chain, const Vector& f) {
  return fk_ground_state(chain, f).eigenvalue;
}

DualLograteResult fk_lograte_dual(const ReversibleChain& chain, const Vector& f,
                                  SimplexAscentOptions options) {
  check_potential(chain, f);
  options.extra_starts.push_back(chain.mu());
  options.module = "spectral";
  SimplexObjective obj;
  obj.value = [&](const ProbabilityVector& nu) {
    return f.dot(nu.weights()) - fisher_information(chain, nu);
  };
  obj.gradient = [&](const ProbabilityVector& nu) -> Vector {
    return f - fisher_information_gradient(chain, nu, options.floor);
  };
  const auto res = maximize_concave_on_simplex(obj, chain.size(), options);
  DualLograteResult out;
  out.value = res.value;
  out.maximizer = res.argmax;
  out.gradient_norm = res.gradient_norm;
  return out;
}

Matrix matrix_exponential(const Matrix& a) {
  if (a.rows() != a.cols()) {
    fail("spectral", ErrorCode::DimensionMismatch, "expm needs a square matrix");
  }
  const double norm = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Matrix b = a / std::ldexp(1.0, squarings);
  Matrix result = Matrix::Identity(a.rows(), a.cols());
  Matrix term = result;
  for (int k = 1; k <= 20; ++k) {
    term = term * b / static_cast<double>(k);
    result += term;
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

double fk_opnorm_expm(const ReversibleChain& chain, const Vector& f, double t) {
  check_potential(chain, f);
  if (!(t > 0.0) || !std::isfinite(t)) {
    fail("spectral", ErrorCode::InvalidArgument, "time must be positive");
  }
  if (chain.size() > kExpmStateLimit) {
    fail("spectral", ErrorCode::BudgetExceeded,
         "expm route limited to " + std::to_string(kExpmStateLimit) +
             " states, chain has " + std::to_string(chain.size()));
  }
  Matrix m = chain.symmetrized_rates();
  m.diagonal() += f;
  // exp(tM) is symmetric positive; its operator norm is its top eigenvalue.
  // Repeated squaring separates the top eigenvalue before the power
  // iteration, and each squaring halves the error of the final logarithm.
  Matrix b = matrix_exponential(t * m);
  b = 0.5 * (b + b.transpose());
  double log_scale = 0.0;  // log lambda(E) = (log lambda(B_k) + log_scale) / 2^k
  int level = 0;
  auto renormalize = [&](Matrix& mat) {
    const double s = mat.cwiseAbs().maxCoeff();
    mat /= s;
    return std::log(s);
  };
  double weight = 1.0;
  log_scale += renormalize(b);
  for (; level < 6; ++level) {
    b = b * b;
    b = 0.5 * (b + b.transpose());
    weight *= 0.5;
    log_scale = 2.0 * log_scale;  // accumulated as log of scale of B_level
    log_scale += renormalize(b);
  }
  // Now log lambda(E^{2^6}) = log lambda(B) + log_scale.
  Vector x = sqrt_mu(chain);
  x.normalize();
  double lambda = 0.0;
  for (int it = 0; it < 100000; ++it) {
    Vector y = b * x;
    const double next = x.dot(y);
    const double ny = y.norm();
    y /= ny;
    const double change = (y - x).norm();
    x = std::move(y);
    lambda = next;
    if (change <= 1e-13) break;
  }
  lambda = x.dot(b * x);
  return weight * (std::log(lambda) + log_scale) / t;
}

void apply_kronecker_sum(const Matrix& base, std::size_t n, const Vector& x,
                         const Vector& potential, Vector& y) {
  const auto k = static_cast<std::size_t>(base.rows());
  const auto total = static_cast<std::size_t>(x.size());
  y = potential.cwiseProduct(x);
  std::size_t stride = total;
  for (std::size_t coord = 0; coord < n; ++coord) {
    stride /= k;
    const std::size_t block = stride * k;
    for (std::size_t outer = 0; outer < total; outer += block) {
      for (std::size_t inner = 0; inner < stride; ++inner) {
        const std::size_t origin = outer + inner;
        for (std::size_t a = 0; a < k; ++a) {
          double acc = 0.0;
          for (std::size_t b = 0; b < k; ++b)
            acc += base(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) *
                   x[static_cast<Eigen::Index>(origin + b * stride)];
          y[static_cast<Eigen::Index>(origin + a * stride)] += acc;
        }
      }
    }
  }
}

double fk_lograte_product(const ReversibleChain& chain, std::size_t n,
                          const Vector& potential,
                          const ProductEigenOptions& options) {
  if (n == 0) {
    fail("spectral", ErrorCode::InvalidArgument, "product order must be >= 1");
  }
  const std::size_t budget =
      options.budget ? options.budget : default_product_budget();
  const std::size_t total = TupleCodec::checked_power(chain.size(), n, budget);
  if (total == 0) {
    fail("spectral", ErrorCode::BudgetExceeded,
         std::to_string(chain.size()) + "^" + std::to_string(n) +
             " states exceed the budget of " + std::to_string(budget));
  }
  if (static_cast<std::size_t>(potential.size()) != total) {
    fail("spectral", ErrorCode::DimensionMismatch,
         "potential length " + std::to_string(potential.size()) + " != " +
             std::to_string(total));
  }
  if (n == 1) return fk_lograte(chain, potential);
  const Matrix& base = chain.symmetrized_rates();
  const Vector r = sqrt_mu(chain);
  Vector start = Vector::Ones(1);
  for (std::size_t k = 0; k < n; ++k) {
    Vector next(start.size() * r.size());
    for (Eigen::Index i = 0; i < start.size(); ++i)
      next.segment(i * r.size(), r.size()) = start[i] * r;
    start = std::move(next);
  }
  return lanczos_top(
             total,
             [&](const Vector& x, Vector& y) {
               apply_kronecker_sum(base, n, x, potential, y);
             },
             start, options)
      .eigenvalue;
}

}  // namespace ticert
