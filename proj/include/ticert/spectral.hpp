#pragma once

#include <cstddef>

#include "ticert/chain.hpp"
#include "ticert/simplex_opt.hpp"

namespace ticert {

// The Feynman-Kac generator Q + diag(f) in symmetrized coordinates,
// M = D^{1/2} (Q + diag f) D^{-1/2} with D = diag(mu). Same spectrum as
// Q + diag f; symmetric because the chain is reversible.
class FeynmanKacOperator {
 public:
  FeynmanKacOperator(const ReversibleChain& chain, const Vector& potential);

  const Matrix& symmetric() const noexcept { return sym_; }
  // Largest |M - M^T| entry before exact symmetrization.
  double asymmetry() const noexcept { return asymmetry_; }

 private:
  Matrix sym_;
  double asymmetry_ = 0.0;
};

struct GroundState {
  double eigenvalue = 0.0;
  Vector eigenvector;  // unit norm, symmetrized coordinates, sum >= 0
  double residual = 0.0;
};

inline constexpr std::size_t kDenseEigenLimit = 512;

// Top eigenpair of the symmetrized Feynman-Kac operator.
GroundState fk_ground_state(const ReversibleChain& chain, const Vector& f);

// lambda_max(Q + diag f) = (1/t) log ||P_t^f||_{L^2(mu)} for every t > 0.
double fk_lograte(const ReversibleChain& chain, const Vector& f);

struct DualLograteResult {
  double value = 0.0;
  ProbabilityVector maximizer = ProbabilityVector::uniform(1);
  double gradient_norm = 0.0;
};

// sup over nu of (int f dnu - I(nu | mu)) by exponentiated-gradient ascent.
DualLograteResult fk_lograte_dual(const ReversibleChain& chain, const Vector& f,
                                  SimplexAscentOptions options = {});

inline constexpr std::size_t kExpmStateLimit = 64;

// (1/t) log of the L^2(mu) operator norm of exp(t (Q + diag f)), by
// scaling-and-squaring on the symmetrized matrix and a power iteration for the
// norm of the resulting positive matrix.
double fk_opnorm_expm(const ReversibleChain& chain, const Vector& f, double t);

// exp(A) by scaling and squaring with a degree-20 Taylor kernel.
Matrix matrix_exponential(const Matrix& a);

struct ProductEigenOptions {
  std::size_t budget = 0;  // 0: default_product_budget()
  double residual_tol = 1e-7;
  std::size_t krylov_dim = 48;
  std::size_t max_restarts = 400;
};

// y = (sum_k I x ... x M_k x ... x I) x + potential .* x with the base matrix
// acting on each coordinate of the row-major flat index.
void apply_kronecker_sum(const Matrix& base, std::size_t n, const Vector& x,
                         const Vector& potential, Vector& y);

// lambda_max of the Kronecker sum of Q over n factors plus diag(potential),
// matrix-free by restarted Lanczos in symmetrized coordinates.
double fk_lograte_product(const ReversibleChain& chain, std::size_t n,
                          const Vector& potential,
                          const ProductEigenOptions& options = {});

// Top eigenpair of a symmetric operator given as a callback; exposed for the
// exchangeable (orbit-reduced) solver and for tests.
template <typename Apply>
GroundState lanczos_top(std::size_t dim, Apply&& apply, const Vector& start,
                        const ProductEigenOptions& options);

}  // namespace ticert

#include "ticert/detail/lanczos.ipp"
