#pragma once

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>
#include <vector>

#include "ticert/error.hpp"

namespace ticert {

template <typename Apply>
GroundState lanczos_top(std::size_t dim, Apply&& apply, const Vector& start,
                        const ProductEigenOptions& options) {
  const auto n = static_cast<Eigen::Index>(dim);
  if (start.size() != n) {
    fail("spectral", ErrorCode::DimensionMismatch,
         "Lanczos start vector has the wrong length");
  }
  const auto m = static_cast<Eigen::Index>(
      std::min<std::size_t>(dim, std::max<std::size_t>(options.krylov_dim, 2)));
  Vector x = start;
  if (x.norm() == 0.0) x = Vector::Ones(n);
  x.normalize();

  Matrix basis(n, m);
  Vector w(n);
  GroundState out;
  double last_residual = 0.0;
  for (std::size_t restart = 0; restart <= options.max_restarts; ++restart) {
    Vector alpha = Vector::Zero(m), beta = Vector::Zero(m);
    basis.col(0) = x;
    Eigen::Index k = 0;
    double tail = 0.0;
    for (; k < m; ++k) {
      apply(Vector(basis.col(k)), w);
      alpha[k] = basis.col(k).dot(w);
      // Full reorthogonalization, twice.
      for (int pass = 0; pass < 2; ++pass) {
        const Vector coef = basis.leftCols(k + 1).transpose() * w;
        w.noalias() -= basis.leftCols(k + 1) * coef;
      }
      tail = w.norm();
      if (k + 1 == m) break;
      beta[k] = tail;
      if (tail <= 1e-14 * std::max(1.0, std::abs(alpha[k]))) {
        tail = 0.0;  // invariant subspace
        break;
      }
      basis.col(k + 1) = w / tail;
    }
    const Eigen::Index size = std::min<Eigen::Index>(k + 1, m);
    Matrix t = Matrix::Zero(size, size);
    for (Eigen::Index i = 0; i < size; ++i) {
      t(i, i) = alpha[i];
      if (i + 1 < size) t(i, i + 1) = t(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Matrix> tri(t);
    const Vector s = tri.eigenvectors().col(size - 1);
    out.eigenvalue = tri.eigenvalues()[size - 1];
    x = basis.leftCols(size) * s;
    x.normalize();
    // Direct residual of the Ritz pair.
    apply(x, w);
    last_residual = (w - out.eigenvalue * x).norm();
    const double scale = std::max(1.0, std::abs(out.eigenvalue));
    if (last_residual <= options.residual_tol * scale) {
      if (x.sum() < 0.0) x = -x;
      out.eigenvector = x;
      out.residual = last_residual;
      return out;
    }
  }
  fail("spectral", ErrorCode::EigenFailure,
       "Lanczos did not converge: residual " + std::to_string(last_residual));
}

}  // namespace ticert
