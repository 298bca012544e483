#include "ticert/linprog.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ticert/error.hpp"

namespace ticert {

LpSolution maximize_from_origin(const Matrix& a, const Vector& b,
                                const Vector& c, int max_iterations) {
  const auto m = a.rows();
  const auto n = a.cols();
  if (b.size() != m || c.size() != n) {
    fail("transport", ErrorCode::DimensionMismatch, "LP data shapes disagree");
  }
  if (m > 0 && b.minCoeff() < 0.0) {
    fail("transport", ErrorCode::InvalidArgument,
         "origin must be feasible (b >= 0)");
  }
  // Tableau rows 0..m-1 are constraints, row m is the reduced-cost row
  // (stored as -c so that optimality means all entries >= 0).
  Matrix t = Matrix::Zero(m + 1, n + m + 1);
  t.topLeftCorner(m, n) = a;
  t.block(0, n, m, m).setIdentity();
  t.col(n + m).head(m) = b;
  t.row(m).head(n) = -c.transpose();
  std::vector<Eigen::Index> basis(m);
  for (Eigen::Index i = 0; i < m; ++i) basis[i] = n + i;

  const double scale = std::max({1.0, c.cwiseAbs().maxCoeff(),
                                 a.size() ? a.cwiseAbs().maxCoeff() : 1.0});
  const double eps = 1e-12 * scale;
  int degenerate_run = 0;
  int it = 0;
  for (; it < max_iterations; ++it) {
    const bool bland = degenerate_run > 50;
    Eigen::Index enter = -1;
    double best = -eps;
    for (Eigen::Index j = 0; j < n + m; ++j) {
      const double r = t(m, j);
      if (r < -eps) {
        if (bland) {
          enter = j;
          break;
        }
        if (r < best) {
          best = r;
          enter = j;
        }
      }
    }
    if (enter < 0) break;

    Eigen::Index leave = -1;
    double ratio = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) {
      const double col = t(i, enter);
      if (col > eps) {
        const double q = t(i, n + m) / col;
        if (q < ratio - 1e-15 ||
            (q <= ratio + 1e-15 && leave >= 0 && basis[i] < basis[leave])) {
          ratio = q;
          leave = i;
        }
      }
    }
    if (leave < 0) {
      fail("transport", ErrorCode::SolverFailure, "LP is unbounded");
    }
    degenerate_run = ratio <= 1e-15 ? degenerate_run + 1 : 0;

    const double pivot = t(leave, enter);
    t.row(leave) /= pivot;
    for (Eigen::Index i = 0; i <= m; ++i) {
      if (i == leave) continue;
      const double factor = t(i, enter);
      if (factor != 0.0) t.row(i) -= factor * t.row(leave);
    }
    basis[leave] = enter;
  }
  if (it == max_iterations) {
    fail("transport", ErrorCode::SolverFailure,
         "simplex iteration cap reached (" + std::to_string(max_iterations) +
             ")");
  }

  LpSolution out;
  out.x = Vector::Zero(n);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (basis[i] < n) out.x[basis[i]] = std::max(0.0, t(i, n + m));
  }
  out.dual = t.row(m).segment(n, m).transpose().cwiseMax(0.0);
  out.objective = c.dot(out.x);
  out.iterations = it;
  return out;
}

}  // namespace ticert
