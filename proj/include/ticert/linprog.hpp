#pragma once

#include "ticert/chain.hpp"

namespace ticert {

struct LpSolution {
  Vector x;      // primal optimum
  Vector dual;   // multipliers of the rows of A (>= 0)
  double objective = 0.0;
  int iterations = 0;
};

// Dense tableau simplex for
//   maximize c.x  subject to  A x <= b,  x >= 0,
// with b >= 0 so the slack basis is feasible at the origin. Dantzig pricing,
// switching to Bland's rule after a run of degenerate pivots. Throws
// SolverFailure when the problem is unbounded or the iteration cap is hit.
LpSolution maximize_from_origin(const Matrix& a, const Vector& b,
                                const Vector& c, int max_iterations = 100000);

}  // namespace ticert
