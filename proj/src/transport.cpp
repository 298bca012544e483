#include "ticert/transport.hpp"

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <ostream>
#include <queue>
#include <string>
#include <vector>

#include "ticert/error.hpp"
#include "ticert/format.hpp"
#include "ticert/linprog.hpp"

namespace ticert {

namespace {

constexpr const char* kModule = "transport";
constexpr double kGapTol = 1e-9;
constexpr std::size_t kDenseSideLimit = 40;

std::vector<std::size_t> support(const Vector& w) {
  std::vector<std::size_t> out;
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (w[i] > 0.0) out.push_back(static_cast<std::size_t>(i));
  return out;
}

struct BasicCell {
  std::size_t row;
  std::size_t col;
  double mass;
};

// Transportation simplex (network simplex on the complete bipartite graph)
// for strictly positive supplies and demands with equal totals.
class NetworkSimplex {
 public:
  NetworkSimplex(const Matrix& cost, const Vector& supply, const Vector& demand)
      : cost_(cost), supply_(supply), demand_(demand),
        m_(static_cast<std::size_t>(cost.rows())),
        n_(static_cast<std::size_t>(cost.cols())) {}

  // Returns false if the pivot cap was reached.
  bool solve() {
    northwest_corner();
    const double eps =
        1e-13 * std::max(1.0, cost_.size() ? cost_.cwiseAbs().maxCoeff() : 1.0);
    const std::size_t cap = 200 * (m_ + n_) + 2000;
    std::size_t degenerate_run = 0;
    for (std::size_t it = 0; it < cap; ++it) {
      compute_potentials();
      const bool bland = degenerate_run > 2 * (m_ + n_);
      std::size_t ei = 0, ej = 0;
      double best = -eps;
      bool found = false;
      for (std::size_t i = 0; i < m_ && !(bland && found); ++i) {
        for (std::size_t j = 0; j < n_; ++j) {
          const double r = cost_(i, j) - u_[i] - v_[j];
          if (r < best) {
            best = r;
            ei = i;
            ej = j;
            found = true;
            if (bland) break;
          }
        }
      }
      if (!found) return true;
      degenerate_run = pivot(ei, ej) ? 0 : degenerate_run + 1;
    }
    return false;
  }

  const std::vector<BasicCell>& basis() const { return basis_; }
  const Vector& u() const { return u_; }
  const Vector& v() const { return v_; }

 private:
  void northwest_corner() {
    basis_.clear();
    std::size_t i = 0, j = 0;
    double ra = supply_[0], rb = demand_[0];
    for (;;) {
      const double x = std::max(0.0, std::min(ra, rb));
      basis_.push_back({i, j, x});
      ra -= x;
      rb -= x;
      if (i == m_ - 1 && j == n_ - 1) break;
      if (i == m_ - 1) {
        rb = demand_[++j];
      } else if (j == n_ - 1 || ra <= rb) {
        ra = supply_[++i];
      } else {
        rb = demand_[++j];
      }
    }
    // The last cell absorbs rounding drift so both marginals close exactly.
    auto& last = basis_.back();
    double row_rest = supply_[last.row], col_rest = demand_[last.col];
    for (std::size_t k = 0; k + 1 < basis_.size(); ++k) {
      if (basis_[k].row == last.row) row_rest -= basis_[k].mass;
      if (basis_[k].col == last.col) col_rest -= basis_[k].mass;
    }
    last.mass = std::max(0.0, 0.5 * (row_rest + col_rest));
  }

  // Tree nodes: rows 0..m-1, columns m..m+n-1.
  void build_adjacency() {
    adj_.assign(m_ + n_, {});
    for (std::size_t k = 0; k < basis_.size(); ++k) {
      adj_[basis_[k].row].push_back(k);
      adj_[m_ + basis_[k].col].push_back(k);
    }
  }

  void compute_potentials() {
    build_adjacency();
    u_ = Vector::Zero(m_);
    v_ = Vector::Zero(n_);
    std::vector<char> done(m_ + n_, 0);
    std::queue<std::size_t> queue;
    queue.push(0);
    done[0] = 1;
    while (!queue.empty()) {
      const auto node = queue.front();
      queue.pop();
      for (auto k : adj_[node]) {
        const auto& c = basis_[k];
        const std::size_t other = node < m_ ? m_ + c.col : c.row;
        if (done[other]) continue;
        if (node < m_) {
          v_[c.col] = cost_(c.row, c.col) - u_[c.row];
        } else {
          u_[c.row] = cost_(c.row, c.col) - v_[c.col];
        }
        done[other] = 1;
        queue.push(other);
      }
    }
  }

  // Path of basis cells from column node `col` to row node `row`.
  std::vector<std::size_t> tree_path(std::size_t col, std::size_t row) const {
    const std::size_t start = m_ + col;
    std::vector<std::size_t> parent_cell(m_ + n_, SIZE_MAX);
    std::vector<char> seen(m_ + n_, 0);
    std::queue<std::size_t> queue;
    queue.push(start);
    seen[start] = 1;
    while (!queue.empty()) {
      const auto node = queue.front();
      queue.pop();
      if (node == row) break;
      for (auto k : adj_[node]) {
        const auto& c = basis_[k];
        const std::size_t other = node < m_ ? m_ + c.col : c.row;
        if (seen[other]) continue;
        seen[other] = 1;
        parent_cell[other] = k;
        queue.push(other);
      }
    }
    std::vector<std::size_t> path;
    std::size_t node = row;
    while (node != start) {
      const auto k = parent_cell[node];
      path.push_back(k);
      const auto& c = basis_[k];
      node = node < m_ ? m_ + c.col : c.row;
    }
    std::reverse(path.begin(), path.end());
    return path;
  }

  // Returns true if the pivot moved positive mass.
  bool pivot(std::size_t ei, std::size_t ej) {
    const auto path = tree_path(ej, ei);
    // Odd positions along the path (0-based even index) lose mass.
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leave = SIZE_MAX;
    for (std::size_t pos = 0; pos < path.size(); pos += 2) {
      const double x = basis_[path[pos]].mass;
      if (x < theta) {
        theta = x;
        leave = path[pos];
      }
    }
    for (std::size_t pos = 0; pos < path.size(); ++pos) {
      auto& cell = basis_[path[pos]];
      cell.mass = pos % 2 == 0 ? std::max(0.0, cell.mass - theta)
                               : cell.mass + theta;
    }
    basis_[leave] = {ei, ej, theta};
    return theta > 0.0;
  }

  const Matrix& cost_;
  const Vector& supply_;
  const Vector& demand_;
  std::size_t m_, n_;
  std::vector<BasicCell> basis_;
  std::vector<std::vector<std::size_t>> adj_;
  Vector u_, v_;
};

// source(i) = min_j cost(i, j) - target(j).
Vector c_transform_rows(const Matrix& cost, const Vector& target) {
  Vector out(cost.rows());
  for (Eigen::Index i = 0; i < cost.rows(); ++i)
    out[i] = (cost.row(i).transpose() - target).minCoeff();
  return out;
}

void check_marginals(const Vector& supply, const Vector& demand) {
  if ((supply.array() < 0.0).any() || (demand.array() < 0.0).any()) {
    fail(kModule, ErrorCode::InvalidMeasure, "negative marginal mass");
  }
  if (std::abs(supply.sum() - demand.sum()) > 1e-9) {
    fail(kModule, ErrorCode::InvalidMeasure, "marginals carry unequal mass");
  }
}

// Shared scaffolding: restrict to supports, run `reduced_solver`, reinsert
// zero rows/columns, and certify the dual.
template <typename ReducedSolver>
TransportPlan solve_on_support(const Matrix& cost, const Vector& supply,
                               const Vector& demand,
                               ReducedSolver&& reduced_solver) {
  check_marginals(supply, demand);
  const auto rows = support(supply);
  const auto cols = support(demand);
  TransportPlan out;
  out.plan = Matrix::Zero(cost.rows(), cost.cols());
  out.source_marginal = supply;
  out.target_marginal = demand;
  if (rows.empty() || cols.empty()) {
    fail(kModule, ErrorCode::InvalidMeasure, "marginal has no mass");
  }
  Matrix c(rows.size(), cols.size());
  Vector a(rows.size()), b(cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    a[i] = supply[rows[i]];
    for (std::size_t j = 0; j < cols.size(); ++j)
      c(i, j) = cost(rows[i], cols[j]);
  }
  for (std::size_t j = 0; j < cols.size(); ++j) b[j] = demand[cols[j]];

  Matrix plan;
  Vector u;
  reduced_solver(c, a, b, plan, u);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out.plan(rows[i], cols[j]) = plan(i, j);

  // Dual: supported rows keep u, every column gets the c-transform over the
  // supported rows, then unsupported rows get the c-transform back.
  Vector full_v(cost.cols());
  for (Eigen::Index j = 0; j < cost.cols(); ++j) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rows.size(); ++i)
      best = std::min(best, cost(rows[i], j) - u[i]);
    full_v[j] = best;
  }
  Vector full_u = c_transform_rows(cost, full_v);
  out.source_potential = full_u;
  out.target_potential = full_v;
  out.cost = (out.plan.array() * cost.array()).sum();
  const double dual_value = supply.dot(full_u) + demand.dot(full_v);
  out.duality_gap = out.cost - dual_value;
  if (std::abs(out.duality_gap) > kGapTol * std::max(1.0, std::abs(out.cost))) {
    fail(kModule, ErrorCode::SolverFailure,
         "duality gap " + std::to_string(out.duality_gap) +
             " exceeds certification tolerance");
  }
  return out;
}

void network_simplex_reduced(const Matrix& c, const Vector& a, const Vector& b,
                             Matrix& plan, Vector& u);

void dense_reduced(const Matrix& c, const Vector& a, const Vector& b,
                   Matrix& plan, Vector& u) {
  const auto m = c.rows();
  const auto n = c.cols();
  // Dual LP max a.u + b.v s.t. u_i + v_j <= c_ij with free u, v split into
  // positive and negative parts; costs are >= 0 so the origin is feasible.
  // Free variables make the LP duals (the plan) satisfy the marginals with
  // equality.
  Matrix lhs = Matrix::Zero(m * n, 2 * (m + n));
  Vector rhs(m * n);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto r = i * n + j;
      lhs(r, i) = 1.0;
      lhs(r, m + i) = -1.0;
      lhs(r, 2 * m + j) = 1.0;
      lhs(r, 2 * m + n + j) = -1.0;
      rhs[r] = c(i, j);
    }
  }
  if (rhs.size() && rhs.minCoeff() < 0.0) {
    fail(kModule, ErrorCode::InvalidArgument, "dense route needs costs >= 0");
  }
  Vector obj(2 * (m + n));
  obj << a, -a, b, -b;
  const auto sol = maximize_from_origin(lhs, rhs, obj);
  plan.resize(m, n);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) plan(i, j) = sol.dual[i * n + j];
  u = sol.x.head(m) - sol.x.segment(m, m);
}

void network_simplex_reduced(const Matrix& c, const Vector& a, const Vector& b,
                             Matrix& plan, Vector& u) {
  NetworkSimplex solver(c, a, b);
  if (!solver.solve()) {
    if (c.rows() <= static_cast<Eigen::Index>(kDenseSideLimit) &&
        c.cols() <= static_cast<Eigen::Index>(kDenseSideLimit)) {
      dense_reduced(c, a, b, plan, u);
      return;
    }
    fail(kModule, ErrorCode::SolverFailure, "network simplex did not converge");
  }
  plan = Matrix::Zero(c.rows(), c.cols());
  for (const auto& cell : solver.basis()) plan(cell.row, cell.col) += cell.mass;
  u = solver.u();
}

Matrix cost_matrix(const FiniteMetricSpace& space, int p) {
  const auto n = space.size();
  Matrix cost(n, n);
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = 0; y < n; ++y) {
      const double d = space.distance(x, y);
      cost(x, y) = p == 1 ? d : d * d;
    }
  }
  return cost;
}

}  // namespace

TransportPlan solve_transport(const Matrix& cost, const Vector& supply,
                              const Vector& demand) {
  if (cost.rows() != supply.size() || cost.cols() != demand.size()) {
    fail(kModule, ErrorCode::DimensionMismatch, "cost/marginal shapes differ");
  }
  return solve_on_support(cost, supply, demand, network_simplex_reduced);
}

TransportPlan solve_transport_dense(const Matrix& cost, const Vector& supply,
                                    const Vector& demand) {
  if (cost.rows() != supply.size() || cost.cols() != demand.size()) {
    fail(kModule, ErrorCode::DimensionMismatch, "cost/marginal shapes differ");
  }
  if (support(supply).size() > kDenseSideLimit ||
      support(demand).size() > kDenseSideLimit) {
    fail(kModule, ErrorCode::BudgetExceeded,
         "dense simplex is limited to 40 atoms per side");
  }
  return solve_on_support(cost, supply, demand, dense_reduced);
}

WassersteinResult wasserstein(const FiniteMetricSpace& space, int p,
                              const ProbabilityVector& nu,
                              const ProbabilityVector& mu) {
  if (p != 1 && p != 2) {
    fail(kModule, ErrorCode::InvalidArgument, "p must be 1 or 2");
  }
  if (nu.size() != space.size() || mu.size() != space.size()) {
    fail(kModule, ErrorCode::DimensionMismatch,
         "measures on " + std::to_string(nu.size()) + " and " +
             std::to_string(mu.size()) + " atoms for a space of " +
             std::to_string(space.size()));
  }
  WassersteinResult out;
  out.plan = solve_transport(cost_matrix(space, p), nu.weights(), mu.weights());
  out.plan.p = p;
  const double cost = std::max(0.0, out.plan.cost);
  out.distance = p == 1 ? cost : std::sqrt(cost);
  return out;
}

KantorovichDualResult kantorovich_dual(const FiniteMetricSpace& space,
                                       const ProbabilityVector& nu,
                                       const ProbabilityVector& mu) {
  if (nu.size() != space.size() || mu.size() != space.size()) {
    fail(kModule, ErrorCode::DimensionMismatch,
         "measure/space dimension mismatch");
  }
  const Vector w = nu.weights() - mu.weights();
  std::vector<std::size_t> s;
  for (std::size_t x = 0; x < space.size(); ++x)
    if (w[x] != 0.0) s.push_back(x);
  KantorovichDualResult out;
  out.potential.lipschitz_bound = 1.0;
  if (s.empty()) {
    out.potential.values = Vector::Zero(space.size());
    return out;
  }
  const auto k = static_cast<Eigen::Index>(s.size());
  double diam = 0.0;
  for (auto x : s)
    for (auto y : s) diam = std::max(diam, space.distance(x, y));
  // g >= 0, g_a - g_b <= d(a, b), g_a <= diam.
  Matrix a = Matrix::Zero(k * (k - 1) + k, k);
  Vector b(k * (k - 1) + k);
  Eigen::Index row = 0;
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      if (i == j) continue;
      a(row, i) = 1.0;
      a(row, j) = -1.0;
      b[row++] = space.distance(s[i], s[j]);
    }
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    a(row, i) = 1.0;
    b[row++] = diam;
  }
  Vector c(k);
  for (Eigen::Index i = 0; i < k; ++i) c[i] = w[s[i]];
  const auto sol = maximize_from_origin(a, b, c);
  Vector f(space.size());
  for (std::size_t x = 0; x < space.size(); ++x) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < k; ++i)
      best = std::min(best, sol.x[i] + space.distance(x, s[i]));
    f[x] = best;
  }
  out.potential.values = f;
  out.value = w.dot(f);
  return out;
}

KantorovichDualResult lipschitz_dual_potential(const FiniteMetricSpace& space,
                                               const Vector& signed_measure) {
  if (static_cast<std::size_t>(signed_measure.size()) != space.size()) {
    fail(kModule, ErrorCode::DimensionMismatch,
         "signed measure/space dimension mismatch");
  }
  KantorovichDualResult out;
  out.potential.lipschitz_bound = 1.0;
  const Vector pos = signed_measure.cwiseMax(0.0);
  const Vector neg = (-signed_measure).cwiseMax(0.0);
  const double mass = pos.sum();
  if (!(mass > 0.0)) {
    out.potential.values = Vector::Zero(space.size());
    return out;
  }
  const auto plan =
      solve_transport(cost_matrix(space, 1), pos / mass, neg / neg.sum());
  // f(x) = min_y d(x, y) - v(y) over the target support.
  const auto cols = support(neg);
  Vector f(space.size());
  for (std::size_t x = 0; x < space.size(); ++x) {
    double best = std::numeric_limits<double>::infinity();
    for (auto y : cols)
      best = std::min(best, space.distance(x, y) - plan.target_potential[y]);
    f[x] = best;
  }
  out.potential.values = f;
  out.value = signed_measure.dot(f);
  return out;
}

std::size_t default_product_budget() {
  if (const char* env = std::getenv("TI_CERT_BUDGET")) {
    char* end = nullptr;
    const auto v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return kDefaultProductBudget;
}

FiniteMetricSpace product_space(const FiniteMetricSpace& space, std::size_t n,
                                MetricMode mode, std::size_t budget) {
  if (n == 0) fail(kModule, ErrorCode::InvalidArgument, "n must be >= 1");
  if (TupleCodec::checked_power(space.size(), n, budget) == 0) {
    fail(kModule, ErrorCode::BudgetExceeded,
         "|E|^n = " + std::to_string(space.size()) + "^" + std::to_string(n) +
             " exceeds the product-state budget " + std::to_string(budget));
  }
  if (n == 1) return space;
  return FiniteMetricSpace::product(space, n, mode);
}

void write_plan_csv(std::ostream& out, const TransportPlan& plan) {
  out << "x_index,y_index,mass\n";
  for (Eigen::Index x = 0; x < plan.plan.rows(); ++x)
    for (Eigen::Index y = 0; y < plan.plan.cols(); ++y)
      if (plan.plan(x, y) > 0.0)
        out << x << ',' << y << ',' << format_double(plan.plan(x, y)) << '\n';
}

}  // namespace ticert
