#include "ticert/sanov.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <string>

#include "ticert/error.hpp"
#include "ticert/format.hpp"
#include "ticert/parallel.hpp"
#include "ticert/spectral.hpp"
#include "ticert/transport.hpp"

namespace ticert {

namespace {

using Counts = std::vector<std::size_t>;

ProbabilityVector counts_to_measure(const Counts& c, std::size_t n) {
  Vector w(static_cast<Eigen::Index>(c.size()));
  for (std::size_t a = 0; a < c.size(); ++a)
    w[static_cast<Eigen::Index>(a)] = static_cast<double>(c[a]) / static_cast<double>(n);
  return ProbabilityVector(w);
}

// F(L_n(x)) for every flat index x of E^n, evaluated once per multiset.
Vector empirical_potential(const LaplaceFunctional& F, std::size_t k, std::size_t n,
                           std::size_t total) {
  std::map<Counts, double> cache;
  std::vector<std::size_t> digits(n, 0);
  Counts counts(k, 0);
  counts[0] = n;
  Vector out(static_cast<Eigen::Index>(total));
  for (std::size_t i = 0; i < total; ++i) {
    auto [it, fresh] = cache.try_emplace(counts, 0.0);
    if (fresh) it->second = F.evaluate(counts_to_measure(counts, n));
    out[static_cast<Eigen::Index>(i)] = it->second;
    // Increment the row-major digit string (last coordinate fastest).
    for (std::size_t pos = n; pos-- > 0;) {
      --counts[digits[pos]];
      if (++digits[pos] < k) {
        ++counts[digits[pos]];
        break;
      }
      digits[pos] = 0;
      ++counts[0];
    }
  }
  return out;
}

std::size_t require_enumerable(std::size_t k, std::size_t n, std::size_t budget,
                               const char* what) {
  const std::size_t total = TupleCodec::checked_power(k, n, budget);
  if (total == 0) {
    fail("sanov", ErrorCode::BudgetExceeded,
         std::string(what) + ": " + std::to_string(k) + "^" + std::to_string(n) +
             " states exceed the budget of " + std::to_string(budget));
  }
  return total;
}

void check_order(std::size_t n) {
  if (n == 0) fail("sanov", ErrorCode::InvalidArgument, "n must be >= 1");
}

double log_multinomial(const Counts& c, std::size_t n) {
  double out = std::lgamma(static_cast<double>(n) + 1.0);
  for (auto ca : c) out -= std::lgamma(static_cast<double>(ca) + 1.0);
  return out;
}

VariationalResult variational(const ReversibleChain& chain, const LaplaceFunctional& F,
                              const LaplaceOptions& options, bool entropy) {
  PatternSearchOptions search = options.search;
  search.extra_starts.push_back(chain.mu());
  const auto objective = [&](const ProbabilityVector& nu) {
    const double rate = entropy ? relative_entropy(nu, chain.mu())
                                : fisher_information(chain, nu);
    return F.evaluate(nu) - rate;
  };
  const auto best = pattern_search_on_simplex(objective, chain.size(), search);
  return {best.value, best.argmax};
}

void finish_trends(LaplaceExperiment& e) {
  e.lower_trend_ok = true;
  double previous = std::numeric_limits<double>::infinity();
  for (const auto& row : e.rows) {
    const double shortfall = std::max(0.0, e.rhs - row.lhs);
    if (shortfall > previous + 1e-6) e.lower_trend_ok = false;
    previous = shortfall;
  }
  bool up = false, down = false;
  for (std::size_t i = 1; i < e.rows.size(); ++i) {
    const double step = e.rows[i].lhs - e.rows[i - 1].lhs;
    up = up || step > 1e-12;
    down = down || step < -1e-12;
  }
  e.lhs_trend = up && down ? "mixed" : up ? "nondecreasing" : down ? "nonincreasing" : "constant";
  e.gap_shrinks = e.rows.size() >= 2 &&
                  std::abs(e.rows.back().gap) < std::abs(e.rows.front().gap);
}

template <typename Lhs>
LaplaceExperiment run_experiment(const std::vector<std::size_t>& n_list,
                                 const VariationalResult& rhs, bool timing, Lhs&& lhs) {
  if (n_list.empty()) fail("sanov", ErrorCode::InvalidArgument, "empty n list");
  LaplaceExperiment e;
  e.rhs = rhs.value;
  e.rhs_maximizer = rhs.maximizer;
  e.rows = parallel_map(n_list.size(), [&](std::size_t i) {
    LaplaceRow row;
    row.n = n_list[i];
    const auto start = std::chrono::steady_clock::now();
    row.lhs = lhs(row.n);
    if (timing) {
      row.wall_time_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - start)
                             .count();
    }
    row.rhs = rhs.value;
    row.gap = row.lhs - rhs.value;
    return row;
  });
  finish_trends(e);
  return e;
}

}  // namespace

std::vector<std::vector<std::size_t>> compositions(std::size_t n, std::size_t k) {
  std::vector<Counts> out;
  if (k == 0) return out;
  Counts c(k, 0);
  // Recursive fill of the first k-1 parts; the last takes the remainder.
  auto rec = [&](auto&& self, std::size_t pos, std::size_t left) -> void {
    if (pos + 1 == k) {
      c[pos] = left;
      out.push_back(c);
      return;
    }
    for (std::size_t v = 0; v <= left; ++v) {
      c[pos] = v;
      self(self, pos + 1, left - v);
    }
  };
  rec(rec, 0, n);
  return out;
}

LaplaceFunctional linear_functional(const Vector& f) {
  LaplaceFunctional F;
  F.name = "linear";
  F.bound = f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
  F.evaluate = [f](const ProbabilityVector& nu) {
    if (nu.weights().size() != f.size()) {
      fail("sanov", ErrorCode::DimensionMismatch, "functional and measure sizes differ");
    }
    return f.dot(nu.weights());
  };
  return F;
}

LaplaceFunctional quadratic_functional(const Vector& f) {
  LaplaceFunctional F = linear_functional(f);
  const auto lin = F.evaluate;
  F.name = "quadratic";
  F.bound = F.bound * F.bound;
  F.evaluate = [lin](const ProbabilityVector& nu) {
    const double v = lin(nu);
    return v * v;
  };
  return F;
}

LaplaceFunctional clipped_w2_functional(const ReversibleChain& chain, double m) {
  if (!(m > 0.0) || !std::isfinite(m)) {
    fail("sanov", ErrorCode::InvalidArgument, "clip level must be positive and finite");
  }
  LaplaceFunctional F;
  F.name = "clipw2";
  F.bound = m;
  F.evaluate = [space = chain.space(), mu = chain.mu(), m](const ProbabilityVector& nu) {
    return std::min(wasserstein(space, 2, nu, mu).distance, m);
  };
  return F;
}

double laplace_lhs(const ReversibleChain& chain, const LaplaceFunctional& F,
                   std::size_t n, const LaplaceOptions& options) {
  check_order(n);
  if (options.solver == LaplaceSolver::Reduced) return laplace_lhs_reduced(chain, F, n);
  const std::size_t budget = options.budget ? options.budget : default_product_budget();
  const std::size_t total = require_enumerable(chain.size(), n, budget, "laplace_lhs");
  const Vector potential =
      static_cast<double>(n) * empirical_potential(F, chain.size(), n, total);
  ProductEigenOptions eig;
  eig.budget = budget;
  eig.residual_tol = 1e-10;
  return fk_lograte_product(chain, n, potential, eig) / static_cast<double>(n);
}

double laplace_lhs_reduced(const ReversibleChain& chain, const LaplaceFunctional& F,
                           std::size_t n) {
  check_order(n);
  const std::size_t k = chain.size();
  const auto states = compositions(n, k);
  const auto dim = static_cast<Eigen::Index>(states.size());
  std::map<Counts, Eigen::Index> index;
  for (Eigen::Index i = 0; i < dim; ++i) index.emplace(states[i], i);
  const Matrix& m = chain.symmetrized_rates();
  const Vector& mu = chain.mu().weights();

  // Orbit basis u_c = N_c^{-1/2} sum over the orbit: off-diagonal entries
  // sqrt(c_a (c_b + 1)) M_ab for c -> c - e_a + e_b.
  std::vector<Eigen::Triplet<double>> entries;
  Vector start(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    const Counts& c = states[i];
    double diag = static_cast<double>(n) * F.evaluate(counts_to_measure(c, n));
    double log_weight = log_multinomial(c, n);
    for (std::size_t a = 0; a < k; ++a) {
      const auto ia = static_cast<Eigen::Index>(a);
      diag += static_cast<double>(c[a]) * m(ia, ia);
      if (c[a]) log_weight += static_cast<double>(c[a]) * std::log(mu[ia]);
    }
    start[i] = std::exp(0.5 * log_weight);
    entries.emplace_back(i, i, diag);
    for (std::size_t a = 0; a < k; ++a) {
      if (c[a] == 0) continue;
      for (std::size_t b = 0; b < k; ++b) {
        const double rate = m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        if (a == b || rate == 0.0) continue;
        Counts to = c;
        --to[a];
        ++to[b];
        entries.emplace_back(
            index.at(to), i,
            std::sqrt(static_cast<double>(c[a]) * static_cast<double>(c[b] + 1)) * rate);
      }
    }
  }
  Eigen::SparseMatrix<double> op(dim, dim);
  op.setFromTriplets(entries.begin(), entries.end());

  double top = 0.0;
  if (static_cast<std::size_t>(dim) <= kDenseEigenLimit) {
    const Matrix dense = Matrix(op);
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (dense + dense.transpose()),
                                             Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) {
      fail("sanov", ErrorCode::EigenFailure, "orbit eigen solve failed");
    }
    top = es.eigenvalues()[dim - 1];
  } else {
    ProductEigenOptions eig;
    eig.residual_tol = 1e-10;
    top = lanczos_top(
              static_cast<std::size_t>(dim),
              [&](const Vector& x, Vector& y) { y = op * x; }, start, eig)
              .eigenvalue;
  }
  return top / static_cast<double>(n);
}

VariationalResult laplace_rhs(const ReversibleChain& chain, const LaplaceFunctional& F,
                              const LaplaceOptions& options) {
  return variational(chain, F, options, false);
}

double lower_bound_probe(const ReversibleChain& chain, const LaplaceFunctional& F,
                         std::size_t n, const ProbabilityVector& nu) {
  check_order(n);
  if (nu.size() != chain.size()) {
    fail("sanov", ErrorCode::DimensionMismatch, "probe measure has the wrong size");
  }
  const std::size_t k = chain.size();
  const std::size_t total = require_enumerable(k, n, 4096, "lower_bound_probe");
  const Vector values = empirical_potential(F, k, n, total);
  const TupleCodec codec(k, n);
  double integral = 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    double weight = 1.0;
    for (std::size_t j = 0; j < n; ++j) weight *= nu[codec.coordinate(i, j)];
    integral += weight * values[static_cast<Eigen::Index>(i)];
  }
  return integral - fisher_information(chain, nu);
}

LaplaceExperiment convergence_experiment(const ReversibleChain& chain,
                                         const LaplaceFunctional& F,
                                         const std::vector<std::size_t>& n_list,
                                         double t, const LaplaceOptions& options) {
  const std::size_t budget = options.budget ? options.budget : default_product_budget();
  for (auto n : n_list) {
    check_order(n);
    require_enumerable(chain.size(), n, budget, "convergence_experiment");
  }
  auto e = run_experiment(n_list, laplace_rhs(chain, F, options), options.timing,
                          [&](std::size_t n) { return laplace_lhs(chain, F, n, options); });
  e.functional = F.name;
  e.rate = "fisher";
  e.t = t;
  return e;
}

double sanov_lhs(const ReversibleChain& chain, const LaplaceFunctional& F,
                 std::size_t n) {
  check_order(n);
  const Vector& mu = chain.mu().weights();
  std::vector<double> terms;
  double peak = -std::numeric_limits<double>::infinity();
  for (const auto& c : compositions(n, chain.size())) {
    double term = log_multinomial(c, n) +
                  static_cast<double>(n) * F.evaluate(counts_to_measure(c, n));
    for (std::size_t a = 0; a < c.size(); ++a)
      if (c[a]) term += static_cast<double>(c[a]) * std::log(mu[static_cast<Eigen::Index>(a)]);
    terms.push_back(term);
    peak = std::max(peak, term);
  }
  double sum = 0.0;
  for (double term : terms) sum += std::exp(term - peak);
  return (peak + std::log(sum)) / static_cast<double>(n);
}

VariationalResult sanov_rhs(const ReversibleChain& chain, const LaplaceFunctional& F,
                            const LaplaceOptions& options) {
  return variational(chain, F, options, true);
}

LaplaceExperiment sanov_experiment(const ReversibleChain& chain,
                                   const LaplaceFunctional& F,
                                   const std::vector<std::size_t>& n_list,
                                   const LaplaceOptions& options) {
  for (auto n : n_list) check_order(n);
  auto e = run_experiment(n_list, sanov_rhs(chain, F, options), options.timing,
                          [&](std::size_t n) { return sanov_lhs(chain, F, n); });
  e.functional = F.name;
  e.rate = "entropy";
  return e;
}

void write_experiment_csv(std::ostream& out, const LaplaceExperiment& experiment) {
  out << "n,lhs,rhs,gap,wall_time_ms\n";
  for (const auto& row : experiment.rows) {
    out << row.n << ',' << format_double(row.lhs) << ',' << format_double(row.rhs) << ','
        << format_double(row.gap) << ',' << format_double(row.wall_time_ms) << '\n';
  }
}

}  // namespace ticert
