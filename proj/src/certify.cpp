#include "ticert/certify.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <string>

#include "ticert/error.hpp"
#include "ticert/parallel.hpp"
#include "ticert/rng.hpp"
#include "ticert/spectral.hpp"
#include "ticert/transport.hpp"

namespace ticert {

namespace {

constexpr const char* kModule = "certify";
constexpr double kInf = std::numeric_limits<double>::infinity();

// x <- (A x ... x A) x, A acting on every coordinate of the row-major index.
Vector apply_on_all_coordinates(const Matrix& a, std::size_t n, Vector x) {
  const auto k = static_cast<std::size_t>(a.rows());
  const auto total = static_cast<std::size_t>(x.size());
  Vector y(x.size());
  Vector buf(a.rows());
  std::size_t stride = total;
  for (std::size_t coord = 0; coord < n; ++coord) {
    stride /= k;
    const std::size_t block = stride * k;
    for (std::size_t outer = 0; outer < total; outer += block) {
      for (std::size_t inner = 0; inner < stride; ++inner) {
        const std::size_t origin = outer + inner;
        for (std::size_t b = 0; b < k; ++b)
          buf[static_cast<Eigen::Index>(b)] = x[static_cast<Eigen::Index>(origin + b * stride)];
        const Vector out = a * buf;
        for (std::size_t b = 0; b < k; ++b)
          y[static_cast<Eigen::Index>(origin + b * stride)] = out[static_cast<Eigen::Index>(b)];
      }
    }
    std::swap(x, y);
  }
  return x;
}

// Inverse of -L on mu^n-centered functions of the product chain, through the
// eigenbasis of the symmetrized base generator.
class GeneratorInverse {
 public:
  explicit GeneratorInverse(const ProductChain& chain) : chain_(chain) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(chain.base().symmetrized_rates());
    basis_ = es.eigenvectors();
    const Vector lam = es.eigenvalues();
    const auto e = chain.base().size();
    const auto& codec = chain.codec();
    gain_ = Vector(static_cast<Eigen::Index>(chain.size()));
    for (std::size_t x = 0; x < chain.size(); ++x) {
      double sum = 0.0;
      bool top = true;
      for (std::size_t k = 0; k < chain.n(); ++k) {
        const auto i = codec.coordinate(x, k);
        sum += lam[static_cast<Eigen::Index>(i)];
        top = top && i == e - 1;
      }
      gain_[static_cast<Eigen::Index>(x)] = top ? 0.0 : -1.0 / sum;
    }
    sqrt_mu_ = chain.mu().weights().cwiseSqrt();
  }

  // Centered phi with -L phi = g - <g>_mu.
  Vector solve(const Vector& g) const {
    const Vector r = g.cwiseProduct(sqrt_mu_);
    Vector c = apply_on_all_coordinates(basis_.transpose(), chain_.n(), r);
    c = c.cwiseProduct(gain_);
    const Vector psi = apply_on_all_coordinates(basis_, chain_.n(), c);
    return psi.cwiseQuotient(sqrt_mu_);
  }

 private:
  const ProductChain& chain_;
  Matrix basis_;
  Vector gain_;
  Vector sqrt_mu_;
};

double alpha_value(const ProductChain& chain, Inequality name,
                   const ProbabilityVector& nu) {
  return uses_fisher(name) ? fisher_information_product(chain, nu)
                           : relative_entropy(nu, chain.mu());
}

Vector alpha_gradient(const ProductChain& chain, Inequality name,
                      const ProbabilityVector& nu) {
  if (uses_fisher(name)) return fisher_information_product_gradient(chain, nu, 1e-14);
  const Vector w = nu.weights().cwiseMax(1e-300);
  return (w.array() / chain.mu().weights().array()).log() + 1.0;
}

struct RatioEval {
  double ratio = 0.0;
  Vector gradient;
};

RatioEval ratio_with_gradient(const ProductChain& chain, Inequality name,
                              const ProbabilityVector& nu) {
  const int p = transport_order(name);
  const auto w = wasserstein(chain.space(), p, nu, chain.mu());
  const double a = alpha_value(chain, name, nu);
  RatioEval out;
  // The ascent stays away from mu^n, where the ratio is a 0/0 limit that the
  // local probes handle.
  if (!(a > 1e-10)) return out;
  const double w2 = p == 1 ? w.distance * w.distance : w.plan.cost;
  out.ratio = w2 / a;
  const Vector& u = w.plan.source_potential;
  const Vector dw = p == 1 ? Vector(2.0 * w.distance * u) : u;
  out.gradient = (dw * a - w2 * alpha_gradient(chain, name, nu)) / (a * a);
  return out;
}

// Best 1-Lipschitz f for the local limit of W1^2 / alpha at mu^n:
// Fisher: 4 <f_c, (-L)^{-1} f_c>_mu, entropy: 2 Var_mu f. Both are convex
// quadratics in f, so the linearization step f <- argmax <f, grad> never
// decreases them.
struct LocalDirection {
  double limit = 0.0;
  Vector f;
  Vector h;  // signed zero-mass direction
};

LocalDirection linearize(const ProductChain& chain, Inequality name,
                         const GeneratorInverse& inverse, Vector f) {
  const Vector& mu = chain.mu().weights();
  auto evaluate = [&](const Vector& g, Vector& phi) {
    const Vector gc = g.array() - mu.dot(g);
    if (uses_fisher(name)) {
      phi = inverse.solve(gc);
      return 4.0 * mu.dot(gc.cwiseProduct(phi));
    }
    phi = gc;
    return 2.0 * mu.dot(gc.cwiseProduct(gc));
  };
  Vector phi;
  double value = evaluate(f, phi);
  for (int it = 0; it < 60; ++it) {
    Vector w = mu.cwiseProduct(phi);
    w.array() -= w.sum() / static_cast<double>(w.size());
    if (w.cwiseAbs().maxCoeff() == 0.0) break;
    const Vector next = lipschitz_dual_potential(chain.space(), w).potential.values;
    Vector next_phi;
    const double v = evaluate(next, next_phi);
    if (v <= value * (1.0 + 1e-13)) break;
    value = v;
    f = next;
    phi = next_phi;
  }
  LocalDirection out;
  out.limit = value;
  out.f = f;
  out.h = mu.cwiseProduct(phi);
  out.h.array() -= out.h.sum() * mu.array();
  return out;
}

// nu = mu + delta * h scaled so that nu >= (1 - delta) mu.
ProbabilityVector perturb(const ProbabilityVector& mu, const Vector& h,
                          double delta) {
  const double scale = (h.array().abs() / mu.weights().array()).maxCoeff();
  Vector w = mu.weights() + delta * h / scale;
  w /= w.sum();
  return ProbabilityVector(w, 1e-9);
}

Vector random_zero_mass(std::size_t size, CounterRng& rng) {
  Vector h(static_cast<Eigen::Index>(size));
  for (auto& x : h) x = rng.normal();
  h.array() -= h.mean();
  return h;
}

void consider(InequalityCertificate& cert, double ratio,
              const ProbabilityVector& nu) {
  if (ratio > cert.constant_lower) {
    cert.constant_lower = ratio;
    cert.witness = nu;
  }
}

ProbabilityVector ascend_ratio(const ProductChain& chain, Inequality name,
                               ProbabilityVector start, int iterations,
                               double& ratio) {
  Vector nu = start.weights();
  RatioEval cur = ratio_with_gradient(chain, name, start);
  ratio = cur.ratio;
  if (cur.gradient.size() == 0) return start;
  double eta = 1.0 / (1.0 + cur.gradient.cwiseAbs().maxCoeff());
  for (int it = 0; it < iterations && eta > 1e-14; ++it) {
    const Vector& g = cur.gradient;
    Vector trial = nu.array() * (eta * (g.array() - g.maxCoeff())).exp();
    trial = trial.cwiseMax(1e-15);
    trial /= trial.sum();
    const ProbabilityVector tp(trial, 1e-9);
    RatioEval next = ratio_with_gradient(chain, name, tp);
    if (next.gradient.size() != 0 && next.ratio > cur.ratio) {
      nu = trial;
      cur = std::move(next);
      eta *= 1.5;
    } else {
      eta *= 0.5;
    }
  }
  ratio = cur.ratio;
  return ProbabilityVector(nu, 1e-9);
}

}  // namespace

std::string to_string(Inequality name) {
  switch (name) {
    case Inequality::W1I: return "W1I";
    case Inequality::W2I: return "W2I";
    case Inequality::W1H: return "W1H";
    case Inequality::W2H: return "W2H";
  }
  return "?";
}

Inequality parse_inequality(const std::string& text) {
  std::string up = text;
  for (auto& ch : up) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  for (auto v : {Inequality::W1I, Inequality::W2I, Inequality::W1H, Inequality::W2H})
    if (to_string(v) == up) return v;
  fail(kModule, ErrorCode::InvalidArgument, "unknown inequality '" + text + "'");
}

int transport_order(Inequality name) {
  return name == Inequality::W1I || name == Inequality::W1H ? 1 : 2;
}

bool uses_fisher(Inequality name) {
  return name == Inequality::W1I || name == Inequality::W2I;
}

double InequalityCertificate::min_slack() const {
  double m = kInf;
  for (const auto& r : dual_ledger) m = std::min(m, r.slack);
  return m;
}

std::size_t InequalityCertificate::argmin_slack() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < dual_ledger.size(); ++i)
    if (dual_ledger[i].slack < dual_ledger[best].slack) best = i;
  return best;
}

double transport_information_ratio(const ProductChain& chain, Inequality name,
                                   const ProbabilityVector& nu) {
  const int p = transport_order(name);
  const auto w = wasserstein(chain.space(), p, nu, chain.mu());
  const double a = alpha_value(chain, name, nu);
  if (!(a > 0.0)) {
    fail(kModule, ErrorCode::InvalidArgument,
         "ratio undefined at nu = mu (defined only as a limit)");
  }
  return (p == 1 ? w.distance * w.distance : w.plan.cost) / a;
}

double check_w1_dual(const ReversibleChain& chain, double c, const Vector& f,
                     double lambda) {
  ObservableFunction{f, 1.0}.check(chain.space(), kModule);
  return lambda * chain.mu().weights().dot(f) + c * lambda * lambda / 4.0 -
         fk_lograte(chain, lambda * f);
}

double check_w1_dual(const ProductChain& chain, double c, const Vector& f,
                     double lambda) {
  ObservableFunction{f, 1.0}.check(chain.space(), kModule);
  ProductEigenOptions eo;
  eo.budget = chain.size();
  eo.residual_tol = 1e-10;
  const Vector pot = lambda * f;
  return lambda * chain.mu().weights().dot(f) + c * lambda * lambda / 4.0 -
         fk_lograte_product(chain.base(), chain.n(), pot, eo);
}

double check_w1h_dual(const FiniteMetricSpace& space, const ProbabilityVector& mu,
                      double c, const Vector& f, double lambda) {
  ObservableFunction{f, 1.0}.check(space, kModule);
  return lambda * mu.weights().dot(f) + c * lambda * lambda / 4.0 -
         log_sum_exp(lambda * f, mu);
}

Vector random_lipschitz_probe(const FiniteMetricSpace& space, std::uint64_t seed,
                              std::uint64_t index) {
  CounterRng rng(seed, index);
  const double span = space.diameter();
  Vector v(static_cast<Eigen::Index>(space.size()));
  for (auto& x : v) x = rng.uniform(-span, span);
  Vector f = mcshane_envelope(space, v);
  return f.array() - f.mean();
}

std::vector<DualRecord> certify_dual(const ReversibleChain& chain, Inequality name,
                                     std::size_t n, MetricMode mode, double c,
                                     int count, std::uint64_t seed,
                                     double lambda_max) {
  if (transport_order(name) != 1) {
    fail(kModule, ErrorCode::InvalidArgument, "dual probes exist for W1 types only");
  }
  const ProductChain pc(chain, n, mode);
  return parallel_map(static_cast<std::size_t>(std::max(count, 0)), [&](std::size_t i) {
    DualRecord r;
    r.f = random_lipschitz_probe(pc.space(), seed, i);
    CounterRng rng(seed ^ 0x6c616d626461ULL, i);
    r.lambda = rng.uniform(-lambda_max, lambda_max);
    const double mean = pc.mu().weights().dot(r.f);
    r.rhs = r.lambda * mean + c * r.lambda * r.lambda / 4.0;
    if (uses_fisher(name)) {
      r.slack = n == 1 ? check_w1_dual(chain, c, r.f, r.lambda)
                       : check_w1_dual(pc, c, r.f, r.lambda);
    } else {
      r.slack = check_w1h_dual(pc.space(), pc.mu(), c, r.f, r.lambda);
    }
    r.lhs = r.rhs - r.slack;
    return r;
  });
}

InequalityCertificate best_constant(const ReversibleChain& chain, Inequality name,
                                    std::size_t n, const CertifyOptions& options) {
  const ProductChain pc(chain, n, options.mode, options.budget);
  const auto size = pc.size();
  const ProbabilityVector& mu = pc.mu();
  InequalityCertificate cert;
  cert.name = name;
  cert.n = n;
  cert.mode = options.mode;
  cert.witness = mu;

  // Grid scan for the smallest spaces; the point nu = mu is skipped.
  if (size == 2) {
    for (int i = 1; i < options.grid_points; ++i) {
      Vector w(2);
      w << double(i) / options.grid_points, 1.0 - double(i) / options.grid_points;
      if ((w - mu.weights()).cwiseAbs().maxCoeff() < 1e-12) continue;
      const ProbabilityVector nu(w);
      const double r = transport_information_ratio(pc, name, nu);
      cert.probe_table.push_back({"grid", -1, 0.0, r});
      consider(cert, r, nu);
    }
  } else if (size == 3) {
    const int m = options.grid_resolution;
    for (int i = 0; i <= m; ++i)
      for (int j = 0; i + j <= m; ++j) {
        Vector w(3);
        w << double(i) / m, double(j) / m, double(m - i - j) / m;
        if ((w - mu.weights()).cwiseAbs().maxCoeff() < 1e-12) continue;
        const ProbabilityVector nu(w, 1e-12);
        const double r = transport_information_ratio(pc, name, nu);
        cert.probe_table.push_back({"grid", -1, 0.0, r});
        consider(cert, r, nu);
      }
  }

  // Directions of approach to mu: linearization optima first, then random.
  GeneratorInverse inverse(pc);
  std::vector<Vector> starts;
  for (std::size_t x = 0; x < size && starts.size() < 8; ++x) {
    Vector d(static_cast<Eigen::Index>(size));
    for (std::size_t y = 0; y < size; ++y) d[static_cast<Eigen::Index>(y)] = pc.space().distance(x, y);
    starts.push_back(d);
  }
  for (int s = 0; s < options.linearization_starts; ++s)
    starts.push_back(random_lipschitz_probe(pc.space(), options.seed + 1, static_cast<std::uint64_t>(s)));
  const auto locals = parallel_map(starts.size(), [&](std::size_t i) {
    return linearize(pc, name, inverse, starts[i]);
  });
  std::size_t best_local = 0;
  for (std::size_t i = 1; i < locals.size(); ++i)
    if (locals[i].limit > locals[best_local].limit) best_local = i;
  cert.local_limit = locals[best_local].limit;

  std::vector<Vector> directions;
  directions.push_back(locals[best_local].h);
  directions.push_back(-locals[best_local].h);
  CounterRng rng(options.seed, 0x646972ULL);
  for (int d = 0; d < options.directions; ++d) directions.push_back(random_zero_mass(size, rng));

  struct DirectionScan {
    std::vector<double> ratios;
    std::vector<ProbabilityVector> points;
  };
  const auto scans = parallel_map(directions.size(), [&](std::size_t i) {
    DirectionScan scan;
    if (directions[i].cwiseAbs().maxCoeff() == 0.0) return scan;
    for (const double delta : options.scales) {
      const auto nu = perturb(mu, directions[i], delta);
      scan.ratios.push_back(transport_information_ratio(pc, name, nu));
      scan.points.push_back(nu);
    }
    return scan;
  });
  double extrapolated = 0.0;
  double fastest = 0.0;
  for (std::size_t i = 0; i < scans.size(); ++i) {
    const auto& s = scans[i];
    for (std::size_t k = 0; k < s.ratios.size(); ++k) {
      cert.probe_table.push_back({"local", static_cast<int>(i), options.scales[k], s.ratios[k]});
      consider(cert, s.ratios[k], s.points[k]);
    }
    const auto m = s.ratios.size();
    if (m >= 2) {
      const double q = options.scales[m - 2] / options.scales[m - 1];
      // First-order Richardson step across the last two scales.
      extrapolated = std::max(extrapolated,
                              (q * s.ratios[m - 1] - s.ratios[m - 2]) / (q - 1.0));
      fastest = std::max(fastest, s.ratios[m - 1] / s.ratios[m - 2]);
    }
  }
  cert.growth = fastest;
  cert.diverged = fastest >= options.divergence_growth;

  // Multi-start ratio ascent away from mu.
  std::vector<ProbabilityVector> ascent_starts;
  for (std::size_t x = 0; x < size && ascent_starts.size() < 8; ++x) {
    Vector w = 0.1 * mu.weights();
    w[static_cast<Eigen::Index>(x)] += 0.9;
    ascent_starts.emplace_back(w, 1e-9);
  }
  ascent_starts.push_back(perturb(mu, locals[best_local].h, 0.5));
  ascent_starts.push_back(perturb(mu, -locals[best_local].h, 0.5));
  for (int s = 0; s < options.ascent_starts; ++s) {
    CounterRng r(options.seed + 2, static_cast<std::uint64_t>(s));
    Vector w(static_cast<Eigen::Index>(size));
    for (auto& x : w) x = r.exponential(1.0);
    ascent_starts.push_back(ProbabilityVector::normalized(w));
  }
  struct AscentResult {
    double ratio = 0.0;
    ProbabilityVector nu = ProbabilityVector::uniform(1);
  };
  const auto ascents = parallel_map(ascent_starts.size(), [&](std::size_t i) {
    AscentResult a;
    a.nu = ascend_ratio(pc, name, ascent_starts[i], options.ascent_iterations, a.ratio);
    return a;
  });
  for (const auto& a : ascents) {
    if (!(alpha_value(pc, name, a.nu) > 0.0)) continue;
    // Re-evaluate so the stored witness reproduces the stored ratio.
    const double r = transport_information_ratio(pc, name, a.nu);
    cert.probe_table.push_back({"ascent", -1, 0.0, r});
    consider(cert, r, a.nu);
  }

  if (cert.diverged) {
    cert.constant_estimate = kInf;
  } else {
    cert.constant_estimate = cert.constant_lower;
    if (transport_order(name) == 1) {
      cert.constant_estimate = std::max({cert.constant_estimate, cert.local_limit, extrapolated});
    }
    if (transport_order(name) == 1 && options.ledger_probes > 0) {
      cert.dual_ledger = certify_dual(chain, name, n, options.mode, cert.constant_estimate,
                                      options.ledger_probes, options.seed + 3);
      // A probe with negative slack proves a larger constant is needed:
      // C >= 4 (lhs - lambda int f dmu) / lambda^2. Raise the estimate to it.
      double implied = cert.constant_estimate;
      for (const auto& r : cert.dual_ledger)
        if (r.lambda != 0.0)
          implied = std::max(implied, cert.constant_estimate - 4.0 * r.slack / (r.lambda * r.lambda));
      if (implied > cert.constant_estimate) {
        for (auto& r : cert.dual_ledger) {
          const double extra = (implied - cert.constant_estimate) * r.lambda * r.lambda / 4.0;
          r.rhs += extra;
          r.slack += extra;
        }
        cert.constant_estimate = implied;
      }
    }
  }
  return cert;
}

SweepReport dimension_sweep(const ReversibleChain& chain, Inequality name,
                            std::size_t n_max, const CertifyOptions& options) {
  if (transport_order(name) != 1) {
    fail(kModule, ErrorCode::InvalidArgument,
         "sweeps run the W1-type inequality (W1I or W1H)");
  }
  if (n_max == 0) fail(kModule, ErrorCode::InvalidArgument, "n_max must be >= 1");
  const std::size_t budget = options.budget ? options.budget : default_product_budget();
  if (TupleCodec::checked_power(chain.size(), n_max, budget) == 0) {
    fail(kModule, ErrorCode::BudgetExceeded,
         std::to_string(chain.size()) + "^" + std::to_string(n_max) +
             " states exceed the budget of " + std::to_string(budget));
  }
  SweepReport report;
  for (std::size_t n = 1; n <= n_max; ++n) {
    report.certificates.push_back(best_constant(chain, name, n, options));
    if (n > 1) {
      const double prev = report.certificates[n - 2].constant_estimate;
      const double cur = report.certificates[n - 1].constant_estimate;
      report.monotone = report.monotone && cur >= prev - 1e-8;
      report.strictly_increasing = report.strictly_increasing && cur > prev;
    }
  }
  const Inequality quadratic = name == Inequality::W1I ? Inequality::W2I : Inequality::W2H;
  CertifyOptions one = options;
  one.ledger_probes = 0;
  report.quadratic_diverged = best_constant(chain, quadratic, 1, one).diverged;
  return report;
}

std::string certificate_json(const InequalityCertificate& cert) {
  nlohmann::json j;
  j["name"] = to_string(cert.name);
  j["n"] = cert.n;
  j["constant_lower"] = cert.constant_lower;
  if (std::isfinite(cert.constant_estimate)) {
    j["constant_estimate"] = cert.constant_estimate;
  } else {
    j["constant_estimate"] = nullptr;
  }
  j["diverged"] = cert.diverged;
  j["witness"] = std::vector<double>(cert.witness.weights().data(),
                                     cert.witness.weights().data() + cert.witness.size());
  nlohmann::json summary;
  if (cert.dual_ledger.empty()) {
    summary["min_slack"] = nullptr;
    summary["argmin"] = nullptr;
  } else {
    const auto k = cert.argmin_slack();
    summary["min_slack"] = cert.dual_ledger[k].slack;
    summary["argmin"] = {{"index", k}, {"lambda", cert.dual_ledger[k].lambda}};
  }
  j["ledger_summary"] = summary;
  return j.dump(2);
}

}  // namespace ticert
