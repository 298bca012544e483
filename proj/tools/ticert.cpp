#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "ticert/certify.hpp"
#include "ticert/chain.hpp"
#include "ticert/error.hpp"
#include "ticert/format.hpp"
#include "ticert/io.hpp"
#include "ticert/mc_sim.hpp"
#include "ticert/parallel.hpp"
#include "ticert/sanov.hpp"
#include "ticert/spectral.hpp"
#include "ticert/transport.hpp"

using nlohmann::json;
using namespace ticert;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitViolation = 2;

struct Global {
  std::string chain;
  std::string out = ".";
  std::uint64_t seed = 20240601;
  std::size_t budget = 0;
  std::size_t workers = 0;
};

json number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

json vector_json(const Vector& v) {
  json a = json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

Vector to_vector(const std::vector<double>& values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<Eigen::Index>(i)] = values[i];
  return v;
}

Vector sized(const std::vector<double>& values, std::size_t size, const char* what) {
  if (values.size() != size) {
    fail("cli", ErrorCode::DimensionMismatch,
         std::string(what) + " has " + std::to_string(values.size()) + " entries, chain has " +
             std::to_string(size) + " states");
  }
  return to_vector(values);
}

ProbabilityVector measure_arg(const std::vector<double>& values, const ReversibleChain& chain,
                              const char* what) {
  if (values.empty()) return chain.mu();
  return ProbabilityVector(sized(values, chain.size(), what), 1e-9);
}

class Artifacts {
 public:
  Artifacts(const Global& g, std::string stem) : dir_(g.out), stem_(std::move(stem)) {
    std::filesystem::create_directories(dir_);
  }

  void json_file(const json& doc) {
    write(stem_ + ".json", doc.dump(2) + "\n");
    std::cout << doc.dump(2) << "\n";
  }
  void json_raw(const std::string& text) {
    write(stem_ + ".json", text + "\n");
    std::cout << text << "\n";
  }
  void csv(const std::string& text, const std::string& suffix = "") {
    write(stem_ + suffix + ".csv", text);
  }

 private:
  void write(const std::string& name, const std::string& text) {
    const auto path = dir_ / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cli", ErrorCode::InvalidArgument, "cannot write " + path.string());
    out << text;
  }

  std::filesystem::path dir_;
  std::string stem_;
};

// CSV text with doubles in shortest round-trip form.
class Csv {
 public:
  Csv& operator<<(double v) {
    out_ << format_double(v);
    return *this;
  }
  template <typename T>
  Csv& operator<<(const T& v) {
    out_ << v;
    return *this;
  }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

MetricMode parse_mode(const std::string& text) {
  if (text == "l2") return MetricMode::L2;
  if (text == "l1") return MetricMode::L1;
  fail("cli", ErrorCode::InvalidArgument, "metric must be l2 or l1, got '" + text + "'");
}

// Base observable for the deviation and Laplace commands: given values, or
// the distance to the first state.
Vector base_observable(const std::vector<double>& values, const ReversibleChain& chain) {
  if (!values.empty()) return sized(values, chain.size(), "--f");
  Vector g(static_cast<Eigen::Index>(chain.size()));
  for (std::size_t x = 0; x < chain.size(); ++x)
    g[static_cast<Eigen::Index>(x)] = chain.space().distance(x, 0);
  return g;
}

int cmd_info(const Global& g, const ReversibleChain& chain) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(chain.symmetrized_rates(), Eigen::EigenvaluesOnly);
  const auto k = chain.size();
  json doc;
  doc["states"] = k;
  doc["labels"] = chain.space().labels();
  doc["mu"] = vector_json(chain.mu().weights());
  json rates = json::array();
  for (Eigen::Index x = 0; x < chain.rates().rows(); ++x) rates.push_back(vector_json(chain.rates().row(x).transpose()));
  doc["rates"] = rates;
  doc["diameter"] = chain.space().diameter();
  doc["spectral_gap"] = k > 1 ? -es.eigenvalues()[static_cast<Eigen::Index>(k) - 2] : 0.0;
  Artifacts art(g, "info");
  art.json_file(doc);
  Csv csv;
  csv << "state,label,mu,exit_rate\n";
  for (std::size_t x = 0; x < k; ++x) {
    const auto xi = static_cast<Eigen::Index>(x);
    csv << x << ',' << chain.space().labels()[x] << ',' << chain.mu()[x] << ','
        << -chain.rates()(xi, xi) << '\n';
  }
  art.csv(csv.str());
  return kExitOk;
}

int cmd_functional(const Global& g, const ReversibleChain& chain, const std::string& which,
                   const std::vector<double>& nu_values) {
  const auto nu = measure_arg(nu_values, chain, "--nu");
  json doc;
  doc["value"] = which == "fisher" ? fisher_information(chain, nu)
                                   : relative_entropy(nu, chain.mu());
  doc["nu"] = vector_json(nu.weights());
  Artifacts art(g, which);
  art.json_file(doc);
  Csv csv;
  const Vector grad = which == "fisher" ? fisher_information_gradient(chain, nu) : Vector();
  csv << "state,nu,mu" << (which == "fisher" ? ",gradient" : "") << '\n';
  for (std::size_t x = 0; x < chain.size(); ++x) {
    csv << x << ',' << nu[x] << ',' << chain.mu()[x];
    if (which == "fisher") csv << ',' << grad[static_cast<Eigen::Index>(x)];
    csv << '\n';
  }
  art.csv(csv.str());
  return kExitOk;
}

int cmd_wasserstein(const Global& g, const ReversibleChain& chain,
                    const std::vector<double>& nu_values,
                    const std::vector<double>& target_values, int p) {
  const auto nu = measure_arg(nu_values, chain, "--nu");
  const auto target = measure_arg(target_values, chain, "--target");
  const auto result = wasserstein(chain.space(), p, nu, target);
  json doc;
  doc["p"] = p;
  doc["distance"] = result.distance;
  doc["cost"] = result.plan.cost;
  doc["duality_gap"] = result.plan.duality_gap;
  Artifacts art(g, "wasserstein");
  art.json_file(doc);
  std::ostringstream csv;
  write_plan_csv(csv, result.plan);
  art.csv(csv.str());
  return kExitOk;
}

int cmd_fklograte(const Global& g, const ReversibleChain& chain,
                  const std::vector<double>& f_values, const std::vector<double>& ts) {
  const Vector f = sized(f_values, chain.size(), "--f");
  const double direct = fk_lograte(chain, f);
  const auto dual = fk_lograte_dual(chain, f);
  json doc;
  doc["lograte"] = direct;
  doc["dual"] = dual.value;
  doc["dual_maximizer"] = vector_json(dual.maximizer.weights());
  Csv csv;
  csv << "t,opnorm_rate,lograte,difference\n";
  json rows = json::array();
  if (chain.size() <= kExpmStateLimit) {
    for (double t : ts) {
      const double rate = fk_opnorm_expm(chain, f, t);
      csv << t << ',' << rate << ',' << direct << ',' << rate - direct << '\n';
      rows.push_back({{"t", t}, {"opnorm_rate", rate}});
    }
  }
  doc["opnorm"] = rows;
  Artifacts art(g, "fklograte");
  art.json_file(doc);
  art.csv(csv.str());
  return kExitOk;
}

CertifyOptions certify_options(const Global& g, MetricMode mode) {
  CertifyOptions o;
  o.budget = g.budget;
  o.mode = mode;
  o.seed = g.seed;
  return o;
}

int cmd_certify(const Global& g, const ReversibleChain& chain, const std::string& ineq,
                std::size_t n, const std::string& metric) {
  const auto cert = best_constant(chain, parse_inequality(ineq), n,
                                  certify_options(g, parse_mode(metric)));
  Artifacts art(g, "certify");
  art.json_raw(certificate_json(cert));
  Csv probes;
  probes << "kind,direction,delta,ratio\n";
  for (const auto& p : cert.probe_table)
    probes << p.kind << ',' << p.direction << ',' << p.delta << ',' << p.ratio << '\n';
  art.csv(probes.str());
  Csv ledger;
  ledger << "index,lambda,lhs,rhs,slack\n";
  for (std::size_t i = 0; i < cert.dual_ledger.size(); ++i) {
    const auto& d = cert.dual_ledger[i];
    ledger << i << ',' << d.lambda << ',' << d.lhs << ',' << d.rhs << ',' << d.slack << '\n';
  }
  art.csv(ledger.str(), "_ledger");
  if (!cert.dual_ledger.empty() && cert.min_slack() < -1e-9) {
    std::cerr << "dual probe " << cert.argmin_slack() << " violated: slack "
              << cert.min_slack() << "\n";
    return kExitViolation;
  }
  return kExitOk;
}

int cmd_sweep(const Global& g, const ReversibleChain& chain, const std::string& ineq,
              std::size_t n_max, const std::string& metric) {
  const auto mode = parse_mode(metric);
  const auto name = parse_inequality(ineq);
  const auto report = dimension_sweep(chain, name, n_max, certify_options(g, mode));
  json doc;
  doc["metric"] = metric;
  doc["monotone"] = report.monotone;
  doc["strictly_increasing"] = report.strictly_increasing;
  doc["quadratic_diverged"] = report.quadratic_diverged;
  json certs = json::array();
  for (const auto& c : report.certificates) certs.push_back(json::parse(certificate_json(c)));
  doc["certificates"] = certs;
  Csv csv;
  csv << "n,constant_lower,constant_estimate,diverged\n";
  for (const auto& c : report.certificates)
    csv << c.n << ',' << c.constant_lower << ',' << c.constant_estimate << ','
        << (c.diverged ? 1 : 0) << '\n';
  // l1 products: the constant of the n-fold product is at most n C_1.
  bool ok = report.monotone && report.quadratic_diverged;
  if (mode == MetricMode::L1 && !report.certificates.empty()) {
    const double c1 = report.certificates.front().constant_estimate;
    for (const auto& c : report.certificates)
      if (c.constant_estimate > static_cast<double>(c.n) * c1 + 1e-6) ok = false;
  }
  doc["passed"] = ok;
  Artifacts art(g, "sweep");
  art.json_file(doc);
  art.csv(csv.str());
  return ok ? kExitOk : kExitViolation;
}

int cmd_sanov(const Global& g, const ReversibleChain& chain, const std::string& kind,
              const std::vector<double>& f_values, double m,
              const std::vector<std::size_t>& n_list, double t, const std::string& rate,
              bool timing) {
  const Vector f = base_observable(f_values, chain);
  LaplaceFunctional F;
  if (kind == "linear") {
    F = linear_functional(f);
  } else if (kind == "quadratic") {
    F = quadratic_functional(f);
  } else if (kind == "clipw2") {
    F = clipped_w2_functional(chain, m);
  } else {
    fail("cli", ErrorCode::InvalidArgument, "unknown functional '" + kind + "'");
  }
  LaplaceOptions opts;
  opts.budget = g.budget;
  opts.timing = timing;
  opts.search.seed = g.seed;
  LaplaceExperiment e;
  if (rate == "fisher") {
    e = convergence_experiment(chain, F, n_list, t, opts);
  } else if (rate == "entropy") {
    e = sanov_experiment(chain, F, n_list, opts);
    e.t = t;
  } else {
    fail("cli", ErrorCode::InvalidArgument, "rate must be fisher or entropy");
  }
  bool ok = e.lower_trend_ok;
  if (kind == "linear")
    for (const auto& row : e.rows) ok = ok && std::abs(row.gap) <= 1e-6;
  json doc;
  doc["functional"] = e.functional;
  doc["rate"] = e.rate;
  doc["t"] = e.t;
  doc["rhs"] = e.rhs;
  doc["rhs_maximizer"] = vector_json(e.rhs_maximizer.weights());
  doc["lower_trend_ok"] = e.lower_trend_ok;
  doc["gap_shrinks"] = e.gap_shrinks;
  doc["lhs_trend"] = e.lhs_trend;
  doc["passed"] = ok;
  Artifacts art(g, "sanov");
  art.json_file(doc);
  std::ostringstream csv;
  write_experiment_csv(csv, e);
  art.csv(csv.str());
  return ok ? kExitOk : kExitViolation;
}

int cmd_deviate(const Global& g, const ReversibleChain& chain, std::size_t n, double t,
                const std::vector<double>& r_list, std::size_t paths, double c_arg,
                const std::vector<double>& f_values, const std::string& metric,
                long long start) {
  const auto mode = parse_mode(metric);
  const Vector base = base_observable(f_values, chain);
  const TupleCodec codec(chain.size(), n);
  if (TupleCodec::checked_power(chain.size(), n, g.budget ? g.budget : default_product_budget()) == 0) {
    fail("cli", ErrorCode::BudgetExceeded, "E^n exceeds the product budget");
  }
  // Sum of coordinate values, scaled to be 1-Lipschitz on the product metric.
  const double scale = mode == MetricMode::L2 ? 1.0 / std::sqrt(static_cast<double>(n)) : 1.0;
  Vector f(static_cast<Eigen::Index>(codec.size()));
  Vector mu_n(static_cast<Eigen::Index>(codec.size()));
  for (std::size_t x = 0; x < codec.size(); ++x) {
    double s = 0.0, m = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      s += base[static_cast<Eigen::Index>(codec.coordinate(x, k))];
      m *= chain.mu()[codec.coordinate(x, k)];
    }
    f[static_cast<Eigen::Index>(x)] = scale * s;
    mu_n[static_cast<Eigen::Index>(x)] = m;
  }
  const ProbabilityVector nu0 =
      start < 0 ? ProbabilityVector(mu_n)
                : ProbabilityVector::point_mass(codec.size(), static_cast<std::size_t>(start));
  double c = c_arg;
  bool certified = false;
  if (!(c > 0.0)) {
    c = best_constant(chain, Inequality::W1I, n, certify_options(g, mode)).constant_estimate;
    certified = true;
  }
  DeviationOptions opts;
  opts.mode = mode;
  opts.budget = g.budget;
  const auto rows = deviation_sweep(chain, n, nu0, f, t, r_list, paths, g.seed, c, opts);
  bool ok = true;
  json out_rows = json::array();
  for (const auto& e : rows) {
    if (e.violated()) {
      ok = false;
      std::cerr << "bound violated at r=" << e.r << " t=" << e.t << ": wilson_low "
                << e.wilson_low << " > bound " << e.bound << "\n";
    }
    out_rows.push_back({{"r", e.r}, {"p_hat", e.p_hat}, {"wilson_low", e.wilson_low},
                        {"wilson_high", e.wilson_high}, {"bound", e.bound},
                        {"violated", e.violated()}});
  }
  json doc;
  doc["n"] = n;
  doc["t"] = t;
  doc["paths"] = paths;
  doc["C"] = number(c);
  doc["C_certified"] = certified;
  doc["l2_factor"] = rows.empty() ? 1.0 : rows.front().l2_factor;
  doc["rows"] = out_rows;
  doc["passed"] = ok;
  Artifacts art(g, "deviate");
  art.json_file(doc);
  std::ostringstream csv;
  write_deviation_csv(csv, rows);
  art.csv(csv.str());
  return ok ? kExitOk : kExitViolation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transport-information certificates for finite reversible Markov chains"};
  app.require_subcommand(1);
  Global g;
  app.add_option("--chain", g.chain, "chain specification (JSON)");
  app.add_option("--out", g.out, "output directory for JSON and CSV artifacts");
  app.add_option("--seed", g.seed, "random seed");
  app.add_option("--budget", g.budget, "maximum product-space states (overrides TI_CERT_BUDGET)")
      ->check(CLI::PositiveNumber);
  app.add_option("--workers", g.workers, "worker threads (0: available parallelism)");

  std::vector<double> nu, target, f;
  int p = 1;
  std::vector<double> ts{0.5, 1.0, 2.0};
  std::string ineq = "w1i", metric = "l2", F = "linear", rate = "fisher";
  std::size_t n = 1, n_max = 3, paths = 100000;
  std::vector<std::size_t> n_list{1, 2, 3, 4};
  std::vector<double> r_list{0.05, 0.1, 0.2};
  double t = 1.0, m = 1.0, c = 0.0;
  bool timing = false;
  long long start = -1;

  auto* info = app.add_subcommand("info", "chain summary");
  auto* fisher = app.add_subcommand("fisher", "Fisher information I(nu | mu)");
  auto* entropy = app.add_subcommand("entropy", "relative entropy H(nu | mu)");
  for (auto* sub : {fisher, entropy})
    sub->add_option("--nu", nu, "measure (comma separated; default mu)")->delimiter(',');
  auto* wass = app.add_subcommand("wasserstein", "W_p(nu, target)");
  wass->add_option("--nu", nu, "source measure")->delimiter(',')->required();
  wass->add_option("--target", target, "target measure (default mu)")->delimiter(',');
  wass->add_option("--p", p, "order (1 or 2)")->check(CLI::IsMember({1, 2}));
  auto* fkl = app.add_subcommand("fklograte", "Feynman-Kac growth rate of Q + diag f");
  fkl->add_option("--f", f, "potential")->delimiter(',')->required();
  fkl->add_option("--t", ts, "times for the operator-norm route")->delimiter(',');
  auto* cert = app.add_subcommand("certify", "best constant of one inequality");
  cert->add_option("--ineq", ineq, "w1i, w2i, w1h or w2h")
      ->check(CLI::IsMember({"w1i", "w2i", "w1h", "w2h"}, CLI::ignore_case));
  cert->add_option("--n", n, "product order")->check(CLI::PositiveNumber);
  cert->add_option("--metric", metric, "product metric (l2 or l1)");
  auto* sweep = app.add_subcommand("sweep", "constants for n = 1..n_max");
  sweep->add_option("--n-max", n_max, "largest product order")->check(CLI::PositiveNumber);
  sweep->add_option("--ineq", ineq, "w1i or w1h")
      ->check(CLI::IsMember({"w1i", "w1h"}, CLI::ignore_case));
  sweep->add_option("--metric", metric, "product metric (l2 or l1)");
  auto* sanov = app.add_subcommand("sanov", "Laplace principle experiment");
  sanov->add_option("--F", F, "functional")->check(CLI::IsMember({"linear", "quadratic", "clipw2"}));
  sanov->add_option("--f", f, "base values for linear/quadratic")->delimiter(',');
  sanov->add_option("--M", m, "clip level for clipw2");
  sanov->add_option("--n-list", n_list, "product orders")->delimiter(',');
  sanov->add_option("--t", t, "time (recorded only)");
  sanov->add_option("--rate", rate, "fisher or entropy");
  sanov->add_flag("--timing", timing, "record wall-clock times");
  auto* dev = app.add_subcommand("deviate", "Monte Carlo deviation probabilities");
  dev->add_option("--n", n, "number of coordinates")->check(CLI::PositiveNumber);
  dev->add_option("--t", t, "horizon");
  dev->add_option("--r-list", r_list, "deviation levels")->delimiter(',');
  dev->add_option("--paths", paths, "replicas")->check(CLI::PositiveNumber);
  dev->add_option("--C", c, "constant (default: certified W1I constant)");
  dev->add_option("--f", f, "base observable (default: distance to the first state)")
      ->delimiter(',');
  dev->add_option("--metric", metric, "product metric (l2 or l1)");
  dev->add_option("--start", start, "start at this flat state index (default: mu^n)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    set_default_workers(g.workers);
    if (g.chain.empty()) fail("cli", ErrorCode::InvalidArgument, "--chain is required");
    const auto chain = load_chain_spec(g.chain);
    for (auto& x : ineq) x = static_cast<char>(std::tolower(static_cast<unsigned char>(x)));
    if (*info) return cmd_info(g, chain);
    if (*fisher) return cmd_functional(g, chain, "fisher", nu);
    if (*entropy) return cmd_functional(g, chain, "entropy", nu);
    if (*wass) return cmd_wasserstein(g, chain, nu, target, p);
    if (*fkl) return cmd_fklograte(g, chain, f, ts);
    if (*cert) return cmd_certify(g, chain, ineq, n, metric);
    if (*sweep) return cmd_sweep(g, chain, ineq, n_max, metric);
    if (*sanov) return cmd_sanov(g, chain, F, f, m, n_list, t, rate, timing);
    if (*dev) return cmd_deviate(g, chain, n, t, r_list, paths, c, f, metric, start);
  } catch (const Error& e) {
    std::cerr << "ticert: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "ticert: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
