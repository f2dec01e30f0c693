#include "auxgmm/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <random>
#include <thread>

#include "auxgmm/bounds.hpp"
#include "auxgmm/error.hpp"
#include "auxgmm/linalg.hpp"

namespace auxgmm {

namespace {

constexpr double kZ975 = 1.959963984540054;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Eigen::VectorXd scalar(double v) { return Eigen::VectorXd::Constant(1, v); }

// E[g | x] and E[g g' | x] for a location-form model at one covariate value.
struct GMoments {
  Eigen::VectorXd first;
  Eigen::MatrixXd second;
};

GMoments g_moments_discrete(const DGPSpec& spec, const MomentModel& moment, std::size_t level) {
  const Eigen::VectorXd x = scalar(spec.levels[level]);
  GMoments out{Eigen::VectorXd::Zero(moment.d_m), Eigen::MatrixXd::Zero(moment.d_m, moment.d_m)};
  const auto& ys = spec.y_values[level];
  const auto& ps = spec.y_probs[level];
  for (std::size_t k = 0; k < ys.size(); ++k) {
    const Eigen::VectorXd g = moment.location_part(scalar(ys[k]), x);
    out.first += ps[k] * g;
    out.second += ps[k] * g * g.transpose();
  }
  return out;
}

GMoments g_moments_normal(const DGPSpec& spec, const MomentModel& moment, double xv,
                          const Eigen::VectorXd& nodes, const Eigen::VectorXd& weights) {
  const Eigen::VectorXd x = scalar(xv);
  const double h = spec.y_mean(x);
  const double s = spec.noise_sd;
  GMoments out{Eigen::VectorXd::Zero(moment.d_m), Eigen::MatrixXd::Zero(moment.d_m, moment.d_m)};
  if (moment.name == "mean") {
    out.first(0) = h;
    out.second(0, 0) = h * h + s * s;
    return out;
  }
  if (moment.name == "cdf") {
    const auto& t = moment.thresholds;
    for (std::size_t j = 0; j < t.size(); ++j) {
      out.first(static_cast<Eigen::Index>(j)) = normal_cdf((t[j] - h) / s);
    }
    for (Eigen::Index j = 0; j < moment.d_m; ++j) {
      for (Eigen::Index k = 0; k < moment.d_m; ++k) {
        out.second(j, k) = t[static_cast<std::size_t>(j)] <= t[static_cast<std::size_t>(k)]
                               ? out.first(j)
                               : out.first(k);
      }
    }
    return out;
  }
  for (Eigen::Index q = 0; q < nodes.size(); ++q) {
    const Eigen::VectorXd g = moment.location_part(scalar(h + s * nodes(q)), x);
    out.first += weights(q) * g;
    out.second += weights(q) * g * g.transpose();
  }
  return out;
}

OracleResult assemble_oracle(const DGPSpec& spec, const MomentModel& moment, SampleCase c,
                             const ParametricFamily* family, const Eigen::VectorXd& xs,
                             const Eigen::VectorXd& fs, const std::vector<GMoments>& gm) {
  const Eigen::Index k = xs.size();
  OracleResult o;
  o.x_support = xs;
  o.x_weights = fs;
  o.p_table.resize(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double p = spec.p_fn(scalar(xs(i)));
    if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::SpecError, "p(x) leaves (0, 1) on the support");
    o.p_table(i) = p;
  }
  o.p = fs.dot(o.p_table);

  Eigen::VectorXd num = Eigen::VectorXd::Zero(moment.d_m);
  double den = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double w = c == SampleCase::VerifyOut ? fs(i) * o.p_table(i) : fs(i);
    num += w * gm[static_cast<std::size_t>(i)].first;
    den += w;
  }
  o.beta0 = num / den;

  o.e_table.resize(k, moment.d_m);
  o.v_table.clear();
  for (Eigen::Index i = 0; i < k; ++i) {
    const GMoments& g = gm[static_cast<std::size_t>(i)];
    o.e_table.row(i) = (g.first - o.beta0).transpose();
    o.v_table.push_back(symmetrize(g.second - g.first * g.first.transpose()));
  }

  OmegaInputs in;
  in.e = o.e_table;
  in.v = o.v_table;
  in.p_x = o.p_table;
  in.p = o.p;
  in.weights = fs;
  o.omega1 = omega_from_inputs(BoundKind::Omega1, in);
  o.omega2 = omega_from_inputs(BoundKind::Omega2, in);
  o.omega1_known = omega_from_inputs(BoundKind::Omega1Known, in);

  if (family != nullptr) {
    // Population MLE: every support point enters once with D = 1 and once
    // with D = 0, weighted by its cell probability.
    Eigen::MatrixXd x2(2 * k, 1);
    Eigen::VectorXd d2(2 * k);
    Eigen::VectorXd w2(2 * k);
    for (Eigen::Index i = 0; i < k; ++i) {
      x2(2 * i, 0) = x2(2 * i + 1, 0) = xs(i);
      d2(2 * i) = 1.0;
      d2(2 * i + 1) = 0.0;
      w2(2 * i) = fs(i) * o.p_table(i);
      w2(2 * i + 1) = fs(i) * (1.0 - o.p_table(i));
    }
    const PropensityModel pm = fit_parametric(*family, x2, d2, w2, 0.0);
    o.gamma0 = pm.params;
    const Eigen::MatrixXd xk = xs;
    o.p_grad = propensity_gradient_rows(pm, xk);
    const Eigen::VectorXd pk = raw_propensity_rows(pm, xk);
    o.information = Eigen::MatrixXd::Zero(o.p_grad.cols(), o.p_grad.cols());
    for (Eigen::Index i = 0; i < k; ++i) {
      o.information += fs(i) / (pk(i) * (1.0 - pk(i))) * o.p_grad.row(i).transpose() *
                       o.p_grad.row(i);
    }
    in.p_grad = o.p_grad;
    in.information = o.information;
    o.omega_param = omega_from_inputs(BoundKind::OmegaParam, in);
  }
  return o;
}

void require_location(const MomentModel& moment) {
  if (!moment.is_location_form()) {
    throw Error(ErrorKind::UnsupportedSpec, "oracles need a location-form moment model");
  }
}

}  // namespace

void DGPSpec::check() const {
  if (p_fn.empty()) throw Error(ErrorKind::SpecError, "DGP needs a propensity function");
  switch (x_law) {
    case XLaw::DiscreteUniform:
      if (levels.empty()) throw Error(ErrorKind::SpecError, "discrete X needs levels");
      break;
    case XLaw::Gaussian:
      if (!(x_sd > 0.0)) throw Error(ErrorKind::SpecError, "Gaussian X needs sd > 0");
      break;
    case XLaw::GaussianMixture:
      if (mix_weights.empty() || mix_weights.size() != mix_means.size() ||
          mix_weights.size() != mix_sds.size()) {
        throw Error(ErrorKind::SpecError, "mixture components are inconsistent");
      }
      break;
  }
  if (y_law == YLaw::DiscreteTable) {
    if (x_law != XLaw::DiscreteUniform || y_values.size() != levels.size() ||
        y_probs.size() != levels.size()) {
      throw Error(ErrorKind::SpecError, "a Y table needs one row per X level");
    }
    for (std::size_t k = 0; k < levels.size(); ++k) {
      double total = 0.0;
      for (double q : y_probs[k]) total += q;
      if (y_values[k].size() != y_probs[k].size() || std::abs(total - 1.0) > 1e-12) {
        throw Error(ErrorKind::SpecError, "Y table probabilities must sum to one");
      }
    }
  } else if (y_mean.empty() || !(noise_sd > 0.0)) {
    throw Error(ErrorKind::SpecError, "additive Y needs a mean function and noise sd > 0");
  }
}

std::vector<std::string> preset_names() { return {"dgp-a", "dgp-a-constp", "dgp-b"}; }

DGPSpec dgp_preset(const std::string& name) {
  DGPSpec s;
  s.name = name;
  if (name == "dgp-a" || name == "dgp-a-constp") {
    s.x_law = XLaw::DiscreteUniform;
    s.levels = {0.0, 1.0};
    s.y_law = YLaw::DiscreteTable;
    s.y_values = {{0.0, 1.0}, {1.0, 2.0}};
    s.y_probs = {{0.5, 0.5}, {0.5, 0.5}};
    s.family.link = Link::Identity;
    if (name == "dgp-a") {
      s.p_fn = Expr::parse("0.25*(1+x1)");
      s.family.design = {Expr::parse("1+x1")};
    } else {
      s.p_fn = Expr::parse("0.375");
      s.family.design = {Expr::parse("1")};
    }
    // {1, x} is saturated on two points.
    s.basis.kind = BasisKind::PowerSeries;
    s.basis.degree = 1;
    s.moment = mean_model(1);
    return s;
  }
  if (name == "dgp-b") {
    s.x_law = XLaw::Gaussian;
    s.p_fn = Expr::parse("1/(1+exp(-0.5*x1))");
    s.y_law = YLaw::AdditiveNormal;
    s.y_mean = Expr::parse("x1+sin(x1)");
    s.noise_sd = 1.0;
    s.family = ParametricFamily::logit_linear(1);
    s.basis.kind = BasisKind::PolySpline;
    s.basis.degree = 3;
    s.basis.knot_count = 10;
    s.moment = cdf_model({-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0});
    return s;
  }
  throw Error(ErrorKind::ConfigError, "unknown preset '" + name + "'");
}

Dataset generate(const DGPSpec& spec, Eigen::Index n, std::uint64_t seed) {
  spec.check();
  if (n < 2) throw Error(ErrorKind::SpecError, "generate needs n >= 2");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd x(n, 1);
  Eigen::MatrixXd y(n, 1);
  Eigen::VectorXi d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t level = 0;
    double xv = 0.0;
    switch (spec.x_law) {
      case XLaw::DiscreteUniform:
        level = std::min(static_cast<std::size_t>(unif(rng) * static_cast<double>(spec.levels.size())),
                         spec.levels.size() - 1);
        xv = spec.levels[level];
        break;
      case XLaw::Gaussian:
        xv = spec.x_mean + spec.x_sd * normal(rng);
        break;
      case XLaw::GaussianMixture: {
        double u = unif(rng);
        std::size_t c = 0;
        while (c + 1 < spec.mix_weights.size() && u > spec.mix_weights[c]) u -= spec.mix_weights[c++];
        xv = spec.mix_means[c] + spec.mix_sds[c] * normal(rng);
        break;
      }
    }
    x(i, 0) = xv;
    const double p = spec.p_fn(x.row(i).transpose());
    if (!(p > 0.0 && p < 1.0)) {
      throw Error(ErrorKind::SpecError, "p(x) = " + std::to_string(p) + " leaves (0, 1)");
    }
    d(i) = unif(rng) < p ? 1 : 0;
    double yv = 0.0;
    if (spec.y_law == YLaw::DiscreteTable) {
      double u = unif(rng);
      const auto& ps = spec.y_probs[level];
      std::size_t k = 0;
      while (k + 1 < ps.size() && u >= ps[k]) u -= ps[k++];
      yv = spec.y_values[level][k];
    } else {
      yv = spec.y_mean(x.row(i).transpose()) + spec.noise_sd * normal(rng);
    }
    y(i, 0) = d(i) == 1 ? std::numeric_limits<double>::quiet_NaN() : yv;
  }
  return Dataset(std::move(x), std::move(y), std::move(d), spec.sample_case);
}

void gauss_hermite_normal(int nodes, Eigen::VectorXd& x, Eigen::VectorXd& w) {
  if (nodes < 1) throw Error(ErrorKind::ConfigError, "quadrature needs at least one node");
  // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(nodes, nodes);
  for (int k = 1; k < nodes; ++k) jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  x = es.eigenvalues();
  w = es.eigenvectors().row(0).transpose().array().square();
  w /= w.sum();
}

OracleResult exact_oracle_discrete(const DGPSpec& spec, const MomentModel& moment,
                                   SampleCase sample_case, const ParametricFamily* family) {
  spec.check();
  if (!spec.discrete()) {
    throw Error(ErrorKind::UnsupportedSpec, "exact enumeration needs a finite support");
  }
  require_location(moment);
  const auto k = static_cast<Eigen::Index>(spec.levels.size());
  Eigen::VectorXd xs(k);
  Eigen::VectorXd fs = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  std::vector<GMoments> gm;
  for (Eigen::Index i = 0; i < k; ++i) {
    xs(i) = spec.levels[static_cast<std::size_t>(i)];
    gm.push_back(g_moments_discrete(spec, moment, static_cast<std::size_t>(i)));
  }
  return assemble_oracle(spec, moment, sample_case, family, xs, fs, gm);
}

OracleResult population_oracle(const DGPSpec& spec, const MomentModel& moment,
                               SampleCase sample_case, const ParametricFamily* family,
                               int quadrature_nodes) {
  if (spec.discrete()) return exact_oracle_discrete(spec, moment, sample_case, family);
  spec.check();
  require_location(moment);
  if (spec.x_law == XLaw::DiscreteUniform || spec.y_law != YLaw::AdditiveNormal) {
    throw Error(ErrorKind::UnsupportedSpec, "no oracle for this combination of laws");
  }
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
  gauss_hermite_normal(quadrature_nodes, nodes, weights);
  std::vector<double> xs;
  std::vector<double> fs;
  if (spec.x_law == XLaw::Gaussian) {
    for (Eigen::Index q = 0; q < nodes.size(); ++q) {
      xs.push_back(spec.x_mean + spec.x_sd * nodes(q));
      fs.push_back(weights(q));
    }
  } else {
    for (std::size_t c = 0; c < spec.mix_weights.size(); ++c) {
      for (Eigen::Index q = 0; q < nodes.size(); ++q) {
        xs.push_back(spec.mix_means[c] + spec.mix_sds[c] * nodes(q));
        fs.push_back(spec.mix_weights[c] * weights(q));
      }
    }
  }
  const Eigen::VectorXd xv = Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
  Eigen::VectorXd fv = Eigen::Map<const Eigen::VectorXd>(fs.data(), static_cast<Eigen::Index>(fs.size()));
  fv /= fv.sum();
  std::vector<GMoments> gm;
  for (double xq : xs) gm.push_back(g_moments_normal(spec, moment, xq, nodes, weights));
  return assemble_oracle(spec, moment, sample_case, family, xv, fv, gm);
}

std::optional<Eigen::MatrixXd> oracle_variance(const OracleResult& o, EstimatorFamily family,
                                               SampleCase sample_case, PropensityKind propensity) {
  const bool out = sample_case == SampleCase::VerifyOut;
  const Eigen::Index d = o.e_table.cols();
  const Eigen::MatrixXd jac = -Eigen::MatrixXd::Identity(d, d);
  auto bound = [&](const Eigen::MatrixXd& omega) -> std::optional<Eigen::MatrixXd> {
    return efficiency_bound(jac, omega).value;
  };
  // Variance of the known-p IPW influence function and, for the parametric
  // variant, the correction for estimating gamma.
  auto ipw_known = [&]() {
    Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < o.x_support.size(); ++i) {
      const double q = o.p_table(i);
      const Eigen::MatrixXd m2 = o.v_table[static_cast<std::size_t>(i)] +
                                 o.e_table.row(i).transpose() * o.e_table.row(i);
      const double factor = out ? q * q / ((1.0 - q) * o.p * o.p) : 1.0 / (1.0 - q);
      omega += o.x_weights(i) * factor * m2;
    }
    return omega;
  };
  switch (family) {
    case EstimatorFamily::Unadjusted:
      return std::nullopt;
    case EstimatorFamily::CEP:
    case EstimatorFamily::IPW:
      return bound(out ? o.omega1 : o.omega2);
    case EstimatorFamily::CEP_ParametricP:
      if (propensity == PropensityKind::Known) return bound(o.omega1_known);
      if (!o.omega_param) return std::nullopt;
      return bound(*o.omega_param);
    case EstimatorFamily::IPW_Mixed:
      if (!o.omega_param) return std::nullopt;
      return bound(*o.omega_param);
    case EstimatorFamily::IPW_KnownP:
      return bound(ipw_known());
    case EstimatorFamily::IPW_ParametricP: {
      if (!o.omega_param) return std::nullopt;
      Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, o.p_grad.cols());
      for (Eigen::Index i = 0; i < o.x_support.size(); ++i) {
        const double q = o.p_table(i);
        const double factor = out ? 1.0 / ((1.0 - q) * o.p) : 1.0 / (1.0 - q);
        g += o.x_weights(i) * factor * o.e_table.row(i).transpose() * o.p_grad.row(i);
      }
      const Eigen::MatrixXd info_inv = sym_inverse(o.information).value;
      return bound(ipw_known() - g * info_inv * g.transpose());
    }
  }
  return std::nullopt;
}

std::uint64_t replication_seed(std::uint64_t base_seed, Eigen::Index r) {
  return splitmix64(splitmix64(base_seed) ^ static_cast<std::uint64_t>(r));
}

int worker_count() {
  if (const char* env = std::getenv("AUXGMM_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

MCReport run_monte_carlo(const DGPSpec& spec, const std::vector<EstimatorConfig>& configs,
                         Eigen::Index n, Eigen::Index reps, std::uint64_t base_seed, int threads) {
  if (reps < 2) throw Error(ErrorKind::ConfigError, "Monte Carlo needs at least 2 replications");
  if (configs.empty()) throw Error(ErrorKind::ConfigError, "Monte Carlo needs estimators");
  spec.check();
  const std::size_t k = configs.size();
  MCReport report;
  report.dgp = spec.name;
  report.sample_case = spec.sample_case;
  report.n = n;
  report.reps = reps;
  report.base_seed = base_seed;
  report.draws.assign(k, MCDraws{});
  for (auto& dr : report.draws) {
    dr.beta.assign(static_cast<std::size_t>(reps), std::nullopt);
    dr.se.assign(static_cast<std::size_t>(reps), std::nullopt);
    dr.errors.assign(static_cast<std::size_t>(reps), std::string());
  }

  std::atomic<Eigen::Index> next{0};
  auto worker = [&]() {
    for (;;) {
      const Eigen::Index r = next.fetch_add(1);
      if (r >= reps) return;
      const auto ri = static_cast<std::size_t>(r);
      std::optional<Dataset> ds;
      std::string gen_error;
      try {
        ds = generate(spec, n, replication_seed(base_seed, r));
      } catch (const std::exception& e) {
        gen_error = e.what();
      }
      for (std::size_t c = 0; c < k; ++c) {
        MCDraws& dr = report.draws[c];
        if (!ds) {
          dr.errors[ri] = gen_error;
          continue;
        }
        try {
          Estimate est = estimate(configs[c], *ds);
          dr.beta[ri] = est.beta;
          dr.se[ri] = est.se;
        } catch (const std::exception& e) {
          dr.errors[ri] = e.what();
        }
      }
    }
  };
  const int workers = std::max(1, std::min<int>(threads > 0 ? threads : worker_count(),
                                                static_cast<int>(reps)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Aggregation runs in replication order, so the report does not depend on
  // scheduling.
  for (std::size_t c = 0; c < k; ++c) {
    const EstimatorConfig& cfg = configs[c];
    const MCDraws& dr = report.draws[c];
    std::optional<OracleResult> oracle;
    std::optional<Eigen::MatrixXd> v0;
    try {
      const ParametricFamily* fam =
          cfg.propensity.method == PropensityKind::Parametric && !cfg.propensity.family.design.empty()
              ? &cfg.propensity.family
              : nullptr;
      oracle = population_oracle(spec, cfg.moment, spec.sample_case, fam);
      v0 = oracle_variance(*oracle, cfg.family, spec.sample_case, cfg.propensity.method);
    } catch (const Error&) {
      oracle.reset();
    }
    std::vector<std::size_t> used;
    for (std::size_t r = 0; r < dr.beta.size(); ++r) {
      if (dr.beta[r]) used.push_back(r);
    }
    const auto excluded = static_cast<Eigen::Index>(dr.beta.size() - used.size());
    if (excluded * 100 > reps) {
      report.ok = false;
      report.note += std::string(report.note.empty() ? "" : "; ") + (cfg.label.empty() ? to_string(cfg.family) : cfg.label) +
                     ": " + std::to_string(excluded) + " of " + std::to_string(reps) +
                     " replications failed";
      for (const auto& e : dr.errors) {
        if (!e.empty()) {
          report.note += " (first: " + e + ")";
          break;
        }
      }
    }
    for (Eigen::Index j = 0; j < cfg.moment.d_beta; ++j) {
      MCRow row;
      row.label = cfg.label.empty() ? to_string(cfg.family) : cfg.label;
      row.family = to_string(cfg.family);
      row.coordinate = j;
      row.used = static_cast<Eigen::Index>(used.size());
      row.excluded = excluded;
      row.beta0 = oracle ? oracle->beta0(j) : std::numeric_limits<double>::quiet_NaN();
      const double m = static_cast<double>(used.size());
      double sum = 0.0;
      double se2 = 0.0;
      double covered = 0.0;
      for (std::size_t r : used) {
        const double b = (*dr.beta[r])(j);
        const double s = (*dr.se[r])(j);
        sum += b;
        se2 += s * s;
        if (std::abs(b - row.beta0) <= kZ975 * s) covered += 1.0;
      }
      row.mean_estimate = sum / m;
      double ss = 0.0;
      for (std::size_t r : used) {
        const double dev = (*dr.beta[r])(j) - row.mean_estimate;
        ss += dev * dev;
      }
      const double var = used.size() > 1 ? ss / (m - 1.0) : std::numeric_limits<double>::quiet_NaN();
      row.mean_bias = row.mean_estimate - row.beta0;
      row.mc_se = std::sqrt(var / m);
      row.emp_var = static_cast<double>(n) * var;
      row.emp_var_se = row.emp_var * std::sqrt(2.0 / (m - 1.0));
      row.mean_plugin_v0 = static_cast<double>(n) * se2 / m;
      row.coverage = oracle ? covered / m : std::numeric_limits<double>::quiet_NaN();
      if (v0) {
        row.oracle_v0 = (*v0)(j, j);
        row.variance_ratio = row.emp_var / (*v0)(j, j);
      }
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

}  // namespace auxgmm
