#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>

#include "auxgmm/error.hpp"
#include "auxgmm/linalg.hpp"
#include "auxgmm/report.hpp"
#include "auxgmm/simulate.hpp"
#include "support.hpp"

using namespace auxgmm;
using testsupport::Cells;

namespace {

ParametricFamily one_parameter() {
  ParametricFamily f;
  f.link = Link::Identity;
  f.design = {Expr::parse("1+x1")};
  return f;
}

ParametricFamily saturated_family() {
  ParametricFamily f;
  f.link = Link::Identity;
  f.design = {Expr::parse("1"), Expr::parse("x1")};
  return f;
}

EstimatorConfig dgp_a_config(EstimatorFamily f, SampleCase c) {
  EstimatorConfig cfg;
  cfg.family = f;
  cfg.sample_case = c;
  cfg.moment = mean_model();
  cfg.basis = testsupport::saturated_two_point();
  cfg.propensity.basis = cfg.basis;
  if (f == EstimatorFamily::IPW_ParametricP || f == EstimatorFamily::CEP_ParametricP) {
    cfg.propensity.method = PropensityKind::Parametric;
    cfg.propensity.family = one_parameter();
  }
  return cfg;
}

double phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("exact oracle matches hand enumeration") {
  const auto t0 = std::chrono::steady_clock::now();
  const DGPSpec spec = dgp_preset("dgp-a");
  const Cells c;
  const auto fam = one_parameter();
  const OracleResult out = exact_oracle_discrete(spec, mean_model(), SampleCase::VerifyOut, &fam);
  CHECK(std::abs(out.beta0(0) - testsupport::beta_out(c)) < 1e-12);
  CHECK(std::abs(out.omega1(0, 0) - testsupport::omega1(c)) < 1e-12);
  CHECK(std::abs(out.omega1_known(0, 0) - testsupport::omega1_known(c)) < 1e-12);
  CHECK(std::abs((*out.omega_param)(0, 0) - 58.0 / 81.0) < 1e-12);
  CHECK(std::abs(out.p - 0.375) < 1e-15);
  CHECK(std::abs(out.gamma0(0) - 0.25) < 1e-12);
  CHECK(psd_gap(out.omega1, *out.omega_param) >= -1e-10);
  CHECK(psd_gap(*out.omega_param, out.omega1_known) >= -1e-10);

  const auto sat = saturated_family();
  const OracleResult s = exact_oracle_discrete(spec, mean_model(), SampleCase::VerifyOut, &sat);
  CHECK(std::abs((*s.omega_param)(0, 0) - 10.0 / 9.0) < 1e-12);

  const OracleResult in = exact_oracle_discrete(spec, mean_model(), SampleCase::VerifyIn);
  CHECK(std::abs(in.beta0(0) - 1.0) < 1e-12);
  CHECK(std::abs(in.omega2(0, 0) - testsupport::omega2(c)) < 1e-12);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 1.0);
}

TEST_CASE("constant propensity collapses the bounds") {
  const DGPSpec spec = dgp_preset("dgp-a-constp");
  const OracleResult out = exact_oracle_discrete(spec, mean_model(), SampleCase::VerifyOut);
  const OracleResult in = exact_oracle_discrete(spec, mean_model(), SampleCase::VerifyIn);
  CHECK(std::abs(out.beta0(0) - in.beta0(0)) < 1e-12);
  CHECK(std::abs(out.omega1_known(0, 0) - in.omega2(0, 0)) < 1e-12);
}

TEST_CASE("oracle variances per family") {
  const DGPSpec spec = dgp_preset("dgp-a");
  const Cells c;
  const auto fam = one_parameter();
  const OracleResult in = exact_oracle_discrete(spec, mean_model(), SampleCase::VerifyIn, &fam);
  auto v = [&](EstimatorFamily f, PropensityKind k) {
    return (*oracle_variance(in, f, SampleCase::VerifyIn, k))(0, 0);
  };
  CHECK(std::abs(v(EstimatorFamily::IPW, PropensityKind::SieveLS) - 2.0 / 3.0) < 1e-12);
  CHECK(std::abs(v(EstimatorFamily::IPW_KnownP, PropensityKind::Known) - testsupport::ipw_in_known(c)) < 1e-12);
  CHECK(std::abs(v(EstimatorFamily::IPW_ParametricP, PropensityKind::Parametric) -
                 testsupport::ipw_in_param(c)) < 1e-12);
  CHECK(std::abs(testsupport::ipw_in_param(c) - 19.0 / 24.0) < 1e-12);
  CHECK_FALSE(oracle_variance(in, EstimatorFamily::Unadjusted, SampleCase::VerifyIn,
                              PropensityKind::SieveLS));

  const OracleResult out = exact_oracle_discrete(spec, mean_model(), SampleCase::VerifyOut, &fam);
  CHECK(std::abs((*oracle_variance(out, EstimatorFamily::CEP_ParametricP, SampleCase::VerifyOut,
                                   PropensityKind::Parametric))(0, 0) - 58.0 / 81.0) < 1e-12);
  CHECK(std::abs((*oracle_variance(out, EstimatorFamily::CEP, SampleCase::VerifyOut,
                                   PropensityKind::SieveLS))(0, 0) - 10.0 / 9.0) < 1e-12);
}

TEST_CASE("quadrature oracle on the continuous design") {
  DGPSpec spec = dgp_preset("dgp-b");
  const MomentModel cdf = cdf_model({-1.0, 0.0, 1.0});
  const OracleResult o = population_oracle(spec, cdf, SampleCase::VerifyOut);
  // Trapezoid rule on a fine grid, independent of the Gauss-Hermite nodes.
  const int grid = 200000;
  const double lo = -12.0, hi = 12.0, h = (hi - lo) / grid;
  for (int j = 0; j < 3; ++j) {
    const double t = cdf.thresholds[static_cast<std::size_t>(j)];
    double num = 0.0, den = 0.0;
    for (int i = 0; i <= grid; ++i) {
      const double x = lo + h * i;
      const double w = (i == 0 || i == grid ? 0.5 : 1.0) * std::exp(-0.5 * x * x) / std::sqrt(2 * M_PI);
      const double p = 1.0 / (1.0 + std::exp(-0.5 * x));
      num += w * p * phi(t - x - std::sin(x));
      den += w * p;
    }
    CHECK(std::abs(o.beta0(j) - num / den) < 1e-8);
  }
  CHECK(std::abs(o.p - 0.5) < 1e-12);
  CHECK(psd_gap(o.omega1, o.omega1_known) >= -1e-10);
}

TEST_CASE("generation is seeded") {
  const Dataset a = testsupport::dgp_a(500, 42);
  const Dataset b = testsupport::dgp_a(500, 42);
  const Dataset c = testsupport::dgp_a(500, 43);
  CHECK(a.x() == b.x());
  CHECK(a.d() == b.d());
  bool same_y = true;
  for (Eigen::Index i = 0; i < a.n(); ++i) {
    same_y = same_y && (a.has_y(i) == b.has_y(i)) && (!a.has_y(i) || a.y()(i, 0) == b.y()(i, 0));
  }
  CHECK(same_y);
  CHECK_FALSE((a.x() == c.x() && a.d() == c.d()));
  CHECK(replication_seed(1, 0) != replication_seed(1, 1));
  CHECK(replication_seed(1, 5) == replication_seed(1, 5));
}

TEST_CASE("cell frequencies follow the enumerated table") {
  const Dataset ds = testsupport::dgp_a(100000, 44);
  // (x, d, y) with y absent for d = 1.
  struct Cell {
    int x, d, y;
    double prob;
  };
  const Cell cells[] = {{0, 1, -1, 0.125}, {1, 1, -1, 0.25},  {0, 0, 0, 0.1875},
                        {0, 0, 1, 0.1875}, {1, 0, 1, 0.125}, {1, 0, 2, 0.125}};
  const double n = static_cast<double>(ds.n());
  for (const Cell& c : cells) {
    double count = 0;
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
      if (ds.x()(i, 0) != c.x || ds.d()(i) != c.d) continue;
      if (c.d == 0 && ds.y()(i, 0) != c.y) continue;
      count += 1;
    }
    const double se = std::sqrt(c.prob * (1 - c.prob) / n);
    CHECK(std::abs(count / n - c.prob) < 3 * se);
  }
  // Within each x cell the observed outcomes follow Y | X alone: chi-square
  // goodness of fit against the two-point law, df = 1.
  for (int x = 0; x < 2; ++x) {
    double lo = 0, hi = 0;
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
      if (ds.d()(i) != 0 || ds.x()(i, 0) != x) continue;
      (ds.y()(i, 0) == x ? lo : hi) += 1;
    }
    const double e = 0.5 * (lo + hi);
    const double chi2 = (lo - e) * (lo - e) / e + (hi - e) * (hi - e) / e;
    CHECK(chi2 < 10.828);
  }
}

TEST_CASE("small Monte Carlo runs are well formed") {
  const DGPSpec spec = dgp_preset("dgp-a");
  const std::vector<EstimatorConfig> cfgs = {dgp_a_config(EstimatorFamily::CEP, SampleCase::VerifyOut),
                                             dgp_a_config(EstimatorFamily::IPW, SampleCase::VerifyOut)};
  const MCReport r = run_monte_carlo(spec, cfgs, 50, 2, 1, 1);
  REQUIRE(r.rows.size() == 2);
  for (const auto& row : r.rows) {
    CHECK(row.coverage >= 0.0);
    CHECK(row.coverage <= 1.0);
    CHECK(row.used + row.excluded == 2);
  }
  CHECK_THROWS_AS(run_monte_carlo(spec, cfgs, 50, 1, 1, 1), Error);
}

TEST_CASE("reports are identical across worker counts") {
  const DGPSpec spec = dgp_preset("dgp-a");
  std::vector<EstimatorConfig> cfgs = {dgp_a_config(EstimatorFamily::CEP, SampleCase::VerifyOut),
                                       dgp_a_config(EstimatorFamily::CEP_ParametricP, SampleCase::VerifyOut)};
  const std::string one = mc_report_json(run_monte_carlo(spec, cfgs, 300, 40, 9, 1)).dump();
  const std::string four = mc_report_json(run_monte_carlo(spec, cfgs, 300, 40, 9, 4)).dump();
  CHECK(one == four);
}

TEST_CASE("errors shrink at the root-n rate") {
  DGPSpec spec = dgp_preset("dgp-a");
  const Eigen::Index reps = 100;
  for (SampleCase c : {SampleCase::VerifyOut, SampleCase::VerifyIn}) {
    spec.sample_case = c;
    std::vector<EstimatorConfig> cfgs;
    for (auto f : {EstimatorFamily::CEP, EstimatorFamily::IPW, EstimatorFamily::IPW_ParametricP}) {
      cfgs.push_back(dgp_a_config(f, c));
    }
    if (c == SampleCase::VerifyOut) {
      cfgs.push_back(dgp_a_config(EstimatorFamily::CEP_ParametricP, c));
    } else {
      EstimatorConfig k = dgp_a_config(EstimatorFamily::IPW_KnownP, c);
      k.propensity.method = PropensityKind::Known;
      k.propensity.known = "0.25*(1+x1)";
      cfgs.push_back(k);
    }
    const MCReport small = run_monte_carlo(spec, cfgs, 2000, reps, 3);
    const MCReport large = run_monte_carlo(spec, cfgs, 20000, reps, 4);
    for (std::size_t k = 0; k < cfgs.size(); ++k) {
      auto median_error = [&](const MCReport& r) {
        std::vector<double> err;
        for (const auto& b : r.draws[k].beta) {
          if (b) err.push_back(std::abs((*b)(0) - r.rows[k].beta0));
        }
        std::nth_element(err.begin(), err.begin() + static_cast<long>(err.size() / 2), err.end());
        return err[err.size() / 2];
      };
      CAPTURE(to_string(cfgs[k].family));
      CHECK(median_error(small) >= 2.0 * median_error(large));
    }
  }
}

TEST_CASE("presets validate") {
  for (const auto& name : preset_names()) CHECK_NOTHROW(dgp_preset(name).check());
  CHECK_THROWS_AS(dgp_preset("dgp-z"), Error);
  DGPSpec bad = dgp_preset("dgp-a");
  bad.y_probs[0] = {0.5, 0.6};
  CHECK_THROWS_AS(bad.check(), Error);
}

TEST_CASE("gauss-hermite nodes integrate normal moments") {
  Eigen::VectorXd x, w;
  gauss_hermite_normal(40, x, w);
  CHECK(std::abs(w.sum() - 1.0) < 1e-13);
  CHECK(std::abs(w.dot(x)) < 1e-13);
  CHECK(std::abs(w.dot(x.array().square().matrix()) - 1.0) < 1e-12);
  CHECK(std::abs(w.dot(x.array().pow(4).matrix()) - 3.0) < 1e-11);
}
