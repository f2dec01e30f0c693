#include <doctest.h>

#include "auxgmm/error.hpp"
#include "auxgmm/propensity.hpp"
#include "support.hpp"

using namespace auxgmm;

namespace {

Eigen::VectorXd at(double x) { return Eigen::VectorXd::Constant(1, x); }

PropensitySpec spec_of(PropensityKind k) {
  PropensitySpec s;
  s.method = k;
  s.basis = testsupport::saturated_two_point();
  return s;
}

double mean_log_lik(const Eigen::VectorXd& p, const Eigen::VectorXi& d) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) s += d(i) ? std::log(p(i)) : std::log1p(-p(i));
  return s / static_cast<double>(p.size());
}

}  // namespace

TEST_CASE("intercept-only logit fits the sample share") {
  Eigen::MatrixXd x(4, 1);
  x << 0.1, 0.7, -2.0, 5.0;
  Eigen::MatrixXd y(4, 1);
  y << NAN, NAN, 1.0, 2.0;
  Eigen::VectorXi d(4);
  d << 1, 1, 0, 0;
  const Dataset ds(x, y, d, SampleCase::VerifyOut);
  PropensitySpec s;
  s.method = PropensityKind::Parametric;
  s.family.link = Link::Logit;
  s.family.design = {Expr::parse("1")};
  const PropensityModel m = fit_propensity(s, ds);
  for (double v : {-3.0, 0.0, 9.0}) CHECK(propensity_at(m, at(v)) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("sieve-ls on a saturated basis returns cell shares of D") {
  const Dataset ds = testsupport::dgp_a(5000, 31);
  double sum[2] = {0, 0};
  double cnt[2] = {0, 0};
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    const int c = ds.x()(i, 0) > 0.5;
    sum[c] += ds.d()(i);
    cnt[c] += 1;
  }
  const PropensityModel m = fit_propensity(spec_of(PropensityKind::SieveLS), ds);
  CHECK(std::abs(raw_propensity(m, at(0)) - sum[0] / cnt[0]) < 1e-12);
  CHECK(std::abs(raw_propensity(m, at(1)) - sum[1] / cnt[1]) < 1e-12);
  CHECK(std::abs(raw_propensity_rows(m, ds.x()).mean() - marginal_p(ds)) < 1e-12);
}

TEST_CASE("logit on a large two-point sample recovers the cell probabilities") {
  const Dataset ds = testsupport::dgp_a(100000, 32);
  PropensitySpec s;
  s.method = PropensityKind::Parametric;
  s.family = ParametricFamily::logit_linear(1);
  const PropensityModel m = fit_propensity(s, ds);
  CHECK(std::abs(propensity_at(m, at(0)) - 0.25) < 0.01);
  CHECK(std::abs(propensity_at(m, at(1)) - 0.50) < 0.01);
}

TEST_CASE("clipping semantics") {
  const PropensityModel known = known_propensity("0.3", 0.01);
  CHECK(propensity_at(known, at(4.0)) == doctest::Approx(0.3));

  PropensityModel ls;
  ls.kind = PropensityKind::SieveLS;
  ls.basis = build_basis(testsupport::saturated_two_point(), Eigen::MatrixXd::Zero(3, 1));
  ls.params = Eigen::Vector2d(1.07, 0.0);
  ls.clip = 0.01;
  CHECK(raw_propensity(ls, at(0.5)) == doctest::Approx(1.07));
  CHECK(propensity_at(ls, at(0.5)) == doctest::Approx(0.99));
  Eigen::MatrixXd xs(3, 1);
  xs << 0, 1, 2;
  CHECK(propensity_rows(ls, xs).clipped == 3);

  PropensityModel lg;
  lg.kind = PropensityKind::SieveLogit;
  lg.basis = ls.basis;
  lg.clip = 0.0;
  for (double a : {-700.0, -30.0, 0.0, 30.0, 700.0}) {
    lg.params = Eigen::Vector2d(a, 0.0);
    const double v = raw_propensity(lg, at(0.0));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    if (std::abs(a) <= 30.0) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }
}

TEST_CASE("known propensities parse expressions") {
  const PropensityModel m = known_propensity("1/(1+exp(-0.5*x1))", 0.0);
  CHECK(propensity_at(m, at(0.0)) == doctest::Approx(0.5));
  CHECK(propensity_at(m, at(2.0)) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  CHECK_THROWS_AS(known_propensity("x1 +", 0.01), Error);
}

TEST_CASE("scores vanish at the MLE") {
  const Dataset ds = testsupport::dgp_a(3000, 33);
  for (Link link : {Link::Logit, Link::Identity}) {
    ParametricFamily f;
    f.link = link;
    f.design = {Expr::parse("1"), Expr::parse("x1")};
    const PropensityModel m = fit_parametric(f, ds.x(), ds.d().cast<double>(), Eigen::VectorXd::Ones(ds.n()));
    const ScoreInfo s = score_info(m, ds);
    CHECK(s.scores.colwise().mean().norm() < 1e-8);
  }
}

TEST_CASE("information matrices on the two-point design") {
  const Dataset ds = testsupport::dgp_a(100000, 34);
  ParametricFamily f;
  f.design = {Expr::parse("1"), Expr::parse("x1")};

  // p(x; gamma) = gamma0 + gamma1 x: E[h h' / (p (1 - p))].
  f.link = Link::Identity;
  const Eigen::MatrixXd id = score_info(
      fit_parametric(f, ds.x(), ds.d().cast<double>(), Eigen::VectorXd::Ones(ds.n())), ds).information;
  Eigen::Matrix2d id_expect;
  id_expect << 14.0 / 3.0, 2.0, 2.0, 2.0;
  for (Eigen::Index k = 0; k < 4; ++k) CHECK(std::abs(id(k) / id_expect(k) - 1.0) < 0.03);

  // Logit: E[p (1 - p) h h'].
  f.link = Link::Logit;
  const Eigen::MatrixXd lg = score_info(
      fit_parametric(f, ds.x(), ds.d().cast<double>(), Eigen::VectorXd::Ones(ds.n())), ds).information;
  Eigen::Matrix2d lg_expect;
  lg_expect << 7.0 / 32.0, 1.0 / 8.0, 1.0 / 8.0, 1.0 / 8.0;
  for (Eigen::Index k = 0; k < 4; ++k) CHECK(std::abs(lg(k) / lg_expect(k) - 1.0) < 0.03);
}

TEST_CASE("intercept-only information") {
  const Dataset ds = testsupport::dgp_a(100000, 35);
  const double p = marginal_p(ds);
  ParametricFamily f;
  f.design = {Expr::parse("1")};
  f.link = Link::Identity;
  const double id = score_info(fit_parametric(f, ds.x(), ds.d().cast<double>(),
                                              Eigen::VectorXd::Ones(ds.n())), ds).information(0, 0);
  CHECK(id == doctest::Approx(1.0 / (p * (1.0 - p))).epsilon(1e-10));
  f.link = Link::Logit;
  const double lg = score_info(fit_parametric(f, ds.x(), ds.d().cast<double>(),
                                              Eigen::VectorXd::Ones(ds.n())), ds).information(0, 0);
  CHECK(lg == doctest::Approx(p * (1.0 - p)).epsilon(1e-10));
  CHECK(std::abs(p - 0.375) < 3 * std::sqrt(0.375 * 0.625 / 1e5));
}

TEST_CASE("the three fitted methods agree on a saturated design") {
  const Dataset ds = testsupport::dgp_a(4000, 36);
  PropensitySpec par;
  par.method = PropensityKind::Parametric;
  par.family = ParametricFamily::logit_linear(1);
  const PropensityModel a = fit_propensity(par, ds);
  const PropensityModel b = fit_propensity(spec_of(PropensityKind::SieveLS), ds);
  const PropensityModel c = fit_propensity(spec_of(PropensityKind::SieveLogit), ds);
  for (double v : {0.0, 1.0}) {
    CHECK(std::abs(raw_propensity(a, at(v)) - raw_propensity(b, at(v))) < 1e-6);
    CHECK(std::abs(raw_propensity(c, at(v)) - raw_propensity(b, at(v))) < 1e-6);
  }
}

TEST_CASE("sieve-logit beats the intercept-only likelihood") {
  const Dataset ds = generate(dgp_preset("dgp-b"), 3000, 37);
  PropensitySpec s;
  s.method = PropensityKind::SieveLogit;
  s.basis.knot_count = 5;
  s.clip = 0.0;
  const PropensityModel m = fit_propensity(s, ds);
  const double ll = mean_log_lik(raw_propensity_rows(m, ds.x()), ds.d());
  const double share = marginal_p(ds);
  const double ll0 = mean_log_lik(Eigen::VectorXd::Constant(ds.n(), share), ds.d());
  CHECK(ll >= ll0);
}

TEST_CASE("complete separation is reported, not hidden") {
  Eigen::MatrixXd x(6, 1);
  x << -3, -2, -1, 1, 2, 3;
  Eigen::MatrixXd y(6, 1);
  y << 0, 0, 0, NAN, NAN, NAN;
  Eigen::VectorXi d(6);
  d << 0, 0, 0, 1, 1, 1;
  const Dataset ds(x, y, d, SampleCase::VerifyOut);
  PropensitySpec s;
  s.method = PropensityKind::Parametric;
  s.family = ParametricFamily::logit_linear(1);
  const PropensityModel m = fit_propensity(s, ds);
  bool warned = false;
  for (const auto& w : m.warnings) warned = warned || w.find("Separation") != std::string::npos;
  CHECK(warned);
  CHECK(propensity_at(m, at(3.0)) == doctest::Approx(0.99));
}

TEST_CASE("names round-trip") {
  for (auto k : {PropensityKind::Known, PropensityKind::Parametric, PropensityKind::SieveLS,
                 PropensityKind::SieveLogit}) {
    CHECK(parse_propensity_kind(to_string(k)) == k);
  }
  CHECK(parse_link("identity") == Link::Identity);
  CHECK_THROWS_AS(parse_link("probit"), Error);
}
