#include <doctest.h>

#include <random>

#include "auxgmm/sieve.hpp"
#include "support.hpp"

using namespace auxgmm;

namespace {

Eigen::MatrixXd column(std::initializer_list<double> v) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double e : v) x(i++, 0) = e;
  return x;
}

Eigen::MatrixXd normal_column(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Eigen::MatrixXd x(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) x(i, 0) = z(rng);
  return x;
}

}  // namespace

TEST_CASE("basis sizes") {
  BasisSpec power;
  power.kind = BasisKind::PowerSeries;
  power.degree = 2;
  const SieveBasis b = build_basis(power, column({0, 1, 2, 3}));
  CHECK(b.k_n == 3);
  const Eigen::VectorXd v = eval_basis(b, Eigen::VectorXd::Constant(1, 2.0));
  CHECK(v(0) == 1.0);
  CHECK(v(1) == 2.0);
  CHECK(v(2) == 4.0);

  BasisSpec spline;
  spline.degree = 3;
  spline.knot_count = 10;
  CHECK(build_basis(spline, normal_column(500, 1)).k_n == 14);

  CHECK(default_knot_count(1000) == 10);
  CHECK(default_knot_count(1001) == 11);
}

TEST_CASE("truncated powers") {
  BasisSpec s;
  s.degree = 1;
  s.knots = {{0.0}};
  const SieveBasis b = build_basis(s, column({-1, 0.5, 1}));
  const Eigen::VectorXd lo = eval_basis(b, Eigen::VectorXd::Constant(1, -1.0));
  const Eigen::VectorXd hi = eval_basis(b, Eigen::VectorXd::Constant(1, 1.0));
  CHECK(lo == Eigen::Vector3d(1, -1, 0));
  CHECK(hi == Eigen::Vector3d(1, 1, 1));
}

TEST_CASE("constant covariate collapses the knots with a warning") {
  BasisSpec s;
  s.degree = 1;
  s.knot_count = 5;
  const SieveBasis b = build_basis(s, Eigen::MatrixXd::Constant(50, 1, 2.0));
  CHECK(b.knots[0].size() == 1);
  CHECK_FALSE(b.warnings.empty());
}

TEST_CASE("design matrix rows are eval_basis rows") {
  BasisSpec s;
  s.knot_count = 4;
  const Eigen::MatrixXd x = normal_column(40, 2);
  const SieveBasis b = build_basis(s, x);
  const Eigen::MatrixXd q = design_matrix(b, x);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    CHECK((q.row(i).transpose() - eval_basis(b, x.row(i).transpose())).norm() == 0.0);
  }
}

TEST_CASE("intercept reproduction and exact linear recovery") {
  BasisSpec s;
  s.knot_count = 3;
  const Eigen::MatrixXd x = normal_column(200, 3);
  const SieveBasis b = build_basis(s, x);
  const ProjectionFit c = sieve_ls_fit(b, x, Eigen::MatrixXd::Constant(200, 1, 4.5));
  for (double t : {-2.0, 0.0, 0.7, 3.0}) {
    CHECK(predict(c, Eigen::VectorXd::Constant(1, t))(0) == doctest::Approx(4.5).epsilon(1e-10));
  }

  BasisSpec lin;
  lin.kind = BasisKind::PowerSeries;
  lin.degree = 1;
  const SieveBasis bl = build_basis(lin, x);
  const ProjectionFit f = sieve_ls_fit(bl, x, 2.0 * x);
  CHECK(std::abs(predict(f, Eigen::VectorXd::Constant(1, 3.0))(0) - 6.0) < 1e-9);

  ProjectionFit zero = f;
  zero.coeffs.setZero();
  CHECK(predict(zero, Eigen::VectorXd::Constant(1, 1.3)).norm() == 0.0);
}

TEST_CASE("saturated basis gives cell means") {
  const Dataset ds = testsupport::dgp_a(3000, 17);
  std::vector<Eigen::Index> aux = split_samples(ds).auxiliary;
  Eigen::MatrixXd xa(static_cast<Eigen::Index>(aux.size()), 1);
  Eigen::MatrixXd ya(xa.rows(), 1);
  double sum[2] = {0, 0};
  double cnt[2] = {0, 0};
  for (std::size_t k = 0; k < aux.size(); ++k) {
    const auto i = aux[k];
    xa(static_cast<Eigen::Index>(k), 0) = ds.x()(i, 0);
    ya(static_cast<Eigen::Index>(k), 0) = ds.y()(i, 0);
    const int cell = ds.x()(i, 0) > 0.5 ? 1 : 0;
    sum[cell] += ds.y()(i, 0);
    cnt[cell] += 1;
  }
  const ProjectionFit fit =
      sieve_ls_fit(build_basis(testsupport::saturated_two_point(), xa), xa, ya);
  CHECK(std::abs(predict(fit, Eigen::VectorXd::Constant(1, 0.0))(0) - sum[0] / cnt[0]) < 1e-12);
  CHECK(std::abs(predict(fit, Eigen::VectorXd::Constant(1, 1.0))(0) - sum[1] / cnt[1]) < 1e-12);
}

TEST_CASE("exact fit when n equals k_n") {
  BasisSpec s;
  s.kind = BasisKind::PowerSeries;
  s.degree = 3;
  const Eigen::MatrixXd x = column({-1.0, 0.0, 0.5, 2.0});
  const Eigen::MatrixXd y = column({3.0, -1.0, 0.25, 7.0});
  const ProjectionFit fit = sieve_ls_fit(build_basis(s, x), x, y);
  CHECK(fit.ridge == 0.0);
  CHECK((predict_rows(fit, x) - y).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("normal equations, idempotence and linearity") {
  BasisSpec s;
  s.knot_count = 6;
  const Eigen::MatrixXd x = normal_column(300, 4);
  const SieveBasis b = build_basis(s, x);
  const Eigen::MatrixXd q = design_matrix(b, x);
  Eigen::MatrixXd t(300, 2);
  for (Eigen::Index i = 0; i < 300; ++i) {
    t(i, 0) = std::tanh(x(i, 0));   // monotone target
    t(i, 1) = std::sin(3 * x(i, 0)) + 0.1 * i / 300.0;
  }
  const ProjectionFit fit = sieve_ls_fit(b, x, t);
  const Eigen::MatrixXd resid = q.transpose() * (t - q * fit.coeffs) - fit.ridge * fit.coeffs;
  CHECK(resid.cwiseAbs().maxCoeff() < 1e-8 * t.norm());

  const ProjectionFit refit = sieve_ls_fit(b, x, q * fit.coeffs);
  CHECK((refit.coeffs - fit.coeffs).cwiseAbs().maxCoeff() < 1e-8);

  const ProjectionFit combo = sieve_ls_fit(b, x, 2.0 * t.col(0) - 3.0 * t.col(1));
  const Eigen::VectorXd expect = 2.0 * fit.coeffs.col(0) - 3.0 * fit.coeffs.col(1);
  CHECK((combo.coeffs.col(0) - expect).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("tensor basis respects its budget") {
  BasisSpec s;
  s.kind = BasisKind::PowerSeries;
  s.degree = 2;
  s.interaction = Interaction::FullTensor;
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd x = testsupport::random_matrix(100, 2, rng);
  CHECK(build_basis(s, x).k_n == 9);
  s.max_terms = 5;
  CHECK_THROWS(build_basis(s, x));
}

TEST_CASE("projector agrees with the one-shot fit") {
  BasisSpec s;
  s.knot_count = 5;
  const Eigen::MatrixXd x = normal_column(120, 8);
  const SieveBasis b = build_basis(s, x);
  const SieveProjector proj(b, x);
  const Eigen::MatrixXd t = x.array().square().matrix();
  CHECK((proj.fit(t).coeffs - sieve_ls_fit(b, x, t).coeffs).cwiseAbs().maxCoeff() < 1e-12);
}
