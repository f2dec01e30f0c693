#include <doctest.h>

#include <cmath>
#include <limits>

#include "auxgmm/estimators.hpp"
#include "auxgmm/optimize.hpp"

using namespace auxgmm;

TEST_CASE("quadratic smoke test") {
  const Objective f = [](const Eigen::VectorXd& b) { return (b.array() - 2.0).square().sum(); };
  const OptimizeResult r =
      nelder_mead(f, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, -1e6),
                  Eigen::VectorXd::Constant(1, 1e6));
  CHECK(r.converged);
  CHECK(std::abs(r.x(0) - 2.0) < 1e-6);

  const OptimizeResult r3 =
      nelder_mead(f, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Constant(3, -10),
                  Eigen::VectorXd::Constant(3, 10));
  CHECK((r3.x.array() - 2.0).abs().maxCoeff() < 1e-6);
}

TEST_CASE("over-identified problem matches a grid search") {
  // g(b) = (exp(b) - 2, b - 0.5, sin(b)), W = diag(1, 2, 0.5).
  const Eigen::Vector3d w(1.0, 2.0, 0.5);
  auto q = [&](double b) {
    const Eigen::Vector3d g(std::exp(b) - 2.0, b - 0.5, std::sin(b));
    return g.dot(w.cwiseProduct(g));
  };
  double best = std::numeric_limits<double>::infinity();
  double arg = 0.0;
  const int grid = 1000000;
  for (int i = 0; i <= grid; ++i) {
    const double b = -2.0 + 4.0 * i / grid;
    const double v = q(b);
    if (v < best) {
      best = v;
      arg = b;
    }
  }
  const MomentModel box = mean_model();
  const OptimizeResult r = gmm_minimize([&](const Eigen::VectorXd& b) { return q(b(0)); },
                                        Eigen::VectorXd::Zero(1), box);
  CHECK(std::abs(r.x(0) - arg) < 1e-4);
  CHECK(r.value <= best + 1e-12);
}

TEST_CASE("box constraints are respected") {
  const Objective f = [](const Eigen::VectorXd& b) { return (b.array() + 3.0).square().sum(); };
  const OptimizeResult r = nelder_mead(f, Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(0, 0),
                                       Eigen::Vector2d(1, 1));
  CHECK(r.x.minCoeff() >= 0.0);
  CHECK(r.x.maxCoeff() < 1e-6);

  const Eigen::VectorXd in = reflect_into_box(Eigen::Vector2d(1.2, -0.3), Eigen::Vector2d(0, 0),
                                              Eigen::Vector2d(1, 1));
  CHECK(in(0) == doctest::Approx(0.8));
  CHECK(in(1) == doctest::Approx(0.3));
  const Eigen::VectorXd far = reflect_into_box(Eigen::Vector2d(5.0, -7.0), Eigen::Vector2d(0, 0),
                                               Eigen::Vector2d(1, 1));
  CHECK(far(0) == 1.0);
  CHECK(far(1) == 0.0);
}

TEST_CASE("non-finite values are treated as worse than anything") {
  const Objective f = [](const Eigen::VectorXd& b) {
    if (b(0) < 0.0) return std::numeric_limits<double>::quiet_NaN();
    return (b(0) - 1.0) * (b(0) - 1.0);
  };
  const OptimizeResult r = nelder_mead(f, Eigen::VectorXd::Constant(1, 0.05),
                                       Eigen::VectorXd::Constant(1, -5), Eigen::VectorXd::Constant(1, 5));
  CHECK(std::abs(r.x(0) - 1.0) < 1e-6);
}

TEST_CASE("rosenbrock and the iteration cap") {
  const Objective rosen = [](const Eigen::VectorXd& b) {
    return 100.0 * std::pow(b(1) - b(0) * b(0), 2) + std::pow(1.0 - b(0), 2);
  };
  const Eigen::VectorXd lo = Eigen::VectorXd::Constant(2, -5);
  const Eigen::VectorXd hi = Eigen::VectorXd::Constant(2, 5);
  const OptimizeResult r = nelder_mead(rosen, Eigen::Vector2d(-1.2, 1.0), lo, hi);
  CHECK(r.converged);
  CHECK((r.x - Eigen::Vector2d(1, 1)).norm() < 1e-4);

  OptimizerSpec tight;
  tight.max_iterations = 5;
  const OptimizeResult capped = nelder_mead(rosen, Eigen::Vector2d(-1.2, 1.0), lo, hi, tight);
  CHECK_FALSE(capped.converged);
  CHECK(capped.iterations == 5);
}

TEST_CASE("runs are deterministic") {
  const Objective f = [](const Eigen::VectorXd& b) {
    return std::pow(b(0) - 0.3, 2) + 3 * std::pow(b(1) + 0.1, 4) + std::abs(b(0) * b(1));
  };
  const Eigen::VectorXd lo = Eigen::VectorXd::Constant(2, -5);
  const Eigen::VectorXd hi = Eigen::VectorXd::Constant(2, 5);
  const OptimizeResult a = nelder_mead(f, Eigen::Vector2d(1, 1), lo, hi);
  const OptimizeResult b = nelder_mead(f, Eigen::Vector2d(1, 1), lo, hi);
  CHECK(a.x == b.x);
  CHECK(a.iterations == b.iterations);
}
