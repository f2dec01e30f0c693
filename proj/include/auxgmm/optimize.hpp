#ifndef AUXGMM_OPTIMIZE_HPP
#define AUXGMM_OPTIMIZE_HPP

#include <Eigen/Dense>

#include <functional>

namespace auxgmm {

struct OptimizerSpec {
  double tolerance = 1e-9;    // simplex diameter, relative to 1 + |beta|
  int max_iterations = 5000;
  double initial_step = 0.1;  // per-coordinate, times max(1, |beta_init_k|)
};

struct OptimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

using Objective = std::function<double(const Eigen::VectorXd&)>;

/// Reflects each coordinate back into [lower, upper]. When one reflection is
/// not enough the coordinate sits on the bound it crossed.
Eigen::VectorXd reflect_into_box(Eigen::VectorXd x, const Eigen::VectorXd& lower,
                                 const Eigen::VectorXd& upper);

/// Nelder-Mead with the standard coefficients (1, 2, 1/2, 1/2). The initial
/// simplex is fixed by x0 and the spec, so runs are deterministic. Trial
/// points are reflected into the box before evaluation.
OptimizeResult nelder_mead(const Objective& f, const Eigen::VectorXd& x0,
                           const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                           const OptimizerSpec& spec = {});

}  // namespace auxgmm

#endif  // AUXGMM_OPTIMIZE_HPP
