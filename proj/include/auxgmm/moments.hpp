#ifndef AUXGMM_MOMENTS_HPP
#define AUXGMM_MOMENTS_HPP

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

#include "auxgmm/data.hpp"

namespace auxgmm {

/// m(z; beta) with z = (y, x). Evaluation functions must be pure.
struct MomentModel {
  using EvalFn = std::function<Eigen::VectorXd(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                                               const Eigen::VectorXd& beta)>;
  using JacFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                                              const Eigen::VectorXd& beta)>;
  using LocationFn =
      std::function<Eigen::VectorXd(const Eigen::VectorXd& y, const Eigen::VectorXd& x)>;

  std::string name = "custom";
  Eigen::Index d_m = 0;
  Eigen::Index d_beta = 0;
  bool smooth = true;
  EvalFn eval;
  JacFn analytic_jac;         // per-observation d m / d beta, optional
  LocationFn location_part;   // g(z) when m = g(z) - beta, optional
  Eigen::VectorXd lower;      // box B
  Eigen::VectorXd upper;

  // Parameters of the built-ins, kept for serialization.
  std::vector<double> thresholds;
  std::vector<std::string> regressors;

  bool is_location_form() const noexcept { return static_cast<bool>(location_part); }
  bool in_box(const Eigen::VectorXd& beta) const;
  /// Throws unless d_m >= d_beta, the box is well formed and eval is set.
  void check() const;
};

/// m_j = 1(y <= t_j) - beta_j; box [0, 1]^K.
MomentModel cdf_model(std::vector<double> thresholds);
/// m = y - beta.
MomentModel mean_model(Eigen::Index d_y = 1);
/// m = r (y - r'beta) with r built from `regressors` ("1" for a constant,
/// "xK" for covariate K).
MomentModel linreg_model(std::vector<std::string> regressors);

/// Regressor vector r(x) of a linreg model.
Eigen::VectorXd regressor_vector(const std::vector<std::string>& regressors,
                                 const Eigen::VectorXd& x);

Eigen::VectorXd eval_moment(const MomentModel& model, const ObservationRecord& z,
                            const Eigen::VectorXd& beta);

/// m(Z_i; beta) for the listed rows, one row each (rows must carry y).
Eigen::MatrixXd moment_matrix(const MomentModel& model, const Dataset& ds,
                              const std::vector<Eigen::Index>& rows, const Eigen::VectorXd& beta);

struct JacobianEstimate {
  enum class Method { Analytic, CentralDifference };
  Eigen::MatrixXd matrix;
  Method method = Method::Analytic;
};

using AveragedMoment = std::function<Eigen::VectorXd(const Eigen::VectorXd& beta)>;
using AveragedJacobian = std::function<Eigen::MatrixXd(const Eigen::VectorXd& beta)>;

/// Jacobian of an averaged moment. Location-form models give exactly -I; an
/// averaged analytic Jacobian is used when supplied; otherwise central
/// differences with coordinate step step * max(1, |beta_k|).
JacobianEstimate moment_jacobian(const MomentModel& model, const AveragedMoment& averaged_moment,
                                 const Eigen::VectorXd& beta, double step,
                                 const AveragedJacobian& averaged_analytic = {});

}  // namespace auxgmm

#endif  // AUXGMM_MOMENTS_HPP
