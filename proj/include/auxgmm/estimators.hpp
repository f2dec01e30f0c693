#ifndef AUXGMM_ESTIMATORS_HPP
#define AUXGMM_ESTIMATORS_HPP

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "auxgmm/bounds.hpp"
#include "auxgmm/data.hpp"
#include "auxgmm/linalg.hpp"
#include "auxgmm/moments.hpp"
#include "auxgmm/optimize.hpp"
#include "auxgmm/propensity.hpp"
#include "auxgmm/sieve.hpp"

namespace auxgmm {

/// Unadjusted is the plain auxiliary mean of m, kept as a reference column.
/// CEP_ParametricP covers both a parametric and a known propensity.
enum class EstimatorFamily {
  Unadjusted,
  CEP,
  CEP_ParametricP,
  IPW,
  IPW_ParametricP,
  IPW_KnownP,
  IPW_Mixed,
};
const char* to_string(EstimatorFamily f) noexcept;
EstimatorFamily parse_estimator_family(const std::string& text);

enum class WeightingKind { Identity, TwoStepOptimal, Fixed };
const char* to_string(WeightingKind w) noexcept;

struct Weighting {
  WeightingKind kind = WeightingKind::TwoStepOptimal;
  Eigen::MatrixXd fixed;  // used when kind == Fixed
};

struct EstimatorConfig {
  EstimatorFamily family = EstimatorFamily::CEP;
  SampleCase sample_case = SampleCase::VerifyOut;
  MomentModel moment;
  BasisSpec basis;            // projection of m on X in the auxiliary sample
  PropensitySpec propensity;  // what the family needs; also feeds the variance of CEP
  PropensitySpec denominator; // nonparametric denominator of IPW_Mixed
  Weighting weighting;
  OptimizerSpec optimizer;
  std::optional<Eigen::VectorXd> beta_init;
  std::string label;          // column name in reports; defaults to the family name
};

/// Throws ConfigError when the family, case and propensity method do not fit
/// together.
void check_config(const EstimatorConfig& cfg);

struct Diagnostics {
  Eigen::Index n = 0;
  Eigen::Index n_primary = 0;
  Eigen::Index n_auxiliary = 0;
  Eigen::Index k_n = 0;
  int iterations = 0;
  double objective = 0.0;
  double first_step_objective = 0.0;
  bool closed_form = false;
  bool converged = true;
  Eigen::Index clip_count = 0;
  Eigen::Index near_boundary = 0;
  Eigen::Index variance_floored = 0;
  bool omega_pseudo_inverse = false;
  double ridge = 0.0;
  double phat = 0.0;
  std::string omega_kind;
  int propensity_iterations = 0;
  std::vector<std::string> warnings;
};

struct Estimate {
  EstimatorFamily family = EstimatorFamily::CEP;
  SampleCase sample_case = SampleCase::VerifyOut;
  std::string label;
  Eigen::VectorXd beta;
  Eigen::MatrixXd vcov;  // of beta-hat, already divided by n
  Eigen::VectorXd se;
  Eigen::MatrixXd omega;
  JacobianEstimate jac;
  Eigen::MatrixXd weighting_used;
  Diagnostics diagnostics;
};

/// Average of E-hat over the rows of target_x. With row weights this is the
/// weighted form (1/n) sum E-hat(X_i) w_i used with a parametric propensity,
/// where w_i = p(X_i; gamma-hat) / p-hat.
Eigen::VectorXd cep_sample_moment(const ProjectionFit& fit, const Eigen::MatrixXd& target_x,
                                  const Eigen::VectorXd* row_weights = nullptr);

enum class IpwKind { OutNP, InNP, OutParam, OutKnown, OutMixed, InParam, InKnown };
const char* to_string(IpwKind k) noexcept;

struct IpwWeights {
  Eigen::VectorXd values;  // one per auxiliary row, in dataset order
  Eigen::Index clipped = 0;
  Eigen::Index near_boundary = 0;  // p-tilde within 2 clip widths of 0 or 1
};

/// Verify-out kinds weight by p~/(1 - p~) * (1 - p)/p, verify-in kinds by
/// (1 - p)/(1 - p~). OutMixed takes the numerator from `pmodel` and the
/// denominator from `denominator`.
IpwWeights ipw_weights(IpwKind kind, const Dataset& ds, const PropensityModel& pmodel, double phat,
                       const PropensityModel* denominator = nullptr);

/// (1/n_a) sum_j m(Z_j; beta) w_j over the auxiliary rows.
Eigen::VectorXd ipw_sample_moment(const MomentModel& moment, const Eigen::VectorXd& beta,
                                  const Dataset& ds, IpwKind kind, const PropensityModel& pmodel,
                                  double phat, const PropensityModel* denominator = nullptr);

/// Minimizes a GMM objective over the model's box with Nelder-Mead.
OptimizeResult gmm_minimize(const Objective& objective, const Eigen::VectorXd& beta_init,
                            const MomentModel& moment, const OptimizerSpec& spec = {});

/// A = J' Omega^-1.
Flagged<double> optimal_combination(const JacobianEstimate& jac, const Eigen::MatrixXd& omega);

/// Runs the full pipeline: propensity fit, first-step GMM with W = I, Omega-hat,
/// optional second step with W = Omega-hat^-1, Jacobian and variance.
///
/// Every sample moment here is a fixed linear combination of m over the
/// auxiliary rows, g-bar(beta) = sum_j omega_j m(Z_j; beta). For CEP the
/// weights are Q_a (Q_a'Q_a + ridge I)^-1 q-bar, with q-bar the mean basis
/// vector over the target rows; for IPW they are w_j / n_a. This equals
/// refitting the projection at every beta because the fit is linear in its
/// targets.
Estimate estimate(const EstimatorConfig& cfg, const Dataset& ds);

}  // namespace auxgmm

#endif  // AUXGMM_ESTIMATORS_HPP
