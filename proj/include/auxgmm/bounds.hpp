#ifndef AUXGMM_BOUNDS_HPP
#define AUXGMM_BOUNDS_HPP

#include <Eigen/Dense>

#include <vector>

#include "auxgmm/data.hpp"
#include "auxgmm/linalg.hpp"
#include "auxgmm/moments.hpp"
#include "auxgmm/propensity.hpp"
#include "auxgmm/sieve.hpp"

namespace auxgmm {

/// Which efficiency-bound matrix to estimate.
///   Omega1      verify-out, p(x) unknown
///   Omega2      verify-in
///   Omega1Known verify-out, p(x) known
///   OmegaParam  verify-out, p(x) in a parametric family
enum class BoundKind { Omega1, Omega2, Omega1Known, OmegaParam };
const char* to_string(BoundKind k) noexcept;

/// Sieve fits of E[m | X] and E[m m' | X] on the auxiliary rows at one beta.
/// The second fit carries the upper triangle of m m' in row-major order.
struct CondMomentFit {
  ProjectionFit mean_fit;
  ProjectionFit second_fit;
  Eigen::VectorXd beta_at;
  Eigen::Index d_m = 0;
};

CondMomentFit fit_cond_moments(const MomentModel& moment, const Eigen::VectorXd& beta,
                               const Dataset& ds, const SieveBasis& basis);
/// Same, reusing a projector already factorized on the auxiliary covariates.
CondMomentFit fit_cond_moments(const MomentModel& moment, const Eigen::VectorXd& beta,
                               const Dataset& ds, const SieveProjector& auxiliary_projector);

struct CondMomentValues {
  Eigen::MatrixXd e;               // n x d_m, E-hat(x_i)
  std::vector<Eigen::MatrixXd> v;  // V-hat(m | x_i), symmetrized and floored at 0
  Eigen::Index floored = 0;        // rows where a negative eigenvalue was floored
};

CondMomentValues eval_cond_moments(const CondMomentFit& cm, const Eigen::MatrixXd& x);

/// Everything the bound integrands need, per support point. With empty
/// `weights` each row counts 1/n; otherwise weights are probabilities, which
/// is how the exact oracles evaluate the same formulas.
struct OmegaInputs {
  Eigen::MatrixXd e;
  std::vector<Eigen::MatrixXd> v;
  Eigen::VectorXd p_x;
  double p = 0.0;
  Eigen::MatrixXd p_grad;       // n x d_gamma, OmegaParam only
  Eigen::MatrixXd information;  // d_gamma x d_gamma, OmegaParam only
  Eigen::VectorXd weights;
};

Eigen::MatrixXd omega_from_inputs(BoundKind kind, const OmegaInputs& in);

/// Plug-in estimate averaged over all n rows. OmegaParam uses the expected
/// information E[p_gamma p_gamma' / (p (1 - p))] at the fitted model.
Eigen::MatrixXd estimate_omega(BoundKind kind, const CondMomentFit& cm,
                               const PropensityModel& pmodel, double phat, const Dataset& ds);

/// Per-observation influence functions. The first seven are the efficient and
/// estimator representations; the IPW known/parametric kinds are the
/// influence functions of the weighted estimators themselves, parametric ones
/// including the first-step estimation of gamma.
enum class InfluenceKind {
  EffOut_F1,
  EffIn_F2,
  EffOutKnown,
  EffOutParam,
  CEPOut,
  CEPIn,
  IPWOut,
  IPWIn,
  IPWOutKnown,
  IPWInKnown,
  IPWOutParam,
  IPWInParam,
};
const char* to_string(InfluenceKind k) noexcept;

/// n x d_m. `score` is required for the parametric kinds.
Eigen::MatrixXd influence_values(InfluenceKind kind, const CondMomentFit& cm,
                                 const PropensityModel& pmodel, double phat,
                                 const ScoreInfo* score, const Dataset& ds,
                                 const MomentModel& moment, const Eigen::VectorXd& beta);

/// Mean of psi psi' over rows.
Eigen::MatrixXd omega_from_influence(const Eigen::MatrixXd& psi);

}  // namespace auxgmm

#endif  // AUXGMM_BOUNDS_HPP
