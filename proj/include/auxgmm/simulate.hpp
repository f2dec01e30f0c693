#ifndef AUXGMM_SIMULATE_HPP
#define AUXGMM_SIMULATE_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "auxgmm/data.hpp"
#include "auxgmm/estimators.hpp"
#include "auxgmm/expr.hpp"
#include "auxgmm/moments.hpp"
#include "auxgmm/propensity.hpp"

namespace auxgmm {

enum class XLaw { DiscreteUniform, Gaussian, GaussianMixture };
enum class YLaw { DiscreteTable, AdditiveNormal };

/// A scalar-X data generating process. X is drawn first, then D given X,
/// then Y given X alone, so Y and D are independent given X by construction.
struct DGPSpec {
  std::string name;
  XLaw x_law = XLaw::DiscreteUniform;
  std::vector<double> levels;        // DiscreteUniform support
  double x_mean = 0.0;               // Gaussian
  double x_sd = 1.0;
  std::vector<double> mix_weights;   // GaussianMixture components
  std::vector<double> mix_means;
  std::vector<double> mix_sds;
  Expr p_fn;
  YLaw y_law = YLaw::DiscreteTable;
  std::vector<std::vector<double>> y_values;  // per level
  std::vector<std::vector<double>> y_probs;
  Expr y_mean;                       // AdditiveNormal: y = y_mean(x) + noise_sd * N(0, 1)
  double noise_sd = 1.0;
  SampleCase sample_case = SampleCase::VerifyOut;

  // Suggested estimation defaults for the preset.
  ParametricFamily family;
  BasisSpec basis;
  MomentModel moment;

  bool discrete() const noexcept {
    return x_law == XLaw::DiscreteUniform && y_law == YLaw::DiscreteTable;
  }
  /// Throws SpecError on an inconsistent specification.
  void check() const;
};

/// dgp-a: X uniform on {0, 1}, p(0) = 0.25, p(1) = 0.5, Y | X=0 uniform on
/// {0, 1}, Y | X=1 uniform on {1, 2}. dgp-a-constp: the same with p = 0.375.
/// dgp-b: X ~ N(0, 1), p(x) = logistic(x / 2), Y = x + sin(x) + N(0, 1).
DGPSpec dgp_preset(const std::string& name);
std::vector<std::string> preset_names();

Dataset generate(const DGPSpec& spec, Eigen::Index n, std::uint64_t seed);

/// Population quantities at beta0, evaluated exactly on a finite support or
/// by Gauss-Hermite quadrature for Gaussian X.
struct OracleResult {
  Eigen::VectorXd beta0;
  Eigen::VectorXd x_support;
  Eigen::VectorXd x_weights;          // probabilities of the support points
  Eigen::MatrixXd e_table;            // E[m(Z; beta0) | x]
  std::vector<Eigen::MatrixXd> v_table;
  Eigen::VectorXd p_table;
  double p = 0.0;
  Eigen::MatrixXd omega1;
  Eigen::MatrixXd omega2;
  Eigen::MatrixXd omega1_known;
  // Present when a parametric family was supplied.
  std::optional<Eigen::MatrixXd> omega_param;
  Eigen::MatrixXd p_grad;             // d p(x; gamma0) / d gamma per support point
  Eigen::MatrixXd information;
  Eigen::VectorXd gamma0;
};

/// Exact enumeration over a finite (x, y) support. Location-form moments only.
OracleResult exact_oracle_discrete(const DGPSpec& spec, const MomentModel& moment,
                                   SampleCase sample_case,
                                   const ParametricFamily* family = nullptr);
/// Enumeration when the support is finite, quadrature otherwise.
OracleResult population_oracle(const DGPSpec& spec, const MomentModel& moment,
                               SampleCase sample_case, const ParametricFamily* family = nullptr,
                               int quadrature_nodes = 96);

/// Asymptotic variance of sqrt(n)(beta-hat - beta0) for an estimator family
/// under the oracle; nullopt where no bound applies (unadjusted).
std::optional<Eigen::MatrixXd> oracle_variance(const OracleResult& oracle,
                                               EstimatorFamily family, SampleCase sample_case,
                                               PropensityKind propensity);

/// Nodes and probability weights integrating against N(0, 1).
void gauss_hermite_normal(int nodes, Eigen::VectorXd& x, Eigen::VectorXd& w);

struct MCRow {
  std::string label;
  std::string family;
  Eigen::Index coordinate = 0;
  double beta0 = 0.0;
  double mean_estimate = 0.0;
  double mean_bias = 0.0;
  double mc_se = 0.0;           // of the mean estimate
  double emp_var = 0.0;         // variance of sqrt(n)(beta-hat - beta0)
  double emp_var_se = 0.0;      // its Monte Carlo standard error
  double mean_plugin_v0 = 0.0;  // mean of n * vcov
  std::optional<double> oracle_v0;
  std::optional<double> variance_ratio;  // emp_var / oracle_v0
  double coverage = 0.0;        // of the nominal 95% interval
  Eigen::Index used = 0;
  Eigen::Index excluded = 0;
};

/// Per-replication estimates, kept for paired comparisons in tests. Not part
/// of the serialized report.
struct MCDraws {
  std::vector<std::optional<Eigen::VectorXd>> beta;
  std::vector<std::optional<Eigen::VectorXd>> se;
  std::vector<std::string> errors;
};

struct MCReport {
  std::string dgp;
  SampleCase sample_case = SampleCase::VerifyOut;
  Eigen::Index n = 0;
  Eigen::Index reps = 0;
  std::uint64_t base_seed = 0;
  std::vector<MCRow> rows;
  std::vector<MCDraws> draws;  // one per estimator config
  bool ok = true;
  std::string note;
};

/// Seed of replication r, independent of how replications are scheduled.
std::uint64_t replication_seed(std::uint64_t base_seed, Eigen::Index r);
/// Worker count from AUXGMM_THREADS, else hardware concurrency; at least 1.
int worker_count();

/// Every replication generates one dataset and runs every config on it.
/// Failed fits are excluded and counted; the report is marked not ok when
/// more than 1% of replications fail for any estimator. threads <= 0 uses
/// worker_count().
MCReport run_monte_carlo(const DGPSpec& spec, const std::vector<EstimatorConfig>& configs,
                         Eigen::Index n, Eigen::Index reps, std::uint64_t base_seed,
                         int threads = 0);

}  // namespace auxgmm

#endif  // AUXGMM_SIMULATE_HPP
