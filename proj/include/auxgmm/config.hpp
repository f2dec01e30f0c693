#ifndef AUXGMM_CONFIG_HPP
#define AUXGMM_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "auxgmm/estimators.hpp"
#include "auxgmm/simulate.hpp"

namespace auxgmm {

struct MomentSpec {
  std::string type = "mean";            // mean | cdf | linreg
  std::vector<double> thresholds;       // cdf
  std::vector<std::string> regressors;  // linreg
  int d_y = 1;                          // mean
};

struct PropensityConfig {
  std::optional<std::string> method;    // sieve-ls | sieve-logit, for the nonparametric families
  std::optional<double> clip;
  std::optional<BasisSpec> basis;       // defaults to the projection basis
  std::optional<std::string> link;      // parametric families
  std::vector<std::string> design;      // parametric design terms over x
  std::optional<std::string> known;     // known-p families
};

/// Everything a CLI run needs. Optional fields fall back to the preset (for
/// `simulate`) or to library defaults.
struct RunConfig {
  std::string command = "estimate";
  std::optional<std::string> data;
  SampleCase sample_case = SampleCase::VerifyOut;
  std::vector<std::string> families;   // empty: the command's default lineup
  std::optional<MomentSpec> moment;
  std::optional<BasisSpec> basis;
  PropensityConfig propensity;
  std::string weighting = "two-step";   // two-step | identity
  std::optional<std::vector<std::vector<double>>> weight_matrix;  // fixed weighting
  std::optional<OptimizerSpec> optimizer;
  std::optional<std::vector<double>> beta_init;
  std::optional<std::string> output;
  std::string format = "json";
  std::uint64_t seed = 1;
  std::optional<std::string> preset;
  std::optional<std::int64_t> n;
  std::optional<std::int64_t> reps;
};

/// Strict parse: unknown keys and ill-typed values throw ConfigError.
RunConfig parse_config(const nlohmann::json& j);
RunConfig parse_config_text(const std::string& text);
nlohmann::json serialize_config(const RunConfig& cfg);
/// FNV-1a 64 of the canonical serialization, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

MomentModel make_moment(const MomentSpec& spec);

/// Families used when none are configured: {"cep"} for estimate and bounds,
/// the five-column table lineup for simulate.
std::vector<std::string> default_families(const std::string& command, SampleCase c);

/// Expands the configured families into estimator configs. `preset` supplies
/// defaults for simulation runs; `d_x` sizes the default logit design.
std::vector<EstimatorConfig> make_estimator_configs(const RunConfig& cfg, const DGPSpec* preset,
                                                    Eigen::Index d_x);

}  // namespace auxgmm

#endif  // AUXGMM_CONFIG_HPP
