#ifndef AUXGMM_PROPENSITY_HPP
#define AUXGMM_PROPENSITY_HPP

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "auxgmm/data.hpp"
#include "auxgmm/expr.hpp"
#include "auxgmm/sieve.hpp"

namespace auxgmm {

enum class PropensityKind { Known, Parametric, SieveLS, SieveLogit };
enum class Link { Logit, Identity };

const char* to_string(PropensityKind k) noexcept;
PropensityKind parse_propensity_kind(const std::string& text);
const char* to_string(Link l) noexcept;
Link parse_link(const std::string& text);

/// p(x; gamma) = link(h(x)' gamma) with design terms h given as expressions.
struct ParametricFamily {
  Link link = Link::Logit;
  std::vector<Expr> design;

  /// Logit with terms (1, x1, ..., x_dx).
  static ParametricFamily logit_linear(Eigen::Index d_x);

  Eigen::Index dim() const noexcept { return static_cast<Eigen::Index>(design.size()); }
  Eigen::VectorXd terms(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::MatrixXd term_matrix(const Eigen::MatrixXd& x) const;
};

/// Probability and d p / d index for a linear index under a link.
double link_value(Link link, double index);
double link_derivative(Link link, double index);

struct PropensitySpec {
  PropensityKind method = PropensityKind::SieveLS;
  double clip = 0.01;
  BasisSpec basis;                 // sieve methods
  ParametricFamily family;         // parametric method
  std::string known;               // known method: expression over x
};

struct PropensityModel {
  PropensityKind kind = PropensityKind::Known;
  Eigen::VectorXd params;                  // gamma-hat or sieve coefficients
  std::optional<SieveBasis> basis;
  std::optional<ParametricFamily> family;
  std::function<double(const Eigen::VectorXd&)> known_fn;
  std::string known_source;
  double clip = 0.01;
  int iterations = 0;
  std::vector<std::string> warnings;
};

PropensityModel known_propensity(std::function<double(const Eigen::VectorXd&)> fn,
                                 double clip = 0.01, std::string source = {});
PropensityModel known_propensity(const std::string& expression, double clip = 0.01);

/// Model value before clipping. Series fits may leave [0, 1].
double raw_propensity(const PropensityModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
/// Model value clipped to [clip, 1 - clip].
double propensity_at(const PropensityModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

struct PropensityValues {
  Eigen::VectorXd values;
  Eigen::Index clipped = 0;
};

/// Clipped values for every row of x along with the number of clipped rows.
PropensityValues propensity_rows(const PropensityModel& model, const Eigen::MatrixXd& x);
/// Unclipped values for every row of x.
Eigen::VectorXd raw_propensity_rows(const PropensityModel& model, const Eigen::MatrixXd& x);
/// d p(x; gamma) / d gamma per row (n x d_gamma); parametric models only.
Eigen::MatrixXd propensity_gradient_rows(const PropensityModel& model, const Eigen::MatrixXd& x);

PropensityModel fit_propensity(const PropensitySpec& spec, const Dataset& ds);

/// Weighted maximum likelihood for a parametric family. Each row contributes
/// weight * {d log p + (1 - d) log(1 - p)}; with unit weights this is the
/// ordinary MLE, with cell probabilities it is the population MLE.
PropensityModel fit_parametric(const ParametricFamily& family, const Eigen::MatrixXd& x,
                               const Eigen::VectorXd& d, const Eigen::VectorXd& weights,
                               double clip = 0.01);

struct ScoreInfo {
  Eigen::MatrixXd scores;       // n x d_gamma
  Eigen::MatrixXd information;  // mean of S S'
};

ScoreInfo score_info(const PropensityModel& model, const Dataset& ds);

}  // namespace auxgmm

#endif  // AUXGMM_PROPENSITY_HPP
