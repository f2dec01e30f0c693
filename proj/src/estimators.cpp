#include "auxgmm/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "auxgmm/error.hpp"

namespace auxgmm {

namespace {

bool is_sieve(PropensityKind k) {
  return k == PropensityKind::SieveLS || k == PropensityKind::SieveLogit;
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(rows[k]);
  return out;
}

// Builds the projection basis on the auxiliary covariates, dropping knots and
// then degree while there are fewer auxiliary rows than basis terms.
SieveBasis auxiliary_basis(BasisSpec spec, const Eigen::MatrixXd& xa,
                           std::vector<std::string>& warnings) {
  for (;;) {
    try {
      return build_basis(spec, xa);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::InsufficientData || xa.rows() < 1) throw;
      const int knots = !spec.knots.empty()
                            ? static_cast<int>(spec.knots.front().size())
                            : spec.knot_count.value_or(default_knot_count(xa.rows()));
      if (spec.kind == BasisKind::PolySpline && knots > 0) {
        spec.knots.clear();
        spec.knot_count = knots - 1;
      } else if (spec.degree > 0) {
        spec.degree -= 1;
      } else {
        throw;
      }
      warnings.push_back("basis shrunk to degree " + std::to_string(spec.degree) + " with " +
                         std::to_string(spec.kind == BasisKind::PolySpline
                                            ? spec.knot_count.value_or(0)
                                            : 0) +
                         " knots because n_a = " + std::to_string(xa.rows()) +
                         " is below the number of basis terms");
    }
  }
}

IpwKind ipw_kind_for(EstimatorFamily f, SampleCase c) {
  const bool out = c == SampleCase::VerifyOut;
  switch (f) {
    case EstimatorFamily::IPW: return out ? IpwKind::OutNP : IpwKind::InNP;
    case EstimatorFamily::IPW_ParametricP: return out ? IpwKind::OutParam : IpwKind::InParam;
    case EstimatorFamily::IPW_KnownP: return out ? IpwKind::OutKnown : IpwKind::InKnown;
    case EstimatorFamily::IPW_Mixed: return IpwKind::OutMixed;
    default: break;
  }
  throw Error(ErrorKind::ConfigError, "not an IPW family");
}

Eigen::VectorXd default_start(const MomentModel& moment) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(moment.d_beta);
  for (Eigen::Index k = 0; k < b.size(); ++k) {
    if (b(k) < moment.lower(k) || b(k) > moment.upper(k)) {
      b(k) = 0.5 * (moment.lower(k) + moment.upper(k));
    }
  }
  return b;
}

}  // namespace

const char* to_string(EstimatorFamily f) noexcept {
  switch (f) {
    case EstimatorFamily::Unadjusted: return "unadjusted";
    case EstimatorFamily::CEP: return "cep";
    case EstimatorFamily::CEP_ParametricP: return "cep-param";
    case EstimatorFamily::IPW: return "ipw";
    case EstimatorFamily::IPW_ParametricP: return "ipw-param";
    case EstimatorFamily::IPW_KnownP: return "ipw-known";
    case EstimatorFamily::IPW_Mixed: return "ipw-mixed";
  }
  return "unknown";
}

EstimatorFamily parse_estimator_family(const std::string& text) {
  for (auto f : {EstimatorFamily::Unadjusted, EstimatorFamily::CEP,
                 EstimatorFamily::CEP_ParametricP, EstimatorFamily::IPW,
                 EstimatorFamily::IPW_ParametricP, EstimatorFamily::IPW_KnownP,
                 EstimatorFamily::IPW_Mixed}) {
    if (text == to_string(f)) return f;
  }
  throw Error(ErrorKind::ConfigError, "unknown estimator family '" + text + "'");
}

const char* to_string(WeightingKind w) noexcept {
  switch (w) {
    case WeightingKind::Identity: return "identity";
    case WeightingKind::TwoStepOptimal: return "two-step";
    case WeightingKind::Fixed: return "fixed";
  }
  return "unknown";
}

const char* to_string(IpwKind k) noexcept {
  switch (k) {
    case IpwKind::OutNP: return "out-np";
    case IpwKind::InNP: return "in-np";
    case IpwKind::OutParam: return "out-param";
    case IpwKind::OutKnown: return "out-known";
    case IpwKind::OutMixed: return "out-mixed";
    case IpwKind::InParam: return "in-param";
    case IpwKind::InKnown: return "in-known";
  }
  return "unknown";
}

void check_config(const EstimatorConfig& cfg) {
  cfg.moment.check();
  const PropensityKind pk = cfg.propensity.method;
  const bool out = cfg.sample_case == SampleCase::VerifyOut;
  auto fail = [&](const std::string& why) {
    throw Error(ErrorKind::ConfigError, std::string(to_string(cfg.family)) + ": " + why);
  };
  switch (cfg.family) {
    case EstimatorFamily::Unadjusted:
    case EstimatorFamily::CEP:
      break;
    case EstimatorFamily::CEP_ParametricP:
      if (!out) fail("only defined for verify-out; plain CEP is already efficient for verify-in");
      if (pk != PropensityKind::Parametric && pk != PropensityKind::Known) {
        fail("needs a parametric or known propensity");
      }
      break;
    case EstimatorFamily::IPW:
      if (!is_sieve(pk)) fail("needs a sieve propensity (sieve-ls or sieve-logit)");
      break;
    case EstimatorFamily::IPW_ParametricP:
      if (pk != PropensityKind::Parametric) fail("needs a parametric propensity");
      break;
    case EstimatorFamily::IPW_KnownP:
      if (pk != PropensityKind::Known) fail("needs a known propensity");
      break;
    case EstimatorFamily::IPW_Mixed:
      if (!out) fail("only defined for verify-out");
      if (pk != PropensityKind::Parametric) fail("needs a parametric numerator");
      if (!is_sieve(cfg.denominator.method)) fail("needs a sieve denominator");
      break;
  }
  if (cfg.weighting.kind == WeightingKind::Fixed &&
      (cfg.weighting.fixed.rows() != cfg.moment.d_m || cfg.weighting.fixed.cols() != cfg.moment.d_m)) {
    fail("fixed weighting matrix must be d_m x d_m");
  }
  if (cfg.beta_init && !cfg.moment.in_box(*cfg.beta_init)) fail("beta_init lies outside B");
}

Eigen::VectorXd cep_sample_moment(const ProjectionFit& fit, const Eigen::MatrixXd& target_x,
                                  const Eigen::VectorXd* row_weights) {
  const Eigen::MatrixXd e = predict_rows(fit, target_x);
  if (row_weights == nullptr) return e.colwise().mean().transpose();
  if (row_weights->size() != target_x.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "cep_sample_moment: one weight per row is needed");
  }
  return e.transpose() * *row_weights / static_cast<double>(target_x.rows());
}

IpwWeights ipw_weights(IpwKind kind, const Dataset& ds, const PropensityModel& pmodel, double phat,
                       const PropensityModel* denominator) {
  if (kind == IpwKind::OutMixed && denominator == nullptr) {
    throw Error(ErrorKind::ConfigError, "mixed weights need a nonparametric denominator");
  }
  const auto aux = split_samples(ds).auxiliary;
  const Eigen::MatrixXd xa = select_rows(ds.x(), aux);
  IpwWeights out;
  const PropensityValues num = propensity_rows(pmodel, xa);
  out.clipped = num.clipped;
  PropensityValues den = num;
  if (kind == IpwKind::OutMixed) {
    den = propensity_rows(*denominator, xa);
    out.clipped += den.clipped;
  }
  const double odds = (1.0 - phat) / phat;
  out.values.resize(xa.rows());
  for (Eigen::Index j = 0; j < xa.rows(); ++j) {
    const double pn = num.values(j);
    const double pd = den.values(j);
    switch (kind) {
      case IpwKind::OutNP:
      case IpwKind::OutParam:
      case IpwKind::OutKnown:
      case IpwKind::OutMixed:
        out.values(j) = pn / (1.0 - pd) * odds;
        break;
      case IpwKind::InNP:
      case IpwKind::InParam:
      case IpwKind::InKnown:
        out.values(j) = (1.0 - phat) / (1.0 - pd);
        break;
    }
    const double edge = 2.0 * pmodel.clip;
    if (pd < edge || pd > 1.0 - edge) ++out.near_boundary;
  }
  return out;
}

Eigen::VectorXd ipw_sample_moment(const MomentModel& moment, const Eigen::VectorXd& beta,
                                  const Dataset& ds, IpwKind kind, const PropensityModel& pmodel,
                                  double phat, const PropensityModel* denominator) {
  const auto aux = split_samples(ds).auxiliary;
  const Eigen::MatrixXd m = moment_matrix(moment, ds, aux, beta);
  const IpwWeights w = ipw_weights(kind, ds, pmodel, phat, denominator);
  return m.transpose() * w.values / static_cast<double>(aux.size());
}

OptimizeResult gmm_minimize(const Objective& objective, const Eigen::VectorXd& beta_init,
                            const MomentModel& moment, const OptimizerSpec& spec) {
  return nelder_mead(objective, beta_init, moment.lower, moment.upper, spec);
}

Flagged<double> optimal_combination(const JacobianEstimate& jac, const Eigen::MatrixXd& omega) {
  return optimal_combination(jac.matrix, omega);
}

Estimate estimate(const EstimatorConfig& cfg, const Dataset& ds) {
  check_config(cfg);
  if (cfg.sample_case != ds.sample_case()) {
    throw Error(ErrorKind::ConfigError, "estimator case does not match the dataset case");
  }
  const MomentModel& moment = cfg.moment;
  const SampleSplit split = split_samples(ds);
  const auto& aux = split.auxiliary;
  const Eigen::Index n = ds.n();
  const auto n_a = static_cast<double>(aux.size());
  const double phat = marginal_p(ds);
  const bool out_case = cfg.sample_case == SampleCase::VerifyOut;

  Estimate est;
  est.family = cfg.family;
  est.sample_case = cfg.sample_case;
  est.label = cfg.label.empty() ? to_string(cfg.family) : cfg.label;
  Diagnostics& diag = est.diagnostics;
  diag.n = n;
  diag.n_primary = ds.n_primary();
  diag.n_auxiliary = ds.n_auxiliary();
  diag.phat = phat;

  // Propensity models.
  std::optional<PropensityModel> pm;
  std::optional<PropensityModel> pden;
  std::optional<ScoreInfo> score;
  if (cfg.family != EstimatorFamily::Unadjusted) {
    pm = fit_propensity(cfg.propensity, ds);
    diag.propensity_iterations = pm->iterations;
    for (const auto& w : pm->warnings) diag.warnings.push_back("propensity: " + w);
    if (cfg.family == EstimatorFamily::IPW_ParametricP) score = score_info(*pm, ds);
    diag.clip_count = propensity_rows(*pm, ds.x()).clipped;
  }
  if (cfg.family == EstimatorFamily::IPW_Mixed) {
    pden = fit_propensity(cfg.denominator, ds);
    for (const auto& w : pden->warnings) diag.warnings.push_back("denominator: " + w);
  }

  // Projection of m on the auxiliary covariates.
  const Eigen::MatrixXd xa = select_rows(ds.x(), aux);
  std::optional<SieveProjector> projector;
  if (cfg.family != EstimatorFamily::Unadjusted) {
    SieveBasis basis = auxiliary_basis(cfg.basis, xa, diag.warnings);
    for (const auto& w : basis.warnings) diag.warnings.push_back("basis: " + w);
    projector.emplace(std::move(basis), xa);
    diag.k_n = projector->basis().k_n;
    diag.ridge = projector->ridge();
  }

  // Linear weights over auxiliary rows.
  Eigen::VectorXd omega_w;
  switch (cfg.family) {
    case EstimatorFamily::Unadjusted:
      omega_w = Eigen::VectorXd::Constant(xa.rows(), 1.0 / n_a);
      break;
    case EstimatorFamily::CEP: {
      const Eigen::MatrixXd target = out_case ? select_rows(ds.x(), split.primary) : ds.x();
      const Eigen::VectorXd qbar =
          design_matrix(projector->basis(), target).colwise().mean().transpose();
      omega_w = projector->design() * projector->solve(qbar);
      break;
    }
    case EstimatorFamily::CEP_ParametricP: {
      const Eigen::VectorXd w = raw_propensity_rows(*pm, ds.x()) / phat;
      const Eigen::VectorXd qbar =
          design_matrix(projector->basis(), ds.x()).transpose() * w / static_cast<double>(n);
      omega_w = projector->design() * projector->solve(qbar);
      break;
    }
    default: {
      const IpwWeights w = ipw_weights(ipw_kind_for(cfg.family, cfg.sample_case), ds, *pm, phat,
                                       pden ? &*pden : nullptr);
      omega_w = w.values / n_a;
      diag.near_boundary = w.near_boundary;
      break;
    }
  }
  const double omega_sum = omega_w.sum();

  const bool location = moment.is_location_form();
  Eigen::MatrixXd g_aux;
  if (location) {
    g_aux.resize(xa.rows(), moment.d_m);
    for (std::size_t k = 0; k < aux.size(); ++k) {
      g_aux.row(static_cast<Eigen::Index>(k)) =
          moment.location_part(ds.y().row(aux[k]).transpose(), ds.x().row(aux[k]).transpose())
              .transpose();
    }
  }
  auto gbar = [&](const Eigen::VectorXd& beta) -> Eigen::VectorXd {
    if (location) return g_aux.transpose() * omega_w - beta * omega_sum;
    return moment_matrix(moment, ds, aux, beta).transpose() * omega_w;
  };

  // Omega-hat at a given beta, matched to the family and case.
  auto omega_at = [&](const Eigen::VectorXd& beta) -> Eigen::MatrixXd {
    if (cfg.family == EstimatorFamily::Unadjusted) {
      Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(n, moment.d_m);
      const Eigen::MatrixXd m = moment_matrix(moment, ds, aux, beta);
      for (std::size_t k = 0; k < aux.size(); ++k) {
        psi.row(aux[k]) = m.row(static_cast<Eigen::Index>(k)) / (1.0 - phat);
      }
      diag.omega_kind = "influence:unadjusted";
      return omega_from_influence(psi);
    }
    const CondMomentFit cm = fit_cond_moments(moment, beta, ds, *projector);
    diag.variance_floored = eval_cond_moments(cm, ds.x()).floored;
    const ScoreInfo* s = score ? &*score : nullptr;
    auto bound = [&](BoundKind k) {
      diag.omega_kind = to_string(k);
      return estimate_omega(k, cm, *pm, phat, ds);
    };
    auto influence = [&](InfluenceKind k) {
      diag.omega_kind = std::string("influence:") + to_string(k);
      return omega_from_influence(influence_values(k, cm, *pm, phat, s, ds, moment, beta));
    };
    switch (cfg.family) {
      case EstimatorFamily::CEP:
      case EstimatorFamily::IPW:
        return bound(out_case ? BoundKind::Omega1 : BoundKind::Omega2);
      case EstimatorFamily::CEP_ParametricP:
        return bound(pm->kind == PropensityKind::Known ? BoundKind::Omega1Known
                                                       : BoundKind::OmegaParam);
      case EstimatorFamily::IPW_Mixed:
        return bound(BoundKind::OmegaParam);
      case EstimatorFamily::IPW_KnownP:
        return influence(out_case ? InfluenceKind::IPWOutKnown : InfluenceKind::IPWInKnown);
      case EstimatorFamily::IPW_ParametricP:
        return influence(out_case ? InfluenceKind::IPWOutParam : InfluenceKind::IPWInParam);
      default:
        break;
    }
    throw Error(ErrorKind::ConfigError, "unhandled estimator family");
  };

  auto objective_with = [&](const Eigen::MatrixXd& w) {
    return [&, w](const Eigen::VectorXd& beta) {
      const Eigen::VectorXd g = gbar(beta);
      return g.dot(w * g);
    };
  };

  Eigen::MatrixXd weight = cfg.weighting.kind == WeightingKind::Fixed
                               ? cfg.weighting.fixed
                               : Eigen::MatrixXd::Identity(moment.d_m, moment.d_m);
  Eigen::VectorXd beta;
  const bool closed_form = location && moment.d_m == moment.d_beta;
  if (closed_form) {
    if (!(std::abs(omega_sum) > 0.0)) {
      throw Error(ErrorKind::SingularDesign, "moment weights sum to zero");
    }
    beta = g_aux.transpose() * omega_w / omega_sum;
    const Eigen::VectorXd clamped = beta.cwiseMax(moment.lower).cwiseMin(moment.upper);
    if (clamped != beta) {
      diag.warnings.push_back("closed-form estimate clamped into the parameter box");
      beta = clamped;
    }
    diag.closed_form = true;
    diag.first_step_objective = objective_with(weight)(beta);
    if (cfg.weighting.kind == WeightingKind::TwoStepOptimal) {
      auto inv = sym_inverse(omega_at(beta));
      diag.omega_pseudo_inverse = inv.pseudo_inverse;
      weight = inv.value;
    }
    diag.objective = objective_with(weight)(beta);
  } else {
    Eigen::VectorXd start = cfg.beta_init.value_or(default_start(moment));
    OptimizeResult first = gmm_minimize(objective_with(weight), start, moment, cfg.optimizer);
    beta = first.x;
    diag.iterations = first.iterations;
    diag.converged = first.converged;
    diag.first_step_objective = first.value;
    diag.objective = first.value;
    if (cfg.weighting.kind == WeightingKind::TwoStepOptimal) {
      auto inv = sym_inverse(omega_at(beta));
      diag.omega_pseudo_inverse = inv.pseudo_inverse;
      weight = inv.value;
      diag.first_step_objective = objective_with(weight)(beta);
      OptimizeResult second = gmm_minimize(objective_with(weight), beta, moment, cfg.optimizer);
      beta = second.x;
      diag.iterations += second.iterations;
      diag.converged = diag.converged && second.converged;
      diag.objective = second.value;
    }
    if (!diag.converged) {
      diag.warnings.push_back("NoConvergence: optimizer hit the iteration cap");
    }
  }

  est.beta = beta;
  est.omega = omega_at(beta);
  est.weighting_used = weight;

  // Jacobian of the averaged moment.
  AveragedJacobian analytic;
  if (!location && moment.analytic_jac) {
    analytic = [&](const Eigen::VectorXd& b) {
      Eigen::MatrixXd j = Eigen::MatrixXd::Zero(moment.d_m, moment.d_beta);
      for (std::size_t k = 0; k < aux.size(); ++k) {
        j += omega_w(static_cast<Eigen::Index>(k)) *
             moment.analytic_jac(ds.y().row(aux[k]).transpose(), ds.x().row(aux[k]).transpose(), b);
      }
      return j;
    };
  }
  const double step = moment.smooth ? 1e-5 : std::pow(static_cast<double>(n), -0.2);
  est.jac = moment_jacobian(moment, gbar, beta, step, analytic);

  if (cfg.weighting.kind == WeightingKind::TwoStepOptimal) {
    auto bound = efficiency_bound(est.jac.matrix, est.omega);
    diag.omega_pseudo_inverse = diag.omega_pseudo_inverse || bound.pseudo_inverse;
    est.vcov = bound.value / static_cast<double>(n);
  } else {
    est.vcov = sandwich_variance(est.jac.matrix, weight, est.omega) / static_cast<double>(n);
  }
  if (diag.omega_pseudo_inverse) diag.warnings.push_back("Omega-hat inverted with a pseudo-inverse");
  est.se = est.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return est;
}

}  // namespace auxgmm
