#include "auxgmm/propensity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "auxgmm/error.hpp"

namespace auxgmm {

namespace {

constexpr int kMaxNewtonIterations = 200;
constexpr int kMaxHalvings = 50;
constexpr double kScoreTolerance = 1e-8;
// Newton keeps polishing below the reported tolerance while steps still help.
constexpr double kPolishTolerance = 1e-14;
constexpr double kSeparationIndex = 30.0;

double softplus(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

struct BinaryFit {
  Eigen::VectorXd coef;
  int iterations = 0;
  bool converged = false;
  double max_abs_index = 0.0;
};

// Weighted Bernoulli log-likelihood per unit weight; -inf outside the range.
double log_likelihood(Link link, const Eigen::MatrixXd& h, const Eigen::VectorXd& d,
                      const Eigen::VectorXd& w, const Eigen::VectorXd& coef) {
  const Eigen::VectorXd index = h * coef;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    if (w(i) == 0.0) continue;
    double lp = 0.0;
    double lq = 0.0;
    if (link == Link::Logit) {
      lp = -softplus(-index(i));
      lq = -softplus(index(i));
    } else {
      const double p = index(i);
      if (!(p > 0.0 && p < 1.0)) return -std::numeric_limits<double>::infinity();
      lp = std::log(p);
      lq = std::log1p(-p);
    }
    ll += w(i) * (d(i) * lp + (1.0 - d(i)) * lq);
  }
  return ll / w.sum();
}

void score_and_hessian(Link link, const Eigen::MatrixXd& h, const Eigen::VectorXd& d,
                       const Eigen::VectorXd& w, const Eigen::VectorXd& coef,
                       Eigen::VectorXd& grad, Eigen::MatrixXd& neg_hess) {
  const Eigen::VectorXd index = h * coef;
  Eigen::VectorXd g_weight(h.rows());
  Eigen::VectorXd h_weight(h.rows());
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    if (link == Link::Logit) {
      const double p = link_value(Link::Logit, index(i));
      g_weight(i) = w(i) * (d(i) - p);
      h_weight(i) = w(i) * p * (1.0 - p);
    } else {
      const double p = index(i);
      g_weight(i) = w(i) * (d(i) - p) / (p * (1.0 - p));
      h_weight(i) = w(i) * (d(i) / (p * p) + (1.0 - d(i)) / ((1.0 - p) * (1.0 - p)));
    }
  }
  const double total = w.sum();
  grad = h.transpose() * g_weight / total;
  neg_hess = h.transpose() * h_weight.asDiagonal() * h / total;
}

Eigen::VectorXd solve_pd(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max(a.trace() / static_cast<double>(a.rows()), 1e-300);
  for (double level : {0.0, 1e-10, 1e-8, 1e-6, 1e-4}) {
    Eigen::MatrixXd reg = a;
    reg.diagonal().array() += level * scale;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(reg);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.rcond() > 1e-13) {
      return ldlt.solve(b);
    }
  }
  throw Error(ErrorKind::FitDiverged, "propensity Hessian is singular");
}

BinaryFit fit_binary(Link link, const Eigen::MatrixXd& h, const Eigen::VectorXd& d,
                     const Eigen::VectorXd& w, Eigen::VectorXd coef) {
  BinaryFit fit;
  double ll = log_likelihood(link, h, d, w, coef);
  if (!std::isfinite(ll)) throw Error(ErrorKind::FitDiverged, "infeasible starting value");
  Eigen::VectorXd grad;
  Eigen::MatrixXd neg_hess;
  for (int it = 0; it <= kMaxNewtonIterations; ++it) {
    score_and_hessian(link, h, d, w, coef, grad, neg_hess);
    fit.iterations = it;
    if (grad.norm() < kPolishTolerance || it == kMaxNewtonIterations) break;
    const Eigen::VectorXd step = solve_pd(neg_hess, grad);
    // Inside the quadratic region the likelihood is flat to rounding, so the
    // line search cannot judge the step. Take it whole.
    if (grad.dot(step) < 1e-12) {
      const Eigen::VectorXd trial = coef + step;
      const double ll_trial = log_likelihood(link, h, d, w, trial);
      if (!std::isfinite(ll_trial)) break;
      Eigen::VectorXd g_trial;
      Eigen::MatrixXd h_trial;
      score_and_hessian(link, h, d, w, trial, g_trial, h_trial);
      if (!(g_trial.norm() < grad.norm())) break;
      coef = trial;
      ll = ll_trial;
      continue;
    }
    double t = 1.0;
    bool improved = false;
    for (int k = 0; k <= kMaxHalvings; ++k, t *= 0.5) {
      const Eigen::VectorXd trial = coef + t * step;
      const double ll_trial = log_likelihood(link, h, d, w, trial);
      if (std::isfinite(ll_trial) && ll_trial >= ll - 1e-15 * std::abs(ll)) {
        coef = trial;
        ll = ll_trial;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  score_and_hessian(link, h, d, w, coef, grad, neg_hess);
  fit.converged = grad.norm() < kScoreTolerance;
  fit.coef = std::move(coef);
  if (h.rows() > 0) fit.max_abs_index = (h * fit.coef).cwiseAbs().maxCoeff();
  return fit;
}

PropensityModel finish_binary(PropensityModel model, const BinaryFit& fit, Link link) {
  model.params = fit.coef;
  model.iterations = fit.iterations;
  const bool separated = link == Link::Logit && fit.max_abs_index > kSeparationIndex;
  if (separated) {
    model.warnings.push_back("SeparationWarning: |index| reaches " +
                             std::to_string(fit.max_abs_index) + "; fitted values are clipped");
  }
  if (!fit.converged && !separated) {
    throw Error(ErrorKind::FitDiverged, "propensity Newton iterations did not converge");
  }
  return model;
}

}  // namespace

const char* to_string(PropensityKind k) noexcept {
  switch (k) {
    case PropensityKind::Known: return "known";
    case PropensityKind::Parametric: return "logit";
    case PropensityKind::SieveLS: return "sieve-ls";
    case PropensityKind::SieveLogit: return "sieve-logit";
  }
  return "unknown";
}

PropensityKind parse_propensity_kind(const std::string& text) {
  if (text == "known") return PropensityKind::Known;
  if (text == "logit" || text == "parametric") return PropensityKind::Parametric;
  if (text == "sieve-ls") return PropensityKind::SieveLS;
  if (text == "sieve-logit") return PropensityKind::SieveLogit;
  throw Error(ErrorKind::ConfigError, "unknown propensity method '" + text + "'");
}

const char* to_string(Link l) noexcept { return l == Link::Logit ? "logit" : "identity"; }

Link parse_link(const std::string& text) {
  if (text == "logit") return Link::Logit;
  if (text == "identity") return Link::Identity;
  throw Error(ErrorKind::ConfigError, "unknown link '" + text + "'");
}

double link_value(Link link, double index) {
  if (link == Link::Identity) return index;
  return index >= 0 ? 1.0 / (1.0 + std::exp(-index)) : std::exp(index) / (1.0 + std::exp(index));
}

double link_derivative(Link link, double index) {
  if (link == Link::Identity) return 1.0;
  const double p = link_value(Link::Logit, index);
  return p * (1.0 - p);
}

ParametricFamily ParametricFamily::logit_linear(Eigen::Index d_x) {
  ParametricFamily f;
  f.link = Link::Logit;
  f.design.push_back(Expr::parse("1"));
  for (Eigen::Index k = 1; k <= d_x; ++k) f.design.push_back(Expr::parse("x" + std::to_string(k)));
  return f;
}

Eigen::VectorXd ParametricFamily::terms(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  Eigen::VectorXd h(dim());
  for (Eigen::Index k = 0; k < dim(); ++k) h(k) = design[static_cast<std::size_t>(k)](x);
  return h;
}

Eigen::MatrixXd ParametricFamily::term_matrix(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd h(x.rows(), dim());
  for (Eigen::Index i = 0; i < x.rows(); ++i) h.row(i) = terms(x.row(i).transpose()).transpose();
  return h;
}

PropensityModel known_propensity(std::function<double(const Eigen::VectorXd&)> fn, double clip,
                                 std::string source) {
  PropensityModel m;
  m.kind = PropensityKind::Known;
  m.known_fn = std::move(fn);
  m.known_source = std::move(source);
  m.clip = clip;
  return m;
}

PropensityModel known_propensity(const std::string& expression, double clip) {
  Expr e = Expr::parse(expression);
  return known_propensity([e](const Eigen::VectorXd& x) { return e(x); }, clip, expression);
}

double raw_propensity(const PropensityModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  switch (model.kind) {
    case PropensityKind::Known:
      return model.known_fn(x);
    case PropensityKind::Parametric:
      return link_value(model.family->link, model.family->terms(x).dot(model.params));
    case PropensityKind::SieveLS:
      return eval_basis(*model.basis, x).dot(model.params);
    case PropensityKind::SieveLogit:
      return link_value(Link::Logit, eval_basis(*model.basis, x).dot(model.params));
  }
  return 0.0;
}

double propensity_at(const PropensityModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return std::clamp(raw_propensity(model, x), model.clip, 1.0 - model.clip);
}

Eigen::VectorXd raw_propensity_rows(const PropensityModel& model, const Eigen::MatrixXd& x) {
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = raw_propensity(model, x.row(i).transpose());
  return out;
}

PropensityValues propensity_rows(const PropensityModel& model, const Eigen::MatrixXd& x) {
  PropensityValues out;
  out.values = raw_propensity_rows(model, x);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double v = out.values(i);
    const double c = std::clamp(v, model.clip, 1.0 - model.clip);
    if (c != v) ++out.clipped;
    out.values(i) = c;
  }
  return out;
}

Eigen::MatrixXd propensity_gradient_rows(const PropensityModel& model, const Eigen::MatrixXd& x) {
  if (model.kind != PropensityKind::Parametric || !model.family) {
    throw Error(ErrorKind::ConfigError, "propensity gradients need a parametric model");
  }
  const ParametricFamily& f = *model.family;
  Eigen::MatrixXd g(x.rows(), f.dim());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd h = f.terms(x.row(i).transpose());
    g.row(i) = link_derivative(f.link, h.dot(model.params)) * h.transpose();
  }
  return g;
}

PropensityModel fit_parametric(const ParametricFamily& family, const Eigen::MatrixXd& x,
                               const Eigen::VectorXd& d, const Eigen::VectorXd& weights,
                               double clip) {
  if (family.dim() < 1) throw Error(ErrorKind::ConfigError, "parametric family has no terms");
  const Eigen::MatrixXd h = family.term_matrix(x);
  Eigen::VectorXd start = Eigen::VectorXd::Zero(family.dim());
  if (family.link == Link::Identity) {
    // Weighted least squares of d, then of its mean, as feasible starting points.
    const Eigen::VectorXd sw = weights.cwiseSqrt();
    const Eigen::MatrixXd hw = sw.asDiagonal() * h;
    const double dbar = weights.dot(d) / weights.sum();
    auto feasible = [&](const Eigen::VectorXd& c) {
      const Eigen::VectorXd p = h * c;
      return (p.array() > 1e-6).all() && (p.array() < 1.0 - 1e-6).all();
    };
    auto ls = [&](const Eigen::VectorXd& target) -> Eigen::VectorXd {
      return hw.colPivHouseholderQr().solve(sw.asDiagonal() * target);
    };
    start = ls(d);
    if (!feasible(start)) start = ls(Eigen::VectorXd::Constant(d.size(), dbar));
    if (!feasible(start)) {
      throw Error(ErrorKind::FitDiverged, "no feasible start for the identity-link family");
    }
  }
  PropensityModel model;
  model.kind = PropensityKind::Parametric;
  model.family = family;
  model.clip = clip;
  return finish_binary(std::move(model), fit_binary(family.link, h, d, weights, start),
                       family.link);
}

PropensityModel fit_propensity(const PropensitySpec& spec, const Dataset& ds) {
  if (!(spec.clip >= 0.0 && spec.clip < 0.5)) {
    throw Error(ErrorKind::ConfigError, "propensity clip must lie in [0, 0.5)");
  }
  const Eigen::VectorXd d = ds.d().cast<double>();
  switch (spec.method) {
    case PropensityKind::Known: {
      if (spec.known.empty()) throw Error(ErrorKind::ConfigError, "known propensity needs 'known'");
      return known_propensity(spec.known, spec.clip);
    }
    case PropensityKind::Parametric: {
      ParametricFamily family =
          spec.family.design.empty() ? ParametricFamily::logit_linear(ds.d_x()) : spec.family;
      return fit_parametric(family, ds.x(), d, Eigen::VectorXd::Ones(ds.n()), spec.clip);
    }
    case PropensityKind::SieveLS: {
      SieveBasis basis = build_basis(spec.basis, ds.x());
      ProjectionFit fit = sieve_ls_fit(basis, ds.x(), d);
      PropensityModel model;
      model.kind = PropensityKind::SieveLS;
      model.params = fit.coeffs.col(0);
      model.warnings = basis.warnings;
      model.basis = std::move(basis);
      model.clip = spec.clip;
      return model;
    }
    case PropensityKind::SieveLogit: {
      SieveBasis basis = build_basis(spec.basis, ds.x());
      const Eigen::MatrixXd q = design_matrix(basis, ds.x());
      PropensityModel model;
      model.kind = PropensityKind::SieveLogit;
      model.warnings = basis.warnings;
      model.basis = std::move(basis);
      model.clip = spec.clip;
      const BinaryFit fit = fit_binary(Link::Logit, q, d, Eigen::VectorXd::Ones(ds.n()),
                                       Eigen::VectorXd::Zero(q.cols()));
      return finish_binary(std::move(model), fit, Link::Logit);
    }
  }
  throw Error(ErrorKind::ConfigError, "unhandled propensity method");
}

ScoreInfo score_info(const PropensityModel& model, const Dataset& ds) {
  if (model.kind != PropensityKind::Parametric) {
    throw Error(ErrorKind::ConfigError, "score_info needs a parametric propensity model");
  }
  const Eigen::VectorXd p = raw_propensity_rows(model, ds.x());
  const Eigen::MatrixXd grad = propensity_gradient_rows(model, ds.x());
  ScoreInfo out;
  out.scores.resize(ds.n(), grad.cols());
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    const double pi = p(i);
    if (!(pi > 0.0 && pi < 1.0)) {
      throw Error(ErrorKind::SingularInformation, "parametric propensity leaves (0, 1)");
    }
    out.scores.row(i) = (ds.d()(i) - pi) / (pi * (1.0 - pi)) * grad.row(i);
  }
  out.information = out.scores.transpose() * out.scores / static_cast<double>(ds.n());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.information, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 1e-10) {
    throw Error(ErrorKind::SingularInformation, "score information is not positive definite");
  }
  return out;
}

}  // namespace auxgmm
