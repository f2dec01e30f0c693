#include "auxgmm/bounds.hpp"

#include "auxgmm/error.hpp"

namespace auxgmm {

namespace {

Eigen::Index triangle_size(Eigen::Index d) { return d * (d + 1) / 2; }

Eigen::MatrixXd second_moment_targets(const Eigen::MatrixXd& m) {
  const Eigen::Index d = m.cols();
  Eigen::MatrixXd out(m.rows(), triangle_size(d));
  Eigen::Index c = 0;
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index k = j; k < d; ++k) out.col(c++) = m.col(j).cwiseProduct(m.col(k));
  }
  return out;
}

std::vector<Eigen::Index> auxiliary_rows(const Dataset& ds) { return split_samples(ds).auxiliary; }

double row_weight(const Eigen::VectorXd& weights, Eigen::Index i, Eigen::Index n) {
  return weights.size() == 0 ? 1.0 / static_cast<double>(n) : weights(i);
}

Eigen::MatrixXd information_inverse(const Eigen::MatrixXd& info) {
  auto inv = sym_inverse(info, 1e-12);
  if (inv.pseudo_inverse) {
    throw Error(ErrorKind::SingularInformation, "score information is singular");
  }
  return inv.value;
}

const ScoreInfo& require_score(const ScoreInfo* score, const char* what) {
  if (score == nullptr) {
    throw Error(ErrorKind::ConfigError, std::string(what) + " needs the propensity score information");
  }
  return *score;
}

}  // namespace

const char* to_string(BoundKind k) noexcept {
  switch (k) {
    case BoundKind::Omega1: return "omega1";
    case BoundKind::Omega2: return "omega2";
    case BoundKind::Omega1Known: return "omega1_known";
    case BoundKind::OmegaParam: return "omega_param";
  }
  return "unknown";
}

const char* to_string(InfluenceKind k) noexcept {
  switch (k) {
    case InfluenceKind::EffOut_F1: return "eff_out_f1";
    case InfluenceKind::EffIn_F2: return "eff_in_f2";
    case InfluenceKind::EffOutKnown: return "eff_out_known";
    case InfluenceKind::EffOutParam: return "eff_out_param";
    case InfluenceKind::CEPOut: return "cep_out";
    case InfluenceKind::CEPIn: return "cep_in";
    case InfluenceKind::IPWOut: return "ipw_out";
    case InfluenceKind::IPWIn: return "ipw_in";
    case InfluenceKind::IPWOutKnown: return "ipw_out_known";
    case InfluenceKind::IPWInKnown: return "ipw_in_known";
    case InfluenceKind::IPWOutParam: return "ipw_out_param";
    case InfluenceKind::IPWInParam: return "ipw_in_param";
  }
  return "unknown";
}

CondMomentFit fit_cond_moments(const MomentModel& moment, const Eigen::VectorXd& beta,
                               const Dataset& ds, const SieveProjector& auxiliary_projector) {
  const auto rows = auxiliary_rows(ds);
  const Eigen::MatrixXd m = moment_matrix(moment, ds, rows, beta);
  CondMomentFit cm;
  cm.d_m = moment.d_m;
  cm.beta_at = beta;
  cm.mean_fit = auxiliary_projector.fit(m);
  cm.second_fit = auxiliary_projector.fit(second_moment_targets(m));
  return cm;
}

CondMomentFit fit_cond_moments(const MomentModel& moment, const Eigen::VectorXd& beta,
                               const Dataset& ds, const SieveBasis& basis) {
  const auto rows = auxiliary_rows(ds);
  Eigen::MatrixXd xa(static_cast<Eigen::Index>(rows.size()), ds.d_x());
  for (std::size_t k = 0; k < rows.size(); ++k) xa.row(static_cast<Eigen::Index>(k)) = ds.x().row(rows[k]);
  return fit_cond_moments(moment, beta, ds, SieveProjector(basis, xa));
}

CondMomentValues eval_cond_moments(const CondMomentFit& cm, const Eigen::MatrixXd& x) {
  CondMomentValues out;
  out.e = predict_rows(cm.mean_fit, x);
  const Eigen::MatrixXd second = predict_rows(cm.second_fit, x);
  const Eigen::Index d = cm.d_m;
  out.v.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::MatrixXd s(d, d);
    Eigen::Index c = 0;
    for (Eigen::Index j = 0; j < d; ++j) {
      for (Eigen::Index k = j; k < d; ++k, ++c) s(j, k) = s(k, j) = second(i, c);
    }
    Eigen::MatrixXd v = s - out.e.row(i).transpose() * out.e.row(i);
    v = symmetrize(v);
    if (d == 1) {
      if (v(0, 0) < 0.0) {
        v(0, 0) = 0.0;
        ++out.floored;
      }
    } else {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v);
      if (es.eigenvalues().minCoeff() < 0.0) {
        v = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() *
            es.eigenvectors().transpose();
        ++out.floored;
      }
    }
    out.v.push_back(std::move(v));
  }
  return out;
}

Eigen::MatrixXd omega_from_inputs(BoundKind kind, const OmegaInputs& in) {
  const Eigen::Index n = in.e.rows();
  const Eigen::Index d = in.e.cols();
  if (static_cast<Eigen::Index>(in.v.size()) != n || in.p_x.size() != n ||
      (in.weights.size() != 0 && in.weights.size() != n)) {
    throw Error(ErrorKind::ShapeMismatch, "omega inputs disagree on the number of rows");
  }
  const double p = in.p;
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = row_weight(in.weights, i, n);
    const double px = in.p_x(i);
    const Eigen::VectorXd e = in.e.row(i).transpose();
    switch (kind) {
      case BoundKind::Omega1:
        omega += w * (px * px / (p * p * (1.0 - px)) * in.v[static_cast<std::size_t>(i)] +
                      px / (p * p) * e * e.transpose());
        break;
      case BoundKind::Omega2:
        omega += w * (in.v[static_cast<std::size_t>(i)] / (1.0 - px) + e * e.transpose());
        break;
      case BoundKind::Omega1Known:
      case BoundKind::OmegaParam:
        omega += w * (px * px / (p * p * (1.0 - px)) * in.v[static_cast<std::size_t>(i)] +
                      px * px / (p * p) * e * e.transpose());
        break;
    }
  }
  if (kind == BoundKind::OmegaParam) {
    if (in.p_grad.rows() != n || in.information.rows() != in.p_grad.cols()) {
      throw Error(ErrorKind::ShapeMismatch, "OmegaParam needs propensity gradients and information");
    }
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, in.p_grad.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      g += row_weight(in.weights, i, n) / p * in.e.row(i).transpose() * in.p_grad.row(i);
    }
    omega += g * information_inverse(in.information) * g.transpose();
  }
  return symmetrize(omega);
}

Eigen::MatrixXd estimate_omega(BoundKind kind, const CondMomentFit& cm,
                               const PropensityModel& pmodel, double phat, const Dataset& ds) {
  CondMomentValues values = eval_cond_moments(cm, ds.x());
  OmegaInputs in;
  in.e = std::move(values.e);
  in.v = std::move(values.v);
  in.p_x = propensity_rows(pmodel, ds.x()).values;
  in.p = phat;
  if (kind == BoundKind::OmegaParam) {
    // Expected information at the fitted p. Against the outer product of the
    // scores this keeps Omega1 - OmegaParam PSD in every sample.
    in.p_grad = propensity_gradient_rows(pmodel, ds.x());
    const Eigen::VectorXd raw = raw_propensity_rows(pmodel, ds.x());
    if (!((raw.array() > 0.0).all() && (raw.array() < 1.0).all())) {
      throw Error(ErrorKind::SingularInformation, "parametric propensity leaves (0, 1)");
    }
    const Eigen::VectorXd w = (raw.array() * (1.0 - raw.array())).inverse().matrix();
    in.information =
        in.p_grad.transpose() * w.asDiagonal() * in.p_grad / static_cast<double>(ds.n());
  }
  return omega_from_inputs(kind, in);
}

Eigen::MatrixXd influence_values(InfluenceKind kind, const CondMomentFit& cm,
                                 const PropensityModel& pmodel, double phat,
                                 const ScoreInfo* score, const Dataset& ds,
                                 const MomentModel& moment, const Eigen::VectorXd& beta) {
  const Eigen::Index n = ds.n();
  const Eigen::MatrixXd e = predict_rows(cm.mean_fit, ds.x());
  const Eigen::VectorXd px = propensity_rows(pmodel, ds.x()).values;
  const double p = phat;

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, moment.d_m);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (ds.d()(i) == 0) {
      m.row(i) = moment.eval(ds.y().row(i).transpose(), ds.x().row(i).transpose(), beta).transpose();
    }
  }

  Eigen::MatrixXd psi(n, moment.d_m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = ds.d()(i);
    const double q = px(i);
    const auto ei = e.row(i);
    const auto mi = m.row(i);
    switch (kind) {
      case InfluenceKind::CEPOut:
        psi.row(i) = d * ei / p + (1.0 - d) * q / (p * (1.0 - q)) * (mi - ei);
        break;
      case InfluenceKind::IPWOut:
        psi.row(i) = ((1.0 - d) * mi * q / (1.0 - q) + ei * (d - q) / (1.0 - q)) / p;
        break;
      case InfluenceKind::EffOut_F1:
        psi.row(i) = (1.0 - d) / p * q / (1.0 - q) * (mi - ei) + ei / p * d;
        break;
      case InfluenceKind::CEPIn:
        psi.row(i) = ei + (1.0 - d) / (1.0 - q) * (mi - ei);
        break;
      case InfluenceKind::IPWIn:
        psi.row(i) = (1.0 - d) * mi / (1.0 - q) + ei * (d - q) / (1.0 - q);
        break;
      case InfluenceKind::EffIn_F2:
        psi.row(i) = (1.0 - d) / (1.0 - q) * (mi - ei) + ei;
        break;
      case InfluenceKind::EffOutKnown:
      case InfluenceKind::EffOutParam:
        psi.row(i) = (1.0 - d) / p * q / (1.0 - q) * (mi - ei) + ei / p * q;
        break;
      case InfluenceKind::IPWOutKnown:
      case InfluenceKind::IPWOutParam:
        psi.row(i) = (1.0 - d) * mi * q / ((1.0 - q) * p);
        break;
      case InfluenceKind::IPWInKnown:
      case InfluenceKind::IPWInParam:
        psi.row(i) = (1.0 - d) * mi / (1.0 - q);
        break;
    }
  }

  const bool parametric = kind == InfluenceKind::EffOutParam ||
                          kind == InfluenceKind::IPWOutParam || kind == InfluenceKind::IPWInParam;
  if (parametric) {
    const ScoreInfo& s = require_score(score, to_string(kind));
    const Eigen::MatrixXd grad = propensity_gradient_rows(pmodel, ds.x());
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(moment.d_m, grad.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      const double q = px(i);
      double factor = 0.0;
      Eigen::VectorXd level;
      if (kind == InfluenceKind::EffOutParam) {
        level = e.row(i).transpose();
        factor = 1.0 / p;
      } else {
        level = m.row(i).transpose();
        factor = (1.0 - ds.d()(i)) / ((1.0 - q) * (1.0 - q));
        if (kind == InfluenceKind::IPWOutParam) factor /= p;
      }
      g += factor * level * grad.row(i);
    }
    g /= static_cast<double>(n);
    psi += s.scores * (g * information_inverse(s.information)).transpose();
  }
  return psi;
}

Eigen::MatrixXd omega_from_influence(const Eigen::MatrixXd& psi) {
  if (psi.rows() == 0) throw Error(ErrorKind::InsufficientData, "no influence values");
  return symmetrize(psi.transpose() * psi / static_cast<double>(psi.rows()));
}

}  // namespace auxgmm
