#include "auxgmm/moments.hpp"

#include <cmath>

#include "auxgmm/error.hpp"

namespace auxgmm {

namespace {

constexpr double kDefaultBound = 1e6;

}  // namespace

bool MomentModel::in_box(const Eigen::VectorXd& beta) const {
  return beta.size() == d_beta && (beta.array() >= lower.array()).all() &&
         (beta.array() <= upper.array()).all();
}

void MomentModel::check() const {
  if (d_beta < 1 || d_m < d_beta) {
    throw Error(ErrorKind::ConfigError, "moment model needs d_m >= d_beta >= 1");
  }
  if (!eval) throw Error(ErrorKind::ConfigError, "moment model has no evaluation function");
  if (lower.size() != d_beta || upper.size() != d_beta || (lower.array() >= upper.array()).any()) {
    throw Error(ErrorKind::ConfigError, "moment model box is malformed");
  }
  if (location_part && d_m != d_beta) {
    throw Error(ErrorKind::ConfigError, "location-form models must be exactly identified");
  }
}

MomentModel cdf_model(std::vector<double> thresholds) {
  if (thresholds.empty()) throw Error(ErrorKind::ConfigError, "cdf model needs thresholds");
  const auto k = static_cast<Eigen::Index>(thresholds.size());
  MomentModel m;
  m.name = "cdf";
  m.d_m = k;
  m.d_beta = k;
  m.smooth = false;
  m.thresholds = thresholds;
  m.location_part = [thresholds](const Eigen::VectorXd& y, const Eigen::VectorXd&) {
    Eigen::VectorXd g(static_cast<Eigen::Index>(thresholds.size()));
    for (std::size_t j = 0; j < thresholds.size(); ++j) {
      g(static_cast<Eigen::Index>(j)) = y(0) <= thresholds[j] ? 1.0 : 0.0;
    }
    return g;
  };
  m.eval = [g = m.location_part](const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& beta) -> Eigen::VectorXd {
    return g(y, x) - beta;
  };
  m.lower = Eigen::VectorXd::Zero(k);
  m.upper = Eigen::VectorXd::Ones(k);
  return m;
}

MomentModel mean_model(Eigen::Index d_y) {
  MomentModel m;
  m.name = "mean";
  m.d_m = d_y;
  m.d_beta = d_y;
  m.location_part = [](const Eigen::VectorXd& y, const Eigen::VectorXd&) -> Eigen::VectorXd {
    return y;
  };
  m.eval = [](const Eigen::VectorXd& y, const Eigen::VectorXd&,
              const Eigen::VectorXd& beta) -> Eigen::VectorXd { return y - beta; };
  m.analytic_jac = [d_y](const Eigen::VectorXd&, const Eigen::VectorXd&,
                         const Eigen::VectorXd&) -> Eigen::MatrixXd {
    return -Eigen::MatrixXd::Identity(d_y, d_y);
  };
  m.lower = Eigen::VectorXd::Constant(d_y, -kDefaultBound);
  m.upper = Eigen::VectorXd::Constant(d_y, kDefaultBound);
  return m;
}

Eigen::VectorXd regressor_vector(const std::vector<std::string>& regressors,
                                 const Eigen::VectorXd& x) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(regressors.size()));
  for (std::size_t k = 0; k < regressors.size(); ++k) {
    const std::string& name = regressors[k];
    if (name == "1") {
      r(static_cast<Eigen::Index>(k)) = 1.0;
      continue;
    }
    const int idx = std::stoi(name.substr(1));
    if (idx < 1 || idx > x.size()) {
      throw Error(ErrorKind::DomainError, "regressor '" + name + "' is out of range");
    }
    r(static_cast<Eigen::Index>(k)) = x(idx - 1);
  }
  return r;
}

MomentModel linreg_model(std::vector<std::string> regressors) {
  if (regressors.empty()) throw Error(ErrorKind::ConfigError, "linreg needs regressors");
  for (const auto& name : regressors) {
    const bool ok = name == "1" || (name.size() >= 2 && name[0] == 'x' &&
                                    name.find_first_not_of("0123456789", 1) == std::string::npos);
    if (!ok) throw Error(ErrorKind::ConfigError, "bad regressor name '" + name + "'");
  }
  const auto k = static_cast<Eigen::Index>(regressors.size());
  MomentModel m;
  m.name = "linreg";
  m.d_m = k;
  m.d_beta = k;
  m.regressors = regressors;
  m.eval = [regressors](const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& beta) -> Eigen::VectorXd {
    const Eigen::VectorXd r = regressor_vector(regressors, x);
    return r * (y(0) - r.dot(beta));
  };
  m.analytic_jac = [regressors](const Eigen::VectorXd&, const Eigen::VectorXd& x,
                                const Eigen::VectorXd&) -> Eigen::MatrixXd {
    const Eigen::VectorXd r = regressor_vector(regressors, x);
    return -r * r.transpose();
  };
  m.lower = Eigen::VectorXd::Constant(k, -kDefaultBound);
  m.upper = Eigen::VectorXd::Constant(k, kDefaultBound);
  return m;
}

Eigen::VectorXd eval_moment(const MomentModel& model, const ObservationRecord& z,
                            const Eigen::VectorXd& beta) {
  if (!model.in_box(beta)) throw Error(ErrorKind::DomainError, "beta lies outside the box B");
  if (!z.y) throw Error(ErrorKind::MissingOutcome, "moment evaluation needs an observed y");
  return model.eval(*z.y, z.x, beta);
}

Eigen::MatrixXd moment_matrix(const MomentModel& model, const Dataset& ds,
                              const std::vector<Eigen::Index>& rows, const Eigen::VectorXd& beta) {
  if (!model.in_box(beta)) throw Error(ErrorKind::DomainError, "beta lies outside the box B");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), model.d_m);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Eigen::Index i = rows[k];
    if (!ds.has_y(i)) throw Error(ErrorKind::MissingOutcome, "moment evaluation needs an observed y");
    out.row(static_cast<Eigen::Index>(k)) =
        model.eval(ds.y().row(i).transpose(), ds.x().row(i).transpose(), beta).transpose();
  }
  return out;
}

JacobianEstimate moment_jacobian(const MomentModel& model, const AveragedMoment& averaged_moment,
                                 const Eigen::VectorXd& beta, double step,
                                 const AveragedJacobian& averaged_analytic) {
  JacobianEstimate out;
  if (model.is_location_form()) {
    out.matrix = -Eigen::MatrixXd::Identity(model.d_m, model.d_beta);
  } else if (averaged_analytic) {
    out.matrix = averaged_analytic(beta);
  } else {
    out.method = JacobianEstimate::Method::CentralDifference;
    out.matrix.resize(model.d_m, model.d_beta);
    for (Eigen::Index k = 0; k < model.d_beta; ++k) {
      const double h = step * std::max(1.0, std::abs(beta(k)));
      Eigen::VectorXd up = beta;
      Eigen::VectorXd down = beta;
      up(k) += h;
      down(k) -= h;
      if (up(k) > model.upper(k) || down(k) < model.lower(k)) {
        throw Error(ErrorKind::DomainError,
                    "finite-difference Jacobian needs beta interior to B by the step");
      }
      out.matrix.col(k) = (averaged_moment(up) - averaged_moment(down)) / (2.0 * h);
    }
  }
  if (!out.matrix.allFinite()) throw Error(ErrorKind::RankDeficient, "Jacobian is not finite");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(out.matrix);
  const auto& sv = svd.singularValues();
  if (sv.size() < model.d_beta || !(sv(0) > 0.0) || sv(sv.size() - 1) < 1e-8 * sv(0)) {
    throw Error(ErrorKind::RankDeficient, "Jacobian does not have full column rank");
  }
  return out;
}

}  // namespace auxgmm
