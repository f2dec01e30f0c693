#include "auxgmm/sieve.hpp"

#include <algorithm>
#include <cmath>

#include "auxgmm/error.hpp"

namespace auxgmm {

namespace {

constexpr double kMinRcond = 1e-13;

Eigen::Index univariate_size(const SieveBasis& b, std::size_t coord) {
  const Eigen::Index knots =
      b.kind == BasisKind::PolySpline ? static_cast<Eigen::Index>(b.knots[coord].size()) : 0;
  return b.degree + knots;
}

double truncated_power(double x, double knot, int degree) {
  if (x <= knot) return 0.0;
  return degree == 0 ? 1.0 : std::pow(x - knot, degree);
}

// Non-constant univariate pieces for one coordinate.
void univariate_pieces(const SieveBasis& b, std::size_t coord, double x, double* out) {
  double power = 1.0;
  for (int p = 1; p <= b.degree; ++p) {
    power *= x;
    *out++ = power;
  }
  if (b.kind == BasisKind::PolySpline) {
    for (double knot : b.knots[coord]) *out++ = truncated_power(x, knot, b.degree);
  }
}

}  // namespace

const char* to_string(BasisKind k) noexcept {
  return k == BasisKind::PowerSeries ? "power" : "spline";
}

const char* to_string(Interaction i) noexcept {
  return i == Interaction::None ? "none" : "tensor";
}

int default_knot_count(Eigen::Index n) {
  return static_cast<int>(std::ceil(std::cbrt(static_cast<double>(n)) - 1e-12));
}

double empirical_quantile(std::vector<double> sample, double prob) {
  if (sample.empty()) throw Error(ErrorKind::InsufficientData, "quantile of an empty sample");
  std::sort(sample.begin(), sample.end());
  const double h = (static_cast<double>(sample.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sample.size() - 1);
  return sample[lo] + (h - static_cast<double>(lo)) * (sample[hi] - sample[lo]);
}

SieveBasis build_basis(const BasisSpec& spec, const Eigen::MatrixXd& x_sample) {
  if (spec.degree < 0) throw Error(ErrorKind::ConfigError, "basis degree must be >= 0");
  const Eigen::Index n = x_sample.rows();
  const Eigen::Index dx = x_sample.cols();
  if (dx < 1) throw Error(ErrorKind::InsufficientData, "basis needs at least one covariate");

  SieveBasis b;
  b.kind = spec.kind;
  b.degree = spec.degree;
  b.d_x = dx;
  b.interaction = spec.interaction;
  b.knots.assign(static_cast<std::size_t>(dx), {});

  for (Eigen::Index k = 0; k < dx; ++k) {
    const auto col = x_sample.col(k);
    if (n > 0 && col.maxCoeff() == col.minCoeff()) {
      b.warnings.push_back("DegenerateCovariate: x" + std::to_string(k + 1) +
                           " is constant in the fit sample");
    }
  }

  if (spec.kind == BasisKind::PolySpline) {
    if (!spec.knots.empty()) {
      if (static_cast<Eigen::Index>(spec.knots.size()) != dx) {
        throw Error(ErrorKind::ConfigError, "explicit knots must be given for every covariate");
      }
      for (std::size_t k = 0; k < spec.knots.size(); ++k) {
        auto knots = spec.knots[k];
        if (!std::is_sorted(knots.begin(), knots.end()) ||
            std::adjacent_find(knots.begin(), knots.end()) != knots.end()) {
          throw Error(ErrorKind::ConfigError, "explicit knots must be strictly increasing");
        }
        b.knots[k] = std::move(knots);
      }
    } else {
      const int count = spec.knot_count.value_or(default_knot_count(n));
      if (count < 0) throw Error(ErrorKind::ConfigError, "knot count must be >= 0");
      for (Eigen::Index k = 0; k < dx && n > 0; ++k) {
        std::vector<double> col(x_sample.col(k).data(), x_sample.col(k).data() + n);
        std::sort(col.begin(), col.end());
        std::vector<double> knots;
        for (int j = 1; j <= count; ++j) {
          knots.push_back(empirical_quantile(col, static_cast<double>(j) / (count + 1)));
        }
        knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
        if (static_cast<int>(knots.size()) < count && count > 0) {
          b.warnings.push_back("duplicate quantile knots removed for x" + std::to_string(k + 1) +
                               " (" + std::to_string(knots.size()) + " of " +
                               std::to_string(count) + " kept)");
        }
        b.knots[static_cast<std::size_t>(k)] = std::move(knots);
      }
    }
  }

  if (b.interaction == Interaction::None) {
    b.k_n = 1;
    for (std::size_t k = 0; k < b.knots.size(); ++k) b.k_n += univariate_size(b, k);
  } else {
    b.k_n = 1;
    for (std::size_t k = 0; k < b.knots.size(); ++k) {
      b.k_n *= 1 + univariate_size(b, k);
      if (b.k_n > spec.max_terms) {
        throw Error(ErrorKind::ConfigError, "tensor basis exceeds the budget of " +
                                                std::to_string(spec.max_terms) + " terms");
      }
    }
  }
  if (n < b.k_n) {
    throw Error(ErrorKind::InsufficientData, "basis has " + std::to_string(b.k_n) +
                                                 " terms but only " + std::to_string(n) +
                                                 " observations");
  }
  return b;
}

Eigen::VectorXd eval_basis(const SieveBasis& basis, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != basis.d_x) {
    throw Error(ErrorKind::ShapeMismatch, "eval_basis: x has the wrong dimension");
  }
  Eigen::VectorXd q(basis.k_n);
  if (basis.interaction == Interaction::None) {
    q(0) = 1.0;
    double* out = q.data() + 1;
    for (std::size_t k = 0; k < basis.knots.size(); ++k) {
      univariate_pieces(basis, k, x(static_cast<Eigen::Index>(k)), out);
      out += univariate_size(basis, k);
    }
    return q;
  }
  // Tensor products, first coordinate varying slowest.
  q(0) = 1.0;
  Eigen::Index filled = 1;
  for (std::size_t k = 0; k < basis.knots.size(); ++k) {
    const Eigen::Index m = univariate_size(basis, k);
    Eigen::VectorXd u(m + 1);
    u(0) = 1.0;
    univariate_pieces(basis, k, x(static_cast<Eigen::Index>(k)), u.data() + 1);
    Eigen::VectorXd next(filled * (m + 1));
    for (Eigen::Index a = 0; a < filled; ++a) {
      for (Eigen::Index c = 0; c <= m; ++c) next(a * (m + 1) + c) = q(a) * u(c);
    }
    q.head(next.size()) = next;
    filled = next.size();
  }
  return q;
}

Eigen::MatrixXd design_matrix(const SieveBasis& basis, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd q(x.rows(), basis.k_n);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    q.row(i) = eval_basis(basis, x.row(i).transpose()).transpose();
  }
  return q;
}

SieveProjector::SieveProjector(SieveBasis basis, const Eigen::MatrixXd& x_sample)
    : basis_(std::move(basis)), design_(design_matrix(basis_, x_sample)) {
  if (design_.rows() < 1) throw Error(ErrorKind::InsufficientData, "empty fit sample");
  const Eigen::MatrixXd gram = design_.transpose() * design_;
  const double scale = gram.trace() / static_cast<double>(basis_.k_n);
  for (double level : kRidgeLadder) {
    const double ridge = level * scale;
    Eigen::MatrixXd a = gram;
    a.diagonal().array() += ridge;
    llt_.compute(a);
    if (llt_.info() == Eigen::Success && llt_.rcond() > kMinRcond) {
      ridge_ = ridge;
      return;
    }
  }
  throw Error(ErrorKind::SingularDesign,
              "sieve design is singular at every regularization level");
}

ProjectionFit SieveProjector::fit(const Eigen::MatrixXd& targets) const {
  if (targets.rows() != design_.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "sieve fit: targets and covariates disagree on n");
  }
  ProjectionFit f;
  f.basis = basis_;
  f.coeffs = llt_.solve(design_.transpose() * targets);
  f.ridge = ridge_;
  f.n_fit = design_.rows();
  return f;
}

Eigen::MatrixXd SieveProjector::solve(const Eigen::MatrixXd& rhs) const { return llt_.solve(rhs); }

ProjectionFit sieve_ls_fit(const SieveBasis& basis, const Eigen::MatrixXd& x_sample,
                           const Eigen::MatrixXd& targets) {
  return SieveProjector(basis, x_sample).fit(targets);
}

Eigen::VectorXd predict(const ProjectionFit& fit, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return fit.coeffs.transpose() * eval_basis(fit.basis, x);
}

Eigen::MatrixXd predict_rows(const ProjectionFit& fit, const Eigen::MatrixXd& x) {
  return design_matrix(fit.basis, x) * fit.coeffs;
}

}  // namespace auxgmm
