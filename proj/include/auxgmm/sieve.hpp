#ifndef AUXGMM_SIEVE_HPP
#define AUXGMM_SIEVE_HPP

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace auxgmm {

enum class BasisKind { PowerSeries, PolySpline };
enum class Interaction { None, FullTensor };

const char* to_string(BasisKind k) noexcept;
const char* to_string(Interaction i) noexcept;

/// User-facing description of a series basis. Knots are placed from data
/// unless given explicitly.
struct BasisSpec {
  BasisKind kind = BasisKind::PolySpline;
  int degree = 3;
  std::optional<int> knot_count;              // per coordinate; default ceil(n^(1/3))
  std::vector<std::vector<double>> knots;     // explicit knots per coordinate
  Interaction interaction = Interaction::None;
  Eigen::Index max_terms = 400;               // guard for FullTensor products
};

/// A concrete basis q^{k_n}(x). Univariate pieces per coordinate are
/// x, x^2, ..., x^degree followed by truncated powers max(x - knot, 0)^degree.
/// The additive form stacks the pieces after a leading constant; the tensor
/// form takes all products of the per-coordinate (1, pieces...) vectors.
struct SieveBasis {
  BasisKind kind = BasisKind::PowerSeries;
  int degree = 0;
  std::vector<std::vector<double>> knots;
  Eigen::Index d_x = 0;
  Eigen::Index k_n = 1;
  Interaction interaction = Interaction::None;
  std::vector<std::string> warnings;
};

/// ceil(n^(1/3)).
int default_knot_count(Eigen::Index n);

/// Type-7 empirical quantile of a sample (linear interpolation).
double empirical_quantile(std::vector<double> sample, double prob);

SieveBasis build_basis(const BasisSpec& spec, const Eigen::MatrixXd& x_sample);

Eigen::VectorXd eval_basis(const SieveBasis& basis, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Rows are eval_basis of each row of x.
Eigen::MatrixXd design_matrix(const SieveBasis& basis, const Eigen::MatrixXd& x);

struct ProjectionFit {
  SieveBasis basis;
  Eigen::MatrixXd coeffs;  // k_n x d_target
  double ridge = 0.0;
  Eigen::Index n_fit = 0;
};

/// The factorized normal equations (Q'Q + ridge I) for one design. Reused when
/// many target sets are projected onto the same covariates.
class SieveProjector {
 public:
  SieveProjector(SieveBasis basis, const Eigen::MatrixXd& x_sample);

  /// Ridge multipliers tried in order, scaled by trace(Q'Q)/k_n.
  static constexpr double kRidgeLadder[] = {0.0, 1e-10, 1e-8, 1e-6};

  ProjectionFit fit(const Eigen::MatrixXd& targets) const;
  /// (Q'Q + ridge I)^-1 rhs.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;

  const SieveBasis& basis() const noexcept { return basis_; }
  const Eigen::MatrixXd& design() const noexcept { return design_; }
  double ridge() const noexcept { return ridge_; }

 private:
  SieveBasis basis_;
  Eigen::MatrixXd design_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double ridge_ = 0.0;
};

ProjectionFit sieve_ls_fit(const SieveBasis& basis, const Eigen::MatrixXd& x_sample,
                           const Eigen::MatrixXd& targets);

Eigen::VectorXd predict(const ProjectionFit& fit, const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::MatrixXd predict_rows(const ProjectionFit& fit, const Eigen::MatrixXd& x);

}  // namespace auxgmm

#endif  // AUXGMM_SIEVE_HPP
