#ifndef AUXGMM_EXPR_HPP
#define AUXGMM_EXPR_HPP

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <vector>

namespace auxgmm {

/// A parsed arithmetic expression over covariates.
///
/// Grammar: numbers, variables `x1..xK` (1-based), `+ - * /`, unary minus,
/// parentheses and the functions exp, log, sin and cos. Evaluation against an
/// x-vector shorter than the largest referenced index throws DomainError.
class Expr {
 public:
  Expr() = default;
  static Expr parse(const std::string& source);
  static Expr constant(double value);

  double operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  const std::string& source() const noexcept { return source_; }
  /// Largest covariate index referenced (0 when none).
  int max_variable() const noexcept { return max_var_; }
  bool empty() const noexcept { return nodes_.empty(); }

 private:
  enum class Op { Const, Var, Add, Sub, Mul, Div, Neg, Exp, Log, Sin, Cos };
  struct Node {
    Op op;
    double value = 0.0;
    int lhs = -1;
    int rhs = -1;
  };
  friend class ExprParser;

  double eval(int node, const Eigen::Ref<const Eigen::VectorXd>& x) const;

  std::string source_;
  std::vector<Node> nodes_;
  int root_ = -1;
  int max_var_ = 0;
};

}  // namespace auxgmm

#endif  // AUXGMM_EXPR_HPP
