#include "auxgmm/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <utility>

#include "auxgmm/error.hpp"

namespace auxgmm {

// Recursive-descent parser producing a flat node array.
class ExprParser {
  static constexpr std::pair<const char*, Expr::Op> kFunctions[] = {
      {"exp", Expr::Op::Exp}, {"log", Expr::Op::Log}, {"sin", Expr::Op::Sin},
      {"cos", Expr::Op::Cos}};

 public:
  explicit ExprParser(const std::string& src) : src_(src) {}

  Expr run() {
    Expr e;
    e.source_ = src_;
    out_ = &e;
    e.root_ = parse_sum();
    skip_ws();
    if (pos_ != src_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorKind::ConfigError,
                "expression '" + src_ + "': " + msg + " at offset " + std::to_string(pos_));
  }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  int push(Expr::Op op, double value = 0.0, int lhs = -1, int rhs = -1) {
    out_->nodes_.push_back({op, value, lhs, rhs});
    return static_cast<int>(out_->nodes_.size()) - 1;
  }

  int parse_sum() {
    int lhs = parse_product();
    for (;;) {
      if (accept('+')) {
        lhs = push(Expr::Op::Add, 0.0, lhs, parse_product());
      } else if (accept('-')) {
        lhs = push(Expr::Op::Sub, 0.0, lhs, parse_product());
      } else {
        return lhs;
      }
    }
  }

  int parse_product() {
    int lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = push(Expr::Op::Mul, 0.0, lhs, parse_unary());
      } else if (accept('/')) {
        lhs = push(Expr::Op::Div, 0.0, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  int parse_unary() {
    if (accept('-')) return push(Expr::Op::Neg, 0.0, parse_unary());
    if (accept('+')) return parse_unary();
    return parse_primary();
  }

  int parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    if (accept('(')) {
      int inner = parse_sum();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = src_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("bad number");
      pos_ += static_cast<std::size_t>(end - begin);
      return push(Expr::Op::Const, v);
    }
    for (const auto& [name, op] : kFunctions) {
      const std::size_t len = std::char_traits<char>::length(name);
      if (src_.compare(pos_, len, name) == 0) {
        pos_ += len;
        if (!accept('(')) fail(std::string("expected '(' after ") + name);
        int inner = parse_sum();
        if (!accept(')')) fail("expected ')'");
        return push(op, 0.0, inner);
      }
    }
    if (c == 'x') {
      ++pos_;
      std::size_t start = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      if (start == pos_) fail("expected covariate index after 'x'");
      const int idx = std::stoi(src_.substr(start, pos_ - start));
      if (idx < 1) fail("covariate indices are 1-based");
      out_->max_var_ = std::max(out_->max_var_, idx);
      return push(Expr::Op::Var, static_cast<double>(idx - 1));
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  const std::string& src_;
  std::size_t pos_ = 0;
  Expr* out_ = nullptr;
};

Expr Expr::parse(const std::string& source) { return ExprParser(source).run(); }

Expr Expr::constant(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return parse(buf);
}

double Expr::operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (root_ < 0) throw Error(ErrorKind::DomainError, "evaluating an empty expression");
  if (x.size() < max_var_) {
    throw Error(ErrorKind::DomainError, "expression '" + source_ + "' references x" +
                                            std::to_string(max_var_) + " but x has " +
                                            std::to_string(x.size()) + " entries");
  }
  return eval(root_, x);
}

double Expr::eval(int node, const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const Node& n = nodes_[static_cast<std::size_t>(node)];
  switch (n.op) {
    case Op::Const: return n.value;
    case Op::Var: return x(static_cast<Eigen::Index>(n.value));
    case Op::Add: return eval(n.lhs, x) + eval(n.rhs, x);
    case Op::Sub: return eval(n.lhs, x) - eval(n.rhs, x);
    case Op::Mul: return eval(n.lhs, x) * eval(n.rhs, x);
    case Op::Div: return eval(n.lhs, x) / eval(n.rhs, x);
    case Op::Neg: return -eval(n.lhs, x);
    case Op::Exp: return std::exp(eval(n.lhs, x));
    case Op::Log: return std::log(eval(n.lhs, x));
    case Op::Sin: return std::sin(eval(n.lhs, x));
    case Op::Cos: return std::cos(eval(n.lhs, x));
  }
  return 0.0;
}

}  // namespace auxgmm
