#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "semiflow/dual.hpp"
#include "semiflow/errors.hpp"

namespace semiflow {

// Scalar expressions over x1..xd, parsed from text or built programmatically.
//
// Grammar (whitespace between tokens is ignored):
//
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := '-' unary | power
//   power  := atom ('^' unary)?
//   atom   := NUMBER | VARIABLE | FUNCTION '(' expr ')' | '(' expr ')'
//
// '^' binds tighter than unary minus and associates to the right, so
// -x^2 == -(x^2) and 2^3^2 == 2^(3^2). Functions: sin cos exp log sqrt
// atan abs tanh. Variables: x1..xd; for d == 1 the aliases 'x' and 'r'
// are also accepted. Implicit multiplication is not supported.

enum class ExprOp : std::uint8_t {
  literal,
  variable,
  add,
  sub,
  mul,
  div,
  pow,
  neg,
  fn_sin,
  fn_cos,
  fn_exp,
  fn_log,
  fn_sqrt,
  fn_atan,
  fn_abs,
  fn_tanh,
};

namespace detail {

struct ExprNode;
using NodePtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  ExprOp op;
  std::size_t pos = 0;   // byte offset in the source, 0 for built nodes
  double value = 0.0;    // literal payload
  int index = 0;         // variable payload, 0-based
  NodePtr lhs, rhs;
};

inline const char* op_name(ExprOp op) {
  switch (op) {
    case ExprOp::add: return "+";
    case ExprOp::sub: return "-";
    case ExprOp::mul: return "*";
    case ExprOp::div: return "/";
    case ExprOp::pow: return "^";
    case ExprOp::neg: return "-";
    case ExprOp::fn_sin: return "sin";
    case ExprOp::fn_cos: return "cos";
    case ExprOp::fn_exp: return "exp";
    case ExprOp::fn_log: return "log";
    case ExprOp::fn_sqrt: return "sqrt";
    case ExprOp::fn_atan: return "atan";
    case ExprOp::fn_abs: return "abs";
    case ExprOp::fn_tanh: return "tanh";
    default: return "?";
  }
}

inline double pow_checked(double a, double b, std::size_t pos) {
  const bool int_exp = b == std::nearbyint(b) && std::abs(b) < 1e15;
  if (a == 0.0) {
    if (b < 0.0) throw EvalError("^", pos);
    return b == 0.0 ? 1.0 : 0.0;
  }
  if (a < 0.0 && !int_exp) throw EvalError("^", pos);
  return std::pow(a, b);
}

inline Dual pow_checked(Dual a, Dual b, std::size_t pos) {
  const double va = a.val, vb = b.val;
  const bool int_exp = vb == std::nearbyint(vb) && std::abs(vb) < 1e15;
  if (b.der == 0.0) {  // exponent locally constant along the seed direction
    if (va == 0.0) {
      if (vb < 0.0) throw EvalError("^", pos);
      if (vb == 0.0) return {1.0, 0.0};
      if (vb >= 1.0) return {0.0, vb == 1.0 ? a.der : 0.0};
      if (a.der != 0.0) throw DerivativeError("^", pos);  // 0 < vb < 1: infinite slope
      return {0.0, 0.0};
    }
    if (va < 0.0 && !int_exp) throw EvalError("^", pos);
    const double v = std::pow(va, vb);
    const double d = vb == 0.0 ? 0.0 : vb * std::pow(va, vb - 1.0) * a.der;
    return {v, d};
  }
  if (va <= 0.0) throw DerivativeError("^", pos);
  const double v = std::pow(va, vb);
  return {v, v * (b.der * std::log(va) + vb * a.der / va)};
}

template <class T>
T eval_node(const ExprNode& n, std::span<const T> pt) {
  constexpr bool dual = std::is_same_v<T, Dual>;
  using std::atan, std::cos, std::exp, std::log, std::sin, std::sqrt, std::tanh;
  auto guard = [&](T v) -> T {
    if (std::isnan(value_of(v))) throw EvalError(op_name(n.op), n.pos);
    return v;
  };
  switch (n.op) {
    case ExprOp::literal: return T(n.value);
    case ExprOp::variable: return pt[static_cast<std::size_t>(n.index)];
    case ExprOp::add: return guard(eval_node(*n.lhs, pt) + eval_node(*n.rhs, pt));
    case ExprOp::sub: return guard(eval_node(*n.lhs, pt) - eval_node(*n.rhs, pt));
    case ExprOp::mul: return guard(eval_node(*n.lhs, pt) * eval_node(*n.rhs, pt));
    case ExprOp::div: {
      T den = eval_node(*n.rhs, pt);
      if (value_of(den) == 0.0) throw EvalError("/", n.pos);
      return guard(eval_node(*n.lhs, pt) / den);
    }
    case ExprOp::pow: return guard(pow_checked(eval_node(*n.lhs, pt), eval_node(*n.rhs, pt), n.pos));
    case ExprOp::neg: return -eval_node(*n.lhs, pt);
    case ExprOp::fn_sin: return sin(eval_node(*n.lhs, pt));
    case ExprOp::fn_cos: return cos(eval_node(*n.lhs, pt));
    case ExprOp::fn_exp: return exp(eval_node(*n.lhs, pt));
    case ExprOp::fn_log: {
      T a = eval_node(*n.lhs, pt);
      if (!(value_of(a) > 0.0)) throw EvalError("log", n.pos);
      return log(a);
    }
    case ExprOp::fn_sqrt: {
      T a = eval_node(*n.lhs, pt);
      if (value_of(a) < 0.0) throw EvalError("sqrt", n.pos);
      if constexpr (dual) {
        if (a.val == 0.0) {
          if (a.der != 0.0) throw DerivativeError("sqrt", n.pos);
          return T{0.0};
        }
      }
      return sqrt(a);
    }
    case ExprOp::fn_atan: return atan(eval_node(*n.lhs, pt));
    case ExprOp::fn_abs: {
      T a = eval_node(*n.lhs, pt);
      if constexpr (dual) {
        if (a.val == 0.0) {
          if (a.der != 0.0) throw DerivativeError("abs", n.pos);
          return T{0.0};
        }
        return a.val < 0.0 ? -a : a;
      } else {
        return std::abs(a);
      }
    }
    case ExprOp::fn_tanh: return tanh(eval_node(*n.lhs, pt));
  }
  throw EvalError("?", n.pos);  // unreachable
}

inline std::string format_double(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

// Precedence levels used by the printer; parenthesization preserves the
// tree exactly so reparsing reproduces the same evaluation order.
inline int precedence(const ExprNode& n) {
  switch (n.op) {
    case ExprOp::add:
    case ExprOp::sub: return 1;
    case ExprOp::mul:
    case ExprOp::div: return 2;
    case ExprOp::neg: return 3;
    case ExprOp::pow: return 4;
    case ExprOp::literal: return n.value < 0.0 ? 3 : 5;
    default: return 5;
  }
}

inline void print_node(const ExprNode& n, std::string& out) {
  auto child = [&out](const ExprNode& c, bool parens) {
    if (parens) out += '(';
    print_node(c, out);
    if (parens) out += ')';
  };
  const int p = precedence(n);
  switch (n.op) {
    case ExprOp::literal: out += format_double(n.value); return;
    case ExprOp::variable: out += "x" + std::to_string(n.index + 1); return;
    case ExprOp::add:
    case ExprOp::sub:
      child(*n.lhs, precedence(*n.lhs) < p);
      out += n.op == ExprOp::add ? " + " : " - ";
      child(*n.rhs, precedence(*n.rhs) <= p);
      return;
    case ExprOp::mul:
    case ExprOp::div:
      child(*n.lhs, precedence(*n.lhs) < p);
      out += n.op == ExprOp::mul ? "*" : "/";
      child(*n.rhs, precedence(*n.rhs) <= p);
      return;
    case ExprOp::pow:
      child(*n.lhs, precedence(*n.lhs) <= p);
      out += '^';
      child(*n.rhs, precedence(*n.rhs) < p);
      return;
    case ExprOp::neg:
      out += '-';
      child(*n.lhs, precedence(*n.lhs) < p);
      return;
    default:
      out += op_name(n.op);
      out += '(';
      print_node(*n.lhs, out);
      out += ')';
      return;
  }
}

}  // namespace detail

class Expr {
 public:
  Expr() = default;

  /// Parses `src` as an expression over x1..xd. Throws ParseError on syntax
  /// problems; once the syntax is accepted, variables outside the declared
  /// dimension raise DimensionError.
  static Expr parse(std::string_view src, int dimension);

  static Expr constant(double value) {
    if (!std::isfinite(value)) throw std::invalid_argument("Expr::constant: non-finite value");
    return Expr(make(ExprOp::literal, value, 0, nullptr, nullptr), 0);
  }

  /// Variable x`index` (1-based) in an expression of the given dimension.
  static Expr variable(int index, int dimension) {
    if (index < 1 || index > dimension) throw std::invalid_argument("Expr::variable: index out of range");
    return Expr(make(ExprOp::variable, 0.0, index - 1, nullptr, nullptr), dimension);
  }

  int dimension() const { return dim_; }
  bool empty() const { return root_ == nullptr; }

  double eval(std::span<const double> point) const {
    check_point(point.size());
    try {
      return detail::eval_node<double>(*root_, point);
    } catch (EvalError& e) {
      e.attach_point({point.begin(), point.end()});
      throw;
    }
  }

  double operator()(std::span<const double> point) const { return eval(point); }
  double operator()(std::initializer_list<double> point) const {
    return eval(std::span<const double>(point.begin(), point.size()));
  }

  /// Value and directional partial d/dx_direction (1-based) at `point`,
  /// by forward-mode dual numbers.
  std::pair<double, double> eval_with_derivative(std::span<const double> point, int direction) const {
    check_point(point.size());
    if (direction < 1 || static_cast<std::size_t>(direction) > point.size())
      throw std::invalid_argument("Expr::eval_with_derivative: direction out of range");
    std::vector<Dual> pt(point.size());
    for (std::size_t i = 0; i < point.size(); ++i)
      pt[i] = Dual(point[i], static_cast<int>(i) == direction - 1 ? 1.0 : 0.0);
    try {
      Dual r = detail::eval_node<Dual>(*root_, std::span<const Dual>(pt));
      return {r.val, r.der};
    } catch (EvalError& e) {
      e.attach_point({point.begin(), point.end()});
      throw;
    }
  }

  /// Source form; parsing it back yields an expression that evaluates
  /// identically (parenthesization preserves the tree).
  std::string str() const {
    std::string out;
    if (root_) detail::print_node(*root_, out);
    return out;
  }

  /// Highest variable index referenced (1-based), 0 for constants.
  int max_variable() const { return max_var(root_.get()); }

  /// Substitutes `replacement` for x`index` (1-based); subtrees are shared.
  Expr substitute(int index, const Expr& replacement) const {
    Expr out(subst(root_, index - 1, replacement.root_), std::max(dim_, replacement.dim_));
    return out;
  }

  Expr negate() const { return Expr(make(ExprOp::neg, 0.0, 0, root_, nullptr), dim_); }

  friend Expr operator+(const Expr& a, const Expr& b) { return combine(ExprOp::add, a, b); }
  friend Expr operator-(const Expr& a, const Expr& b) { return combine(ExprOp::sub, a, b); }
  friend Expr operator*(const Expr& a, const Expr& b) { return combine(ExprOp::mul, a, b); }
  friend Expr operator/(const Expr& a, const Expr& b) { return combine(ExprOp::div, a, b); }

  static Expr pow(const Expr& a, const Expr& b) { return combine(ExprOp::pow, a, b); }
  static Expr apply(ExprOp fn, const Expr& a) {
    if (fn < ExprOp::fn_sin || fn > ExprOp::fn_tanh) throw std::invalid_argument("Expr::apply: not a function op");
    return Expr(make(fn, 0.0, 0, a.root_, nullptr), a.dim_);
  }

 private:
  Expr(detail::NodePtr root, int dim) : root_(std::move(root)), dim_(dim) {}

  static detail::NodePtr make(ExprOp op, double value, int index, detail::NodePtr l, detail::NodePtr r) {
    auto n = std::make_shared<detail::ExprNode>();
    n->op = op;
    n->value = value;
    n->index = index;
    n->lhs = std::move(l);
    n->rhs = std::move(r);
    return n;
  }

  static Expr combine(ExprOp op, const Expr& a, const Expr& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("Expr: combining empty expression");
    return Expr(make(op, 0.0, 0, a.root_, b.root_), std::max(a.dim_, b.dim_));
  }

  static detail::NodePtr subst(const detail::NodePtr& n, int index, const detail::NodePtr& rep) {
    if (!n) return nullptr;
    if (n->op == ExprOp::variable && n->index == index) return rep;
    auto l = subst(n->lhs, index, rep);
    auto r = subst(n->rhs, index, rep);
    if (l == n->lhs && r == n->rhs) return n;
    auto c = std::make_shared<detail::ExprNode>(*n);
    c->lhs = std::move(l);
    c->rhs = std::move(r);
    return c;
  }

  static int max_var(const detail::ExprNode* n) {
    if (!n) return 0;
    int m = n->op == ExprOp::variable ? n->index + 1 : 0;
    if (n->lhs) m = std::max(m, max_var(n->lhs.get()));
    if (n->rhs) m = std::max(m, max_var(n->rhs.get()));
    return m;
  }

  void check_point(std::size_t n) const {
    if (!root_) throw std::invalid_argument("Expr: evaluating empty expression");
    if (static_cast<int>(n) < std::max(dim_, max_variable()))
      throw std::invalid_argument("Expr: point has fewer coordinates than the expression dimension");
  }

  detail::NodePtr root_;
  int dim_ = 0;
};

namespace detail {

enum class TokKind : std::uint8_t { num, ident, plus, minus, star, slash, caret, lparen, rparen, end };

struct Token {
  TokKind kind;
  std::size_t pos;
  double num = 0.0;
  std::string_view text;
};

class Parser {
 public:
  Parser(std::string_view src, int dim) : src_(src), dim_(dim) { advance(); }

  NodePtr run() {
    NodePtr e = expr(0);
    if (tok_.kind != TokKind::end) throw ParseError(tok_.pos, "operator or end of input");
    // syntax accepted; now check the variables against the dimension
    for (const auto& [pos, name, index] : vars_)
      if (index < 0 || index >= dim_) throw DimensionError(pos, name, dim_);
    return e;
  }

 private:
  NodePtr expr(int depth) {
    NodePtr lhs = term(depth);
    while (tok_.kind == TokKind::plus || tok_.kind == TokKind::minus) {
      ExprOp op = tok_.kind == TokKind::plus ? ExprOp::add : ExprOp::sub;
      std::size_t pos = tok_.pos;
      advance();
      lhs = node(op, pos, lhs, term(depth));
    }
    return lhs;
  }

  NodePtr term(int depth) {
    NodePtr lhs = unary(depth);
    while (tok_.kind == TokKind::star || tok_.kind == TokKind::slash) {
      ExprOp op = tok_.kind == TokKind::star ? ExprOp::mul : ExprOp::div;
      std::size_t pos = tok_.pos;
      advance();
      lhs = node(op, pos, lhs, unary(depth));
    }
    return lhs;
  }

  NodePtr unary(int depth) {
    if (depth > max_depth_) throw ParseError(tok_.pos, "shallower nesting");
    if (tok_.kind == TokKind::minus) {
      std::size_t pos = tok_.pos;
      advance();
      return node(ExprOp::neg, pos, unary(depth + 1), nullptr);
    }
    return power(depth);
  }

  NodePtr power(int depth) {
    NodePtr base = atom(depth);
    if (tok_.kind == TokKind::caret) {
      std::size_t pos = tok_.pos;
      advance();
      return node(ExprOp::pow, pos, base, unary(depth + 1));
    }
    return base;
  }

  NodePtr atom(int depth) {
    switch (tok_.kind) {
      case TokKind::num: {
        auto n = std::make_shared<ExprNode>();
        n->op = ExprOp::literal;
        n->pos = tok_.pos;
        n->value = tok_.num;
        advance();
        return n;
      }
      case TokKind::lparen: {
        advance();
        NodePtr e = expr(depth + 1);
        if (tok_.kind != TokKind::rparen) throw ParseError(tok_.pos, "')'");
        advance();
        return e;
      }
      case TokKind::ident: {
        Token id = tok_;
        advance();
        if (function_op(id.text)) {
          if (tok_.kind != TokKind::lparen) throw ParseError(tok_.pos, "'(' after function name");
          advance();
          NodePtr arg = expr(depth + 1);
          if (tok_.kind != TokKind::rparen) throw ParseError(tok_.pos, "')'");
          advance();
          return node(*function_op(id.text), id.pos, arg, nullptr);
        }
        return variable(id);
      }
      default:
        throw ParseError(tok_.pos, "operand");
    }
  }

  NodePtr variable(const Token& id) {
    std::string name(id.text);
    int index = -1;
    if (name == "x" || name == "r") {
      index = dim_ == 1 ? 0 : -1;
    } else if (name.size() > 1 && name[0] == 'x' &&
               name.find_first_not_of("0123456789", 1) == std::string::npos) {
      long k = std::strtol(name.c_str() + 1, nullptr, 10);
      index = static_cast<int>(k) - 1;
    } else {
      throw ParseError(id.pos, "a variable or function name (got '" + name + "')");
    }
    vars_.push_back({id.pos, name, index});
    auto n = std::make_shared<ExprNode>();
    n->op = ExprOp::variable;
    n->pos = id.pos;
    n->index = std::max(index, 0);
    return n;
  }

  static std::optional<ExprOp> function_op(std::string_view name) {
    if (name == "sin") return ExprOp::fn_sin;
    if (name == "cos") return ExprOp::fn_cos;
    if (name == "exp") return ExprOp::fn_exp;
    if (name == "log") return ExprOp::fn_log;
    if (name == "sqrt") return ExprOp::fn_sqrt;
    if (name == "atan") return ExprOp::fn_atan;
    if (name == "abs") return ExprOp::fn_abs;
    if (name == "tanh") return ExprOp::fn_tanh;
    return std::nullopt;
  }

  static NodePtr node(ExprOp op, std::size_t pos, NodePtr l, NodePtr r) {
    auto n = std::make_shared<ExprNode>();
    n->op = op;
    n->pos = pos;
    n->lhs = std::move(l);
    n->rhs = std::move(r);
    return n;
  }

  void advance() {
    while (cur_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[cur_]))) ++cur_;
    if (cur_ >= src_.size()) {
      tok_ = {TokKind::end, src_.size(), 0.0, {}};
      return;
    }
    const char c = src_[cur_];
    const std::size_t start = cur_;
    auto single = [&](TokKind k) {
      ++cur_;
      tok_ = {k, start, 0.0, src_.substr(start, 1)};
    };
    switch (c) {
      case '+': single(TokKind::plus); return;
      case '-': single(TokKind::minus); return;
      case '*': single(TokKind::star); return;
      case '/': single(TokKind::slash); return;
      case '^': single(TokKind::caret); return;
      case '(': single(TokKind::lparen); return;
      case ')': single(TokKind::rparen); return;
      default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + src_.size(), v);
      if (ec != std::errc() || ptr == src_.data() + start) throw ParseError(start, "a number");
      cur_ = static_cast<std::size_t>(ptr - src_.data());
      tok_ = {TokKind::num, start, v, src_.substr(start, cur_ - start)};
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (cur_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[cur_])) || src_[cur_] == '_'))
        ++cur_;
      tok_ = {TokKind::ident, start, 0.0, src_.substr(start, cur_ - start)};
      return;
    }
    throw ParseError(start, "a token (unexpected character '" + std::string(1, c) + "')");
  }

  static constexpr int max_depth_ = 2000;

  std::string_view src_;
  int dim_;
  std::size_t cur_ = 0;
  Token tok_{TokKind::end, 0, 0.0, {}};
  std::vector<std::tuple<std::size_t, std::string, int>> vars_;
};

}  // namespace detail

inline Expr Expr::parse(std::string_view src, int dimension) {
  if (dimension < 1) throw std::invalid_argument("Expr::parse: dimension must be >= 1");
  detail::Parser p(src, dimension);
  return Expr(p.run(), dimension);
}

}  // namespace semiflow
