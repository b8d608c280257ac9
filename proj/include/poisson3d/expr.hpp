#pragma once

// Expression mini-language: parser, printer, evaluator and symbolic
// differentiator for the scalar functions that define a structure
// (densities, primitives, inverses, prefactors, Hamiltonians).
//
// Grammar (precedence high to low, ^ right-associative):
//   primary := number | var | func '(' expr ')' | '(' expr ')'
//   power   := primary ['^' unary]
//   unary   := '-' unary | power
//   term    := unary {('*' | '/') unary}
//   expr    := term {('+' | '-') term}
// Variables are x1, x2, x3 (three-variable fields) and u (axis functions).

#include <poisson3d/error.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace poisson3d {

enum class Var : std::uint8_t { x1 = 0, x2 = 1, x3 = 2, u = 3 };
enum class BinOp : std::uint8_t { add, sub, mul, div, pow };
enum class Func : std::uint8_t { exp, ln, sin, cos, sqrt, abs, sign };

inline std::string_view var_name(Var v) {
  switch (v) {
    case Var::x1: return "x1";
    case Var::x2: return "x2";
    case Var::x3: return "x3";
    case Var::u: return "u";
  }
  return "?";
}

inline std::string_view func_name(Func f) {
  switch (f) {
    case Func::exp: return "exp";
    case Func::ln: return "ln";
    case Func::sin: return "sin";
    case Func::cos: return "cos";
    case Func::sqrt: return "sqrt";
    case Func::abs: return "abs";
    case Func::sign: return "sign";
  }
  return "?";
}

inline std::optional<Var> var_from_name(std::string_view name) {
  if (name == "x1") return Var::x1;
  if (name == "x2") return Var::x2;
  if (name == "x3") return Var::x3;
  if (name == "u") return Var::u;
  return std::nullopt;
}

inline std::optional<Func> func_from_name(std::string_view name) {
  for (auto f : {Func::exp, Func::ln, Func::sin, Func::cos, Func::sqrt, Func::abs, Func::sign})
    if (func_name(f) == name) return f;
  return std::nullopt;
}

/// Bit mask over the four variables (bit index = Var value).
using VarMask = std::uint8_t;
constexpr VarMask mask_of(Var v) { return static_cast<VarMask>(1u << static_cast<unsigned>(v)); }
constexpr VarMask kSpatialVars = mask_of(Var::x1) | mask_of(Var::x2) | mask_of(Var::x3);
constexpr VarMask kAxisVars = mask_of(Var::u);

/// Immutable expression tree. Copies share nodes; safe for concurrent reads.
class Expr {
 public:
  enum class Kind : std::uint8_t { number, variable, negate, binary, call };

  Expr() : Expr(number(0.0)) {}

  // Raw constructors: build exactly the requested node, no folding.
  static Expr number(double v);
  static Expr variable(Var v);
  static Expr negate(Expr a);
  static Expr binary(BinOp op, Expr a, Expr b);
  static Expr call(Func f, Expr a);

  Kind kind() const;
  double value() const;  // number
  Var var() const;       // variable
  BinOp op() const;      // binary
  Func func() const;     // call
  const Expr& lhs() const;      // binary; operand of negate/call
  const Expr& rhs() const;      // binary
  const Expr& operand() const;  // negate, call

  VarMask variables() const;
  bool depends_on(Var v) const { return (variables() & mask_of(v)) != 0; }
  bool is_number() const { return kind() == Kind::number; }
  bool is_number(double v) const { return is_number() && value() == v; }

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  struct Node;
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

struct Expr::Node {
  Kind kind = Kind::number;
  double value = 0.0;
  Var var = Var::x1;
  BinOp op = BinOp::add;
  Func func = Func::exp;
  VarMask vars = 0;
  Expr a{std::shared_ptr<const Node>{}};
  Expr b{std::shared_ptr<const Node>{}};
};

inline Expr Expr::number(double v) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::number;
  n->value = v;
  return Expr(std::move(n));
}

inline Expr Expr::variable(Var v) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::variable;
  n->var = v;
  n->vars = mask_of(v);
  return Expr(std::move(n));
}

inline Expr Expr::negate(Expr a) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::negate;
  n->vars = a.variables();
  n->a = std::move(a);
  return Expr(std::move(n));
}

inline Expr Expr::binary(BinOp op, Expr a, Expr b) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::binary;
  n->op = op;
  n->vars = a.variables() | b.variables();
  n->a = std::move(a);
  n->b = std::move(b);
  return Expr(std::move(n));
}

inline Expr Expr::call(Func f, Expr a) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::call;
  n->func = f;
  n->vars = a.variables();
  n->a = std::move(a);
  return Expr(std::move(n));
}

inline Expr::Kind Expr::kind() const { return node_->kind; }
inline double Expr::value() const { return node_->value; }
inline Var Expr::var() const { return node_->var; }
inline BinOp Expr::op() const { return node_->op; }
inline Func Expr::func() const { return node_->func; }
inline const Expr& Expr::lhs() const { return node_->a; }
inline const Expr& Expr::rhs() const { return node_->b; }
inline const Expr& Expr::operand() const { return node_->a; }
inline VarMask Expr::variables() const { return node_ ? node_->vars : 0; }

inline bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case Expr::Kind::number: return a.value() == b.value();
    case Expr::Kind::variable: return a.var() == b.var();
    case Expr::Kind::negate: return a.operand() == b.operand();
    case Expr::Kind::binary: return a.op() == b.op() && a.lhs() == b.lhs() && a.rhs() == b.rhs();
    case Expr::Kind::call: return a.func() == b.func() && a.operand() == b.operand();
  }
  return false;
}

// ---------------------------------------------------------------------------
// Folding builders. Constant folding plus the identities x+0, x*1, x*0, x^1;
// a fold that would produce a non-finite literal is skipped so evaluation
// still reports the domain error.

namespace detail {
inline std::optional<double> fold_binary(BinOp op, double a, double b) {
  double r = 0.0;
  switch (op) {
    case BinOp::add: r = a + b; break;
    case BinOp::sub: r = a - b; break;
    case BinOp::mul: r = a * b; break;
    case BinOp::div: r = a / b; break;
    case BinOp::pow:
      if (a < 0.0 && std::trunc(b) != b) return std::nullopt;
      r = std::pow(a, b);
      break;
  }
  if (!std::isfinite(r)) return std::nullopt;
  return r;
}
}  // namespace detail

inline Expr operator-(const Expr& a) {
  if (a.is_number()) return Expr::number(-a.value());
  if (a.kind() == Expr::Kind::negate) return a.operand();
  return Expr::negate(a);
}

inline Expr make_binary(BinOp op, const Expr& a, const Expr& b) {
  if (a.is_number() && b.is_number())
    if (auto r = detail::fold_binary(op, a.value(), b.value())) return Expr::number(*r);
  switch (op) {
    case BinOp::add:
      if (a.is_number(0.0)) return b;
      if (b.is_number(0.0)) return a;
      break;
    case BinOp::sub:
      if (b.is_number(0.0)) return a;
      if (a.is_number(0.0)) return -b;
      break;
    case BinOp::mul:
      if (a.is_number(0.0) || b.is_number(0.0)) return Expr::number(0.0);
      if (a.is_number(1.0)) return b;
      if (b.is_number(1.0)) return a;
      if (a.is_number(-1.0)) return -b;
      if (b.is_number(-1.0)) return -a;
      break;
    case BinOp::div:
      if (b.is_number(1.0)) return a;
      break;
    case BinOp::pow:
      if (b.is_number(1.0)) return a;
      if (b.is_number(0.0)) return Expr::number(1.0);
      break;
  }
  return Expr::binary(op, a, b);
}

inline Expr operator+(const Expr& a, const Expr& b) { return make_binary(BinOp::add, a, b); }
inline Expr operator-(const Expr& a, const Expr& b) { return make_binary(BinOp::sub, a, b); }
inline Expr operator*(const Expr& a, const Expr& b) { return make_binary(BinOp::mul, a, b); }
inline Expr operator/(const Expr& a, const Expr& b) { return make_binary(BinOp::div, a, b); }
inline Expr pow(const Expr& a, const Expr& b) { return make_binary(BinOp::pow, a, b); }
inline Expr operator+(const Expr& a, double b) { return a + Expr::number(b); }
inline Expr operator+(double a, const Expr& b) { return Expr::number(a) + b; }
inline Expr operator-(const Expr& a, double b) { return a - Expr::number(b); }
inline Expr operator-(double a, const Expr& b) { return Expr::number(a) - b; }
inline Expr operator*(const Expr& a, double b) { return a * Expr::number(b); }
inline Expr operator*(double a, const Expr& b) { return Expr::number(a) * b; }
inline Expr operator/(const Expr& a, double b) { return a / Expr::number(b); }
inline Expr operator/(double a, const Expr& b) { return Expr::number(a) / b; }
inline Expr pow(const Expr& a, double b) { return pow(a, Expr::number(b)); }

inline Expr apply(Func f, const Expr& a) {
  if (a.is_number()) {
    double x = a.value();
    double r = NAN;
    switch (f) {
      case Func::exp: r = std::exp(x); break;
      case Func::ln: r = x > 0.0 ? std::log(x) : NAN; break;
      case Func::sin: r = std::sin(x); break;
      case Func::cos: r = std::cos(x); break;
      case Func::sqrt: r = x >= 0.0 ? std::sqrt(x) : NAN; break;
      case Func::abs: r = std::abs(x); break;
      case Func::sign: r = static_cast<double>((x > 0.0) - (x < 0.0)); break;
    }
    if (std::isfinite(r)) return Expr::number(r);
  }
  return Expr::call(f, a);
}

inline Expr x1() { return Expr::variable(Var::x1); }
inline Expr x2() { return Expr::variable(Var::x2); }
inline Expr x3() { return Expr::variable(Var::x3); }
inline Expr u() { return Expr::variable(Var::u); }
inline Expr lit(double v) { return Expr::number(v); }
inline Expr spatial(int axis) { return Expr::variable(static_cast<Var>(axis)); }

// ---------------------------------------------------------------------------
// Evaluation

/// Variable bindings for evaluation. Unbound reads raise unbound_variable.
class Env {
 public:
  Env() = default;

  Env& bind(Var v, double value) {
    values_[static_cast<std::size_t>(v)] = value;
    bound_ |= mask_of(v);
    return *this;
  }
  bool has(Var v) const { return (bound_ & mask_of(v)) != 0; }
  VarMask bound() const { return bound_; }
  double get(Var v) const {
    if (!has(v)) throw Error(ErrorKind::unbound_variable, "variable " + std::string(var_name(v)) + " is not bound");
    return values_[static_cast<std::size_t>(v)];
  }

  static Env at(const Point& x) { return Env().bind(Var::x1, x[0]).bind(Var::x2, x[1]).bind(Var::x3, x[2]); }
  static Env of_u(double value) { return Env().bind(Var::u, value); }

 private:
  std::array<double, 4> values_{};
  VarMask bound_ = 0;
};

namespace detail {
inline double checked(double r, const char* what) {
  if (!std::isfinite(r)) throw Error(ErrorKind::domain, std::string("non-finite result in ") + what);
  return r;
}
}  // namespace detail

inline double eval(const Expr& e, const Env& env) {
  switch (e.kind()) {
    case Expr::Kind::number: return e.value();
    case Expr::Kind::variable: return env.get(e.var());
    case Expr::Kind::negate: return -eval(e.operand(), env);
    case Expr::Kind::binary: {
      double a = eval(e.lhs(), env);
      double b = eval(e.rhs(), env);
      switch (e.op()) {
        case BinOp::add: return detail::checked(a + b, "addition");
        case BinOp::sub: return detail::checked(a - b, "subtraction");
        case BinOp::mul: return detail::checked(a * b, "multiplication");
        case BinOp::div: return detail::checked(a / b, "division");
        case BinOp::pow:
          if (a < 0.0 && std::trunc(b) != b)
            throw Error(ErrorKind::domain, "negative base with non-integer exponent");
          return detail::checked(std::pow(a, b), "power");
      }
      break;
    }
    case Expr::Kind::call: {
      double x = eval(e.operand(), env);
      switch (e.func()) {
        case Func::exp: return detail::checked(std::exp(x), "exp");
        case Func::ln:
          if (!(x > 0.0)) throw Error(ErrorKind::domain, "ln of non-positive argument");
          return std::log(x);
        case Func::sin: return std::sin(x);
        case Func::cos: return std::cos(x);
        case Func::sqrt:
          if (x < 0.0) throw Error(ErrorKind::domain, "sqrt of negative argument");
          return std::sqrt(x);
        case Func::abs: return std::abs(x);
        case Func::sign: return static_cast<double>((x > 0.0) - (x < 0.0));
      }
      break;
    }
  }
  throw Error(ErrorKind::domain, "malformed expression");
}

inline double eval(const Expr& e, const Point& x) { return eval(e, Env::at(x)); }
inline double eval_u(const Expr& e, double value) { return eval(e, Env::of_u(value)); }

// ---------------------------------------------------------------------------
// Symbolic differentiation

/// d e / d v. The derivative of abs(a) is written a'·a/abs(a) and that of
/// sign(a) as 0/abs(a), so both evaluate to a domain error where a = 0.
inline Expr differentiate(const Expr& e, Var v) {
  if (!e.depends_on(v)) return lit(0.0);
  switch (e.kind()) {
    case Expr::Kind::number: return lit(0.0);
    case Expr::Kind::variable: return lit(1.0);
    case Expr::Kind::negate: return -differentiate(e.operand(), v);
    case Expr::Kind::binary: {
      const Expr& a = e.lhs();
      const Expr& b = e.rhs();
      switch (e.op()) {
        case BinOp::add: return differentiate(a, v) + differentiate(b, v);
        case BinOp::sub: return differentiate(a, v) - differentiate(b, v);
        case BinOp::mul: return differentiate(a, v) * b + a * differentiate(b, v);
        case BinOp::div: return (differentiate(a, v) * b - a * differentiate(b, v)) / (b * b);
        case BinOp::pow:
          if (!b.depends_on(v)) return b * pow(a, b - 1.0) * differentiate(a, v);
          if (!a.depends_on(v)) return e * apply(Func::ln, a) * differentiate(b, v);
          return e * (differentiate(b, v) * apply(Func::ln, a) + b * differentiate(a, v) / a);
      }
      break;
    }
    case Expr::Kind::call: {
      const Expr& a = e.operand();
      Expr da = differentiate(a, v);
      switch (e.func()) {
        case Func::exp: return e * da;
        case Func::ln: return da / a;
        case Func::sin: return apply(Func::cos, a) * da;
        case Func::cos: return -(apply(Func::sin, a) * da);
        case Func::sqrt: return da / (2.0 * e);
        case Func::abs: return da * a / e;
        case Func::sign: return Expr::binary(BinOp::div, lit(0.0), apply(Func::abs, a));
      }
      break;
    }
  }
  return lit(0.0);
}

/// Replace every occurrence of `v` by `with`.
inline Expr substitute(const Expr& e, Var v, const Expr& with) {
  if (!e.depends_on(v)) return e;
  switch (e.kind()) {
    case Expr::Kind::number: return e;
    case Expr::Kind::variable: return with;
    case Expr::Kind::negate: return -substitute(e.operand(), v, with);
    case Expr::Kind::binary:
      return make_binary(e.op(), substitute(e.lhs(), v, with), substitute(e.rhs(), v, with));
    case Expr::Kind::call: return apply(e.func(), substitute(e.operand(), v, with));
  }
  return e;
}

// ---------------------------------------------------------------------------
// Printing

namespace detail {
inline int precedence(const Expr& e) {
  switch (e.kind()) {
    case Expr::Kind::number: return e.value() < 0.0 || std::signbit(e.value()) ? 0 : 5;
    case Expr::Kind::variable:
    case Expr::Kind::call: return 5;
    case Expr::Kind::negate: return 3;
    case Expr::Kind::binary:
      switch (e.op()) {
        case BinOp::add:
        case BinOp::sub: return 1;
        case BinOp::mul:
        case BinOp::div: return 2;
        case BinOp::pow: return 4;
      }
  }
  return 0;
}

inline char op_char(BinOp op) {
  switch (op) {
    case BinOp::add: return '+';
    case BinOp::sub: return '-';
    case BinOp::mul: return '*';
    case BinOp::div: return '/';
    case BinOp::pow: return '^';
  }
  return '?';
}

inline std::string number_text(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, end);
}

inline void print_to(const Expr& e, std::string& out);

inline void print_wrapped(const Expr& e, bool wrap, std::string& out) {
  if (wrap) out += '(';
  print_to(e, out);
  if (wrap) out += ')';
}

inline void print_to(const Expr& e, std::string& out) {
  switch (e.kind()) {
    case Expr::Kind::number: {
      std::string text = number_text(e.value());
      if (std::signbit(e.value())) out += "(" + text + ")";
      else out += text;
      return;
    }
    case Expr::Kind::variable: out += var_name(e.var()); return;
    case Expr::Kind::call:
      out += func_name(e.func());
      print_wrapped(e.operand(), true, out);
      return;
    case Expr::Kind::negate:
      out += '-';
      print_wrapped(e.operand(), precedence(e.operand()) < 3, out);
      return;
    case Expr::Kind::binary: {
      int p = precedence(e);
      if (e.op() == BinOp::pow) {
        print_wrapped(e.lhs(), precedence(e.lhs()) < 5, out);
        out += '^';
        print_wrapped(e.rhs(), precedence(e.rhs()) < 3, out);
      } else {
        print_wrapped(e.lhs(), precedence(e.lhs()) < p, out);
        out += ' ';
        out += op_char(e.op());
        out += ' ';
        print_wrapped(e.rhs(), precedence(e.rhs()) <= p, out);
      }
      return;
    }
  }
}
}  // namespace detail

/// Text form that parses back to the same tree.
inline std::string to_string(const Expr& e) {
  std::string out;
  detail::print_to(e, out);
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {
class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  Expr parse_all() {
    skip_ws();
    if (pos_ >= src_.size()) throw SyntaxError(pos_, "empty expression");
    Expr e = parse_expr();
    skip_ws();
    if (pos_ < src_.size()) throw SyntaxError(pos_, std::string("unexpected '") + src_[pos_] + "'");
    return e;
  }

 private:
  void skip_ws() {
    while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' || src_[pos_] == '\r'))
      ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr parse_expr() {
    Expr e = parse_term();
    for (;;) {
      if (accept('+')) e = Expr::binary(BinOp::add, e, parse_term());
      else if (accept('-')) e = Expr::binary(BinOp::sub, e, parse_term());
      else return e;
    }
  }

  Expr parse_term() {
    Expr e = parse_unary();
    for (;;) {
      if (accept('*')) e = Expr::binary(BinOp::mul, e, parse_unary());
      else if (accept('/')) e = Expr::binary(BinOp::div, e, parse_unary());
      else return e;
    }
  }

  Expr parse_unary() {
    if (accept('-')) return Expr::negate(parse_unary());
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_primary();
    if (accept('^')) return Expr::binary(BinOp::pow, base, parse_unary());
    return base;
  }

  static bool is_digit(char c) { return c >= '0' && c <= '9'; }
  static bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
  static bool is_ident(char c) { return is_ident_start(c) || is_digit(c); }

  Expr parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) throw SyntaxError(pos_, "unexpected end of input");
    char c = src_[pos_];
    if (is_digit(c) || c == '.') return parse_number();
    if (is_ident_start(c)) return parse_identifier();
    if (c == '(') {
      ++pos_;
      Expr e = parse_expr();
      if (!accept(')')) throw SyntaxError(pos_, "expected ')'");
      return e;
    }
    throw SyntaxError(pos_, std::string("unexpected '") + c + "'");
  }

  Expr parse_number() {
    std::size_t start = pos_;
    while (pos_ < src_.size() && is_digit(src_[pos_])) ++pos_;
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      while (pos_ < src_.size() && is_digit(src_[pos_])) ++pos_;
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t save = pos_;
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (pos_ < src_.size() && is_digit(src_[pos_])) {
        while (pos_ < src_.size() && is_digit(src_[pos_])) ++pos_;
      } else {
        pos_ = save;
      }
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + pos_, v);
    if (ec != std::errc() || ptr != src_.data() + pos_ || !std::isfinite(v))
      throw SyntaxError(start, "malformed number");
    return Expr::number(v);
  }

  Expr parse_identifier() {
    std::size_t start = pos_;
    while (pos_ < src_.size() && is_ident(src_[pos_])) ++pos_;
    std::string_view name = src_.substr(start, pos_ - start);
    if (auto v = var_from_name(name)) return Expr::variable(*v);
    if (auto f = func_from_name(name)) {
      if (!accept('(')) throw SyntaxError(pos_, "expected '(' after " + std::string(name));
      Expr arg = parse_expr();
      if (!accept(')')) throw SyntaxError(pos_, "expected ')'");
      return Expr::call(*f, arg);
    }
    throw Error(ErrorKind::unknown_identifier,
                "unknown identifier '" + std::string(name) + "' at offset " + std::to_string(start));
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};
}  // namespace detail

/// Parse `source`; throws SyntaxError (with byte offset) or
/// Error(unknown_identifier).
inline Expr parse(std::string_view source) { return detail::Parser(source).parse_all(); }

/// Parse and require that only variables in `allowed` occur.
inline Expr parse_restricted(std::string_view source, VarMask allowed, std::string_view slot) {
  Expr e = parse(source);
  if ((e.variables() & ~allowed) != 0)
    throw Error(ErrorKind::invalid_spec, "expression for " + std::string(slot) + " uses a variable not allowed there: " +
                                             std::string(source));
  return e;
}

}  // namespace poisson3d
