/** @file expression.cpp
 *  @brief Recursive-descent parser, evaluator, and derivative rules for the
 *         expression grammar.
 */
#include "fpsi/expression.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

namespace fpsi {

namespace {
enum class VarId { X1, X2, X3, S, T, Z };

bool var_from_name(const std::string& name, VarId& out) {
  if (name == "x1") out = VarId::X1;
  else if (name == "x2") out = VarId::X2;
  else if (name == "x3") out = VarId::X3;
  else if (name == "s") out = VarId::S;
  else if (name == "t") out = VarId::T;
  else if (name == "z") out = VarId::Z;
  else return false;
  return true;
}

const char* var_name(VarId v) {
  switch (v) {
    case VarId::X1: return "x1";
    case VarId::X2: return "x2";
    case VarId::X3: return "x3";
    case VarId::S: return "s";
    case VarId::T: return "t";
    case VarId::Z: return "z";
  }
  return "?";
}
} // namespace

struct Expr::Node {
  enum class Kind { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp };
  Kind kind;
  double value = 0.0; // Const
  VarId var = VarId::X1;
  std::shared_ptr<const Node> a, b;
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;
using Kind = Expr::Node::Kind;

NodePtr mk_const(double v) {
  auto n = std::make_shared<Expr::Node>();
  n->kind = Kind::Const;
  n->value = v;
  return n;
}

NodePtr mk_var(VarId v) {
  auto n = std::make_shared<Expr::Node>();
  n->kind = Kind::Var;
  n->var = v;
  return n;
}

bool is_const(const NodePtr& n, double v) {
  return n->kind == Kind::Const && n->value == v;
}

NodePtr mk_binary(Kind k, NodePtr a, NodePtr b);
NodePtr mk_unary(Kind k, NodePtr a);

// Constant folding keeps symbolic derivatives from exploding.
NodePtr mk_binary(Kind k, NodePtr a, NodePtr b) {
  if (a->kind == Kind::Const && b->kind == Kind::Const) {
    switch (k) {
      case Kind::Add: return mk_const(a->value + b->value);
      case Kind::Sub: return mk_const(a->value - b->value);
      case Kind::Mul: return mk_const(a->value * b->value);
      case Kind::Div: return mk_const(a->value / b->value);
      case Kind::Pow: return mk_const(std::pow(a->value, b->value));
      default: break;
    }
  }
  switch (k) {
    case Kind::Add:
      if (is_const(a, 0.0)) return b;
      if (is_const(b, 0.0)) return a;
      break;
    case Kind::Sub:
      if (is_const(b, 0.0)) return a;
      if (is_const(a, 0.0)) return mk_unary(Kind::Neg, b);
      break;
    case Kind::Mul:
      if (is_const(a, 0.0) || is_const(b, 0.0)) return mk_const(0.0);
      if (is_const(a, 1.0)) return b;
      if (is_const(b, 1.0)) return a;
      break;
    case Kind::Div:
      if (is_const(a, 0.0)) return mk_const(0.0);
      if (is_const(b, 1.0)) return a;
      break;
    case Kind::Pow:
      if (is_const(b, 1.0)) return a;
      if (is_const(b, 0.0)) return mk_const(1.0);
      break;
    default:
      break;
  }
  auto n = std::make_shared<Expr::Node>();
  n->kind = k;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

NodePtr mk_unary(Kind k, NodePtr a) {
  if (a->kind == Kind::Const) {
    switch (k) {
      case Kind::Neg: return mk_const(-a->value);
      case Kind::Sin: return mk_const(std::sin(a->value));
      case Kind::Cos: return mk_const(std::cos(a->value));
      case Kind::Exp: return mk_const(std::exp(a->value));
      default: break;
    }
  }
  if (k == Kind::Neg && a->kind == Kind::Neg) return a->a;
  auto n = std::make_shared<Expr::Node>();
  n->kind = k;
  n->a = std::move(a);
  return n;
}

double eval_node(const Expr::Node& n, const ExprVars& v) {
  switch (n.kind) {
    case Kind::Const: return n.value;
    case Kind::Var:
      switch (n.var) {
        case VarId::X1: return v.x1;
        case VarId::X2: return v.x2;
        case VarId::X3: return v.x3;
        case VarId::S: return v.s;
        case VarId::T: return v.t;
        case VarId::Z: return v.z;
      }
      return 0.0;
    case Kind::Add: return eval_node(*n.a, v) + eval_node(*n.b, v);
    case Kind::Sub: return eval_node(*n.a, v) - eval_node(*n.b, v);
    case Kind::Mul: return eval_node(*n.a, v) * eval_node(*n.b, v);
    case Kind::Div: return eval_node(*n.a, v) / eval_node(*n.b, v);
    case Kind::Pow: return std::pow(eval_node(*n.a, v), eval_node(*n.b, v));
    case Kind::Neg: return -eval_node(*n.a, v);
    case Kind::Sin: return std::sin(eval_node(*n.a, v));
    case Kind::Cos: return std::cos(eval_node(*n.a, v));
    case Kind::Exp: return std::exp(eval_node(*n.a, v));
  }
  return 0.0;
}

NodePtr diff_node(const NodePtr& n, VarId var) {
  switch (n->kind) {
    case Kind::Const: return mk_const(0.0);
    case Kind::Var: return mk_const(n->var == var ? 1.0 : 0.0);
    case Kind::Add: return mk_binary(Kind::Add, diff_node(n->a, var), diff_node(n->b, var));
    case Kind::Sub: return mk_binary(Kind::Sub, diff_node(n->a, var), diff_node(n->b, var));
    case Kind::Mul:
      return mk_binary(Kind::Add, mk_binary(Kind::Mul, diff_node(n->a, var), n->b),
                       mk_binary(Kind::Mul, n->a, diff_node(n->b, var)));
    case Kind::Div:
      // (a/b)' = a'/b - a b' / b^2
      return mk_binary(
          Kind::Sub, mk_binary(Kind::Div, diff_node(n->a, var), n->b),
          mk_binary(Kind::Div, mk_binary(Kind::Mul, n->a, diff_node(n->b, var)),
                    mk_binary(Kind::Mul, n->b, n->b)));
    case Kind::Pow: {
      if (n->b->kind == Kind::Const) { // f^c -> c f^(c-1) f'
        const double c = n->b->value;
        return mk_binary(Kind::Mul, mk_const(c),
                         mk_binary(Kind::Mul,
                                   mk_binary(Kind::Pow, n->a, mk_const(c - 1.0)),
                                   diff_node(n->a, var)));
      }
      if (n->a->kind == Kind::Const) { // c^g -> c^g ln(c) g'
        const double c = n->a->value;
        if (!(c > 0.0))
          throw ConfigError("expression derivative: c^g requires positive base");
        return mk_binary(Kind::Mul, mk_binary(Kind::Pow, n->a, n->b),
                         mk_binary(Kind::Mul, mk_const(std::log(c)), diff_node(n->b, var)));
      }
      throw ConfigError("expression derivative: f^g with non-constant base and exponent");
    }
    case Kind::Neg: return mk_unary(Kind::Neg, diff_node(n->a, var));
    case Kind::Sin: return mk_binary(Kind::Mul, mk_unary(Kind::Cos, n->a), diff_node(n->a, var));
    case Kind::Cos:
      return mk_binary(Kind::Mul, mk_unary(Kind::Neg, mk_unary(Kind::Sin, n->a)),
                       diff_node(n->a, var));
    case Kind::Exp: return mk_binary(Kind::Mul, n, diff_node(n->a, var));
  }
  return mk_const(0.0);
}

void print_node(const Expr::Node& n, std::ostream& os) {
  switch (n.kind) {
    case Kind::Const: {
      std::ostringstream tmp;
      tmp.precision(17);
      tmp << n.value;
      os << tmp.str();
      return;
    }
    case Kind::Var: os << var_name(n.var); return;
    case Kind::Add: os << '('; print_node(*n.a, os); os << " + "; print_node(*n.b, os); os << ')'; return;
    case Kind::Sub: os << '('; print_node(*n.a, os); os << " - "; print_node(*n.b, os); os << ')'; return;
    case Kind::Mul: os << '('; print_node(*n.a, os); os << " * "; print_node(*n.b, os); os << ')'; return;
    case Kind::Div: os << '('; print_node(*n.a, os); os << " / "; print_node(*n.b, os); os << ')'; return;
    case Kind::Pow: os << '('; print_node(*n.a, os); os << " ^ "; print_node(*n.b, os); os << ')'; return;
    case Kind::Neg: os << "(-"; print_node(*n.a, os); os << ')'; return;
    case Kind::Sin: os << "sin("; print_node(*n.a, os); os << ')'; return;
    case Kind::Cos: os << "cos("; print_node(*n.a, os); os << ')'; return;
    case Kind::Exp: os << "exp("; print_node(*n.a, os); os << ')'; return;
  }
}

// --------------------------------------------------------------------------
// Parser
// --------------------------------------------------------------------------

class Parser {
public:
  explicit Parser(const std::string& text) : text_(text) {}

  NodePtr run() {
    auto n = parse_expr();
    skip_ws();
    if (pos_ != text_.size())
      fail("unexpected trailing input");
    return n;
  }

private:
  const std::string& text_;
  size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& msg) {
    throw ConfigError("expression parse error at position " + std::to_string(pos_) +
                      ": " + msg + " in \"" + text_ + "\"");
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool consume(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  NodePtr parse_expr() {
    auto lhs = parse_term();
    for (;;) {
      if (consume('+')) lhs = mk_binary(Kind::Add, lhs, parse_term());
      else if (consume('-')) lhs = mk_binary(Kind::Sub, lhs, parse_term());
      else return lhs;
    }
  }

  NodePtr parse_term() {
    auto lhs = parse_unary();
    for (;;) {
      if (consume('*')) lhs = mk_binary(Kind::Mul, lhs, parse_unary());
      else if (consume('/')) lhs = mk_binary(Kind::Div, lhs, parse_unary());
      else return lhs;
    }
  }

  NodePtr parse_unary() {
    if (consume('-')) return mk_unary(Kind::Neg, parse_unary());
    return parse_power();
  }

  NodePtr parse_power() {
    auto base = parse_atom();
    if (consume('^')) return mk_binary(Kind::Pow, base, parse_unary());
    return base;
  }

  NodePtr parse_atom() {
    const char c = peek();
    if (c == '(') {
      consume('(');
      auto inner = parse_expr();
      if (!consume(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c))) return parse_ident();
    fail("expected number, variable, function, or '('");
  }

  NodePtr parse_number() {
    skip_ws();
    size_t end = pos_;
    while (end < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[end])) || text_[end] == '.'))
      ++end;
    if (end < text_.size() && (text_[end] == 'e' || text_[end] == 'E')) {
      size_t e = end + 1;
      if (e < text_.size() && (text_[e] == '+' || text_[e] == '-')) ++e;
      if (e < text_.size() && std::isdigit(static_cast<unsigned char>(text_[e]))) {
        ++e;
        while (e < text_.size() && std::isdigit(static_cast<unsigned char>(text_[e]))) ++e;
        end = e;
      }
    }
    const std::string tok = text_.substr(pos_, end - pos_);
    size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      fail("malformed number \"" + tok + "\"");
    }
    if (used != tok.size()) fail("malformed number \"" + tok + "\"");
    pos_ = end;
    return mk_const(v);
  }

  NodePtr parse_ident() {
    skip_ws();
    size_t end = pos_;
    while (end < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '_'))
      ++end;
    const std::string name = text_.substr(pos_, end - pos_);
    pos_ = end;
    if (name == "sin" || name == "cos" || name == "exp") {
      if (!consume('(')) fail("expected '(' after function " + name);
      auto arg = parse_expr();
      if (!consume(')')) fail("expected ')'");
      if (name == "sin") return mk_unary(Kind::Sin, arg);
      if (name == "cos") return mk_unary(Kind::Cos, arg);
      return mk_unary(Kind::Exp, arg);
    }
    VarId v;
    if (!var_from_name(name, v)) fail("unknown identifier \"" + name + "\"");
    return mk_var(v);
  }
};

} // namespace

// --------------------------------------------------------------------------
// Expr facade
// --------------------------------------------------------------------------

Expr::Expr() : node_(mk_const(0.0)) {}

Expr Expr::parse(const std::string& text) { return Expr(Parser(text).run()); }

Expr Expr::constant(double v) { return Expr(mk_const(v)); }

Expr Expr::variable(const std::string& name) {
  VarId v;
  if (!var_from_name(name, v)) throw ConfigError("Expr::variable: unknown variable " + name);
  return Expr(mk_var(v));
}

double Expr::eval(const ExprVars& vars) const { return eval_node(*node_, vars); }

Expr Expr::derivative(const std::string& var) const {
  VarId v;
  if (!var_from_name(var, v)) throw ConfigError("Expr::derivative: unknown variable " + var);
  return Expr(diff_node(node_, v));
}

bool Expr::is_constant() const { return node_->kind == Node::Kind::Const; }

double Expr::constant_value() const {
  if (!is_constant()) throw ConfigError("Expr::constant_value on non-constant expression");
  return node_->value;
}

bool Expr::is_zero() const { return is_const(node_, 0.0); }

std::string Expr::str() const {
  std::ostringstream os;
  print_node(*node_, os);
  return os.str();
}

Expr operator+(const Expr& a, const Expr& b) { return Expr(mk_binary(Kind::Add, a.node_, b.node_)); }
Expr operator-(const Expr& a, const Expr& b) { return Expr(mk_binary(Kind::Sub, a.node_, b.node_)); }
Expr operator*(const Expr& a, const Expr& b) { return Expr(mk_binary(Kind::Mul, a.node_, b.node_)); }
Expr operator/(const Expr& a, const Expr& b) { return Expr(mk_binary(Kind::Div, a.node_, b.node_)); }
Expr operator-(const Expr& a) { return Expr(mk_unary(Kind::Neg, a.node_)); }
Expr expr_sin(const Expr& a) { return Expr(mk_unary(Kind::Sin, a.node_)); }
Expr expr_cos(const Expr& a) { return Expr(mk_unary(Kind::Cos, a.node_)); }
Expr expr_exp(const Expr& a) { return Expr(mk_unary(Kind::Exp, a.node_)); }
Expr expr_pow(const Expr& a, double p) { return Expr(mk_binary(Kind::Pow, a.node_, mk_const(p))); }

} // namespace fpsi
