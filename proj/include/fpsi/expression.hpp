/** @file expression.hpp
 *  @brief Closed-form scalar expressions: parsing, evaluation, symbolic
 *         differentiation.
 *
 *  The grammar is deliberately small and is the only expression language
 *  accepted anywhere (config sources, initial data, permeability laws,
 *  manufactured solutions):
 *
 *      expr   := term (('+'|'-') term)*
 *      term   := unary (('*'|'/') unary)*
 *      unary  := '-' unary | power
 *      power  := atom ('^' unary)?                 (right associative)
 *      atom   := number | var | fn '(' expr ')' | '(' expr ')'
 *      fn     := sin | cos | exp
 *      var    := x1 | x2 | x3 | s | t | z
 *
 *  `x1`,`x2` are the periodic in-plane coordinates, `x3` the transverse
 *  coordinate of the fluid/poroelastic layers, `s` the plate thickness
 *  coordinate, `t` time, and `z` the fluid-content argument of nonlinear
 *  permeability laws. Unknown identifiers are rejected at parse time.
 *
 *  Differentiation is exact on the grammar; the one unsupported corner is
 *  d/dx of f(x)^g(x) with both base and exponent non-constant (throws).
 *  Construction folds constants so derived expressions stay small.
 */
#pragma once

#include <memory>
#include <string>

#include "fpsi/errors.hpp"

namespace fpsi {

/// Variable bindings for evaluation; unset variables default to zero.
struct ExprVars {
  double x1 = 0.0, x2 = 0.0, x3 = 0.0, s = 0.0, t = 0.0, z = 0.0;
};

class Expr {
public:
  Expr(); ///< the zero expression

  static Expr parse(const std::string& text);
  static Expr constant(double v);
  static Expr variable(const std::string& name); ///< one of x1,x2,x3,s,t,z

  double eval(const ExprVars& vars) const;
  Expr derivative(const std::string& var) const;

  bool is_constant() const;         ///< folded to a literal
  double constant_value() const;    ///< only valid if is_constant()
  bool is_zero() const;

  std::string str() const; ///< parenthesized round-trippable form

  // Algebraic composition (constant-folding); used by the manufactured
  // solution machinery to build profiles programmatically.
  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator/(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a);
  friend Expr expr_sin(const Expr& a);
  friend Expr expr_cos(const Expr& a);
  friend Expr expr_exp(const Expr& a);
  friend Expr expr_pow(const Expr& a, double p);

  struct Node; ///< implementation detail, defined in expression.cpp

private:
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

} // namespace fpsi
