/// @file test_expression.cpp
/// Parsing, evaluation, and symbolic differentiation of the expression
/// grammar. Derivatives are also cross-checked against central differences.

#include "doctest.h"

#include <cmath>

#include "fpsi/expression.hpp"

using namespace fpsi;

TEST_CASE("arithmetic, precedence, unary minus") {
  ExprVars v;
  CHECK(Expr::parse("1 + 2*3").eval(v) == doctest::Approx(7.0));
  CHECK(Expr::parse("(1 + 2)*3").eval(v) == doctest::Approx(9.0));
  CHECK(Expr::parse("2^3^2").eval(v) == doctest::Approx(512.0)); // right assoc
  CHECK(Expr::parse("-2^2").eval(v) == doctest::Approx(-4.0));   // -(2^2)
  CHECK(Expr::parse("6/3/2").eval(v) == doctest::Approx(1.0));   // left assoc
  CHECK(Expr::parse("1e-3 + 2.5E2").eval(v) == doctest::Approx(250.001));
}

TEST_CASE("variables and functions") {
  ExprVars v;
  v.x1 = 0.25;
  v.x3 = -0.5;
  v.t = 2.0;
  auto e = Expr::parse("sin(6.283185307179586*x1) * exp(-t) + x3^2");
  CHECK(e.eval(v) == doctest::Approx(std::sin(0.25 * 2 * M_PI) * std::exp(-2.0) + 0.25));

  v.s = 0.05;
  CHECK(Expr::parse("cos(s)").eval(v) == doctest::Approx(std::cos(0.05)));
  v.z = 0.3;
  CHECK(Expr::parse("(exp(z)-exp(-z))/(exp(z)+exp(-z))").eval(v) ==
        doctest::Approx(std::tanh(0.3)).epsilon(1e-14));
}

TEST_CASE("malformed input and unknown identifiers are rejected") {
  CHECK_THROWS_AS((void)Expr::parse("2 +"), ConfigError);
  CHECK_THROWS_AS((void)Expr::parse("foo + 1"), ConfigError);
  CHECK_THROWS_AS((void)Expr::parse("sin 3"), ConfigError);
  CHECK_THROWS_AS((void)Expr::parse("(1+2"), ConfigError);
  CHECK_THROWS_AS((void)Expr::parse("1 2"), ConfigError);
  CHECK_THROWS_AS((void)Expr::parse("tan(x1)"), ConfigError);
}

TEST_CASE("symbolic derivatives match central differences") {
  const char* cases[] = {
      "sin(2*x3) * cos(x3)",
      "exp(-3*t) * (1 + x3)^2",
      "x3^3 - 2*x3 + 5",
      "(x3 + 1)/(x3 + 2)",
      "exp(sin(x3))",
      "2^(x3)",
  };
  for (const char* text : cases) {
    auto f = Expr::parse(text);
    auto df = f.derivative("x3");
    for (double x : {-0.7, -0.2, 0.0, 0.4, 0.9}) {
      ExprVars v;
      v.t = 0.3;
      const double eps = 1e-6;
      ExprVars vp = v, vm = v;
      vp.x3 = x + eps;
      vm.x3 = x - eps;
      const double fd = (f.eval(vp) - f.eval(vm)) / (2 * eps);
      v.x3 = x;
      CHECK(df.eval(v) == doctest::Approx(fd).epsilon(1e-7));
    }
  }
}

TEST_CASE("derivative corner cases") {
  // derivative with respect to an absent variable is zero
  auto e = Expr::parse("sin(x3) + 4");
  CHECK(e.derivative("t").is_zero());

  // f^c with non-integer c
  auto p = Expr::parse("(1 + x3^2)^1.5").derivative("x3");
  ExprVars v;
  v.x3 = 0.5;
  CHECK(p.eval(v) == doctest::Approx(1.5 * std::pow(1.25, 0.5) * 1.0));

  // f^g with both non-constant is unsupported
  auto bad = Expr::parse("x3^t");
  CHECK_THROWS_AS((void)bad.derivative("x3"), ConfigError);
}

TEST_CASE("programmatic composition and constant folding") {
  auto x = Expr::variable("x3");
  auto e = expr_sin(x * Expr::constant(2.0)) + Expr::constant(0.0) * x;
  ExprVars v;
  v.x3 = 0.3;
  CHECK(e.eval(v) == doctest::Approx(std::sin(0.6)));
  CHECK((Expr::constant(2.0) * Expr::constant(3.0)).is_constant());
  CHECK((Expr::constant(2.0) * Expr::constant(3.0)).constant_value() == 6.0);

  // round-trip through str()
  auto rt = Expr::parse(e.str());
  CHECK(rt.eval(v) == doctest::Approx(e.eval(v)));
}
