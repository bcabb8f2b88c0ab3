#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "semiflow/expr.hpp"
#include "semiflow/field.hpp"
#include "semiflow/rng.hpp"

using semiflow::DerivativeError;
using semiflow::DimensionError;
using semiflow::EvalError;
using semiflow::Expr;
using semiflow::ExprOp;
using semiflow::ParseError;
using semiflow::Rng;

TEST_CASE("basic parsing and evaluation", "[expr]") {
  auto e = Expr::parse("1 + x^2", 1);
  CHECK(e({2.0}) == 5.0);
  CHECK(e({-3.0}) == 10.0);

  CHECK(Expr::parse("x1*(x1-1)", 1)({3.0}) == 6.0);
  CHECK(Expr::parse("atan(x)", 1)({0.0}) == 0.0);
  CHECK(Expr::parse("x1*x2 - 3", 2)({2.0, 4.0}) == 5.0);
}

TEST_CASE("precedence and associativity", "[expr]") {
  CHECK(Expr::parse("2^3^2", 1)({0.0}) == 512.0);        // right-associative
  CHECK(Expr::parse("-x^2", 1)({3.0}) == -9.0);          // ^ binds tighter than unary -
  CHECK(Expr::parse("2 - 3 - 4", 1)({0.0}) == -5.0);     // left-associative
  CHECK(Expr::parse("2 + 3*4", 1)({0.0}) == 14.0);
  CHECK(Expr::parse("2*3^2", 1)({0.0}) == 18.0);
  CHECK(Expr::parse("x^-1", 1)({4.0}) == 0.25);          // unary minus allowed after ^
  CHECK(Expr::parse("12/4/3", 1)({0.0}) == 1.0);
  CHECK(Expr::parse("--x", 1)({7.0}) == 7.0);
}

TEST_CASE("parse errors carry positions", "[expr]") {
  auto pos_of = [](const char* src, int d) -> std::size_t {
    try {
      Expr::parse(src, d);
    } catch (const ParseError& e) {
      return e.position;
    }
    return static_cast<std::size_t>(-1);
  };

  // trailing operand: the parse error wins over the x2 dimension problem
  CHECK(pos_of("x2 + ", 1) == 5);
  CHECK(pos_of("", 1) == 0);
  CHECK(pos_of("2x", 1) == 1);         // implicit multiplication rejected
  CHECK(pos_of("sin x", 1) == 4);      // function call needs parentheses
  CHECK(pos_of("(1 + 2", 1) == 6);
  CHECK(pos_of("1 + * 2", 1) == 4);
  CHECK(pos_of("foo(3)", 1) == 0);     // unknown identifier

  CHECK_THROWS_AS(Expr::parse("x2", 1), DimensionError);
  CHECK_THROWS_AS(Expr::parse("x + x3", 2), DimensionError);
  CHECK_THROWS_AS(Expr::parse("x", 2), DimensionError);   // alias x only for d=1
  CHECK_THROWS_AS(Expr::parse("x0", 1), DimensionError);
  CHECK_NOTHROW(Expr::parse("r", 1));                     // radial alias
  CHECK_THROWS_AS(Expr::parse("r", 2), DimensionError);
}

TEST_CASE("evaluation domain errors", "[expr]") {
  CHECK_THROWS_AS(Expr::parse("log(x)", 1)({-1.0}), EvalError);
  CHECK_THROWS_AS(Expr::parse("log(x)", 1)({0.0}), EvalError);
  CHECK_THROWS_AS(Expr::parse("sqrt(x)", 1)({-4.0}), EvalError);
  CHECK_THROWS_AS(Expr::parse("1/x", 1)({0.0}), EvalError);
  CHECK_THROWS_AS(Expr::parse("x^0.5", 1)({-2.0}), EvalError);   // negative base, fractional power
  CHECK_THROWS_AS(Expr::parse("x^-2", 1)({0.0}), EvalError);     // 0^negative
  CHECK(Expr::parse("x^0", 1)({0.0}) == 1.0);
  CHECK(Expr::parse("(-2)^2", 1).eval(std::vector<double>{0.0}) == 4.0);
  CHECK(Expr::parse("x^3", 1)({-2.0}) == -8.0);

  try {
    Expr::parse("log(x1*x2)", 2)({3.0, -1.0});
    FAIL("expected EvalError");
  } catch (const EvalError& e) {
    CHECK(e.op == "log");
    REQUIRE(e.point.size() == 2);
    CHECK(e.point[1] == -1.0);
  }
}

TEST_CASE("dual-number derivatives at fixed points", "[expr]") {
  using std::numbers::pi;

  auto [v1, d1] = Expr::parse("x^2", 1).eval_with_derivative(std::vector<double>{3.0}, 1);
  CHECK(v1 == 9.0);
  CHECK(d1 == 6.0);

  auto [v2, d2] = Expr::parse("atan(x)", 1).eval_with_derivative(std::vector<double>{1.0}, 1);
  CHECK(v2 == Catch::Approx(pi / 4).epsilon(1e-15));
  CHECK(d2 == Catch::Approx(0.5).epsilon(1e-15));
  // cross-check against a central difference
  auto f = Expr::parse("atan(x)", 1);
  const double h = 1e-6;
  double fd = (f({1.0 + h}) - f({1.0 - h})) / (2 * h);
  CHECK(std::abs(fd - d2) <= 1e-8);

  CHECK_THROWS_AS(Expr::parse("abs(x)", 1).eval_with_derivative(std::vector<double>{0.0}, 1), DerivativeError);
  CHECK_THROWS_AS(Expr::parse("sqrt(x)", 1).eval_with_derivative(std::vector<double>{0.0}, 1), DerivativeError);

  // abs away from the kink is differentiable
  auto [v3, d3] = Expr::parse("abs(x)", 1).eval_with_derivative(std::vector<double>{-2.5}, 1);
  CHECK(v3 == 2.5);
  CHECK(d3 == -1.0);

  // partials pick out the requested direction
  auto g = Expr::parse("x1*x1*x2 + sin(x2)", 2);
  std::vector<double> p{2.0, 0.0};
  auto [gv, g1] = g.eval_with_derivative(p, 1);
  auto [gv2, g2] = g.eval_with_derivative(p, 2);
  CHECK(gv == 0.0);
  CHECK(gv2 == 0.0);
  CHECK(g1 == 0.0);
  CHECK(g2 == 5.0);
}

TEST_CASE("pow derivative edge cases", "[expr]") {
  // varying exponent needs a positive base
  CHECK_THROWS_AS(Expr::parse("x^x", 1).eval_with_derivative(std::vector<double>{-1.0}, 1), DerivativeError);
  auto [v, d] = Expr::parse("x^x", 1).eval_with_derivative(std::vector<double>{2.0}, 1);
  CHECK(v == 4.0);
  CHECK(d == Catch::Approx(4.0 * (std::log(2.0) + 1.0)).epsilon(1e-14));

  // constant exponent, zero base
  auto [v0, d0] = Expr::parse("x^2", 1).eval_with_derivative(std::vector<double>{0.0}, 1);
  CHECK(v0 == 0.0);
  CHECK(d0 == 0.0);
  auto [v1, d1] = Expr::parse("x^1", 1).eval_with_derivative(std::vector<double>{0.0}, 1);
  CHECK(v1 == 0.0);
  CHECK(d1 == 1.0);
  CHECK_THROWS_AS(Expr::parse("x^0.5", 1).eval_with_derivative(std::vector<double>{0.0}, 1), DerivativeError);

  // negative base with integer exponent differentiates through
  auto [vn, dn] = Expr::parse("x^3", 1).eval_with_derivative(std::vector<double>{-2.0}, 1);
  CHECK(vn == -8.0);
  CHECK(dn == 12.0);
}

namespace {

// random polynomial of total degree <= 4 built from the public AST interface
Expr random_polynomial(Rng& rng, int d) {
  int n_terms = 1 + static_cast<int>(rng.next_u64() % 5);
  Expr sum = Expr::constant(rng.uniform(-3.0, 3.0));
  for (int t = 0; t < n_terms; ++t) {
    Expr term = Expr::constant(rng.uniform(-3.0, 3.0));
    int budget = 4;
    for (int i = 1; i <= d; ++i) {
      int e = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(budget + 1));
      budget -= e;
      if (e == 1)
        term = term * Expr::variable(i, d);
      else if (e > 1)
        term = term * Expr::pow(Expr::variable(i, d), Expr::constant(e));
    }
    sum = sum + term;
  }
  return sum;
}

}  // namespace

TEST_CASE("dual partials of random polynomials match central differences", "[expr]") {
  Rng rng(0x5eedf00dULL);
  const double h = 1e-6;
  for (int trial = 0; trial < 1000; ++trial) {
    int d = 1 + static_cast<int>(rng.next_u64() % 3);
    Expr p = random_polynomial(rng, d);
    std::vector<double> x(static_cast<std::size_t>(d));
    for (auto& c : x) c = rng.uniform(-10.0, 10.0);
    int dir = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(d));

    auto [val, dual] = p.eval_with_derivative(x, dir);
    std::vector<double> xp = x, xm = x;
    xp[static_cast<std::size_t>(dir - 1)] += h;
    xm[static_cast<std::size_t>(dir - 1)] -= h;
    double fp = p.eval(xp), fm = p.eval(xm);
    double fd = (fp - fm) / (2 * h);

    // relative to the scale of the quantities the difference quotient touches
    double scale = std::max({1.0, std::abs(dual), std::abs(fp), std::abs(fm), std::abs(val)});
    REQUIRE(std::abs(fd - dual) / scale <= 1e-6);
  }
}

namespace {

Expr random_expression(Rng& rng, int d, int depth) {
  if (depth <= 0 || rng.next_u64() % 4 == 0) {
    if (rng.next_u64() % 2 == 0) return Expr::constant(rng.uniform(-4.0, 4.0));
    return Expr::variable(1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(d)), d);
  }
  switch (rng.next_u64() % 10) {
    case 0: return random_expression(rng, d, depth - 1) + random_expression(rng, d, depth - 1);
    case 1: return random_expression(rng, d, depth - 1) - random_expression(rng, d, depth - 1);
    case 2: return random_expression(rng, d, depth - 1) * random_expression(rng, d, depth - 1);
    case 3: return random_expression(rng, d, depth - 1) / random_expression(rng, d, depth - 1);
    case 4: return Expr::pow(random_expression(rng, d, depth - 1), Expr::constant(static_cast<double>(rng.next_u64() % 5)));
    case 5: return random_expression(rng, d, depth - 1).negate();
    case 6: return Expr::apply(ExprOp::fn_sin, random_expression(rng, d, depth - 1));
    case 7: return Expr::apply(ExprOp::fn_cos, random_expression(rng, d, depth - 1));
    case 8: return Expr::apply(ExprOp::fn_exp, random_expression(rng, d, depth - 1));
    default: return Expr::apply(ExprOp::fn_tanh, random_expression(rng, d, depth - 1));
  }
}

}  // namespace

TEST_CASE("print/parse round trip preserves evaluation", "[expr]") {
  Rng rng(0xabcdef12ULL);
  for (int trial = 0; trial < 60; ++trial) {
    int d = 1 + static_cast<int>(rng.next_u64() % 3);
    Expr e = random_expression(rng, d, 4);
    std::string s = e.str();
    Expr e2 = Expr::parse(s, d);
    CHECK(e2.str() == s);  // printing is a fixed point
    for (int k = 0; k < 100; ++k) {
      std::vector<double> x(static_cast<std::size_t>(d));
      for (auto& c : x) c = rng.uniform(-2.0, 2.0);
      double a = 0, b = 0;
      bool a_threw = false, b_threw = false;
      try {
        a = e.eval(x);
      } catch (const semiflow::Error&) {
        a_threw = true;
      }
      try {
        b = e2.eval(x);
      } catch (const semiflow::Error&) {
        b_threw = true;
      }
      REQUIRE(a_threw == b_threw);
      if (!a_threw) {
        // same tree, same operations: bitwise-identical results
        REQUIRE((a == b || (std::isnan(a) && std::isnan(b))));
      }
    }
  }
}

TEST_CASE("substitution and programmatic builders", "[expr]") {
  // reflection: g(x) = -f(-x)
  Expr f = Expr::parse("1 + x^2 + sin(x)", 1);
  Expr g = f.substitute(1, Expr::variable(1, 1).negate()).negate();
  for (double x : {-2.0, -0.5, 0.0, 1.0, 3.0}) {
    CHECK(g({x}) == Catch::Approx(-(1 + x * x + std::sin(-x))).margin(1e-15));
  }

  Expr sq = Expr::parse("x1^2 + x2", 2);
  Expr sub = sq.substitute(2, Expr::constant(1.0) + Expr::variable(1, 2));
  CHECK(sub({3.0, 99.0}) == 13.0);  // x2 replaced by 1 + x1

  CHECK(Expr::parse("x1 + 0*x3", 3).max_variable() == 3);
}

TEST_CASE("vector fields evaluate componentwise", "[expr]") {
  auto b = semiflow::VectorField::parse(2, {"-x2", "x1"});
  auto v = b(std::vector<double>{3.0, 4.0});
  REQUIRE(v.size() == 2);
  CHECK(v[0] == -4.0);
  CHECK(v[1] == 3.0);
  CHECK(b.dim() == 2);
  CHECK_THROWS_AS(semiflow::VectorField::parse(2, {"x1"}), std::invalid_argument);
  CHECK_THROWS_AS(semiflow::VectorField::parse(1, {"x2"}), DimensionError);
}

TEST_CASE("radial bounds enforce positivity where evaluated", "[expr]") {
  auto beta = semiflow::RadialBound::parse("r", 1.0);
  CHECK(beta(2.0) == 2.0);
  CHECK(beta.inner_radius() == 1.0);
  auto bad = semiflow::RadialBound::parse("r - 3", 1.0);
  CHECK_THROWS_AS(bad(2.0), semiflow::NonPositiveBound);
  CHECK(bad(5.0) == 2.0);
  CHECK_THROWS_AS(semiflow::RadialBound::parse("r", 0.0), std::invalid_argument);
}
