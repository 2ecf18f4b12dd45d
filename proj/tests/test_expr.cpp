#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "tropiscope/expr.hpp"

using namespace trop;

namespace {

ExponentVec ev(std::initializer_list<long long> xs) { return ExponentVec(xs); }

NodePtr leaf_constant(Complex c) {
  auto n = std::make_shared<ExprNode>();
  n->kind = NodeKind::Constant;
  n->value = c;
  return n;
}

NodePtr leaf_variable(int index, char prefix) {
  auto n = std::make_shared<ExprNode>();
  n->kind = NodeKind::Variable;
  n->var_index = index;
  n->var_prefix = prefix;
  return n;
}

bool subtree_constant(const NodePtr& n) { return n->kind == NodeKind::Constant; }

// Random ASTs restricted to the parser's normal form: composite nodes keep at
// least one non-constant child (the parser folds all-constant subtrees) and
// powers use exponents the parser does not rewrite.
NodePtr random_ast(std::mt19937_64& rng, int arity, int depth, bool polynomial_only) {
  std::uniform_int_distribution<int> pick_kind(0, polynomial_only ? 5 : 8);
  std::uniform_int_distribution<int> pick_var(0, arity - 1);
  auto random_leaf = [&]() -> NodePtr {
    if (std::uniform_int_distribution<int>(0, 2)(rng) == 0) {
      static const Complex pool[] = {{0.0, 0.0}, {1.0, 0.0},   {2.0, 0.0},
                                     {0.5, 0.0}, {3.25, 0.0},  {-1.0, 0.0},
                                     {-2.5, 0.0}, {0.0, 1.0},  {0.0, -2.0},
                                     {2.0, 3.0}, {-1.5, -2.25}, {std::numbers::pi, 0.0}};
      return leaf_constant(pool[std::uniform_int_distribution<size_t>(0, 11)(rng)]);
    }
    char prefix = std::uniform_int_distribution<int>(0, 4)(rng) == 0 ? 't' : 'z';
    return leaf_variable(pick_var(rng), prefix);
  };
  if (depth <= 0) return random_leaf();

  int kind = pick_kind(rng);
  auto n = std::make_shared<ExprNode>();
  auto fill_children = [&](size_t count) {
    for (size_t i = 0; i < count; ++i)
      n->children.push_back(random_ast(rng, arity, depth - 1, polynomial_only));
    bool all_const = true;
    for (const auto& c : n->children) all_const = all_const && subtree_constant(c);
    if (all_const) n->children[0] = leaf_variable(pick_var(rng), 'z');
  };
  switch (kind) {
    case 0:
    case 1: {
      n->kind = NodeKind::Sum;
      fill_children(std::uniform_int_distribution<size_t>(2, 3)(rng));
      return n;
    }
    case 2: {
      n->kind = NodeKind::Product;
      fill_children(std::uniform_int_distribution<size_t>(2, 3)(rng));
      return n;
    }
    case 3: {
      n->kind = NodeKind::Negate;
      fill_children(1);
      return n;
    }
    case 4: {
      n->kind = NodeKind::Power;
      n->children.push_back(leaf_variable(pick_var(rng), 'z'));
      static const long long var_exponents[] = {-3, -2, -1, 2, 3};
      n->exponent = var_exponents[std::uniform_int_distribution<size_t>(0, 4)(rng)];
      return n;
    }
    case 5: {
      n->kind = NodeKind::Power;
      fill_children(1);
      if (subtree_constant(n->children[0]) || n->children[0]->kind == NodeKind::Variable)
        n->children[0] = random_ast(rng, arity, 0, polynomial_only);
      if (subtree_constant(n->children[0]))
        n->children[0] = leaf_variable(pick_var(rng), 'z');
      n->exponent = std::uniform_int_distribution<long long>(2, 3)(rng);
      return n;
    }
    case 6: n->kind = NodeKind::Exp; fill_children(1); return n;
    case 7: n->kind = NodeKind::Sin; fill_children(1); return n;
    default: n->kind = NodeKind::Cos; fill_children(1); return n;
  }
}

}  // namespace

TEST_CASE("parse produces the expected node shapes") {
  auto line = parse_expression("1+z1+z2", 2);
  REQUIRE(line.root()->kind == NodeKind::Sum);
  CHECK(line.root()->children.size() == 3);
  CHECK_FALSE(line.has_transcendental());

  auto s = parse_expression("sin(pi*z1*z2)", 2);
  REQUIRE(s.root()->kind == NodeKind::Sin);
  REQUIRE(s.root()->children[0]->kind == NodeKind::Product);
  CHECK(s.root()->children[0]->children.size() == 3);
  CHECK(s.has_transcendental());

  auto laurent = parse_expression("z1^-2 + exp(z2)", 2);
  REQUIRE(laurent.root()->kind == NodeKind::Sum);
  REQUIRE(laurent.root()->children[0]->kind == NodeKind::Power);
  CHECK(laurent.root()->children[0]->exponent == -2);
  CHECK(laurent.root()->children[0]->children[0]->kind == NodeKind::Variable);
  CHECK(laurent.root()->children[1]->kind == NodeKind::Exp);
}

TEST_CASE("parse accepts both variable spellings") {
  auto a = parse_expression("t", 1);
  auto b = parse_expression("t1", 1);
  CHECK(a == b);
  CHECK(a.root()->var_index == 0);
  auto c = parse_expression("z2*t2", 2);
  CHECK(c.root()->children[0]->var_index == 1);
  CHECK(c.root()->children[1]->var_index == 1);
}

TEST_CASE("parse errors carry codes and byte offsets") {
  auto expect_code = [](const char* text, int arity, ErrorCode code) {
    try {
      parse_expression(text, arity);
      FAIL_CHECK("no error for ", text);
    } catch (const Error& e) {
      CHECK(e.code() == code);
    }
  };
  expect_code("1 + + z1", 2, ErrorCode::SyntaxError);
  expect_code("w1+1", 2, ErrorCode::UnknownIdentifier);
  expect_code("spam(z1)", 1, ErrorCode::UnknownIdentifier);
  expect_code("z3", 2, ErrorCode::VarIndexOutOfRange);
  expect_code("t4", 3, ErrorCode::VarIndexOutOfRange);
  expect_code("(z1+z2)^-1", 2, ErrorCode::SyntaxError);
  expect_code("z1*", 1, ErrorCode::SyntaxError);
  expect_code("(z1", 1, ErrorCode::SyntaxError);
  expect_code("z1 z2", 2, ErrorCode::SyntaxError);

  try {
    parse_expression("1 + + z1", 2);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("byte 4") != std::string::npos);
  }
}

TEST_CASE("eval matches hand values") {
  auto line = parse_expression("1+z1+z2", 2);
  Complex z_line[] = {{1.0, 0.0}, {-2.0, 0.0}};
  CHECK(std::abs(eval(line, z_line)) == 0.0);

  auto s = parse_expression("sin(pi*z1*z2)", 2);
  Complex ones[] = {{1.0, 0.0}, {1.0, 0.0}};
  CHECK(std::abs(eval(s, ones)) <= 1e-12);

  auto e = parse_expression("exp(z1)", 1);
  Complex ipi[] = {{0.0, std::numbers::pi}};
  CHECK(std::abs(eval(e, ipi) - Complex{-1.0, 0.0}) <= 1e-12);
}

TEST_CASE("eval reports overflow instead of propagating it") {
  auto e = parse_expression("exp(z1)", 1);
  Complex huge[] = {{1e6, 0.0}};
  CHECK_THROWS_AS((void)eval(e, huge), Error);
  CHECK_FALSE(try_eval(e, huge).has_value());
  Complex fine[] = {{2.0, 0.0}};
  CHECK(try_eval(e, fine).has_value());
}

TEST_CASE("eval_scale sums the magnitudes of top-level terms") {
  auto f = parse_expression("z1*z2-1", 2);
  Complex ones[] = {{1.0, 0.0}, {1.0, 0.0}};
  CHECK(eval_scale(f, ones) == doctest::Approx(2.0));
  auto g = parse_expression("z1^2", 1);
  Complex three[] = {{3.0, 0.0}};
  CHECK(eval_scale(g, three) == doctest::Approx(9.0));
}

TEST_CASE("eval_scale never shrinks under cancellation") {
  // A product vanishing at the point still reports the factor magnitudes.
  auto f = parse_expression("(1+z1)*(2+z1)", 1);
  Complex at[] = {{-1.0, 0.0}};
  CHECK(eval(f, at) == Complex{0.0, 0.0});
  CHECK(eval_scale(f, at) == doctest::Approx(2.0 * 3.0));

  // sin at a zero of large argument reports the argument scale.
  auto s = parse_expression("sin(z1)", 1);
  Complex big[] = {{1000.0 * std::numbers::pi, 0.0}};
  CHECK(eval_scale(s, big) == doctest::Approx(1000.0 * std::numbers::pi));

  Complex tiny[] = {{1e-3, 0.0}};
  CHECK(eval_scale(s, tiny) == 1.0);
}

TEST_CASE("to_laurent on the frozen examples") {
  auto line = to_laurent(parse_expression("1+z1+z2", 2));
  REQUIRE(line.terms.size() == 3);
  CHECK(line.terms.at(ev({0, 0})) == Complex{1.0, 0.0});
  CHECK(line.terms.at(ev({1, 0})) == Complex{1.0, 0.0});
  CHECK(line.terms.at(ev({0, 1})) == Complex{1.0, 0.0});

  auto hyp = to_laurent(parse_expression("z1*z2-1", 2));
  REQUIRE(hyp.terms.size() == 2);
  CHECK(hyp.terms.at(ev({1, 1})) == Complex{1.0, 0.0});
  CHECK(hyp.terms.at(ev({0, 0})) == Complex{-1.0, 0.0});

  CHECK_THROWS_AS((void)to_laurent(parse_expression("sin(pi*z1*z2)", 2)), Error);
  try {
    (void)to_laurent(parse_expression("sin(pi*z1*z2)", 2));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotPolynomial);
  }
}

TEST_CASE("to_laurent cancels exactly") {
  auto p = to_laurent(parse_expression("(z1+1)*(z1-1)-z1^2", 1));
  REQUIRE(p.terms.size() == 1);
  CHECK(p.terms.at(ev({0})) == Complex{-1.0, 0.0});
}

TEST_CASE("truncate_series frozen values") {
  auto s = truncate_series(parse_expression("sin(pi*z1*z2)", 2), 4);
  REQUIRE(s.poly.terms.size() == 1);
  CHECK(s.poly.terms.at(ev({1, 1})).real() == doctest::Approx(std::numbers::pi).epsilon(1e-15));
  CHECK(s.poly.terms.at(ev({1, 1})).imag() == 0.0);
  CHECK(s.tail_nonzero);

  auto e = truncate_series(parse_expression("exp(z1)", 1), 2);
  REQUIRE(e.poly.terms.size() == 3);
  CHECK(e.poly.terms.at(ev({0})) == Complex{1.0, 0.0});
  CHECK(e.poly.terms.at(ev({1})) == Complex{1.0, 0.0});
  CHECK(e.poly.terms.at(ev({2})) == Complex{0.5, 0.0});
  CHECK(e.tail_nonzero);

  auto line = truncate_series(parse_expression("1+z1+z2", 2), 10);
  CHECK(line.poly.terms == to_laurent(parse_expression("1+z1+z2", 2)).terms);
  CHECK_FALSE(line.tail_nonzero);
}

TEST_CASE("truncate_series rejects Laurent input and runaway nesting") {
  try {
    (void)truncate_series(parse_expression("z1^-1", 1), 2);
    FAIL_CHECK("negative power accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NegativePowerInEntireContext);
  }

  std::string nested = "z1";
  for (int i = 0; i < 17; ++i) nested = "exp(" + nested + ")";
  try {
    (void)truncate_series(parse_expression(nested, 1), 1);
    FAIL_CHECK("depth cap not enforced");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SeriesDepthExceeded);
  }
}

TEST_CASE("truncation at a larger bound restricts exactly") {
  const char* cases[] = {"exp(z1+z2)", "sin(z1*z2+z1)", "cos(z1)*exp(z2)",
                         "exp(z1)*exp(z2)-sin(z1+z2)"};
  for (const char* text : cases) {
    auto f = parse_expression(text, 2);
    auto coarse = truncate_series(f, 4);
    auto fine = truncate_series(f, 8);
    LaurentPolynomial restricted;
    restricted.arity = 2;
    for (const auto& [alpha, c] : fine.poly.terms) {
      long long deg = 0;
      for (long long a : alpha) deg += a;
      if (deg <= 4) restricted.terms.emplace(alpha, c);
    }
    CHECK(restricted.terms == coarse.poly.terms);
  }
}

TEST_CASE("laurent arithmetic basics") {
  auto p = to_laurent(parse_expression("z1^2*z2+z1*z2-3", 2));
  auto dp = laurent_derivative(p, 0);
  REQUIRE(dp.terms.size() == 2);
  CHECK(dp.terms.at(ev({1, 1})) == Complex{2.0, 0.0});
  CHECK(dp.terms.at(ev({0, 1})) == Complex{1.0, 0.0});

  Complex vals[] = {{0.0, 0.0}, {2.0, 0.0}};
  auto uni = substitute_all_but(p, vals, 0);
  REQUIRE(uni.size() == 3);
  CHECK(uni.at(2) == Complex{2.0, 0.0});
  CHECK(uni.at(1) == Complex{2.0, 0.0});
  CHECK(uni.at(0) == Complex{-3.0, 0.0});

  auto inv = to_laurent(parse_expression("z1^-1", 1));
  auto sq = laurent_pow(inv, -2);
  REQUIRE(sq.terms.size() == 1);
  CHECK(sq.terms.at(ev({2})) == Complex{1.0, 0.0});
}

TEST_CASE("differentiate on hand cases") {
  CHECK(differentiate(parse_expression("1+z1+z2", 2), 0) ==
        parse_expression("1", 2));
  CHECK(differentiate(parse_expression("z1^3", 1), 0) ==
        parse_expression("3*z1^2", 1));
  CHECK(differentiate(parse_expression("exp(z1)", 1), 0) ==
        parse_expression("exp(z1)", 1));
  CHECK(differentiate(parse_expression("sin(z1)", 1), 0) ==
        parse_expression("cos(z1)", 1));
  CHECK(differentiate(parse_expression("cos(z1)", 1), 0) ==
        parse_expression("-sin(z1)", 1));
  CHECK(differentiate(parse_expression("sin(t1*t2)", 2), 0) ==
        parse_expression("cos(t1*t2)*t2", 2));

  auto zero = differentiate(parse_expression("z1^2+7", 2), 1);
  CHECK(to_laurent(zero).is_zero());

  CHECK_THROWS_AS(differentiate(parse_expression("z1", 1), -1), Error);
  CHECK_THROWS_AS(differentiate(parse_expression("z1", 1), 1), Error);
}

TEST_CASE("differentiate agrees with the formal Laurent derivative") {
  std::mt19937_64 rng(45812);
  auto close = [](const LaurentPolynomial& a, const LaurentPolynomial& b) {
    std::set<ExponentVec> keys;
    for (const auto& [k, v] : a.terms) keys.insert(k);
    for (const auto& [k, v] : b.terms) keys.insert(k);
    for (const auto& k : keys) {
      Complex ca = a.terms.count(k) ? a.terms.at(k) : Complex{0.0, 0.0};
      Complex cb = b.terms.count(k) ? b.terms.at(k) : Complex{0.0, 0.0};
      if (std::abs(ca - cb) > 1e-11 * (1.0 + std::max(std::abs(ca), std::abs(cb))))
        return false;
    }
    return true;
  };
  for (int trial = 0; trial < 400; ++trial) {
    int arity = 1 + static_cast<int>(rng() % 3);
    Expression f(random_ast(rng, arity, 1 + static_cast<int>(rng() % 3), true), arity);
    int var = static_cast<int>(rng() % static_cast<uint64_t>(arity));
    CAPTURE(f.str());
    CAPTURE(var);
    CHECK(close(to_laurent(differentiate(f, var)), laurent_derivative(to_laurent(f), var)));
  }
}

TEST_CASE("differentiate matches central differences") {
  std::mt19937_64 rng(773031);
  std::uniform_real_distribution<double> coord(-0.8, 0.8);
  int done = 0;
  while (done < 300) {
    int arity = 1 + static_cast<int>(rng() % 3);
    Expression f(random_ast(rng, arity, 1 + static_cast<int>(rng() % 2), false), arity);
    int var = static_cast<int>(rng() % static_cast<uint64_t>(arity));
    Expression d = differentiate(f, var);
    std::vector<Complex> z(static_cast<size_t>(arity));
    for (auto& zi : z) zi = {coord(rng), coord(rng)};
    auto fz = try_eval(f, z);
    auto dz = try_eval(d, z);
    if (!fz || !dz || std::abs(*dz) > 1e5) continue;
    double h = 1e-5;
    auto zp = z, zm = z;
    zp[static_cast<size_t>(var)] += h;
    zm[static_cast<size_t>(var)] -= h;
    auto fp = try_eval(f, zp);
    auto fm = try_eval(f, zm);
    if (!fp || !fm || std::abs(*fp) > 1e6 || std::abs(*fm) > 1e6) continue;
    Complex fd = (*fp - *fm) / (2.0 * h);
    CAPTURE(f.str());
    CAPTURE(var);
    CHECK(std::abs(fd - *dz) <= 1e-4 * (1.0 + std::abs(*dz)));
    ++done;
  }
}

TEST_CASE("printed normal form re-parses to an equal AST") {
  std::mt19937_64 rng(20240817);
  for (int trial = 0; trial < 600; ++trial) {
    int arity = 1 + static_cast<int>(rng() % 3);
    int depth = 1 + static_cast<int>(rng() % 3);
    Expression a(random_ast(rng, arity, depth, false), arity);
    std::string text = a.str();
    CAPTURE(text);
    Expression b = parse_expression(text, arity);
    CHECK(a == b);
    CHECK(b.str() == text);
  }
}

TEST_CASE("laurent form evaluates like the AST on the unit torus") {
  std::mt19937_64 rng(96211);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  int done = 0;
  while (done < 1000) {
    int arity = 1 + static_cast<int>(rng() % 3);
    Expression f(random_ast(rng, arity, 1 + static_cast<int>(rng() % 3), true), arity);
    auto p = to_laurent(f);
    std::vector<Complex> z(static_cast<size_t>(arity));
    for (auto& zi : z) zi = std::polar(1.0, angle(rng));
    Complex a = eval(f, z);
    Complex b = eval(p, z);
    CAPTURE(f.str());
    CHECK(std::abs(a - b) <= 1e-10 * (1.0 + std::max(std::abs(a), std::abs(b))));
    ++done;
  }
}
