#pragma once

#include <complex>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tropiscope/errors.hpp"

namespace trop {

using Complex = std::complex<double>;

enum class NodeKind {
  Constant,
  Variable,
  Sum,
  Product,
  Negate,
  Power,  // integer exponent, possibly negative on variables
  Exp,
  Sin,
  Cos,
};

struct ExprNode;
using NodePtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  NodeKind kind = NodeKind::Constant;
  Complex value{0.0, 0.0};         // Constant
  int var_index = -1;              // Variable, 0-based
  char var_prefix = 'z';           // spelling used in the source text
  long long exponent = 1;          // Power
  std::vector<NodePtr> children;
};

/// An immutable expression over `arity` complex torus variables.
/// Nodes are shared and never mutated after construction.
class Expression {
 public:
  Expression() = default;
  Expression(NodePtr root, int arity) : root_(std::move(root)), arity_(arity) {}

  const NodePtr& root() const { return root_; }
  int arity() const { return arity_; }
  bool valid() const { return root_ != nullptr; }

  /// Printed normal form; re-parsing it yields a structurally equal AST.
  std::string str() const;

  bool has_transcendental() const;

  friend bool operator==(const Expression& a, const Expression& b);

 private:
  NodePtr root_;
  int arity_ = 0;
};

/// Parses `text` against the expression grammar with variables z1..zn
/// (t/t1..tn accepted as an alternative spelling, e.g. for parameters).
/// Throws SyntaxError / UnknownIdentifier / VarIndexOutOfRange.
Expression parse_expression(std::string_view text, int arity);

/// Evaluates with standard complex semantics. Throws NonFiniteValue if the
/// result overflows; use try_eval where overflow is expected control flow.
Complex eval(const Expression& f, std::span<const Complex> z);

/// Returns nullopt instead of throwing when the value is non-finite.
std::optional<Complex> try_eval(const Expression& f, std::span<const Complex> z);

/// Magnitude scale of f near z, used for relative residual tests: an upper
/// proxy for evaluation noise in units of machine epsilon. Term magnitudes
/// add through sums and multiply through products, so cancellation at a zero
/// of f never shrinks the scale below the size of the terms that cancelled.
double eval_scale(const Expression& f, std::span<const Complex> z);

/// Symbolic partial derivative with respect to variable `var` (0-based).
Expression differentiate(const Expression& f, int var);

using ExponentVec = std::vector<long long>;

/// Finite map exponent vector -> nonzero coefficient.
struct LaurentPolynomial {
  int arity = 0;
  std::map<ExponentVec, Complex> terms;

  bool is_zero() const { return terms.empty(); }
  bool is_monomial() const { return terms.size() == 1; }

  LaurentPolynomial& add_term(const ExponentVec& alpha, Complex c);
};

LaurentPolynomial laurent_add(const LaurentPolynomial& a, const LaurentPolynomial& b);
LaurentPolynomial laurent_mul(const LaurentPolynomial& a, const LaurentPolynomial& b);
LaurentPolynomial laurent_neg(const LaurentPolynomial& a);
LaurentPolynomial laurent_pow(const LaurentPolynomial& a, long long e);

Complex eval(const LaurentPolynomial& p, std::span<const Complex> z);

/// Formal partial derivative with respect to variable `var` (0-based).
LaurentPolynomial laurent_derivative(const LaurentPolynomial& p, int var);

/// Exact Laurent form of f. Throws NotPolynomial when f contains exp/sin/cos.
LaurentPolynomial to_laurent(const Expression& f);

struct SeriesTruncation {
  LaurentPolynomial poly;
  long long degree_bound = 0;
  bool tail_nonzero = false;  // true iff nonzero terms were discarded
};

/// All Taylor coefficients of the entire function f with |alpha|_1 <= D,
/// computed by formal composition. Coefficients below 1e-15 in magnitude are
/// dropped and recorded in tail_nonzero.
SeriesTruncation truncate_series(const Expression& f, long long degree_bound);

/// Substitutes fixed values for every variable except `free_var`, giving a
/// univariate Laurent polynomial exponent -> coefficient.
std::map<long long, Complex> substitute_all_but(const LaurentPolynomial& p,
                                                std::span<const Complex> values,
                                                int free_var);

}  // namespace trop
