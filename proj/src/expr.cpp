#include "tropiscope/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <numbers>

namespace trop {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::UnknownIdentifier: return "UnknownIdentifier";
    case ErrorCode::VarIndexOutOfRange: return "VarIndexOutOfRange";
    case ErrorCode::NotPolynomial: return "NotPolynomial";
    case ErrorCode::NegativePowerInEntireContext: return "NegativePowerInEntireContext";
    case ErrorCode::SeriesDepthExceeded: return "SeriesDepthExceeded";
    case ErrorCode::EmptySupport: return "EmptySupport";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DimensionTooLarge: return "DimensionTooLarge";
    case ErrorCode::MonomialInput: return "MonomialInput";
    case ErrorCode::NotCompact: return "NotCompact";
    case ErrorCode::BadBounds: return "BadBounds";
    case ErrorCode::BadArgument: return "BadArgument";
    case ErrorCode::ShellUnreachable: return "ShellUnreachable";
    case ErrorCode::RootFindingBudgetExceeded: return "RootFindingBudgetExceeded";
    case ErrorCode::NoPointsNearDirection: return "NoPointsNearDirection";
    case ErrorCode::EmptyAfterCutoff: return "EmptyAfterCutoff";
    case ErrorCode::DegenerateScales: return "DegenerateScales";
    case ErrorCode::EmptyBox: return "EmptyBox";
    case ErrorCode::IoError: return "IoError";
  }
  return "Error";
}

namespace {

NodePtr make_constant(Complex c) {
  auto n = std::make_shared<ExprNode>();
  n->kind = NodeKind::Constant;
  n->value = c;
  return n;
}

NodePtr make_variable(int index, char prefix) {
  auto n = std::make_shared<ExprNode>();
  n->kind = NodeKind::Variable;
  n->var_index = index;
  n->var_prefix = prefix;
  return n;
}

NodePtr make_node(NodeKind kind, std::vector<NodePtr> children) {
  auto n = std::make_shared<ExprNode>();
  n->kind = kind;
  n->children = std::move(children);
  return n;
}

bool is_constant(const NodePtr& n) { return n->kind == NodeKind::Constant; }

Complex pow_int(Complex base, long long e) {
  if (e < 0) return 1.0 / pow_int(base, -e);
  Complex acc{1.0, 0.0};
  Complex b = base;
  while (e > 0) {
    if (e & 1) acc *= b;
    b *= b;
    e >>= 1;
  }
  return acc;
}

/// Folds pure-constant subtrees so printed constants re-parse to equal nodes.
NodePtr fold_if_constant(NodePtr n) {
  switch (n->kind) {
    case NodeKind::Constant:
    case NodeKind::Variable:
      return n;
    default:
      break;
  }
  for (const auto& c : n->children)
    if (!is_constant(c)) return n;
  Complex v;
  switch (n->kind) {
    case NodeKind::Sum: {
      v = {0.0, 0.0};
      for (const auto& c : n->children) v += c->value;
      break;
    }
    case NodeKind::Product: {
      v = {1.0, 0.0};
      for (const auto& c : n->children) v *= c->value;
      break;
    }
    case NodeKind::Negate: v = -n->children[0]->value; break;
    case NodeKind::Power: v = pow_int(n->children[0]->value, n->exponent); break;
    case NodeKind::Exp: v = std::exp(n->children[0]->value); break;
    case NodeKind::Sin: v = std::sin(n->children[0]->value); break;
    case NodeKind::Cos: v = std::cos(n->children[0]->value); break;
    default: return n;
  }
  return make_constant(v);
}

struct Token {
  enum Type { Number, Ident, Plus, Minus, Star, Caret, LParen, RParen, End } type;
  size_t offset = 0;
  double number = 0.0;
  std::string ident;
};

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) { advance(); }

  const Token& peek() const { return tok_; }

  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

  [[noreturn]] void fail(const std::string& what, size_t offset) const {
    raise(ErrorCode::SyntaxError, what + " at byte " + std::to_string(offset));
  }

 private:
  void advance() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    tok_.offset = pos_;
    if (pos_ >= text_.size()) {
      tok_.type = Token::End;
      return;
    }
    char c = text_[pos_];
    switch (c) {
      case '+': tok_.type = Token::Plus; ++pos_; return;
      case '-': tok_.type = Token::Minus; ++pos_; return;
      case '*': tok_.type = Token::Star; ++pos_; return;
      case '^': tok_.type = Token::Caret; ++pos_; return;
      case '(': tok_.type = Token::LParen; ++pos_; return;
      case ')': tok_.type = Token::RParen; ++pos_; return;
      default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t start = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (pos_ < text_.size() && text_[pos_] == '.') {
        ++pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      }
      if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
        size_t mark = pos_;
        ++pos_;
        if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
        if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
          while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        } else {
          pos_ = mark;  // the 'e' belongs to an identifier or is stray
        }
      }
      tok_.type = Token::Number;
      tok_.number = std::strtod(std::string(text_.substr(start, pos_ - start)).c_str(), nullptr);
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      size_t start = pos_;
      while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      tok_.type = Token::Ident;
      tok_.ident = std::string(text_.substr(start, pos_ - start));
      return;
    }
    fail(std::string("unexpected character '") + c + "'", pos_);
  }

  std::string_view text_;
  size_t pos_ = 0;
  Token tok_;
};

class Parser {
 public:
  Parser(std::string_view text, int arity) : lex_(text), arity_(arity) {}

  NodePtr parse() {
    NodePtr e = parse_expr();
    const Token& t = lex_.peek();
    if (t.type != Token::End) lex_.fail("trailing input", t.offset);
    return e;
  }

 private:
  NodePtr parse_expr() {
    std::vector<NodePtr> terms;
    bool lead_minus = false;
    if (lex_.peek().type == Token::Minus) {
      lex_.take();
      lead_minus = true;
    }
    NodePtr first = parse_term();
    terms.push_back(lead_minus ? negate(first) : first);
    while (lex_.peek().type == Token::Plus || lex_.peek().type == Token::Minus) {
      bool minus = lex_.take().type == Token::Minus;
      NodePtr t = parse_term();
      terms.push_back(minus ? negate(t) : t);
    }
    if (terms.size() == 1) return terms[0];
    return fold_if_constant(make_node(NodeKind::Sum, std::move(terms)));
  }

  NodePtr parse_term() {
    std::vector<NodePtr> factors;
    factors.push_back(parse_factor());
    while (lex_.peek().type == Token::Star) {
      lex_.take();
      factors.push_back(parse_factor());
    }
    if (factors.size() == 1) return factors[0];
    return fold_if_constant(make_node(NodeKind::Product, std::move(factors)));
  }

  NodePtr parse_factor() {
    NodePtr base = parse_base();
    if (lex_.peek().type != Token::Caret) return base;
    size_t caret_at = lex_.take().offset;
    long long e = parse_int_exponent();
    if (e < 0 && base->kind != NodeKind::Variable && base->kind != NodeKind::Constant)
      lex_.fail("negative power of a non-variable subexpression", caret_at);
    if (e == 1) return base;
    if (e == 0) return make_constant({1.0, 0.0});
    auto n = std::make_shared<ExprNode>();
    n->kind = NodeKind::Power;
    n->exponent = e;
    n->children.push_back(base);
    return fold_if_constant(n);
  }

  long long parse_int_exponent() {
    long long sign = 1;
    if (lex_.peek().type == Token::Minus) {
      lex_.take();
      sign = -1;
    } else if (lex_.peek().type == Token::Plus) {
      lex_.take();
    }
    const Token& t = lex_.peek();
    if (t.type != Token::Number) lex_.fail("expected integer exponent", t.offset);
    Token num = lex_.take();
    double v = num.number;
    if (v != std::floor(v) || std::abs(v) > 1e9)
      lex_.fail("exponent must be a small integer", num.offset);
    return sign * static_cast<long long>(v);
  }

  NodePtr parse_base() {
    Token t = lex_.take();
    switch (t.type) {
      case Token::Number:
        return make_constant({t.number, 0.0});
      case Token::LParen: {
        NodePtr e = parse_expr();
        Token close = lex_.take();
        if (close.type != Token::RParen) lex_.fail("expected ')'", close.offset);
        return e;
      }
      case Token::Ident:
        return parse_ident(t);
      default:
        lex_.fail("expected a number, variable, function or '('", t.offset);
    }
  }

  NodePtr parse_ident(const Token& t) {
    const std::string& s = t.ident;
    if (s == "pi") return make_constant({std::numbers::pi, 0.0});
    if (s == "i") return make_constant({0.0, 1.0});
    if (s == "exp" || s == "sin" || s == "cos") {
      Token open = lex_.take();
      if (open.type != Token::LParen) lex_.fail("expected '(' after function name", open.offset);
      NodePtr arg = parse_expr();
      Token close = lex_.take();
      if (close.type != Token::RParen) lex_.fail("expected ')'", close.offset);
      NodeKind k = s == "exp" ? NodeKind::Exp : (s == "sin" ? NodeKind::Sin : NodeKind::Cos);
      return fold_if_constant(make_node(k, {arg}));
    }
    char prefix = s[0];
    if (prefix == 'z' || prefix == 't') {
      size_t d = 1;
      while (d < s.size() && std::isdigit(static_cast<unsigned char>(s[d]))) ++d;
      if (d != s.size())
        raise(ErrorCode::UnknownIdentifier,
              "unknown identifier '" + s + "' at byte " + std::to_string(t.offset));
      long long index = 1;  // bare 't' means t1
      if (s.size() > 1) {
        index = std::strtoll(s.c_str() + 1, nullptr, 10);
      } else if (prefix == 'z') {
        lex_.fail("variable 'z' requires an index", t.offset);
      }
      if (index < 1 || index > arity_)
        raise(ErrorCode::VarIndexOutOfRange,
              "variable index " + std::to_string(index) + " outside [1," +
                  std::to_string(arity_) + "] at byte " + std::to_string(t.offset));
      return make_variable(static_cast<int>(index - 1), prefix);
    }
    raise(ErrorCode::UnknownIdentifier,
          "unknown identifier '" + s + "' at byte " + std::to_string(t.offset));
  }

  NodePtr negate(NodePtr n) {
    if (is_constant(n)) return make_constant(-n->value);
    return make_node(NodeKind::Negate, {std::move(n)});
  }

  Lexer lex_;
  int arity_;
};

// Printing precedence levels; children below their context get parentheses.
constexpr int kPrecSum = 10;
constexpr int kPrecNeg = 15;
constexpr int kPrecProduct = 20;
constexpr int kPrecPower = 30;
constexpr int kPrecAtom = 40;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int node_precedence(const ExprNode& n) {
  switch (n.kind) {
    case NodeKind::Sum: return kPrecSum;
    case NodeKind::Negate: return kPrecNeg;
    case NodeKind::Product: return kPrecProduct;
    case NodeKind::Power: return kPrecPower;
    case NodeKind::Constant: {
      double re = n.value.real(), im = n.value.imag();
      if (im == 0.0) return re < 0.0 ? kPrecNeg : kPrecAtom;
      if (re == 0.0) {
        if (im == 1.0) return kPrecAtom;               // "i"
        return im < 0.0 ? kPrecNeg : kPrecProduct;     // "-2*i" / "2*i"
      }
      return kPrecAtom;  // printed as "(a+b*i)"
    }
    default: return kPrecAtom;
  }
}

std::string print_node(const ExprNode& n, int context);

std::string print_constant(const Complex& v) {
  double re = v.real(), im = v.imag();
  if (im == 0.0) {
    if (re < 0.0) return "-" + format_double(-re);
    return format_double(re + 0.0);  // normalizes -0.0
  }
  if (re == 0.0) {
    if (im == 1.0) return "i";
    if (im == -1.0) return "-i";
    if (im < 0.0) return "-" + format_double(-im) + "*i";
    return format_double(im) + "*i";
  }
  std::string real_part = re < 0.0 ? "-" + format_double(-re) : format_double(re);
  std::string imag_part;
  if (im == 1.0) imag_part = "+i";
  else if (im == -1.0) imag_part = "-i";
  else if (im < 0.0) imag_part = "-" + format_double(-im) + "*i";
  else imag_part = "+" + format_double(im) + "*i";
  return "(" + real_part + imag_part + ")";
}

std::string wrap(const ExprNode& n, int context, const std::string& body) {
  if (node_precedence(n) < context) return "(" + body + ")";
  return body;
}

std::string print_node(const ExprNode& n, int context) {
  switch (n.kind) {
    case NodeKind::Constant:
      return wrap(n, context, print_constant(n.value));
    case NodeKind::Variable: {
      std::string s(1, n.var_prefix);
      s += std::to_string(n.var_index + 1);
      return s;
    }
    case NodeKind::Sum: {
      std::string out;
      bool first = true;
      for (const auto& c : n.children) {
        bool neg_const = c->kind == NodeKind::Constant &&
                         ((c->value.imag() == 0.0 && c->value.real() < 0.0) ||
                          (c->value.real() == 0.0 && c->value.imag() < 0.0));
        if (c->kind == NodeKind::Negate) {
          out += "-";
          out += print_node(*c->children[0], kPrecNeg + 1);
        } else if (neg_const) {
          out += "-";
          out += print_constant(-c->value);
        } else {
          if (!first) out += "+";
          out += print_node(*c, kPrecSum + 1);
        }
        first = false;
      }
      return wrap(n, context, out);
    }
    case NodeKind::Product: {
      std::string out;
      for (size_t i = 0; i < n.children.size(); ++i) {
        if (i) out += "*";
        out += print_node(*n.children[i], kPrecProduct + 1);
      }
      return wrap(n, context, out);
    }
    case NodeKind::Negate:
      return wrap(n, context, "-" + print_node(*n.children[0], kPrecNeg + 1));
    case NodeKind::Power: {
      std::string out = print_node(*n.children[0], kPrecPower + 1);
      out += "^";
      out += std::to_string(n.exponent);
      return wrap(n, context, out);
    }
    case NodeKind::Exp:
      return "exp(" + print_node(*n.children[0], 0) + ")";
    case NodeKind::Sin:
      return "sin(" + print_node(*n.children[0], 0) + ")";
    case NodeKind::Cos:
      return "cos(" + print_node(*n.children[0], 0) + ")";
  }
  return "";
}

bool nodes_equal(const ExprNode& a, const ExprNode& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case NodeKind::Constant:
      if (!(a.value == b.value)) return false;
      break;
    case NodeKind::Variable:
      if (a.var_index != b.var_index || a.var_prefix != b.var_prefix) return false;
      break;
    case NodeKind::Power:
      if (a.exponent != b.exponent) return false;
      break;
    default:
      break;
  }
  if (a.children.size() != b.children.size()) return false;
  for (size_t i = 0; i < a.children.size(); ++i)
    if (!nodes_equal(*a.children[i], *b.children[i])) return false;
  return true;
}

bool node_has_transcendental(const ExprNode& n) {
  if (n.kind == NodeKind::Exp || n.kind == NodeKind::Sin || n.kind == NodeKind::Cos) return true;
  for (const auto& c : n.children)
    if (node_has_transcendental(*c)) return true;
  return false;
}

Complex eval_node(const ExprNode& n, std::span<const Complex> z) {
  switch (n.kind) {
    case NodeKind::Constant: return n.value;
    case NodeKind::Variable: return z[static_cast<size_t>(n.var_index)];
    case NodeKind::Sum: {
      Complex acc{0.0, 0.0};
      for (const auto& c : n.children) acc += eval_node(*c, z);
      return acc;
    }
    case NodeKind::Product: {
      Complex acc{1.0, 0.0};
      for (const auto& c : n.children) acc *= eval_node(*c, z);
      return acc;
    }
    case NodeKind::Negate: return -eval_node(*n.children[0], z);
    case NodeKind::Power: return pow_int(eval_node(*n.children[0], z), n.exponent);
    case NodeKind::Exp: return std::exp(eval_node(*n.children[0], z));
    case NodeKind::Sin: return std::sin(eval_node(*n.children[0], z));
    case NodeKind::Cos: return std::cos(eval_node(*n.children[0], z));
  }
  return {0.0, 0.0};
}

bool finite(Complex v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); }

}  // namespace

std::string Expression::str() const {
  if (!root_) return "";
  return print_node(*root_, 0);
}

bool Expression::has_transcendental() const {
  return root_ && node_has_transcendental(*root_);
}

bool operator==(const Expression& a, const Expression& b) {
  if (a.arity_ != b.arity_) return false;
  if (!a.root_ || !b.root_) return a.root_ == b.root_;
  return nodes_equal(*a.root_, *b.root_);
}

Expression parse_expression(std::string_view text, int arity) {
  if (arity < 1) raise(ErrorCode::BadArgument, "arity must be >= 1");
  Parser p(text, arity);
  return Expression(p.parse(), arity);
}

Complex eval(const Expression& f, std::span<const Complex> z) {
  Complex v = eval_node(*f.root(), z);
  if (!finite(v)) raise(ErrorCode::NonFiniteValue, "evaluation overflowed");
  return v;
}

std::optional<Complex> try_eval(const Expression& f, std::span<const Complex> z) {
  Complex v = eval_node(*f.root(), z);
  if (!finite(v)) return std::nullopt;
  return v;
}

namespace {

/// Upper proxy for the evaluation noise of a subtree, in units of machine
/// epsilon: term magnitudes add through sums and multiply through products,
/// so cancellation never shrinks the scale.
double scale_node(const ExprNode& n, std::span<const Complex> z) {
  switch (n.kind) {
    case NodeKind::Constant:
      return std::abs(n.value);
    case NodeKind::Variable:
      return std::abs(z[static_cast<size_t>(n.var_index)]);
    case NodeKind::Sum: {
      double acc = 0.0;
      for (const auto& c : n.children) acc += scale_node(*c, z);
      return acc;
    }
    case NodeKind::Product: {
      double acc = 1.0;
      for (const auto& c : n.children) acc *= scale_node(*c, z);
      return acc;
    }
    case NodeKind::Negate:
      return scale_node(*n.children[0], z);
    case NodeKind::Power: {
      double b = scale_node(*n.children[0], z);
      if (n.exponent >= 0) return std::pow(b, static_cast<double>(n.exponent));
      double bv = std::abs(eval_node(*n.children[0], z));
      double rel = bv > 0.0 ? std::max(1.0, b / bv) : std::numeric_limits<double>::infinity();
      return std::abs(eval_node(n, z)) * rel;
    }
    case NodeKind::Exp:
      return std::abs(eval_node(n, z)) * std::max(1.0, scale_node(*n.children[0], z));
    case NodeKind::Sin:
    case NodeKind::Cos:
      return std::max(1.0, scale_node(*n.children[0], z));
  }
  return std::numeric_limits<double>::infinity();
}

}  // namespace

double eval_scale(const Expression& f, std::span<const Complex> z) {
  double s = scale_node(*f.root(), z);
  if (!std::isfinite(s)) return std::numeric_limits<double>::infinity();
  return s;
}

namespace {

bool is_zero_node(const NodePtr& n) {
  return n->kind == NodeKind::Constant && n->value == Complex{0.0, 0.0};
}

bool is_one_node(const NodePtr& n) {
  return n->kind == NodeKind::Constant && n->value == Complex{1.0, 0.0};
}

NodePtr simplified_sum(std::vector<NodePtr> terms) {
  std::erase_if(terms, is_zero_node);
  if (terms.empty()) return make_constant({0.0, 0.0});
  if (terms.size() == 1) return terms[0];
  return fold_if_constant(make_node(NodeKind::Sum, std::move(terms)));
}

NodePtr simplified_product(std::vector<NodePtr> factors) {
  for (const auto& f : factors)
    if (is_zero_node(f)) return make_constant({0.0, 0.0});
  std::erase_if(factors, is_one_node);
  if (factors.empty()) return make_constant({1.0, 0.0});
  if (factors.size() == 1) return factors[0];
  return fold_if_constant(make_node(NodeKind::Product, std::move(factors)));
}

NodePtr diff_node(const NodePtr& n, int var) {
  switch (n->kind) {
    case NodeKind::Constant:
      return make_constant({0.0, 0.0});
    case NodeKind::Variable:
      return make_constant({n->var_index == var ? 1.0 : 0.0, 0.0});
    case NodeKind::Sum: {
      std::vector<NodePtr> terms;
      for (const auto& c : n->children) terms.push_back(diff_node(c, var));
      return simplified_sum(std::move(terms));
    }
    case NodeKind::Product: {
      std::vector<NodePtr> terms;
      for (size_t i = 0; i < n->children.size(); ++i) {
        NodePtr di = diff_node(n->children[i], var);
        if (is_zero_node(di)) continue;
        std::vector<NodePtr> factors;
        for (size_t j = 0; j < n->children.size(); ++j)
          factors.push_back(j == i ? di : n->children[j]);
        terms.push_back(simplified_product(std::move(factors)));
      }
      return simplified_sum(std::move(terms));
    }
    case NodeKind::Negate: {
      NodePtr d = diff_node(n->children[0], var);
      if (is_zero_node(d)) return d;
      return fold_if_constant(make_node(NodeKind::Negate, {d}));
    }
    case NodeKind::Power: {
      if (n->exponent == 0) return make_constant({0.0, 0.0});
      NodePtr d = diff_node(n->children[0], var);
      if (is_zero_node(d)) return d;
      NodePtr reduced;
      if (n->exponent - 1 == 0) {
        reduced = make_constant({1.0, 0.0});
      } else if (n->exponent - 1 == 1) {
        reduced = n->children[0];
      } else {
        auto p = std::make_shared<ExprNode>();
        p->kind = NodeKind::Power;
        p->exponent = n->exponent - 1;
        p->children.push_back(n->children[0]);
        reduced = fold_if_constant(p);
      }
      return simplified_product(
          {make_constant({static_cast<double>(n->exponent), 0.0}), reduced, d});
    }
    case NodeKind::Exp: {
      NodePtr d = diff_node(n->children[0], var);
      if (is_zero_node(d)) return d;
      return simplified_product({n, d});
    }
    case NodeKind::Sin: {
      NodePtr d = diff_node(n->children[0], var);
      if (is_zero_node(d)) return d;
      return simplified_product(
          {fold_if_constant(make_node(NodeKind::Cos, {n->children[0]})), d});
    }
    case NodeKind::Cos: {
      NodePtr d = diff_node(n->children[0], var);
      if (is_zero_node(d)) return d;
      return simplified_product({fold_if_constant(make_node(
                                     NodeKind::Negate,
                                     {fold_if_constant(make_node(NodeKind::Sin,
                                                                 {n->children[0]}))})),
                                 d});
    }
  }
  raise(ErrorCode::BadArgument, "unknown node kind");
}

}  // namespace

Expression differentiate(const Expression& f, int var) {
  if (!f.valid()) raise(ErrorCode::BadArgument, "empty expression");
  if (var < 0 || var >= f.arity())
    raise(ErrorCode::BadArgument, "variable index out of range");
  return Expression(diff_node(f.root(), var), f.arity());
}

LaurentPolynomial& LaurentPolynomial::add_term(const ExponentVec& alpha, Complex c) {
  if (c == Complex{0.0, 0.0}) return *this;
  auto it = terms.find(alpha);
  if (it == terms.end()) {
    terms.emplace(alpha, c);
  } else {
    it->second += c;
    if (it->second == Complex{0.0, 0.0}) terms.erase(it);
  }
  return *this;
}

LaurentPolynomial laurent_add(const LaurentPolynomial& a, const LaurentPolynomial& b) {
  LaurentPolynomial r = a;
  for (const auto& [alpha, c] : b.terms) r.add_term(alpha, c);
  return r;
}

LaurentPolynomial laurent_neg(const LaurentPolynomial& a) {
  LaurentPolynomial r;
  r.arity = a.arity;
  for (const auto& [alpha, c] : a.terms) r.terms.emplace(alpha, -c);
  return r;
}

LaurentPolynomial laurent_mul(const LaurentPolynomial& a, const LaurentPolynomial& b) {
  LaurentPolynomial r;
  r.arity = a.arity;
  for (const auto& [aa, ca] : a.terms) {
    for (const auto& [ab, cb] : b.terms) {
      ExponentVec alpha(aa.size());
      for (size_t i = 0; i < aa.size(); ++i) alpha[i] = aa[i] + ab[i];
      r.add_term(alpha, ca * cb);
    }
  }
  return r;
}

LaurentPolynomial laurent_pow(const LaurentPolynomial& a, long long e) {
  if (a.is_monomial()) {
    LaurentPolynomial r;
    r.arity = a.arity;
    const auto& [alpha, c] = *a.terms.begin();
    ExponentVec scaled(alpha.size());
    for (size_t i = 0; i < alpha.size(); ++i) scaled[i] = alpha[i] * e;
    r.terms.emplace(std::move(scaled), pow_int(c, e));
    return r;
  }
  if (e < 0)
    raise(ErrorCode::BadArgument, "negative power of a non-monomial Laurent polynomial");
  LaurentPolynomial acc;
  acc.arity = a.arity;
  acc.terms.emplace(ExponentVec(static_cast<size_t>(a.arity), 0), Complex{1.0, 0.0});
  LaurentPolynomial base = a;
  while (e > 0) {
    if (e & 1) acc = laurent_mul(acc, base);
    e >>= 1;
    if (e > 0) base = laurent_mul(base, base);
  }
  return acc;
}

Complex eval(const LaurentPolynomial& p, std::span<const Complex> z) {
  Complex acc{0.0, 0.0};
  for (const auto& [alpha, c] : p.terms) {
    Complex m = c;
    for (size_t i = 0; i < alpha.size(); ++i)
      if (alpha[i] != 0) m *= pow_int(z[i], alpha[i]);
    acc += m;
  }
  return acc;
}

LaurentPolynomial laurent_derivative(const LaurentPolynomial& p, int var) {
  LaurentPolynomial r;
  r.arity = p.arity;
  for (const auto& [alpha, c] : p.terms) {
    long long e = alpha[static_cast<size_t>(var)];
    if (e == 0) continue;
    ExponentVec beta = alpha;
    beta[static_cast<size_t>(var)] = e - 1;
    r.add_term(beta, c * static_cast<double>(e));
  }
  return r;
}

namespace {

LaurentPolynomial laurent_of_node(const ExprNode& n, int arity) {
  LaurentPolynomial r;
  r.arity = arity;
  switch (n.kind) {
    case NodeKind::Constant:
      r.add_term(ExponentVec(static_cast<size_t>(arity), 0), n.value);
      return r;
    case NodeKind::Variable: {
      ExponentVec alpha(static_cast<size_t>(arity), 0);
      alpha[static_cast<size_t>(n.var_index)] = 1;
      r.terms.emplace(std::move(alpha), Complex{1.0, 0.0});
      return r;
    }
    case NodeKind::Sum: {
      for (const auto& c : n.children) r = laurent_add(r, laurent_of_node(*c, arity));
      return r;
    }
    case NodeKind::Product: {
      r.add_term(ExponentVec(static_cast<size_t>(arity), 0), {1.0, 0.0});
      for (const auto& c : n.children) r = laurent_mul(r, laurent_of_node(*c, arity));
      return r;
    }
    case NodeKind::Negate:
      return laurent_neg(laurent_of_node(*n.children[0], arity));
    case NodeKind::Power:
      return laurent_pow(laurent_of_node(*n.children[0], arity), n.exponent);
    case NodeKind::Exp:
    case NodeKind::Sin:
    case NodeKind::Cos:
      raise(ErrorCode::NotPolynomial, "expression contains a transcendental node");
  }
  return r;
}

struct Trunc {
  LaurentPolynomial poly;
  bool tail = false;
};

long long degree_one_norm(const ExponentVec& alpha) {
  long long s = 0;
  for (long long a : alpha) s += std::llabs(a);
  return s;
}

LaurentPolynomial drop_above_degree(const LaurentPolynomial& p, long long D, bool* dropped) {
  LaurentPolynomial r;
  r.arity = p.arity;
  for (const auto& [alpha, c] : p.terms) {
    if (degree_one_norm(alpha) <= D)
      r.terms.emplace(alpha, c);
    else
      *dropped = true;
  }
  return r;
}

Trunc trunc_mul(const Trunc& a, const Trunc& b, long long D) {
  Trunc r;
  r.tail = a.tail || b.tail;
  r.poly = drop_above_degree(laurent_mul(a.poly, b.poly), D, &r.tail);
  return r;
}

constexpr int kMaxSeriesDepth = 16;

Trunc trunc_node(const ExprNode& n, int arity, long long D, int depth);

/// exp/sin/cos of a truncated argument, split as g = g0 + h with h(0) = 0.
Trunc trunc_transcendental(NodeKind kind, const Trunc& g, int arity, long long D) {
  Complex g0{0.0, 0.0};
  LaurentPolynomial h;
  h.arity = arity;
  ExponentVec zero(static_cast<size_t>(arity), 0);
  for (const auto& [alpha, c] : g.poly.terms) {
    if (alpha == zero)
      g0 = c;
    else
      h.terms.emplace(alpha, c);
  }
  Trunc r;
  r.tail = g.tail;
  r.poly.arity = arity;
  if (h.is_zero()) {
    Complex v = kind == NodeKind::Exp ? std::exp(g0)
                                      : (kind == NodeKind::Sin ? std::sin(g0) : std::cos(g0));
    r.poly.add_term(zero, v);
    return r;
  }
  r.tail = true;  // exp/sin/cos of a nonconstant argument is never polynomial

  // Accumulate sum_k coeff_k * h^k with h^k of minimal degree >= k.
  Trunc hk;
  hk.poly.arity = arity;
  hk.poly.add_term(zero, {1.0, 0.0});
  Trunc hh{h, false};
  LaurentPolynomial even, odd;  // cos-like and sin-like partial sums of h powers
  even.arity = odd.arity = arity;
  double factorial = 1.0;
  for (long long k = 0; k <= D; ++k) {
    if (k > 0) {
      factorial *= static_cast<double>(k);
      hk = trunc_mul(hk, hh, D);
      if (hk.poly.is_zero()) break;
    }
    double sign = (k / 2) % 2 == 0 ? 1.0 : -1.0;
    LaurentPolynomial scaled;
    scaled.arity = arity;
    for (const auto& [alpha, c] : hk.poly.terms) scaled.terms.emplace(alpha, c / factorial);
    if (kind == NodeKind::Exp) {
      even = laurent_add(even, scaled);
    } else if (k % 2 == 0) {
      LaurentPolynomial signed_term;
      signed_term.arity = arity;
      for (const auto& [alpha, c] : scaled.terms) signed_term.terms.emplace(alpha, sign * c);
      even = laurent_add(even, signed_term);
    } else {
      LaurentPolynomial signed_term;
      signed_term.arity = arity;
      for (const auto& [alpha, c] : scaled.terms) signed_term.terms.emplace(alpha, sign * c);
      odd = laurent_add(odd, signed_term);
    }
  }

  auto scale_poly = [&](const LaurentPolynomial& p, Complex s) {
    LaurentPolynomial out;
    out.arity = arity;
    if (s == Complex{0.0, 0.0}) return out;
    for (const auto& [alpha, c] : p.terms) out.terms.emplace(alpha, s * c);
    return out;
  };

  if (kind == NodeKind::Exp) {
    r.poly = scale_poly(even, std::exp(g0));
  } else if (kind == NodeKind::Sin) {
    // sin(g0 + h) = sin(g0) cos(h) + cos(g0) sin(h)
    r.poly = laurent_add(scale_poly(even, std::sin(g0)), scale_poly(odd, std::cos(g0)));
  } else {
    // cos(g0 + h) = cos(g0) cos(h) - sin(g0) sin(h)
    r.poly = laurent_add(scale_poly(even, std::cos(g0)), scale_poly(odd, -std::sin(g0)));
  }
  return r;
}

Trunc trunc_node(const ExprNode& n, int arity, long long D, int depth) {
  Trunc r;
  r.poly.arity = arity;
  switch (n.kind) {
    case NodeKind::Constant:
      r.poly.add_term(ExponentVec(static_cast<size_t>(arity), 0), n.value);
      return r;
    case NodeKind::Variable: {
      if (D < 1) {
        r.tail = true;
        return r;
      }
      ExponentVec alpha(static_cast<size_t>(arity), 0);
      alpha[static_cast<size_t>(n.var_index)] = 1;
      r.poly.terms.emplace(std::move(alpha), Complex{1.0, 0.0});
      return r;
    }
    case NodeKind::Sum: {
      for (const auto& c : n.children) {
        Trunc t = trunc_node(*c, arity, D, depth);
        r.poly = laurent_add(r.poly, t.poly);
        r.tail = r.tail || t.tail;
      }
      return r;
    }
    case NodeKind::Product: {
      r.poly.add_term(ExponentVec(static_cast<size_t>(arity), 0), {1.0, 0.0});
      for (const auto& c : n.children) r = trunc_mul(r, trunc_node(*c, arity, D, depth), D);
      return r;
    }
    case NodeKind::Negate: {
      Trunc t = trunc_node(*n.children[0], arity, D, depth);
      t.poly = laurent_neg(t.poly);
      return t;
    }
    case NodeKind::Power: {
      if (n.exponent < 0)
        raise(ErrorCode::NegativePowerInEntireContext,
              "series expansion requires nonnegative powers");
      Trunc base = trunc_node(*n.children[0], arity, D, depth);
      Trunc acc;
      acc.poly.arity = arity;
      acc.poly.add_term(ExponentVec(static_cast<size_t>(arity), 0), {1.0, 0.0});
      for (long long i = 0; i < n.exponent; ++i) acc = trunc_mul(acc, base, D);
      acc.tail = acc.tail || base.tail;
      return acc;
    }
    case NodeKind::Exp:
    case NodeKind::Sin:
    case NodeKind::Cos: {
      if (depth + 1 > kMaxSeriesDepth)
        raise(ErrorCode::SeriesDepthExceeded,
              "more than 16 nested transcendental nodes in series expansion");
      Trunc g = trunc_node(*n.children[0], arity, D, depth + 1);
      return trunc_transcendental(n.kind, g, arity, D);
    }
  }
  return r;
}

}  // namespace

LaurentPolynomial to_laurent(const Expression& f) {
  return laurent_of_node(*f.root(), f.arity());
}

SeriesTruncation truncate_series(const Expression& f, long long degree_bound) {
  if (degree_bound < 0) raise(ErrorCode::BadArgument, "degree bound must be >= 0");
  Trunc t = trunc_node(*f.root(), f.arity(), degree_bound, 0);
  SeriesTruncation out;
  out.degree_bound = degree_bound;
  out.poly.arity = f.arity();
  out.tail_nonzero = t.tail;
  constexpr double kDropThreshold = 1e-15;
  for (const auto& [alpha, c] : t.poly.terms) {
    if (std::abs(c) < kDropThreshold) {
      out.tail_nonzero = true;
    } else {
      out.poly.terms.emplace(alpha, c);
    }
  }
  return out;
}

std::map<long long, Complex> substitute_all_but(const LaurentPolynomial& p,
                                                std::span<const Complex> values,
                                                int free_var) {
  std::map<long long, Complex> out;
  for (const auto& [alpha, c] : p.terms) {
    Complex m = c;
    for (size_t i = 0; i < alpha.size(); ++i) {
      if (static_cast<int>(i) == free_var || alpha[i] == 0) continue;
      m *= pow_int(values[i], alpha[i]);
    }
    long long e = alpha[static_cast<size_t>(free_var)];
    auto it = out.find(e);
    if (it == out.end())
      out.emplace(e, m);
    else
      it->second += m;
  }
  return out;
}

}  // namespace trop
