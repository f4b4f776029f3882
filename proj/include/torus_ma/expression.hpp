#pragma once

// Analytic data for run configurations. The grammar is deliberately small:
//
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := ('+' | '-') unary | power
//   power  := atom ('^' integer)?
//   atom   := number | 'pi' | variable | func '(' expr ')' | '(' expr ')'
//   func   := sin | cos | exp
//
// Everything is checked at parse time; evaluation cannot fail.

#include "torus_ma/grid.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace torus_ma {

class ExpressionError : public std::invalid_argument {
 public:
  ExpressionError(const std::string& what, std::size_t pos)
      : std::invalid_argument(what + " at offset " + std::to_string(pos)), pos_(pos) {}
  std::size_t position() const { return pos_; }

 private:
  std::size_t pos_;
};

class Expression {
 public:
  /// Parses text; variables[a] names grid axis a. Aliases maps extra names to
  /// axes (e.g. x, y, z).
  static Expression parse(const std::string& text, const std::vector<std::string>& variables,
                          const std::vector<std::pair<std::string, int>>& aliases = {}) {
    Parser p{text, 0, variables, aliases};
    Expression e;
    e.root_ = p.expr();
    p.skip_space();
    if (p.pos != text.size()) throw ExpressionError("unexpected '" + std::string(1, text[p.pos]) + "'", p.pos);
    e.dim_ = static_cast<int>(variables.size());
    e.text_ = text;
    return e;
  }

  double evaluate(std::span<const double> x) const { return eval(*root_, x); }

  ScalarField sample(const TorusGrid& g) const {
    if (g.dim() != dim_) throw std::invalid_argument("expression dimension does not match the grid");
    return ScalarField::sample(g, [this](std::span<const double> x) { return evaluate(x); });
  }

  const std::string& text() const { return text_; }

 private:
  enum class Kind { Number, Variable, Neg, Add, Sub, Mul, Div, Pow, Sin, Cos, Exp };
  struct Node {
    Kind kind;
    double value = 0.0;  // number, or integer exponent
    int axis = -1;
    std::shared_ptr<Node> lhs, rhs;
  };
  using NodePtr = std::shared_ptr<Node>;

  static NodePtr make(Kind k, NodePtr a = nullptr, NodePtr b = nullptr) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->lhs = std::move(a);
    n->rhs = std::move(b);
    return n;
  }

  static double eval(const Node& n, std::span<const double> x) {
    switch (n.kind) {
      case Kind::Number: return n.value;
      case Kind::Variable: return x[n.axis];
      case Kind::Neg: return -eval(*n.lhs, x);
      case Kind::Add: return eval(*n.lhs, x) + eval(*n.rhs, x);
      case Kind::Sub: return eval(*n.lhs, x) - eval(*n.rhs, x);
      case Kind::Mul: return eval(*n.lhs, x) * eval(*n.rhs, x);
      case Kind::Div: return eval(*n.lhs, x) / eval(*n.rhs, x);
      case Kind::Pow: return std::pow(eval(*n.lhs, x), n.value);
      case Kind::Sin: return std::sin(eval(*n.lhs, x));
      case Kind::Cos: return std::cos(eval(*n.lhs, x));
      case Kind::Exp: return std::exp(eval(*n.lhs, x));
    }
    return 0.0;
  }

  struct Parser {
    const std::string& s;
    std::size_t pos;
    const std::vector<std::string>& vars;
    const std::vector<std::pair<std::string, int>>& aliases;
    int depth = 0;

    void skip_space() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool accept(char c) {
      skip_space();
      if (pos < s.size() && s[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }
    void expect(char c) {
      if (!accept(c)) throw ExpressionError(std::string("expected '") + c + "'", pos);
    }

    NodePtr expr() {
      if (++depth > 200) throw ExpressionError("expression nested too deeply", pos);
      NodePtr n = term();
      for (;;) {
        if (accept('+')) n = make(Kind::Add, n, term());
        else if (accept('-')) n = make(Kind::Sub, n, term());
        else break;
      }
      --depth;
      return n;
    }
    NodePtr term() {
      NodePtr n = unary();
      for (;;) {
        if (accept('*')) n = make(Kind::Mul, n, unary());
        else if (accept('/')) n = make(Kind::Div, n, unary());
        else break;
      }
      return n;
    }
    NodePtr unary() {
      if (++depth > 200) throw ExpressionError("expression nested too deeply", pos);
      NodePtr n;
      if (accept('-')) n = make(Kind::Neg, unary());
      else if (accept('+')) n = unary();
      else n = power();
      --depth;
      return n;
    }
    NodePtr power() {
      NodePtr base = atom();
      if (!accept('^')) return base;
      skip_space();
      const std::size_t start = pos;
      bool negative = accept('-');
      skip_space();
      const std::size_t digits = pos;
      while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
      if (pos == digits) throw ExpressionError("exponent must be an integer literal", start);
      if (pos - digits > 3) throw ExpressionError("exponent too large", start);
      auto n = make(Kind::Pow, base);
      n->value = std::stod(s.substr(digits, pos - digits)) * (negative ? -1.0 : 1.0);
      return n;
    }
    NodePtr atom() {
      skip_space();
      if (pos >= s.size()) throw ExpressionError("unexpected end of expression", pos);
      const char c = s[pos];
      if (c == '(') {
        ++pos;
        NodePtr n = expr();
        expect(')');
        return n;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
      throw ExpressionError("unexpected '" + std::string(1, c) + "'", pos);
    }
    NodePtr number() {
      const char* begin = s.c_str() + pos;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) throw ExpressionError("malformed number", pos);
      // reject hex floats, inf, nan and friends that strtod would accept
      for (const char* p = begin; p < end; ++p)
        if (!(std::isdigit(static_cast<unsigned char>(*p)) || *p == '.' || *p == 'e' || *p == 'E' ||
              *p == '+' || *p == '-'))
          throw ExpressionError("malformed number", pos);
      pos += static_cast<std::size_t>(end - begin);
      auto n = make(Kind::Number);
      n->value = v;
      return n;
    }
    NodePtr name() {
      const std::size_t start = pos;
      while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) ++pos;
      const std::string id = s.substr(start, pos - start);
      static constexpr std::pair<const char*, Kind> kFunctions[] = {
          {"sin", Kind::Sin}, {"cos", Kind::Cos}, {"exp", Kind::Exp}};
      for (auto [fname, kind] : kFunctions) {
        if (id != fname) continue;
        expect('(');
        NodePtr arg = expr();
        expect(')');
        return make(kind, arg);
      }
      if (id == "pi") {
        auto n = make(Kind::Number);
        n->value = std::numbers::pi;
        return n;
      }
      auto var = [&](int axis) {
        auto n = make(Kind::Variable);
        n->axis = axis;
        return n;
      };
      for (std::size_t a = 0; a < vars.size(); ++a)
        if (vars[a] == id) return var(static_cast<int>(a));
      for (const auto& [alias, axis] : aliases)
        if (alias == id && axis >= 0 && axis < static_cast<int>(vars.size())) return var(axis);
      throw ExpressionError("unknown name '" + id + "'", start);
    }
  };

  NodePtr root_;
  int dim_ = 0;
  std::string text_;
};

/// The conventional single-letter aliases for the first three axes.
inline std::vector<std::pair<std::string, int>> axis_aliases() { return {{"x", 0}, {"y", 1}, {"z", 2}}; }

}  // namespace torus_ma
