#pragma once

// Executable derivation language: arithmetic over decimal literals, string
// lists, and a len() counting function. Grammar:
//
//   TopLevel := Expr | List | "len" "(" List ")"
//   Expr     := Term (("+" | "-") Term)*
//   Term     := Factor (("*" | "/") Factor)*
//   Factor   := NUMBER | "(" Expr ")" | "-" Factor
//   List     := "[" STR ("," STR)* "]"
//
// Numbers are evaluated as exact rationals and rendered to a decimal string
// only at the root.

#include <cctype>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "pcqa/errors.hpp"
#include "pcqa/rational.hpp"

namespace pcqa {

struct EvalConfig {
  int render_precision = 4;
  // Absolute tolerance applied to exact rationals when grouping answers.
  Rational numeric_tolerance = Rational(1, 1000000000);

  void validate() const {
    if (render_precision < 0 || render_precision > 10)
      throw std::invalid_argument("render_precision must be in [0, 10]");
    if (numeric_tolerance < 0) throw std::invalid_argument("numeric_tolerance must be non-negative");
  }
};

enum class Stage { Tokenize, Parse, Evaluate };

enum class DerivationErrorKind {
  UnknownCharacter,
  UnterminatedString,
  SyntaxError,
  MixedTypeError,
  DivisionByZero,
};

inline const char* to_string(Stage stage) {
  switch (stage) {
    case Stage::Tokenize: return "tokenize";
    case Stage::Parse: return "parse";
    case Stage::Evaluate: return "evaluate";
  }
  return "?";
}

inline const char* to_string(DerivationErrorKind kind) {
  switch (kind) {
    case DerivationErrorKind::UnknownCharacter: return "UnknownCharacter";
    case DerivationErrorKind::UnterminatedString: return "UnterminatedString";
    case DerivationErrorKind::SyntaxError: return "SyntaxError";
    case DerivationErrorKind::MixedTypeError: return "MixedTypeError";
    case DerivationErrorKind::DivisionByZero: return "DivisionByZero";
  }
  return "?";
}

// Raised by every stage of the language. execute_source() callers get the
// stage and character position of the failure from here.
class DerivationError : public Error {
 public:
  DerivationError(DerivationErrorKind kind, std::size_t position, std::string detail)
      : Error(std::string(to_string(stage_of(kind))) + ": " + to_string(kind) + " at " +
              std::to_string(position) + ": " + detail),
        kind_(kind),
        position_(position),
        detail_(std::move(detail)) {}

  DerivationErrorKind kind() const noexcept { return kind_; }
  Stage stage() const noexcept { return stage_of(kind_); }
  std::size_t position() const noexcept { return position_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  static Stage stage_of(DerivationErrorKind kind) {
    switch (kind) {
      case DerivationErrorKind::UnknownCharacter:
      case DerivationErrorKind::UnterminatedString: return Stage::Tokenize;
      case DerivationErrorKind::SyntaxError:
      case DerivationErrorKind::MixedTypeError: return Stage::Parse;
      case DerivationErrorKind::DivisionByZero: return Stage::Evaluate;
    }
    return Stage::Evaluate;
  }

  DerivationErrorKind kind_;
  std::size_t position_;
  std::string detail_;
};

// ---------------------------------------------------------------------------
// Tokens

enum class TokenKind { Number, Plus, Minus, Star, Slash, LParen, RParen, LBracket, RBracket, Comma, String, Len };

struct Token {
  TokenKind kind;
  // Digits for numbers (grouping commas removed), unescaped content for
  // strings, the operator or punctuation character otherwise.
  std::string text;
  std::size_t position = 0;

  // Position is not part of token identity.
  friend bool operator==(const Token& a, const Token& b) { return a.kind == b.kind && a.text == b.text; }
};

namespace detail {

inline bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

inline std::size_t lex_number(std::string_view src, std::size_t i, bool inside_list, std::string& out) {
  while (i < src.size() && is_digit(src[i])) out.push_back(src[i++]);
  while (!inside_list && !out.empty() && i < src.size() && is_grouping_comma(src, i)) {
    out.append(src.substr(i + 1, 3));
    i += 4;
  }
  if (i < src.size() && src[i] == '.') {
    out.push_back(src[i++]);
    while (i < src.size() && is_digit(src[i])) out.push_back(src[i++]);
  }
  return i;
}

inline std::size_t lex_string(std::string_view src, std::size_t i, std::string& out) {
  const std::size_t start = i;
  const char quote = src[i++];
  while (i < src.size()) {
    char c = src[i];
    if (c == '\\' && i + 1 < src.size()) {
      out.push_back(src[i + 1]);
      i += 2;
      continue;
    }
    if (c == quote) return i + 1;
    out.push_back(c);
    ++i;
  }
  throw DerivationError(DerivationErrorKind::UnterminatedString, start, "string opened here is never closed");
}

}  // namespace detail

inline std::vector<Token> tokenize(std::string_view source) {
  std::vector<Token> tokens;
  int bracket_depth = 0;
  std::size_t i = 0;
  while (i < source.size()) {
    const char c = source[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (detail::is_digit(c) || (c == '.' && i + 1 < source.size() && detail::is_digit(source[i + 1]))) {
      std::string digits;
      i = detail::lex_number(source, i, bracket_depth > 0, digits);
      tokens.push_back({TokenKind::Number, std::move(digits), start});
      continue;
    }
    if (c == '"' || c == '\'') {
      std::string content;
      i = detail::lex_string(source, i, content);
      tokens.push_back({TokenKind::String, std::move(content), start});
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t end = i;
      while (end < source.size() && (std::isalnum(static_cast<unsigned char>(source[end])) || source[end] == '_')) ++end;
      if (source.substr(i, end - i) != "len")
        throw DerivationError(DerivationErrorKind::UnknownCharacter, start,
                              "identifier '" + std::string(source.substr(i, end - i)) + "' is not allowed");
      tokens.push_back({TokenKind::Len, "len", start});
      i = end;
      continue;
    }
    TokenKind kind;
    switch (c) {
      case '+': kind = TokenKind::Plus; break;
      case '-': kind = TokenKind::Minus; break;
      case '*': kind = TokenKind::Star; break;
      case '/': kind = TokenKind::Slash; break;
      case '(': kind = TokenKind::LParen; break;
      case ')': kind = TokenKind::RParen; break;
      case '[': kind = TokenKind::LBracket; ++bracket_depth; break;
      case ']':
        kind = TokenKind::RBracket;
        if (bracket_depth > 0) --bracket_depth;
        break;
      case ',': kind = TokenKind::Comma; break;
      default:
        throw DerivationError(DerivationErrorKind::UnknownCharacter, start,
                              std::string("unexpected character '") + c + "'");
    }
    tokens.push_back({kind, std::string(1, c), start});
    ++i;
  }
  return tokens;
}

// ---------------------------------------------------------------------------
// AST

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class BinaryOperator { Add, Sub, Mul, Div };

struct Number {
  std::string text;  // as written, grouping commas removed
  Rational value;
};

struct BinaryOp {
  BinaryOperator op;
  ExprPtr lhs;
  ExprPtr rhs;
  std::size_t position = 0;  // of the operator in the source
};

struct Negate {
  ExprPtr operand;
};

// Explicit parentheses. Semantically transparent.
struct Group {
  ExprPtr inner;
};

struct StringList {
  std::vector<std::string> items;
};

struct Length {
  StringList list;
};

struct Expr {
  std::variant<Number, BinaryOp, Negate, Group, StringList, Length> node;
};

inline ExprPtr make_number(std::string_view text) {
  auto value = parse_unsigned_decimal(text);
  if (!value) throw std::invalid_argument("not an unsigned decimal literal: " + std::string(text));
  return std::make_shared<const Expr>(Expr{Number{std::string(text), *value}});
}

inline ExprPtr make_binary(BinaryOperator op, ExprPtr lhs, ExprPtr rhs) {
  return std::make_shared<const Expr>(Expr{BinaryOp{op, std::move(lhs), std::move(rhs), 0}});
}

inline ExprPtr make_negate(ExprPtr operand) { return std::make_shared<const Expr>(Expr{Negate{std::move(operand)}}); }

inline ExprPtr make_group(ExprPtr inner) { return std::make_shared<const Expr>(Expr{Group{std::move(inner)}}); }

namespace detail {
inline void check_list_items(const std::vector<std::string>& items) {
  if (items.empty()) throw std::invalid_argument("string list needs at least one item");
  for (const auto& item : items) {
    if (item.find_first_not_of(" \t\r\n") == std::string::npos)
      throw std::invalid_argument("string list items must be non-empty after trimming");
  }
}
}  // namespace detail

inline ExprPtr make_string_list(std::vector<std::string> items) {
  detail::check_list_items(items);
  return std::make_shared<const Expr>(Expr{StringList{std::move(items)}});
}

inline ExprPtr make_length(std::vector<std::string> items) {
  detail::check_list_items(items);
  return std::make_shared<const Expr>(Expr{Length{StringList{std::move(items)}}});
}

inline bool is_numeric(const Expr& expr) {
  return !std::holds_alternative<StringList>(expr.node) && !std::holds_alternative<Length>(expr.node);
}

// ---------------------------------------------------------------------------
// Parser

namespace detail {

class Parser {
 public:
  Parser(const std::vector<Token>& tokens, std::size_t source_length)
      : tokens_(tokens), end_position_(source_length) {}

  ExprPtr parse_top_level() {
    if (tokens_.empty()) throw DerivationError(DerivationErrorKind::SyntaxError, 0, "expected an expression");
    ExprPtr result;
    if (peek_is(TokenKind::Len)) {
      advance();
      expect(TokenKind::LParen, "'(' after len");
      auto list = parse_list();
      expect(TokenKind::RParen, "')' closing len(");
      result = std::make_shared<const Expr>(Expr{Length{std::move(list)}});
    } else if (peek_is(TokenKind::LBracket)) {
      result = std::make_shared<const Expr>(Expr{parse_list()});
    } else {
      result = parse_expr();
    }
    if (pos_ < tokens_.size()) {
      const Token& t = tokens_[pos_];
      const bool arithmetic = t.kind == TokenKind::Plus || t.kind == TokenKind::Minus || t.kind == TokenKind::Star ||
                              t.kind == TokenKind::Slash;
      if (arithmetic && !is_numeric(*result))
        throw DerivationError(DerivationErrorKind::MixedTypeError, t.position,
                              "a list or len() cannot be an arithmetic operand");
      throw DerivationError(DerivationErrorKind::SyntaxError, t.position, "expected end of input");
    }
    return result;
  }

 private:
  static constexpr int kMaxDepth = 200;

  bool peek_is(TokenKind kind) const { return pos_ < tokens_.size() && tokens_[pos_].kind == kind; }
  std::size_t here() const { return pos_ < tokens_.size() ? tokens_[pos_].position : end_position_; }
  const Token& advance() { return tokens_[pos_++]; }

  void expect(TokenKind kind, const char* what) {
    if (!peek_is(kind)) throw DerivationError(DerivationErrorKind::SyntaxError, here(), std::string("expected ") + what);
    ++pos_;
  }

  StringList parse_list() {
    expect(TokenKind::LBracket, "'['");
    StringList list;
    for (;;) {
      if (!peek_is(TokenKind::String))
        throw DerivationError(DerivationErrorKind::SyntaxError, here(), "expected a quoted string");
      const Token& t = advance();
      if (t.text.find_first_not_of(" \t\r\n") == std::string::npos)
        throw DerivationError(DerivationErrorKind::SyntaxError, t.position, "list items must be non-empty");
      list.items.push_back(t.text);
      if (peek_is(TokenKind::Comma)) {
        advance();
        continue;
      }
      expect(TokenKind::RBracket, "',' or ']'");
      return list;
    }
  }

  ExprPtr parse_expr() {
    DepthGuard guard(*this);
    ExprPtr lhs = parse_term();
    while (peek_is(TokenKind::Plus) || peek_is(TokenKind::Minus)) {
      const Token& op = advance();
      ExprPtr rhs = parse_term();
      lhs = std::make_shared<const Expr>(Expr{BinaryOp{
          op.kind == TokenKind::Plus ? BinaryOperator::Add : BinaryOperator::Sub, lhs, rhs, op.position}});
    }
    return lhs;
  }

  ExprPtr parse_term() {
    ExprPtr lhs = parse_factor();
    while (peek_is(TokenKind::Star) || peek_is(TokenKind::Slash)) {
      const Token& op = advance();
      ExprPtr rhs = parse_factor();
      lhs = std::make_shared<const Expr>(Expr{BinaryOp{
          op.kind == TokenKind::Star ? BinaryOperator::Mul : BinaryOperator::Div, lhs, rhs, op.position}});
    }
    return lhs;
  }

  ExprPtr parse_factor() {
    DepthGuard guard(*this);
    if (pos_ >= tokens_.size())
      throw DerivationError(DerivationErrorKind::SyntaxError, end_position_, "expected a number, '(' or '-'");
    const Token& t = tokens_[pos_];
    switch (t.kind) {
      case TokenKind::Number: {
        advance();
        auto value = parse_unsigned_decimal(t.text);
        if (!value) throw DerivationError(DerivationErrorKind::SyntaxError, t.position, "malformed number");
        return std::make_shared<const Expr>(Expr{Number{t.text, *value}});
      }
      case TokenKind::LParen: {
        advance();
        ExprPtr inner = parse_expr();
        expect(TokenKind::RParen, "')'");
        return std::make_shared<const Expr>(Expr{Group{std::move(inner)}});
      }
      case TokenKind::Minus: {
        advance();
        return std::make_shared<const Expr>(Expr{Negate{parse_factor()}});
      }
      case TokenKind::LBracket:
      case TokenKind::Len:
        throw DerivationError(DerivationErrorKind::MixedTypeError, t.position,
                              "a list or len() cannot be an arithmetic operand");
      default:
        throw DerivationError(DerivationErrorKind::SyntaxError, t.position, "expected a number, '(' or '-'");
    }
  }

  struct DepthGuard {
    explicit DepthGuard(Parser& p) : parser(p) {
      if (++parser.depth_ > kMaxDepth)
        throw DerivationError(DerivationErrorKind::SyntaxError, parser.here(), "expression nested too deeply");
    }
    ~DepthGuard() { --parser.depth_; }
    Parser& parser;
  };

  const std::vector<Token>& tokens_;
  std::size_t end_position_;
  std::size_t pos_ = 0;
  int depth_ = 0;
};

}  // namespace detail

// `source_length` only positions end-of-input errors.
inline ExprPtr parse(const std::vector<Token>& tokens, std::size_t source_length = 0) {
  if (source_length == 0 && !tokens.empty()) source_length = tokens.back().position + tokens.back().text.size();
  return detail::Parser(tokens, source_length).parse_top_level();
}

// ---------------------------------------------------------------------------
// Rendering back to source

namespace detail {

inline std::string quote(const std::string& text) {
  std::string out = "\"";
  for (char c : text) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline int precedence(const Expr& e) {
  if (const auto* b = std::get_if<BinaryOp>(&e.node))
    return (b->op == BinaryOperator::Add || b->op == BinaryOperator::Sub) ? 1 : 2;
  if (std::holds_alternative<Negate>(e.node)) return 3;
  return 4;
}

inline char symbol(BinaryOperator op) {
  switch (op) {
    case BinaryOperator::Add: return '+';
    case BinaryOperator::Sub: return '-';
    case BinaryOperator::Mul: return '*';
    case BinaryOperator::Div: return '/';
  }
  return '?';
}

inline std::string render_expr(const Expr& expr);

inline std::string render_operand(const Expr& child, int min_precedence) {
  std::string text = render_expr(child);
  return precedence(child) < min_precedence ? "(" + text + ")" : text;
}

inline std::string render_list(const StringList& list) {
  std::string out = "[";
  for (std::size_t i = 0; i < list.items.size(); ++i) {
    if (i) out += ", ";
    out += quote(list.items[i]);
  }
  return out + "]";
}

inline std::string render_expr(const Expr& expr) {
  return std::visit(
      [](const auto& node) -> std::string {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, Number>) {
          return node.text;
        } else if constexpr (std::is_same_v<T, BinaryOp>) {
          const int p = (node.op == BinaryOperator::Add || node.op == BinaryOperator::Sub) ? 1 : 2;
          // Right operands of non-commutative ops bind tighter.
          return render_operand(*node.lhs, p) + symbol(node.op) + render_operand(*node.rhs, p + 1);
        } else if constexpr (std::is_same_v<T, Negate>) {
          return "-" + render_operand(*node.operand, 3);
        } else if constexpr (std::is_same_v<T, Group>) {
          return "(" + render_expr(*node.inner) + ")";
        } else if constexpr (std::is_same_v<T, StringList>) {
          return render_list(node);
        } else {
          return "len(" + render_list(node.list) + ")";
        }
      },
      expr.node);
}

}  // namespace detail

// Source text for an AST. Parentheses come from Group nodes plus whatever
// precedence requires for programmatically built trees.
inline std::string render(const Expr& expr) { return detail::render_expr(expr); }

// Double-quoted list literal, e.g. ["a", "b"].
inline std::string render_string_list(const std::vector<std::string>& items) {
  return detail::render_list(StringList{items});
}

// ---------------------------------------------------------------------------
// Evaluation

struct NumericValue {
  Rational exact;
  std::string rendered;
};

struct SpanListValue {
  std::vector<std::string> items;
};

struct CountValue {
  std::int64_t count = 0;
};

struct ExecutionResult {
  std::variant<NumericValue, SpanListValue, CountValue> value;
  std::string source;
};

namespace detail {

inline Rational evaluate_numeric(const Expr& expr) {
  return std::visit(
      [](const auto& node) -> Rational {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, Number>) {
          return node.value;
        } else if constexpr (std::is_same_v<T, BinaryOp>) {
          const Rational lhs = evaluate_numeric(*node.lhs);
          const Rational rhs = evaluate_numeric(*node.rhs);
          switch (node.op) {
            case BinaryOperator::Add: return lhs + rhs;
            case BinaryOperator::Sub: return lhs - rhs;
            case BinaryOperator::Mul: return lhs * rhs;
            case BinaryOperator::Div:
              if (rhs == 0)
                throw DerivationError(DerivationErrorKind::DivisionByZero, node.position,
                                      "divisor " + render(*node.rhs) + " is zero");
              return lhs / rhs;
          }
          return Rational(0);
        } else if constexpr (std::is_same_v<T, Negate>) {
          return -evaluate_numeric(*node.operand);
        } else if constexpr (std::is_same_v<T, Group>) {
          return evaluate_numeric(*node.inner);
        } else {
          throw DerivationError(DerivationErrorKind::MixedTypeError, 0, "a list cannot be an arithmetic operand");
        }
      },
      expr.node);
}

}  // namespace detail

inline ExecutionResult evaluate(const Expr& expr, const EvalConfig& config = {}) {
  config.validate();
  ExecutionResult result{CountValue{}, render(expr)};
  if (const auto* list = std::get_if<StringList>(&expr.node)) {
    result.value = SpanListValue{list->items};
  } else if (const auto* len = std::get_if<Length>(&expr.node)) {
    result.value = CountValue{static_cast<std::int64_t>(len->list.items.size())};
  } else {
    Rational exact = detail::evaluate_numeric(expr);
    std::string rendered = render_decimal(exact, config.render_precision);
    result.value = NumericValue{std::move(exact), std::move(rendered)};
  }
  return result;
}

// tokenize -> parse -> evaluate. Throws DerivationError tagged with the
// failing stage.
inline ExecutionResult execute_source(std::string_view source, const EvalConfig& config = {}) {
  if (source.find_first_not_of(" \t\r\n") == std::string_view::npos)
    throw DerivationError(DerivationErrorKind::SyntaxError, 0, "empty derivation");
  auto tokens = tokenize(source);
  auto expr = parse(tokens, source.size());
  ExecutionResult result = evaluate(*expr, config);
  result.source = std::string(source);
  return result;
}

// Short printable form: rendered number, count, or list literal.
inline std::string display(const ExecutionResult& result) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, NumericValue>) return v.rendered;
        else if constexpr (std::is_same_v<T, CountValue>) return std::to_string(v.count);
        else return render_string_list(v.items);
      },
      result.value);
}

}  // namespace pcqa
