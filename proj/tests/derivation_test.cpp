#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "pcqa/derivation.hpp"
#include "pcqa/reconstruct.hpp"

namespace pcqa {
namespace {

std::vector<TokenKind> kinds(const std::vector<Token>& tokens) {
  std::vector<TokenKind> out;
  for (const auto& t : tokens) out.push_back(t.kind);
  return out;
}

template <typename T>
const T& as(const ExecutionResult& r) {
  return std::get<T>(r.value);
}

TEST(Tokenize, PercentageChangeFormula) {
  auto tokens = tokenize("(36.6-20.5)/20.5");
  using K = TokenKind;
  EXPECT_EQ(kinds(tokens), (std::vector<K>{K::LParen, K::Number, K::Minus, K::Number, K::RParen, K::Slash, K::Number}));
  EXPECT_EQ(tokens[1].text, "36.6");
  EXPECT_EQ(tokens[6].text, "20.5");
}

TEST(Tokenize, DigitGroupingCommasMergeIntoNumerals) {
  auto tokens = tokenize("3,711 + 1,882");
  ASSERT_EQ(tokens.size(), 3u);
  EXPECT_EQ(tokens[0].text, "3711");
  EXPECT_EQ(tokens[1].kind, TokenKind::Plus);
  EXPECT_EQ(tokens[2].text, "1882");

  auto big = tokenize("(1,000,000 + 650,000 + 440,000) / 3");
  EXPECT_EQ(big[1].text, "1000000");
  EXPECT_EQ(big[3].text, "650000");
}

TEST(Tokenize, CommaWithoutThreeDigitsIsPunctuation) {
  auto tokens = tokenize("1,23");
  ASSERT_EQ(tokens.size(), 3u);
  EXPECT_EQ(tokens[1].kind, TokenKind::Comma);
  // Four digits after the comma is not grouping either.
  EXPECT_EQ(tokenize("1,2345").size(), 3u);
}

TEST(Tokenize, CommasInsideListsNeverGroup) {
  auto tokens = tokenize("[\"1\",\"2\"]");
  EXPECT_EQ(kinds(tokens), (std::vector<TokenKind>{TokenKind::LBracket, TokenKind::String, TokenKind::Comma,
                                                   TokenKind::String, TokenKind::RBracket}));
}

TEST(Tokenize, LenOfStringList) {
  auto tokens = tokenize("len([\"2018\",\"2019\"])");
  using K = TokenKind;
  EXPECT_EQ(kinds(tokens), (std::vector<K>{K::Len, K::LParen, K::LBracket, K::String, K::Comma, K::String,
                                           K::RBracket, K::RParen}));
  EXPECT_EQ(tokens[3].text, "2018");
  EXPECT_EQ(tokens[5].text, "2019");
}

TEST(Tokenize, SingleAndDoubleQuotesAreEquivalent) {
  EXPECT_EQ(tokenize("['a b']"), tokenize("[\"a b\"]"));
  EXPECT_EQ(tokenize("['it\\'s']")[1].text, "it's");
}

TEST(Tokenize, Errors) {
  try {
    tokenize("1 + x");
    FAIL();
  } catch (const DerivationError& e) {
    EXPECT_EQ(e.kind(), DerivationErrorKind::UnknownCharacter);
    EXPECT_EQ(e.position(), 4u);
    EXPECT_EQ(e.stage(), Stage::Tokenize);
  }
  try {
    tokenize("[\"abc");
    FAIL();
  } catch (const DerivationError& e) {
    EXPECT_EQ(e.kind(), DerivationErrorKind::UnterminatedString);
    EXPECT_EQ(e.position(), 1u);
  }
  EXPECT_THROW(tokenize("__import__('os')"), DerivationError);
  EXPECT_THROW(tokenize("2 ** 3 % 4"), DerivationError);
}

TEST(Parse, PrecedenceAndAssociativity) {
  auto e = parse(tokenize("1+2*3"));
  const auto& add = std::get<BinaryOp>(e->node);
  EXPECT_EQ(add.op, BinaryOperator::Add);
  EXPECT_EQ(std::get<Number>(add.lhs->node).text, "1");
  const auto& mul = std::get<BinaryOp>(add.rhs->node);
  EXPECT_EQ(mul.op, BinaryOperator::Mul);

  // 8-2-1 is (8-2)-1.
  auto left = parse(tokenize("8-2-1"));
  const auto& outer = std::get<BinaryOp>(left->node);
  EXPECT_TRUE(std::holds_alternative<BinaryOp>(outer.lhs->node));
  EXPECT_EQ(std::get<Number>(outer.rhs->node).text, "1");
}

TEST(Parse, ParenthesizedDivision) {
  auto e = parse(tokenize("(88-105)/105"));
  const auto& div = std::get<BinaryOp>(e->node);
  EXPECT_EQ(div.op, BinaryOperator::Div);
  const auto& group = std::get<Group>(div.lhs->node);
  EXPECT_EQ(std::get<BinaryOp>(group.inner->node).op, BinaryOperator::Sub);
  EXPECT_EQ(std::get<Number>(div.rhs->node).text, "105");
}

TEST(Parse, SingleLiteral) {
  auto e = parse(tokenize("5"));
  EXPECT_EQ(std::get<Number>(e->node).value, Rational(5));
}

TEST(Parse, ListsAndLen) {
  EXPECT_TRUE(std::holds_alternative<StringList>(parse(tokenize("['a', 'b']"))->node));
  EXPECT_TRUE(std::holds_alternative<Length>(parse(tokenize("len(['a'])"))->node));
}

TEST(Parse, MixedTypeErrors) {
  for (const char* src : {"[\"a\"] + 1", "1 + [\"a\"]", "len([\"a\"]) + 1", "2 * len([\"a\"])", "-[\"a\"]"}) {
    try {
      parse(tokenize(src));
      FAIL() << src;
    } catch (const DerivationError& e) {
      EXPECT_EQ(e.kind(), DerivationErrorKind::MixedTypeError) << src;
    }
  }
}

TEST(Parse, SyntaxErrors) {
  for (const char* src : {"", "1 +", "(1", "1)", "[]", "['a',]", "len('a')", "len(['a'']", "[' ']", "1 2", "5 ["}) {
    EXPECT_THROW(parse(tokenize(src)), DerivationError) << src;
  }
  try {
    parse(tokenize("(1 + 2"));
    FAIL();
  } catch (const DerivationError& e) {
    EXPECT_EQ(e.kind(), DerivationErrorKind::SyntaxError);
    EXPECT_EQ(e.position(), 6u);
  }
}

TEST(Parse, DeepNestingIsRejectedNotCrashing) {
  std::string deep(5000, '(');
  deep += "1";
  deep += std::string(5000, ')');
  EXPECT_THROW(parse(tokenize(deep)), DerivationError);
  EXPECT_THROW(parse(tokenize(std::string(5000, '-') + "1")), DerivationError);
}

TEST(Evaluate, RendersQuotientAtFourPlaces) {
  auto r = execute_source("(36.6-20.5)/20.5");
  EXPECT_EQ(as<NumericValue>(r).exact, Rational(161, 205));
  EXPECT_EQ(as<NumericValue>(r).rendered, "0.7854");
}

TEST(Evaluate, LenCountsItems) {
  EXPECT_EQ(as<CountValue>(execute_source("len([\"2018\",\"2019\"])")).count, 2);
  EXPECT_EQ(as<CountValue>(execute_source("len([\"Americas\", \"EMEA\", \"Asia Pacific\"])")).count, 3);
}

TEST(Evaluate, ListYieldsSpansInOrder) {
  auto r = execute_source("['b', 'a']");
  EXPECT_EQ(as<SpanListValue>(r).items, (std::vector<std::string>{"b", "a"}));
}

TEST(Evaluate, ZeroRendersWithoutSign) {
  EXPECT_EQ(as<NumericValue>(execute_source("7-7")).rendered, "0");
  EXPECT_EQ(as<NumericValue>(execute_source("-0.00001")).rendered, "0");
  EXPECT_EQ(as<NumericValue>(execute_source("(576523-576523)/576523")).exact, Rational(0));
}

TEST(Evaluate, EquivalentDerivationsAgreeExactly) {
  auto a = as<NumericValue>(execute_source("(88-105)/105")).exact;
  auto b = as<NumericValue>(execute_source("88/105-1")).exact;
  EXPECT_EQ(a, Rational(-17, 105));
  EXPECT_EQ(a, b);
}

TEST(Evaluate, AverageOfThreeValues) {
  auto r = as<NumericValue>(execute_source("(1.06+0.91+4.04)/3"));
  EXPECT_EQ(r.exact, Rational(601, 300));
  EXPECT_EQ(r.rendered, "2.0033");
  EXPECT_EQ(as<NumericValue>(execute_source("(1.06+0.91+4.01)/3")).exact, Rational(598, 300));
}

TEST(Evaluate, NoFloatingPointArtifacts) {
  EXPECT_EQ(as<NumericValue>(execute_source("0.1+0.2")).exact, Rational(3, 10));
  EXPECT_EQ(as<NumericValue>(execute_source("0.1+0.2")).rendered, "0.3");
}

TEST(Evaluate, DivisionByZeroReportsEvaluateStage) {
  try {
    execute_source("1/(2-2)");
    FAIL();
  } catch (const DerivationError& e) {
    EXPECT_EQ(e.kind(), DerivationErrorKind::DivisionByZero);
    EXPECT_EQ(e.stage(), Stage::Evaluate);
    EXPECT_EQ(e.position(), 1u);
  }
}

TEST(Evaluate, RoundsHalfAwayFromZero) {
  EvalConfig two;
  two.render_precision = 2;
  EXPECT_EQ(as<NumericValue>(execute_source("0.125", two)).rendered, "0.13");
  EXPECT_EQ(as<NumericValue>(execute_source("-0.125", two)).rendered, "-0.13");
  EXPECT_EQ(as<NumericValue>(execute_source("0.124", two)).rendered, "0.12");
  EvalConfig zero;
  zero.render_precision = 0;
  EXPECT_EQ(as<NumericValue>(execute_source("2.5", zero)).rendered, "3");
  EXPECT_EQ(as<NumericValue>(execute_source("(1.06+0.91+4.04)/3", zero)).rendered, "2");
  EXPECT_EQ(render_decimal(Rational(1, 2), 4), "0.5");
  EXPECT_EQ(render_decimal(Rational(-17, 105), 4), "-0.1619");
}

TEST(Evaluate, PrecisionOutsideRangeIsRejected) {
  EvalConfig bad;
  bad.render_precision = 11;
  EXPECT_THROW(execute_source("1", bad), std::invalid_argument);
}

TEST(Evaluate, UnaryMinus) {
  EXPECT_EQ(as<NumericValue>(execute_source("-(2+3)*-2")).exact, Rational(10));
  EXPECT_EQ(as<NumericValue>(execute_source("1--1")).exact, Rational(2));
}

TEST(Render, InsertsParenthesesForProgrammaticTrees) {
  auto n = [](const char* t) { return make_number(t); };
  auto e = make_binary(BinaryOperator::Sub, n("1"), make_binary(BinaryOperator::Sub, n("2"), n("3")));
  EXPECT_EQ(render(*e), "1-(2-3)");
  EXPECT_EQ(as<NumericValue>(execute_source(render(*e))).exact, Rational(2));
  auto m = make_binary(BinaryOperator::Mul, make_binary(BinaryOperator::Add, n("1"), n("2")), n("3"));
  EXPECT_EQ(render(*m), "(1+2)*3");
  EXPECT_EQ(render(*make_negate(make_binary(BinaryOperator::Add, n("1"), n("2")))), "-(1+2)");
  EXPECT_EQ(render(*make_length({"a\"b"})), "len([\"a\\\"b\"])");
}

TEST(Render, RoundTripPreservesTokens) {
  for (const char* src : {"(36.6-20.5)/20.5", "3,711 + 1,882", "len(['Americas', \"EMEA\"])", "((1))", "-(-2)",
                          "1--1", "['x, y', 'it\\'s']", ".5+5.", "(1,000,000 + 650,000 + 440,000) / 3"}) {
    auto tokens = tokenize(src);
    EXPECT_EQ(tokenize(render(*parse(tokens))), tokens) << src;
  }
}

// Random grammar-valid sources, built as text, must survive the round trip.
TEST(Render, RoundTripProperty) {
  std::mt19937 rng(7);
  std::function<std::string(int)> gen = [&](int depth) -> std::string {
    std::uniform_int_distribution<int> pick(0, depth > 0 ? 5 : 1);
    switch (pick(rng)) {
      case 0: return std::to_string(rng() % 10000);
      case 1: return std::to_string(rng() % 100) + "." + std::to_string(rng() % 100);
      case 2: return "(" + gen(depth - 1) + ")";
      case 3: return "-" + gen(depth - 1);
      case 4: return gen(depth - 1) + " + " + gen(depth - 1);
      default: return gen(depth - 1) + (rng() % 2 ? "*" : "/") + gen(depth - 1);
    }
  };
  for (int i = 0; i < 2000; ++i) {
    std::string src = gen(4);
    auto tokens = tokenize(src);
    ASSERT_EQ(tokenize(render(*parse(tokens))), tokens) << src;
  }
}

TEST(Evaluate, CountIsPermutationInvariant) {
  std::vector<std::string> items = {"Americas", "EMEA", "Asia Pacific", "Japan", "Other"};
  std::mt19937 rng(11);
  for (int i = 0; i < 50; ++i) {
    std::shuffle(items.begin(), items.end(), rng);
    EXPECT_EQ(as<CountValue>(evaluate(*make_length(items))).count, 5);
  }
}

TEST(Evaluate, RenderingIsDeterministic) {
  auto a = execute_source("(566523-576891)/576523");
  auto b = execute_source("(566523-576891)/576523");
  EXPECT_EQ(as<NumericValue>(a).rendered, as<NumericValue>(b).rendered);
  EXPECT_EQ(as<NumericValue>(a).rendered, "-0.018");
}

TEST(Reconstruct, ArithmeticKeepsDerivation) {
  GoldTurnAnswer g;
  g.answer_type = AnswerType::Arithmetic;
  g.derivation = "(36.6-20.5)/20.5";
  EXPECT_EQ(reconstruct_code(g), "(36.6-20.5)/20.5");
  g.derivation = "3,711 + 4,801 + 1,882";
  EXPECT_EQ(reconstruct_code(g), "3,711 + 4,801 + 1,882");
  EXPECT_EQ(as<NumericValue>(execute_source(reconstruct_code(g))).exact, Rational(10394));
}

TEST(Reconstruct, ArithmeticNormalizesSymbols) {
  GoldTurnAnswer g;
  g.answer_type = AnswerType::Arithmetic;
  g.derivation = "  $1,200 \xC3\x97 3  ";
  EXPECT_EQ(reconstruct_code(g), "1,200 * 3");
  g.derivation = "12.5% - 10%";
  EXPECT_EQ(reconstruct_code(g), "12.5 - 10");
}

TEST(Reconstruct, ArithmeticOutsideGrammarIsRejected) {
  GoldTurnAnswer g;
  g.answer_type = AnswerType::Arithmetic;
  g.derivation = "max(3, 4)";
  EXPECT_THROW(reconstruct_code(g), UnreconstructibleDerivation);
  g.derivation = "";
  EXPECT_THROW(reconstruct_code(g), UnreconstructibleDerivation);
  g.derivation = "['a']";
  EXPECT_THROW(reconstruct_code(g), UnreconstructibleDerivation);
}

TEST(Reconstruct, ClarificationBecomesSingleItemList) {
  GoldTurnAnswer g;
  g.answer_type = AnswerType::Clarification;
  g.req_clari = true;
  g.clarification_question = "Which period are you asking about?";
  EXPECT_EQ(reconstruct_code(g), "[\"Which period are you asking about?\"]");
}

TEST(Reconstruct, CountBecomesLenOverItems) {
  GoldTurnAnswer g;
  g.answer_type = AnswerType::Count;
  g.answers = {"3"};
  g.derivation = "Americas##EMEA##Asia Pacific";
  EXPECT_EQ(reconstruct_code(g), "len([\"Americas\", \"EMEA\", \"Asia Pacific\"])");
  g.derivation = "";
  EXPECT_THROW(reconstruct_code(g), UnreconstructibleDerivation);
}

TEST(Reconstruct, SpansBecomeList) {
  GoldTurnAnswer g;
  g.answer_type = AnswerType::MultiSpan;
  g.answers = {"Americas", "EMEA"};
  EXPECT_EQ(reconstruct_code(g), "[\"Americas\", \"EMEA\"]");
}

}  // namespace
}  // namespace pcqa
