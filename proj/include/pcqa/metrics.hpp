#pragma once

// Evaluation metrics: exact match, numeracy-focused token F1, ROUGE,
// classification P/R/F1 and the per-type/per-source breakdown report.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "pcqa/derivation.hpp"
#include "pcqa/errors.hpp"
#include "pcqa/types.hpp"
#include "pcqa/voting.hpp"

namespace pcqa {

// ---------------------------------------------------------------------------
// Token F1 with number matching, following the DROP reference evaluator
// operation for operation (including its float formatting and rounding).

namespace drop {

inline bool is_space(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u == ' ' || (u >= '\t' && u <= '\r') || (u >= 0x1c && u <= 0x1f);
}

inline std::string_view strip(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Float literal as accepted by Python's float(): surrounding whitespace,
// optional sign, digits with single underscores between them, optional
// fraction and exponent, or inf/infinity/nan.
inline std::optional<double> python_float(std::string_view text) {
  std::string_view s = strip(text);
  std::string cleaned;
  if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
    cleaned.push_back(s.front());
    s.remove_prefix(1);
  }
  const std::string lower = ascii_lower(s);
  if (lower == "inf" || lower == "infinity")
    return cleaned == "-" ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
  if (lower == "nan") return std::numeric_limits<double>::quiet_NaN();

  std::size_t i = 0;
  auto digit = [&](std::size_t k) { return k < s.size() && std::isdigit(static_cast<unsigned char>(s[k])); };
  auto digit_part = [&]() {
    if (!digit(i)) return false;
    while (true) {
      while (digit(i)) cleaned.push_back(s[i++]);
      if (i < s.size() && s[i] == '_' && digit(i + 1)) {
        ++i;
        continue;
      }
      return true;
    }
  };
  const bool integer = digit_part();
  bool fraction = false;
  if (i < s.size() && s[i] == '.') {
    cleaned.push_back('.');
    ++i;
    fraction = digit_part();
  }
  if (!integer && !fraction) return std::nullopt;
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    cleaned.push_back('e');
    ++i;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) cleaned.push_back(s[i++]);
    if (!digit_part()) return std::nullopt;
  }
  if (i != s.size()) return std::nullopt;
  return std::strtod(cleaned.c_str(), nullptr);
}

// Python repr() of a float: shortest round-trip digits, positional between
// 1e-4 and 1e16, scientific otherwise.
inline std::string python_float_repr(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value < 0 ? "-inf" : "inf";
  if (value == 0) return std::signbit(value) ? "-0.0" : "0.0";
  char buffer[64];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, value, std::chars_format::scientific);
  std::string sci(buffer, end);
  std::string sign;
  if (sci.front() == '-') {
    sign = "-";
    sci.erase(0, 1);
  }
  const auto e = sci.find('e');
  std::string digits = sci.substr(0, e);
  digits.erase(std::remove(digits.begin(), digits.end(), '.'), digits.end());
  const int exponent = std::stoi(sci.substr(e + 1));
  const int decpt = exponent + 1;
  const int n = static_cast<int>(digits.size());
  if (decpt > -4 && decpt <= 16) {
    if (decpt <= 0) return sign + "0." + std::string(-decpt, '0') + digits;
    if (decpt >= n) return sign + digits + std::string(decpt - n, '0') + ".0";
    return sign + digits.substr(0, decpt) + "." + digits.substr(decpt);
  }
  std::string out = sign + digits.substr(0, 1);
  if (n > 1) out += "." + digits.substr(1);
  const int magnitude = std::abs(exponent);
  out += exponent < 0 ? "e-" : "e+";
  if (magnitude < 10) out += "0";
  return out + std::to_string(magnitude);
}

inline bool is_number(std::string_view text) { return python_float(text).has_value(); }

inline std::string remove_punc(const std::string& text) {
  if (is_number(text)) return text;
  std::string out;
  for (char c : text)
    if (!std::ispunct(static_cast<unsigned char>(c))) out.push_back(c);
  return out;
}

inline std::string normalize_number(const std::string& text) {
  if (auto v = python_float(text)) return python_float_repr(*v);
  return text;
}

inline bool is_word_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) || c == '_' || u >= 0x80;
}

// Replaces whole words "a", "an", "the" with a space.
inline std::string remove_articles(const std::string& text) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_word_char(text[i])) {
      out.push_back(text[i++]);
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_word_char(text[j])) ++j;
    const std::string_view word(text.data() + i, j - i);
    if (word == "a" || word == "an" || word == "the") out.push_back(' ');
    else out.append(word);
    i = j;
  }
  return out;
}

inline std::string white_space_fix(std::string_view text) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) {
      if (!out.empty()) out.push_back(' ');
      out.append(text.substr(i, j - i));
    }
    i = j;
  }
  return out;
}

// Splits on every single space or hyphen.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens(1);
  for (char c : text) {
    if (c == ' ' || c == '-') tokens.emplace_back();
    else tokens.back().push_back(c);
  }
  return tokens;
}

inline std::string normalize_answer(std::string_view text) {
  std::string joined;
  for (const auto& token : tokenize(text)) {
    std::string part = white_space_fix(remove_articles(normalize_number(remove_punc(ascii_lower(token)))));
    if (strip(part).empty()) continue;
    if (!joined.empty()) joined.push_back(' ');
    joined += part;
  }
  return std::string(strip(joined));
}

using Bag = std::set<std::string>;

// Set of whitespace-separated tokens.
inline Bag to_bag(std::string_view normalized) {
  Bag bag;
  std::size_t i = 0;
  while (i < normalized.size()) {
    while (i < normalized.size() && is_space(normalized[i])) ++i;
    std::size_t j = i;
    while (j < normalized.size() && !is_space(normalized[j])) ++j;
    if (j > i) bag.emplace(normalized.substr(i, j - i));
    i = j;
  }
  return bag;
}

inline double compute_f1(const Bag& predicted, const Bag& gold) {
  std::size_t intersection = 0;
  for (const auto& t : gold) intersection += predicted.count(t);
  const double precision = predicted.empty() ? 1.0 : static_cast<double>(intersection) / static_cast<double>(predicted.size());
  const double recall = gold.empty() ? 1.0 : static_cast<double>(intersection) / static_cast<double>(gold.size());
  if (precision == 0.0 && recall == 0.0) return 0.0;
  return (2 * precision * recall) / (precision + recall);
}

// True when gold has no numbers or shares at least one with the prediction.
inline bool match_numbers_if_present(const Bag& gold, const Bag& predicted) {
  bool gold_has_number = false;
  for (const auto& w : gold) {
    if (!is_number(w)) continue;
    gold_has_number = true;
    if (predicted.count(w)) return true;
  }
  return !gold_has_number;
}

// Maximum-weight assignment on a rectangular score matrix. Returns, for
// each row, the assigned column or -1.
inline std::vector<int> max_assignment(const std::vector<std::vector<double>>& scores, std::size_t cols) {
  const std::size_t rows = scores.size();
  const std::size_t n = std::max(rows, cols);
  if (n == 0) return {};
  // Square cost matrix, 1-based, minimizing the negated scores.
  auto cost = [&](std::size_t r, std::size_t c) { return (r <= rows && c <= cols) ? -scores[r - 1][c - 1] : 0.0; };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0), v(n + 1, 0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> assignment(rows, -1);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] >= 1 && p[j] <= rows && j <= cols) assignment[p[j] - 1] = static_cast<int>(j - 1);
  return assignment;
}

inline std::vector<double> align_bags(const std::vector<Bag>& predicted, const std::vector<Bag>& gold) {
  std::vector<std::vector<double>> scores(gold.size(), std::vector<double>(predicted.size(), 0.0));
  for (std::size_t g = 0; g < gold.size(); ++g)
    for (std::size_t p = 0; p < predicted.size(); ++p)
      if (match_numbers_if_present(gold[g], predicted[p])) scores[g][p] = compute_f1(predicted[p], gold[g]);
  std::vector<double> best(std::max(gold.size(), predicted.size()), 0.0);
  const auto assignment = max_assignment(scores, predicted.size());
  for (std::size_t g = 0; g < assignment.size(); ++g)
    if (assignment[g] >= 0) best[g] = std::max(best[g], scores[g][assignment[g]]);
  return best;
}

// Pairwise summation in the order numpy uses for contiguous float64 arrays.
inline double pairwise_sum(const double* a, std::size_t n) {
  if (n < 8) {
    double res = 0.;
    for (std::size_t i = 0; i < n; ++i) res += a[i];
    return res;
  }
  if (n <= 128) {
    double r[8];
    for (int k = 0; k < 8; ++k) r[k] = a[k];
    std::size_t i = 8;
    for (; i < n - (n % 8); i += 8)
      for (int k = 0; k < 8; ++k) r[k] += a[i + k];
    double res = ((r[0] + r[1]) + (r[2] + r[3])) + ((r[4] + r[5]) + (r[6] + r[7]));
    for (; i < n; ++i) res += a[i];
    return res;
  }
  std::size_t n2 = n / 2;
  n2 -= n2 % 8;
  return pairwise_sum(a, n2) + pairwise_sum(a + n2, n - n2);
}

// Exact value of a finite double.
inline Rational exact_rational(double value) {
  int exponent = 0;
  const double mantissa = std::frexp(value, &exponent);
  const auto scaled = static_cast<long long>(std::ldexp(mantissa, 53));
  exponent -= 53;
  Rational r(scaled);
  if (exponent > 0) r *= Rational(BigInt(1) << exponent);
  if (exponent < 0) r /= Rational(BigInt(1) << -exponent);
  return r;
}

// Python round(value, digits): exact half-to-even on the binary value.
inline double python_round(double value, int digits) {
  if (!std::isfinite(value)) return value;
  const Rational scaled = exact_rational(value) * pow10(digits);
  const bool negative = scaled < 0;
  const Rational magnitude = negative ? Rational(-scaled) : scaled;
  BigInt floor_part = boost::multiprecision::numerator(magnitude) / boost::multiprecision::denominator(magnitude);
  const Rational rest = magnitude - Rational(floor_part);
  if (rest > Rational(1, 2) || (rest == Rational(1, 2) && floor_part % 2 == 1)) floor_part += 1;
  const std::string text = (negative ? "-" : "") + floor_part.str() + "e-" + std::to_string(digits);
  return std::strtod(text.c_str(), nullptr);
}

struct Scores {
  double exact_match = 0;
  double f1 = 0;
};

inline Scores get_metrics(const std::vector<std::string>& predicted, const std::vector<std::string>& gold) {
  std::vector<std::string> pred_spans, gold_spans;
  std::vector<Bag> pred_bags, gold_bags;
  for (const auto& s : predicted) {
    pred_spans.push_back(normalize_answer(s));
    pred_bags.push_back(to_bag(pred_spans.back()));
  }
  for (const auto& s : gold) {
    gold_spans.push_back(normalize_answer(s));
    gold_bags.push_back(to_bag(gold_spans.back()));
  }
  Scores out;
  const std::set<std::string> pred_set(pred_spans.begin(), pred_spans.end());
  const std::set<std::string> gold_set(gold_spans.begin(), gold_spans.end());
  out.exact_match = (pred_set == gold_set && pred_spans.size() == gold_spans.size()) ? 1.0 : 0.0;
  const auto per_bag = align_bags(pred_bags, gold_bags);
  const double mean = per_bag.empty() ? std::numeric_limits<double>::quiet_NaN()
                                      : pairwise_sum(per_bag.data(), per_bag.size()) / static_cast<double>(per_bag.size());
  out.f1 = python_round(mean, 2);
  return out;
}

}  // namespace drop

// ---------------------------------------------------------------------------
// Answer-level metrics

namespace detail {

inline std::vector<std::string> answer_strings(const std::optional<CanonicalAnswer>& answer) {
  if (!answer) return {""};
  switch (answer->kind) {
    case AnswerKind::SpanSet: return answer->spans;
    case AnswerKind::Clarify: return {answer->question};
    case AnswerKind::Flag: return {""};
    default: return {answer->rendered};
  }
}

inline std::vector<std::string> gold_strings(const GoldTurnAnswer& gold) {
  if (gold.answer_type == AnswerType::Clarification) return {gold.clarification_question};
  if (gold.answers.empty()) return {""};
  return gold.answers;
}

// Plain numbers are rendered at the configured precision; anything else is
// left as written.
inline std::string prepare(const std::string& text, const EvalConfig& config) {
  if (auto v = parse_plain_number(text)) return render_decimal(*v, config.render_precision);
  return text;
}

inline std::string currency_signature(std::string_view text) {
  static const std::array<std::string_view, 4> symbols = {"$", "\xe2\x82\xac", "\xc2\xa3", "\xc2\xa5"};
  std::string sig;
  for (std::size_t i = 0; i < text.size(); ++i)
    for (auto s : symbols)
      if (text.substr(i, s.size()) == s) sig += s;
  return sig;
}

inline std::string match_key(const std::string& text, const EvalConfig& config) {
  if (auto v = parse_plain_number(text)) return "n:" + render_decimal(*v, config.render_precision);
  return "t:" + drop::normalize_answer(text) + '\x1f' + currency_signature(text);
}

}  // namespace detail

// Text shown for a predicted answer; empty for no answer.
inline std::string predicted_text(const std::optional<CanonicalAnswer>& answer) {
  std::string out;
  for (const auto& s : detail::answer_strings(answer)) out += (out.empty() ? "" : ", ") + s;
  return out;
}

// 1 when the normalized prediction equals the normalized gold. Numbers are
// compared after rendering at the configured precision, other text after
// token normalization with currency symbols kept. Scales must match for
// non-clarifying turns.
inline int exact_match(const std::optional<CanonicalAnswer>& pred, const GoldTurnAnswer& gold,
                       const EvalConfig& config = {}) {
  if (!pred || pred->kind == AnswerKind::Flag) return 0;
  const bool clarifying = gold.answer_type == AnswerType::Clarification;
  if (clarifying != (pred->kind == AnswerKind::Clarify)) return 0;
  if (!clarifying && pred->scale != gold.scale) return 0;
  std::vector<std::string> a, b;
  for (const auto& s : detail::answer_strings(pred)) a.push_back(detail::match_key(s, config));
  for (const auto& s : detail::gold_strings(gold)) b.push_back(detail::match_key(s, config));
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b ? 1 : 0;
}

// Token F1 with number matching and span alignment. Plain numbers on both
// sides are rendered at the configured precision first.
inline double numeracy_f1(const std::optional<CanonicalAnswer>& pred, const GoldTurnAnswer& gold,
                          const EvalConfig& config = {}) {
  std::vector<std::string> a, b;
  for (const auto& s : detail::answer_strings(pred)) a.push_back(detail::prepare(s, config));
  for (const auto& s : detail::gold_strings(gold)) b.push_back(detail::prepare(s, config));
  return drop::get_metrics(a, b).f1;
}

struct PRF {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

namespace detail {

inline std::vector<std::string> rouge_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::istringstream in(drop::ascii_lower(text));
  std::string t;
  while (in >> t) tokens.push_back(t);
  return tokens;
}

}  // namespace detail

// n-gram overlap with clipped counts over lowercased whitespace tokens.
// When neither side has an n-gram, the score is 1 for identical token
// sequences and 0 otherwise.
inline PRF rouge_n(std::string_view pred, std::string_view gold, std::size_t n) {
  const auto p = detail::rouge_tokens(pred);
  const auto g = detail::rouge_tokens(gold);
  auto grams = [n](const std::vector<std::string>& tokens) {
    std::map<std::vector<std::string>, std::size_t> counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i)
      ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                        tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
    return counts;
  };
  const auto pg = grams(p);
  const auto gg = grams(g);
  std::size_t p_total = 0, g_total = 0, overlap = 0;
  for (const auto& [k, c] : pg) p_total += c;
  for (const auto& [k, c] : gg) {
    g_total += c;
    if (auto it = pg.find(k); it != pg.end()) overlap += std::min(c, it->second);
  }
  if (p_total == 0 && g_total == 0) {
    const double v = p == g ? 1.0 : 0.0;
    return {v, v, v};
  }
  PRF out;
  if (p_total) out.precision = static_cast<double>(overlap) / static_cast<double>(p_total);
  if (g_total) out.recall = static_cast<double>(overlap) / static_cast<double>(g_total);
  if (out.precision + out.recall > 0) out.f1 = 2 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

inline double rouge2_f1(std::string_view pred, std::string_view gold) { return rouge_n(pred, gold, 2).f1; }
inline double rouge1_recall(std::string_view pred, std::string_view gold) { return rouge_n(pred, gold, 1).recall; }

// Positive class is "needs clarification". Zero denominators give 0.
inline PRF classification_prf(const std::vector<bool>& preds, const std::vector<bool>& golds) {
  if (preds.size() != golds.size())
    throw LengthMismatch("predictions " + std::to_string(preds.size()) + " vs gold " + std::to_string(golds.size()));
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] && golds[i]) ++tp;
    else if (preds[i]) ++fp;
    else if (golds[i]) ++fn;
  }
  PRF out;
  if (tp + fp) out.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn) out.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (out.precision + out.recall > 0) out.f1 = 2 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

// ---------------------------------------------------------------------------
// Records and the aggregate report

struct PredictionRecord {
  std::string turn_id;
  std::optional<CanonicalAnswer> predicted;  // nullopt is the empty answer
  GoldTurnAnswer gold;
  bool clarification_pred = false;
  bool clarification_gold = false;
};

inline PredictionRecord make_record(std::string turn_id, std::optional<CanonicalAnswer> predicted, GoldTurnAnswer gold) {
  PredictionRecord r;
  r.turn_id = std::move(turn_id);
  r.clarification_pred = predicted && predicted->needs_clarification();
  r.clarification_gold = gold.answer_type == AnswerType::Clarification;
  r.predicted = std::move(predicted);
  r.gold = std::move(gold);
  return r;
}

struct RecordScores {
  int exact_match = 0;
  double f1 = 0;
  std::optional<double> rouge2;  // clarifying turns only
};

inline RecordScores score_record(const PredictionRecord& r, const EvalConfig& config = {}) {
  RecordScores s;
  s.exact_match = exact_match(r.predicted, r.gold, config);
  s.f1 = numeracy_f1(r.predicted, r.gold, config);
  if (r.clarification_gold) s.rouge2 = rouge2_f1(predicted_text(r.predicted), r.gold.clarification_question);
  return s;
}

struct ScoreCell {
  std::size_t count = 0;
  double em_sum = 0;
  double f1_sum = 0;

  void add(const RecordScores& s) {
    ++count;
    em_sum += s.exact_match;
    f1_sum += s.f1;
  }
  std::optional<double> em() const { return count ? std::optional(em_sum / static_cast<double>(count)) : std::nullopt; }
  std::optional<double> f1() const { return count ? std::optional(f1_sum / static_cast<double>(count)) : std::nullopt; }
};

inline constexpr std::size_t kGridRows = kAnswerTypes.size() + 1;    // + Total
inline constexpr std::size_t kGridCols = kAnswerSources.size() + 1;  // + Total

struct MetricReport {
  std::size_t turns = 0;
  ScoreCell overall;
  PRF cnp;
  ScoreCell cqg;
  double cqg_rouge2_sum = 0;
  ScoreCell cqa;
  std::array<std::array<ScoreCell, kGridCols>, kGridRows> grid{};

  std::optional<double> cqg_rouge2() const {
    return cqg.count ? std::optional(cqg_rouge2_sum / static_cast<double>(cqg.count)) : std::nullopt;
  }
};

// Micro-averaged: every turn counts once in each pool it belongs to.
inline MetricReport aggregate_report(const std::vector<PredictionRecord>& records, const EvalConfig& config = {}) {
  if (records.empty()) throw EmptyRecordSet();
  MetricReport report;
  report.turns = records.size();
  std::vector<bool> preds, golds;
  for (const auto& r : records) {
    if ((r.gold.answer_type == AnswerType::Clarification) != r.clarification_gold)
      throw InvariantViolation(r.turn_id, "clarification label must agree with the answer type");
    const RecordScores s = score_record(r, config);
    report.overall.add(s);
    if (r.clarification_gold) {
      report.cqg.add(s);
      report.cqg_rouge2_sum += *s.rouge2;
    } else {
      report.cqa.add(s);
    }
    const auto row = static_cast<std::size_t>(r.gold.answer_type);
    const auto col = static_cast<std::size_t>(r.gold.source);
    report.grid[row][col].add(s);
    report.grid[row][kGridCols - 1].add(s);
    report.grid[kGridRows - 1][col].add(s);
    report.grid[kGridRows - 1][kGridCols - 1].add(s);
    preds.push_back(r.clarification_pred);
    golds.push_back(r.clarification_gold);
  }
  report.cnp = classification_prf(preds, golds);
  return report;
}

inline const char* grid_row_label(std::size_t row) {
  return row < kAnswerTypes.size() ? display_label(kAnswerTypes[row]) : "Total";
}

inline const char* grid_col_label(std::size_t col) {
  return col < kAnswerSources.size() ? display_label(kAnswerSources[col]) : "Total";
}

namespace detail {
inline nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}
}  // namespace detail

inline nlohmann::ordered_json report_to_json(const MetricReport& r) {
  using J = nlohmann::ordered_json;
  J j;
  j["averaging"] = "micro";
  j["turns"] = r.turns;
  j["overall"] = {{"em", detail::optional_json(r.overall.em())}, {"f1", detail::optional_json(r.overall.f1())}};
  j["cnp"] = {{"precision", r.cnp.precision}, {"recall", r.cnp.recall}, {"f1", r.cnp.f1}};
  j["cqg"] = {{"turns", r.cqg.count},
              {"rouge2_f1", detail::optional_json(r.cqg_rouge2())},
              {"em", detail::optional_json(r.cqg.em())},
              {"f1", detail::optional_json(r.cqg.f1())}};
  j["cqa"] = {{"turns", r.cqa.count}, {"em", detail::optional_json(r.cqa.em())}, {"f1", detail::optional_json(r.cqa.f1())}};
  J grid = J::object();
  for (std::size_t row = 0; row < kGridRows; ++row) {
    J cols = J::object();
    for (std::size_t col = 0; col < kGridCols; ++col) {
      const auto& cell = r.grid[row][col];
      cols[grid_col_label(col)] =
          cell.count ? J{{"turns", cell.count}, {"em", *cell.em()}, {"f1", *cell.f1()}} : J(nullptr);
    }
    grid[grid_row_label(row)] = std::move(cols);
  }
  j["breakdown"] = std::move(grid);
  return j;
}

// Score ×100 with one decimal, or "-".
inline std::string percent(const std::optional<double>& v) {
  if (!v) return "-";
  std::ostringstream out;
  out << std::fixed << std::setprecision(1) << *v * 100;
  return out.str();
}

inline std::string report_to_text(const MetricReport& r) {
  std::ostringstream out;
  auto line = [&](const std::string& label, const std::string& value) {
    out << std::left << std::setw(28) << label << value << "\n";
  };
  line("Turns", std::to_string(r.turns) + " (micro-averaged)");
  line("Overall EM / F1", percent(r.overall.em()) + " / " + percent(r.overall.f1()));
  line("CNP P / R / F1", percent(r.cnp.precision) + " / " + percent(r.cnp.recall) + " / " + percent(r.cnp.f1));
  line("CQG ROUGE-2 / EM / F1", percent(r.cqg_rouge2()) + " / " + percent(r.cqg.em()) + " / " + percent(r.cqg.f1()) +
                                    " (" + std::to_string(r.cqg.count) + " turns)");
  line("CQA EM / F1", percent(r.cqa.em()) + " / " + percent(r.cqa.f1()) + " (" + std::to_string(r.cqa.count) + " turns)");
  for (int metric = 0; metric < 2; ++metric) {
    out << "\n" << (metric == 0 ? "EM" : "F1") << " by answer type and source\n";
    out << std::left << std::setw(12) << "";
    for (std::size_t col = 0; col < kGridCols; ++col) out << std::right << std::setw(12) << grid_col_label(col);
    out << "\n";
    for (std::size_t row = 0; row < kGridRows; ++row) {
      out << std::left << std::setw(12) << grid_row_label(row);
      for (std::size_t col = 0; col < kGridCols; ++col) {
        const auto& cell = r.grid[row][col];
        out << std::right << std::setw(12) << percent(metric == 0 ? cell.em() : cell.f1());
      }
      out << "\n";
    }
  }
  return out.str();
}

}  // namespace pcqa
