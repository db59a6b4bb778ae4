#pragma once

// Plurality voting over the executed answers of sampled decodes.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "pcqa/derivation.hpp"
#include "pcqa/errors.hpp"
#include "pcqa/linearizer.hpp"
#include "pcqa/types.hpp"

namespace pcqa {

struct SampledOutput {
  std::string raw;
  std::optional<double> score;  // sequence log-probability
  std::size_t index = 0;        // sampling order
  std::string scale;            // predicted scale, empty when the generator does not emit one
};

using SampleSet = std::vector<SampledOutput>;

// Builds a SampleSet with indices 0..N-1 in the given order.
inline SampleSet make_sample_set(const std::vector<std::string>& raws) {
  SampleSet set;
  for (std::size_t i = 0; i < raws.size(); ++i) set.push_back({raws[i], std::nullopt, i, ""});
  return set;
}

enum class AnswerKind { Numeric, Count, SpanSet, Clarify, Flag };

inline const char* to_string(AnswerKind kind) {
  switch (kind) {
    case AnswerKind::Numeric: return "numeric";
    case AnswerKind::Count: return "count";
    case AnswerKind::SpanSet: return "span_set";
    case AnswerKind::Clarify: return "clarify";
    case AnswerKind::Flag: return "flag";
  }
  return "?";
}

struct CanonicalAnswer {
  AnswerKind kind = AnswerKind::Numeric;
  Rational number;                 // Numeric
  std::int64_t count = 0;          // Count
  std::vector<std::string> spans;  // SpanSet: items as written
  std::vector<std::string> span_keys;  // SpanSet: normalized, sorted
  std::string question;            // Clarify: as written
  std::string question_key;        // Clarify: normalized
  bool flag = false;               // Flag, and the clarification flag of multi-task outputs
  std::string rendered;            // display text
  std::string scale;
  std::size_t exemplar_index = 0;
  std::string exemplar_raw;
  std::string exemplar_payload;    // derivation or list literal that produced it

  bool needs_clarification() const { return kind == AnswerKind::Clarify || (kind == AnswerKind::Flag && flag); }
};

struct Discard {
  std::string reason;
};

using Canonicalized = std::variant<CanonicalAnswer, Discard>;

namespace detail {

inline std::string lower_collapse(std::string_view text, bool strip_punctuation) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (strip_punctuation && std::ispunct(u)) continue;
    if (std::isspace(u)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(u)));
  }
  return out;
}

}  // namespace detail

// Lowercased, punctuation-stripped, whitespace-collapsed question text.
inline std::string normalize_question(std::string_view text) { return detail::lower_collapse(text, true); }

// Lowercased, whitespace-collapsed span text.
inline std::string normalize_span(std::string_view text) { return detail::lower_collapse(text, false); }

inline CanonicalAnswer make_clarify_answer(std::string question) {
  CanonicalAnswer a;
  a.kind = AnswerKind::Clarify;
  a.question_key = normalize_question(question);
  a.rendered = question;
  a.question = std::move(question);
  a.flag = true;
  return a;
}

inline CanonicalAnswer make_span_answer(std::vector<std::string> spans) {
  CanonicalAnswer a;
  a.kind = AnswerKind::SpanSet;
  for (const auto& s : spans) a.span_keys.push_back(normalize_span(s));
  std::sort(a.span_keys.begin(), a.span_keys.end());
  for (std::size_t i = 0; i < spans.size(); ++i) a.rendered += (i ? ", " : "") + spans[i];
  a.spans = std::move(spans);
  return a;
}

inline CanonicalAnswer make_numeric_answer(Rational value, const EvalConfig& config = {}) {
  CanonicalAnswer a;
  a.kind = AnswerKind::Numeric;
  a.rendered = render_decimal(value, config.render_precision);
  a.number = std::move(value);
  return a;
}

inline CanonicalAnswer make_count_answer(std::int64_t count) {
  CanonicalAnswer a;
  a.kind = AnswerKind::Count;
  a.count = count;
  a.rendered = std::to_string(count);
  return a;
}

inline CanonicalAnswer make_flag_answer(bool flag) {
  CanonicalAnswer a;
  a.kind = AnswerKind::Flag;
  a.flag = flag;
  a.rendered = flag ? "True" : "False";
  return a;
}

// Answer for an executed derivation.
inline CanonicalAnswer answer_from_execution(const ExecutionResult& result, const EvalConfig& config = {}) {
  return std::visit(
      [&](const auto& v) -> CanonicalAnswer {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, NumericValue>) return make_numeric_answer(v.exact, config);
        else if constexpr (std::is_same_v<T, CountValue>) return make_count_answer(v.count);
        else return make_span_answer(v.items);
      },
      result.value);
}

// Same group under the voting equality.
inline bool same_answer(const CanonicalAnswer& a, const CanonicalAnswer& b, const EvalConfig& config = {}) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case AnswerKind::Numeric: {
      const Rational diff = a.number - b.number;
      return (diff < 0 ? Rational(-diff) : diff) <= config.numeric_tolerance;
    }
    case AnswerKind::Count: return a.count == b.count;
    case AnswerKind::SpanSet: return a.span_keys == b.span_keys;
    case AnswerKind::Clarify: return a.question_key == b.question_key;
    case AnswerKind::Flag: return a.flag == b.flag;
  }
  return false;
}

// Executes one decoded sample. Never throws: any failure is a Discard.
inline Canonicalized canonicalize(const SampledOutput& sample, Task task, const EvalConfig& config = {}) {
  try {
    const ParsedOutput parsed = parse_output(sample.raw, task);
    CanonicalAnswer answer;
    if (task == Task::CNP) {
      answer = make_flag_answer(*parsed.clarification_flag);
    } else if (task == Task::CQG || (task == Task::MultiTask && *parsed.clarification_flag)) {
      const ExecutionResult r = execute_source(parsed.response_payload, config);
      const auto* list = std::get_if<SpanListValue>(&r.value);
      if (!list || list->items.size() != 1) return Discard{"clarification payload must be a single-item list"};
      answer = make_clarify_answer(list->items.front());
    } else {
      answer = answer_from_execution(execute_source(parsed.response_payload, config), config);
    }
    answer.scale = sample.scale;
    answer.exemplar_index = sample.index;
    answer.exemplar_raw = sample.raw;
    answer.exemplar_payload = parsed.response_payload;
    return answer;
  } catch (const std::exception& e) {
    return Discard{e.what()};
  }
}

struct Tally {
  CanonicalAnswer answer;
  std::size_t votes = 0;
  std::optional<double> score_sum;  // set when every member carried a score
  std::vector<std::size_t> members;  // sampling indices
};

struct VoteResult {
  CanonicalAnswer winner;
  std::vector<Tally> tallies;
  std::size_t discarded = 0;
  std::size_t sample_count = 0;
};

namespace detail {

inline void check_sample_set(const SampleSet& samples) {
  if (samples.empty()) throw InvariantViolation("sample set", "at least one sample is required");
  std::vector<bool> seen(samples.size(), false);
  for (const auto& s : samples) {
    if (s.index >= samples.size() || seen[s.index])
      throw InvariantViolation("sample set", "indices must be 0..N-1 without gaps or repeats");
    seen[s.index] = true;
  }
}

// Tally order: votes, then score sum when both groups have one, then
// the earliest sampling index.
inline bool ranks_before(const Tally& a, const Tally& b) {
  if (a.votes != b.votes) return a.votes > b.votes;
  if (a.score_sum && b.score_sum && *a.score_sum != *b.score_sum) return *a.score_sum > *b.score_sum;
  return a.answer.exemplar_index < b.answer.exemplar_index;
}

}  // namespace detail

// Groups already-canonicalized samples. `items[i]` belongs to `samples[i]`.
inline VoteResult tally_votes(const SampleSet& samples, const std::vector<Canonicalized>& items,
                              const EvalConfig& config = {}) {
  detail::check_sample_set(samples);
  if (items.size() != samples.size()) throw InvariantViolation("sample set", "one canonical answer per sample");
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return samples[a].index < samples[b].index; });

  VoteResult result;
  result.sample_count = samples.size();
  for (std::size_t i : order) {
    const auto* answer = std::get_if<CanonicalAnswer>(&items[i]);
    if (!answer) {
      ++result.discarded;
      continue;
    }
    auto group = std::find_if(result.tallies.begin(), result.tallies.end(),
                              [&](const Tally& t) { return same_answer(t.answer, *answer, config); });
    if (group == result.tallies.end()) {
      result.tallies.push_back({*answer, 0, 0.0, {}});
      group = std::prev(result.tallies.end());
    }
    ++group->votes;
    group->members.push_back(samples[i].index);
    if (group->score_sum && samples[i].score) *group->score_sum += *samples[i].score;
    else group->score_sum.reset();
  }
  if (result.tallies.empty()) throw AllSamplesDiscarded();
  std::stable_sort(result.tallies.begin(), result.tallies.end(), detail::ranks_before);
  result.winner = result.tallies.front().answer;
  return result;
}

inline VoteResult consensus_vote(const SampleSet& samples, Task task, const EvalConfig& config = {}) {
  std::vector<Canonicalized> items;
  items.reserve(samples.size());
  for (const auto& s : samples) items.push_back(canonicalize(s, task, config));
  return tally_votes(samples, items, config);
}

// Canonical answer of the single greedy decode.
inline Canonicalized greedy_select(const SampleSet& samples, Task task, const EvalConfig& config = {}) {
  if (samples.size() != 1) throw InvariantViolation("greedy decode", "exactly one output expected");
  return canonicalize(samples.front(), task, config);
}

inline nlohmann::ordered_json answer_to_json(const CanonicalAnswer& a) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(a.kind);
  switch (a.kind) {
    case AnswerKind::Numeric: j["value"] = to_fraction_string(a.number); break;
    case AnswerKind::Count: j["value"] = a.count; break;
    case AnswerKind::SpanSet: j["value"] = a.spans; break;
    case AnswerKind::Clarify: j["value"] = a.question; break;
    case AnswerKind::Flag: j["value"] = a.flag; break;
  }
  j["rendered"] = a.rendered;
  j["scale"] = a.scale;
  j["exemplar_index"] = a.exemplar_index;
  j["exemplar"] = a.exemplar_payload;
  return j;
}

inline nlohmann::ordered_json vote_to_json(const VoteResult& v) {
  nlohmann::ordered_json j;
  j["winner"] = answer_to_json(v.winner);
  j["tallies"] = nlohmann::ordered_json::array();
  for (const auto& t : v.tallies) {
    auto entry = answer_to_json(t.answer);
    entry["votes"] = t.votes;
    if (t.score_sum) entry["score_sum"] = *t.score_sum;
    j["tallies"].push_back(std::move(entry));
  }
  j["discarded"] = v.discarded;
  j["samples"] = v.sample_count;
  return j;
}

}  // namespace pcqa
