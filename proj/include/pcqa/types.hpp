#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pcqa {

// Which sub-task a target sequence encodes. MultiTask is
// "[clari.] y [resp.] r".
enum class Task { CNP, CQG, CQA, MultiTask };

inline const char* to_string(Task task) {
  switch (task) {
    case Task::CNP: return "cnp";
    case Task::CQG: return "cqg";
    case Task::CQA: return "cqa";
    case Task::MultiTask: return "multitask";
  }
  return "?";
}

inline std::optional<Task> parse_task(std::string_view text) {
  if (text == "cnp") return Task::CNP;
  if (text == "cqg") return Task::CQG;
  if (text == "cqa") return Task::CQA;
  if (text == "multitask" || text == "mtl") return Task::MultiTask;
  return std::nullopt;
}

enum class AnswerType { Span, MultiSpan, Count, Arithmetic, Clarification };
enum class AnswerSource { Table, Text, TableText };

inline constexpr std::array<AnswerType, 5> kAnswerTypes = {AnswerType::Span, AnswerType::MultiSpan, AnswerType::Count,
                                                          AnswerType::Arithmetic, AnswerType::Clarification};
inline constexpr std::array<AnswerSource, 3> kAnswerSources = {AnswerSource::Table, AnswerSource::Text,
                                                              AnswerSource::TableText};

// Closed scale vocabulary of numeric answers.
inline constexpr std::array<std::string_view, 5> kScales = {"", "thousand", "million", "billion", "percent"};

inline bool is_known_scale(std::string_view scale) {
  for (auto s : kScales)
    if (s == scale) return true;
  return false;
}

inline const char* to_string(AnswerType type) {
  switch (type) {
    case AnswerType::Span: return "span";
    case AnswerType::MultiSpan: return "multi-span";
    case AnswerType::Count: return "count";
    case AnswerType::Arithmetic: return "arithmetic";
    case AnswerType::Clarification: return "clarification";
  }
  return "?";
}

// Row labels of the breakdown table.
inline const char* display_label(AnswerType type) {
  switch (type) {
    case AnswerType::Span: return "Span";
    case AnswerType::MultiSpan: return "Spans";
    case AnswerType::Count: return "Counting";
    case AnswerType::Arithmetic: return "Arithmetic";
    case AnswerType::Clarification: return "Question";
  }
  return "?";
}

inline const char* to_string(AnswerSource source) {
  switch (source) {
    case AnswerSource::Table: return "table";
    case AnswerSource::Text: return "text";
    case AnswerSource::TableText: return "table-text";
  }
  return "?";
}

inline const char* display_label(AnswerSource source) {
  switch (source) {
    case AnswerSource::Table: return "Table";
    case AnswerSource::Text: return "Text";
    case AnswerSource::TableText: return "Table-text";
  }
  return "?";
}

// "question" is the answer type name used by the public release.
inline std::optional<AnswerType> parse_answer_type(std::string_view text) {
  if (text == "span") return AnswerType::Span;
  if (text == "multi-span" || text == "spans") return AnswerType::MultiSpan;
  if (text == "count" || text == "counting") return AnswerType::Count;
  if (text == "arithmetic") return AnswerType::Arithmetic;
  if (text == "clarification" || text == "question") return AnswerType::Clarification;
  return std::nullopt;
}

inline std::optional<AnswerSource> parse_answer_source(std::string_view text) {
  if (text == "table") return AnswerSource::Table;
  if (text == "text") return AnswerSource::Text;
  if (text == "table-text") return AnswerSource::TableText;
  return std::nullopt;
}

// Gold annotation of one turn.
struct GoldTurnAnswer {
  AnswerType answer_type = AnswerType::Span;
  // Answer value(s) as text. One entry for span/count/arithmetic answers.
  std::vector<std::string> answers;
  // Gold derivation. Arithmetic expression, or "##"-separated items for
  // count answers. May be empty for spans.
  std::string derivation;
  std::string scale;
  AnswerSource source = AnswerSource::Table;
  bool req_clari = false;
  std::string clarification_question;
};

}  // namespace pcqa
