#pragma once

// Model input and target sequences.
//
//   input:  [paragraph] p1 </p> ... pk </p> [table] c11 : c12 | ... | c1n </t> ...
//           [user] q1 [system] r1 ... [user] qt
//   target: "True"/"False" (CNP), a clarification list literal (CQG), a
//           derivation (CQA), or "[clari.] y [resp.] r" (multi-task).

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pcqa/derivation.hpp"
#include "pcqa/errors.hpp"
#include "pcqa/types.hpp"

namespace pcqa {

inline constexpr std::array<std::string_view, 8> kReservedMarkers = {
    "[paragraph]", "[table]", "[user]", "[system]", "[clari.]", "[resp.]", "</p>", "</t>"};

// Collapses whitespace runs to one space and trims.
inline std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending = false;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(c);
  }
  return out;
}

inline std::optional<std::string_view> find_reserved_marker(std::string_view text) {
  for (auto marker : kReservedMarkers)
    if (text.find(marker) != std::string_view::npos) return marker;
  return std::nullopt;
}

struct HybridDocument {
  std::string uid;
  std::vector<std::string> paragraphs;
  // Row-major, first row is the header row. Rectangular.
  std::vector<std::vector<std::string>> table;
};

// Normalizes whitespace, drops blank paragraphs, right-pads ragged rows
// with empty cells, and enforces the document invariants.
inline HybridDocument make_document(std::string uid, const std::vector<std::string>& paragraphs,
                                    const std::vector<std::vector<std::string>>& rows) {
  HybridDocument doc;
  doc.uid = std::move(uid);
  auto check = [&](const std::string& text, const std::string& where) {
    if (auto marker = find_reserved_marker(text))
      throw InvariantViolation("document " + doc.uid + " " + where,
                               "contains reserved marker " + std::string(*marker));
  };
  for (std::size_t i = 0; i < paragraphs.size(); ++i) {
    std::string p = normalize_whitespace(paragraphs[i]);
    if (p.empty()) continue;
    check(p, "paragraph " + std::to_string(i));
    doc.paragraphs.push_back(std::move(p));
  }
  std::size_t columns = 0;
  for (const auto& row : rows) columns = std::max(columns, row.size());
  if (rows.empty()) throw InvariantViolation("document " + doc.uid, "table needs at least one row");
  if (columns < 2) throw InvariantViolation("document " + doc.uid, "table needs at least two columns");
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::vector<std::string> cells;
    cells.reserve(columns);
    for (std::size_t c = 0; c < columns; ++c) {
      std::string cell = c < rows[r].size() ? normalize_whitespace(rows[r][c]) : std::string();
      check(cell, "cell (" + std::to_string(r) + "," + std::to_string(c) + ")");
      cells.push_back(std::move(cell));
    }
    doc.table.push_back(std::move(cells));
  }
  return doc;
}

// q1, r1, q2, r2, ..., qt. Always odd length.
struct ConversationHistory {
  std::vector<std::string> turns;
};

inline ConversationHistory make_history(const std::vector<std::string>& turns) {
  if (turns.empty()) throw InvariantViolation("history", "must contain at least the current user query");
  if (turns.size() % 2 == 0) throw InvariantViolation("history", "must alternate user/system and end with a user query");
  ConversationHistory history;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    std::string text = normalize_whitespace(turns[i]);
    const bool user = i % 2 == 0;
    if (user && text.empty())
      throw InvariantViolation("history turn " + std::to_string(i), "user query is empty");
    if (auto marker = find_reserved_marker(text))
      throw InvariantViolation("history turn " + std::to_string(i), "contains reserved marker " + std::string(*marker));
    history.turns.push_back(std::move(text));
  }
  return history;
}

inline std::string linearize_row(const std::vector<std::string>& row) {
  std::string out = row.empty() ? std::string() : row[0];
  for (std::size_t c = 1; c < row.size(); ++c) {
    out += c == 1 ? " : " : " | ";
    out += row[c];
  }
  return out;
}

inline std::string linearize_document(const HybridDocument& doc) {
  std::string out = "[paragraph]";
  for (const auto& p : doc.paragraphs) {
    out += ' ';
    out += p;
    out += " </p>";
  }
  out += " [table]";
  for (std::size_t r = 0; r < doc.table.size(); ++r) {
    out += r == 0 ? " " : " </t> ";
    out += linearize_row(doc.table[r]);
  }
  return out;
}

inline std::string linearize_history(const ConversationHistory& history) {
  std::string out;
  for (std::size_t i = 0; i < history.turns.size(); ++i) {
    if (i) out += ' ';
    out += i % 2 == 0 ? "[user]" : "[system]";
    if (!history.turns[i].empty()) {
      out += ' ';
      out += history.turns[i];
    }
  }
  return out;
}

inline std::string build_model_input(const HybridDocument& doc, const ConversationHistory& history) {
  return linearize_document(doc) + " " + linearize_history(history);
}

// ---------------------------------------------------------------------------
// Targets

inline constexpr std::string_view kClariMarker = "[clari.]";
inline constexpr std::string_view kRespMarker = "[resp.]";

namespace detail {
inline bool is_string_list_literal(std::string_view text) {
  try {
    return std::holds_alternative<StringList>(parse(tokenize(text), text.size())->node);
  } catch (const DerivationError&) {
    return false;
  }
}
}  // namespace detail

inline std::string format_target(Task task, bool needs_clarification, std::string_view response) {
  const std::string payload = normalize_whitespace(response);
  if (auto marker = find_reserved_marker(payload))
    throw InvalidCombination("response contains reserved marker " + std::string(*marker));
  const char* flag = needs_clarification ? "True" : "False";
  switch (task) {
    case Task::CNP:
      if (!payload.empty()) throw InvalidCombination("CNP targets carry no response payload");
      return flag;
    case Task::CQG:
      if (!needs_clarification) throw InvalidCombination("CQG targets are clarifying by definition");
      if (!detail::is_string_list_literal(payload))
        throw InvalidCombination("CQG response must be a clarification list literal");
      return payload;
    case Task::CQA:
      if (needs_clarification) throw InvalidCombination("CQA targets never ask for clarification");
      if (payload.empty()) throw InvalidCombination("CQA response is empty");
      return payload;
    case Task::MultiTask:
      if (payload.empty()) throw InvalidCombination("multi-task response is empty");
      if (needs_clarification && !detail::is_string_list_literal(payload))
        throw InvalidCombination("clarifying response must be a list literal");
      return std::string(kClariMarker) + " " + flag + " " + std::string(kRespMarker) + " " + payload;
  }
  throw InvalidCombination("unknown task");
}

struct ParsedOutput {
  // Set for MultiTask and CNP outputs.
  std::optional<bool> clarification_flag;
  // Derivation source or clarification list literal. Empty for CNP.
  std::string response_payload;
  std::string raw;
};

namespace detail {
inline std::optional<bool> parse_flag(std::string_view text) {
  if (text == "True") return true;
  if (text == "False") return false;
  return std::nullopt;
}
}  // namespace detail

inline ParsedOutput parse_output(std::string_view decoded, Task task) {
  ParsedOutput out;
  out.raw = std::string(decoded);
  const std::string text = normalize_whitespace(decoded);
  switch (task) {
    case Task::CNP: {
      out.clarification_flag = detail::parse_flag(text);
      if (!out.clarification_flag) throw MalformedOutput("CNP output must be True or False, got '" + text + "'");
      return out;
    }
    case Task::CQG:
    case Task::CQA:
      if (text.empty()) throw MalformedOutput("empty output");
      out.response_payload = text;
      return out;
    case Task::MultiTask: {
      const auto clari = text.find(kClariMarker);
      const auto resp = text.find(kRespMarker);
      if (clari == std::string::npos) throw MalformedOutput("missing [clari.] marker");
      if (resp == std::string::npos) throw MalformedOutput("missing [resp.] marker");
      if (clari != 0) throw MalformedOutput("text before [clari.] marker");
      if (resp < clari) throw MalformedOutput("[resp.] precedes [clari.]");
      if (text.find(kClariMarker, clari + 1) != std::string::npos || text.find(kRespMarker, resp + 1) != std::string::npos)
        throw MalformedOutput("repeated marker");
      const std::string flag = normalize_whitespace(
          std::string_view(text).substr(clari + kClariMarker.size(), resp - clari - kClariMarker.size()));
      out.clarification_flag = detail::parse_flag(flag);
      if (!out.clarification_flag) throw MalformedOutput("flag must be True or False, got '" + flag + "'");
      out.response_payload = normalize_whitespace(std::string_view(text).substr(resp + kRespMarker.size()));
      if (out.response_payload.empty()) throw MalformedOutput("empty response after [resp.]");
      return out;
    }
  }
  throw MalformedOutput("unknown task");
}

}  // namespace pcqa
