#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "pcqa/derivation.hpp"
#include "pcqa/types.hpp"

namespace pcqa {

namespace detail {

inline std::string trim(std::string_view text) {
  const auto begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  const auto end = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(begin, end - begin + 1));
}

inline void replace_all(std::string& text, std::string_view from, std::string_view to) {
  for (std::size_t pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size()))
    text.replace(pos, from.size(), to);
}

inline std::vector<std::string> split_items(std::string_view text, std::string_view separator) {
  std::vector<std::string> items;
  std::size_t start = 0;
  for (;;) {
    const auto pos = text.find(separator, start);
    std::string item = trim(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (!item.empty()) items.push_back(std::move(item));
    if (pos == std::string_view::npos) break;
    start = pos + separator.size();
  }
  return items;
}

}  // namespace detail

// Maps an annotated arithmetic derivation onto the derivation language:
// currency and percent signs are dropped, typographic operators are mapped
// to ASCII, and whitespace runs collapse. The result must parse as a
// numeric expression.
inline std::string normalize_derivation(std::string_view derivation) {
  std::string text(derivation);
  detail::replace_all(text, "\xE2\x88\x92", "-");  // U+2212 minus
  detail::replace_all(text, "\xE2\x80\x93", "-");  // U+2013 en dash
  detail::replace_all(text, "\xC3\x97", "*");      // U+00D7 multiplication
  detail::replace_all(text, "\xC3\xB7", "/");      // U+00F7 division
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (c == '$' || c == '%') continue;
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

// Builds the target code for a gold answer.
//   arithmetic    -> the normalized derivation
//   count         -> len([...items...])
//   span(s)       -> ["span", ...]
//   clarification -> ["question"]
inline std::string reconstruct_code(const GoldTurnAnswer& gold) {
  switch (gold.answer_type) {
    case AnswerType::Arithmetic: {
      std::string code = normalize_derivation(gold.derivation);
      if (code.empty()) throw UnreconstructibleDerivation("arithmetic turn has an empty derivation");
      try {
        auto expr = parse(tokenize(code), code.size());
        if (!is_numeric(*expr)) throw UnreconstructibleDerivation("arithmetic derivation is not numeric: " + code);
      } catch (const DerivationError& e) {
        throw UnreconstructibleDerivation("derivation '" + std::string(gold.derivation) +
                                          "' is outside the grammar: " + e.what());
      }
      return code;
    }
    case AnswerType::Count: {
      auto items = detail::split_items(gold.derivation, "##");
      if (items.empty()) throw UnreconstructibleDerivation("count turn carries no item list");
      return render(*make_length(std::move(items)));
    }
    case AnswerType::Span:
    case AnswerType::MultiSpan: {
      std::vector<std::string> spans;
      for (const auto& a : gold.answers) {
        std::string s = detail::trim(a);
        if (!s.empty()) spans.push_back(std::move(s));
      }
      if (spans.empty()) throw UnreconstructibleDerivation("span turn has no answer text");
      return render_string_list(spans);
    }
    case AnswerType::Clarification: {
      std::string question = detail::trim(gold.clarification_question);
      if (question.empty()) throw UnreconstructibleDerivation("clarifying turn has no clarification question");
      return render_string_list({question});
    }
  }
  throw UnreconstructibleDerivation("unknown answer type");
}

}  // namespace pcqa
