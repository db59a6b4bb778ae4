#pragma once

// Conversational QA corpus over hybrid documents.
//
// On-disk schema (version 1), a JSON array of items:
//
//   {
//     "dialogue_id": "...",                       optional, defaults to table.uid
//     "doc_uid": "...",                           optional, reference another item's table
//     "table": {"uid": "...", "cells": [["..."]]},
//     "paragraphs": [{"uid": "...", "order": 1, "text": "..."}],
//     "questions": [{"uid", "order", "question", "answer", "answer_type",
//                    "answer_from", "derivation", "scale", "req_clari",
//                    "clari_question"}]
//   }
//
// Unknown fields are kept and written back by save_corpus().

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pcqa/derivation.hpp"
#include "pcqa/errors.hpp"
#include "pcqa/linearizer.hpp"
#include "pcqa/reconstruct.hpp"
#include "pcqa/types.hpp"

namespace pcqa {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

enum class Split { Train, Dev, Test };

inline const char* to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "?";
}

struct DialogueTurn {
  std::string turn_id;
  int order = 0;
  std::string question;
  GoldTurnAnswer gold;
  OrderedJson extras = OrderedJson::object();
};

struct Dialogue {
  std::string id;
  std::string doc_uid;
  std::vector<DialogueTurn> turns;  // sorted by order, 1..n
  OrderedJson extras = OrderedJson::object();
};

struct Corpus {
  std::map<std::string, HybridDocument> documents;
  std::vector<Dialogue> dialogues;
  Split split = Split::Test;
  // Paragraph uids per document, kept for save_corpus().
  std::map<std::string, std::vector<std::string>> paragraph_uids;
};

// Text a gold answer would have as a system response in the history.
inline std::string gold_response_text(const GoldTurnAnswer& gold) {
  if (gold.answer_type == AnswerType::Clarification) return gold.clarification_question;
  std::string text;
  for (std::size_t i = 0; i < gold.answers.size(); ++i) {
    if (i) text += ", ";
    text += gold.answers[i];
  }
  if (!gold.scale.empty()) text += " " + gold.scale;
  return text;
}

// ---------------------------------------------------------------------------
// Loading

namespace detail {

inline std::string json_text(const OrderedJson& value, const std::string& where) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number()) return value.dump();
  if (value.is_null()) return {};
  throw SchemaError(where, "expected a string or number");
}

// Maps the public release's field names onto schema version 1.
inline void migrate_release_item(OrderedJson& item) {
  if (item.contains("table") && item["table"].is_object()) {
    auto& table = item["table"];
    if (!table.contains("cells") && table.contains("table")) {
      table["cells"] = table["table"];
      table.erase("table");
    }
  }
  if (item.contains("questions") && item["questions"].is_array()) {
    for (auto& q : item["questions"]) {
      if (!q.is_object()) continue;
      if (!q.contains("clari_question") && q.contains("clarification_question")) {
        q["clari_question"] = q["clarification_question"];
        q.erase("clarification_question");
      }
    }
  }
}

inline const OrderedJson& require(const OrderedJson& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw SchemaError(where, std::string("missing field '") + key + "'");
  return obj.at(key);
}

inline std::vector<std::string> answer_values(const OrderedJson& answer, const std::string& where) {
  std::vector<std::string> out;
  if (answer.is_array()) {
    for (std::size_t i = 0; i < answer.size(); ++i) out.push_back(json_text(answer[i], where + "[" + std::to_string(i) + "]"));
  } else if (!answer.is_null()) {
    out.push_back(json_text(answer, where));
  }
  return out;
}

inline bool json_bool(const OrderedJson& v, const std::string& where) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    auto s = v.get<std::string>();
    if (s == "true" || s == "True") return true;
    if (s == "false" || s == "False") return false;
  }
  throw SchemaError(where, "expected a boolean");
}

inline const std::set<std::string>& known_question_fields() {
  static const std::set<std::string> fields = {"uid",   "order",       "question", "answer",    "answer_type",
                                               "answer_from", "derivation", "scale", "req_clari", "clari_question"};
  return fields;
}

inline const std::set<std::string>& known_item_fields() {
  static const std::set<std::string> fields = {"dialogue_id", "doc_uid", "table", "paragraphs", "questions"};
  return fields;
}

}  // namespace detail

// Per-turn invariant checks shared by load_corpus() and validate_corpus().
inline std::vector<InvariantViolation> turn_violations(const DialogueTurn& turn) {
  std::vector<InvariantViolation> out;
  const auto& g = turn.gold;
  const std::string& id = turn.turn_id;
  if ((g.answer_type == AnswerType::Clarification) != g.req_clari)
    out.emplace_back(id, "req_clari must be set exactly for clarification answers");
  if (g.answer_type == AnswerType::Arithmetic && detail::trim(g.derivation).empty())
    out.emplace_back(id, "arithmetic turn has an empty derivation");
  if (g.answer_type == AnswerType::Count && detail::split_items(g.derivation, "##").empty())
    out.emplace_back(id, "count turn carries no enumerated item list");
  if (g.answer_type == AnswerType::Clarification && detail::trim(g.clarification_question).empty())
    out.emplace_back(id, "clarifying turn has no clarification question");
  if (g.answer_type != AnswerType::Clarification && g.answers.empty())
    out.emplace_back(id, "answer is empty");
  if (!is_known_scale(g.scale)) out.emplace_back(id, "scale '" + g.scale + "' is not in the scale vocabulary");
  if (normalize_whitespace(turn.question).empty()) out.emplace_back(id, "question is empty");
  if (auto marker = find_reserved_marker(turn.question))
    out.emplace_back(id, "question contains reserved marker " + std::string(*marker));
  return out;
}

inline std::vector<InvariantViolation> corpus_violations(const Corpus& corpus) {
  std::vector<InvariantViolation> out;
  std::set<std::string> turn_ids;
  std::set<std::string> dialogue_ids;
  for (const auto& d : corpus.dialogues) {
    if (!dialogue_ids.insert(d.id).second) out.emplace_back("dialogue " + d.id, "duplicate dialogue id");
    if (!corpus.documents.count(d.doc_uid))
      out.emplace_back("dialogue " + d.id, "references missing document " + d.doc_uid);
    if (d.turns.empty()) out.emplace_back("dialogue " + d.id, "has no turns");
    for (std::size_t i = 0; i < d.turns.size(); ++i) {
      const auto& t = d.turns[i];
      if (t.order != static_cast<int>(i) + 1)
        out.emplace_back(t.turn_id, "turn order indices must be contiguous from 1");
      if (!turn_ids.insert(t.turn_id).second) out.emplace_back(t.turn_id, "duplicate turn id");
      auto v = turn_violations(t);
      out.insert(out.end(), v.begin(), v.end());
    }
  }
  return out;
}

inline Corpus parse_corpus(const OrderedJson& root_in, Split split = Split::Test) {
  if (!root_in.is_array()) throw SchemaError("$", "top level must be an array of dialogue items");
  Corpus corpus;
  corpus.split = split;
  for (std::size_t index = 0; index < root_in.size(); ++index) {
    OrderedJson item = root_in[index];
    const std::string where = "$[" + std::to_string(index) + "]";
    if (!item.is_object()) throw SchemaError(where, "expected an object");
    detail::migrate_release_item(item);

    std::optional<std::string> table_uid;
    if (item.contains("table")) {
      const auto& table = item["table"];
      const auto uid = detail::json_text(detail::require(table, "uid", where + ".table"), where + ".table.uid");
      const auto& cells = detail::require(table, "cells", where + ".table");
      if (!cells.is_array()) throw SchemaError(where + ".table.cells", "expected an array of rows");
      std::vector<std::vector<std::string>> rows;
      for (std::size_t r = 0; r < cells.size(); ++r) {
        const std::string rw = where + ".table.cells[" + std::to_string(r) + "]";
        if (!cells[r].is_array()) throw SchemaError(rw, "expected an array of cells");
        std::vector<std::string> row;
        for (std::size_t c = 0; c < cells[r].size(); ++c)
          row.push_back(detail::json_text(cells[r][c], rw + "[" + std::to_string(c) + "]"));
        rows.push_back(std::move(row));
      }
      std::vector<std::pair<long long, std::string>> ordered;
      std::vector<std::string> paragraph_uids;
      if (item.contains("paragraphs")) {
        const auto& ps = item["paragraphs"];
        if (!ps.is_array()) throw SchemaError(where + ".paragraphs", "expected an array");
        for (std::size_t p = 0; p < ps.size(); ++p) {
          const std::string pw = where + ".paragraphs[" + std::to_string(p) + "]";
          const auto& order = detail::require(ps[p], "order", pw);
          if (!order.is_number_integer()) throw SchemaError(pw + ".order", "expected an integer");
          ordered.emplace_back(order.get<long long>(), detail::json_text(detail::require(ps[p], "text", pw), pw + ".text"));
          paragraph_uids.push_back(ps[p].contains("uid") ? detail::json_text(ps[p]["uid"], pw + ".uid") : "");
        }
      }
      std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      std::vector<std::string> paragraphs;
      for (auto& [o, text] : ordered) paragraphs.push_back(text);
      if (corpus.documents.count(uid)) throw InvariantViolation("document " + uid, "duplicate document uid");
      corpus.documents.emplace(uid, make_document(uid, paragraphs, rows));
      corpus.paragraph_uids[uid] = std::move(paragraph_uids);
      table_uid = uid;
    }

    Dialogue dialogue;
    if (item.contains("doc_uid")) dialogue.doc_uid = detail::json_text(item["doc_uid"], where + ".doc_uid");
    else if (table_uid) dialogue.doc_uid = *table_uid;
    else throw SchemaError(where, "item has neither a table nor a doc_uid");
    dialogue.id = item.contains("dialogue_id") ? detail::json_text(item["dialogue_id"], where + ".dialogue_id")
                                               : dialogue.doc_uid;
    for (auto it = item.begin(); it != item.end(); ++it)
      if (!detail::known_item_fields().count(it.key())) dialogue.extras[it.key()] = it.value();

    const auto& questions = detail::require(item, "questions", where);
    if (!questions.is_array()) throw SchemaError(where + ".questions", "expected an array");
    for (std::size_t q = 0; q < questions.size(); ++q) {
      const auto& jq = questions[q];
      const std::string qw = where + ".questions[" + std::to_string(q) + "]";
      DialogueTurn turn;
      turn.turn_id = detail::json_text(detail::require(jq, "uid", qw), qw + ".uid");
      const auto& order = detail::require(jq, "order", qw);
      if (!order.is_number_integer()) throw SchemaError(qw + ".order", "expected an integer");
      turn.order = order.get<int>();
      turn.question = detail::json_text(detail::require(jq, "question", qw), qw + ".question");
      auto& g = turn.gold;
      const auto type_text = detail::json_text(detail::require(jq, "answer_type", qw), qw + ".answer_type");
      auto type = parse_answer_type(type_text);
      if (!type) throw SchemaError(qw + ".answer_type", "unknown answer type '" + type_text + "'");
      g.answer_type = *type;
      const auto source_text = detail::json_text(detail::require(jq, "answer_from", qw), qw + ".answer_from");
      auto source = parse_answer_source(source_text);
      if (!source) throw SchemaError(qw + ".answer_from", "unknown answer source '" + source_text + "'");
      g.source = *source;
      g.answers = detail::answer_values(detail::require(jq, "answer", qw), qw + ".answer");
      if (jq.contains("derivation")) g.derivation = detail::json_text(jq["derivation"], qw + ".derivation");
      if (jq.contains("scale")) g.scale = detail::json_text(jq["scale"], qw + ".scale");
      if (jq.contains("req_clari")) g.req_clari = detail::json_bool(jq["req_clari"], qw + ".req_clari");
      if (jq.contains("clari_question")) g.clarification_question = detail::json_text(jq["clari_question"], qw + ".clari_question");
      if (g.answer_type == AnswerType::Clarification && detail::trim(g.clarification_question).empty() && !g.answers.empty())
        g.clarification_question = g.answers.front();
      for (auto it = jq.begin(); it != jq.end(); ++it)
        if (!detail::known_question_fields().count(it.key())) turn.extras[it.key()] = it.value();
      dialogue.turns.push_back(std::move(turn));
    }
    std::stable_sort(dialogue.turns.begin(), dialogue.turns.end(),
                     [](const DialogueTurn& a, const DialogueTurn& b) { return a.order < b.order; });
    corpus.dialogues.push_back(std::move(dialogue));
  }
  auto violations = corpus_violations(corpus);
  if (!violations.empty()) throw violations.front();
  return corpus;
}

inline std::optional<Split> split_from_path(const std::string& path) {
  const auto name = path.substr(path.find_last_of('/') == std::string::npos ? 0 : path.find_last_of('/') + 1);
  if (name.find("train") != std::string::npos) return Split::Train;
  if (name.find("dev") != std::string::npos || name.find("valid") != std::string::npos) return Split::Dev;
  if (name.find("test") != std::string::npos) return Split::Test;
  return std::nullopt;
}

// Throws SchemaError for unreadable or structurally wrong files and
// InvariantViolation for rule breaks.
inline Corpus load_corpus(const std::string& path, std::optional<Split> split = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path, "cannot open file");
  OrderedJson root;
  try {
    root = OrderedJson::parse(in);
  } catch (const OrderedJson::parse_error& e) {
    throw SchemaError(path, e.what());
  }
  return parse_corpus(root, split.value_or(split_from_path(path).value_or(Split::Test)));
}

inline OrderedJson corpus_to_json(const Corpus& corpus) {
  OrderedJson root = OrderedJson::array();
  std::set<std::string> emitted_docs;
  for (const auto& d : corpus.dialogues) {
    OrderedJson item = OrderedJson::object();
    if (d.id != d.doc_uid) item["dialogue_id"] = d.id;
    if (emitted_docs.insert(d.doc_uid).second) {
      const auto& doc = corpus.documents.at(d.doc_uid);
      item["table"] = {{"uid", doc.uid}, {"cells", doc.table}};
      OrderedJson ps = OrderedJson::array();
      const auto uids = corpus.paragraph_uids.count(doc.uid) ? corpus.paragraph_uids.at(doc.uid) : std::vector<std::string>{};
      for (std::size_t i = 0; i < doc.paragraphs.size(); ++i)
        ps.push_back({{"uid", i < uids.size() ? uids[i] : ""}, {"order", i + 1}, {"text", doc.paragraphs[i]}});
      item["paragraphs"] = ps;
    } else {
      item["doc_uid"] = d.doc_uid;
    }
    OrderedJson qs = OrderedJson::array();
    for (const auto& t : d.turns) {
      const auto& g = t.gold;
      OrderedJson q = {{"uid", t.turn_id},
                       {"order", t.order},
                       {"question", t.question},
                       {"answer", g.answer_type == AnswerType::MultiSpan ? OrderedJson(g.answers)
                                  : g.answers.empty()                   ? OrderedJson("")
                                                                         : OrderedJson(g.answers.front())},
                       {"answer_type", to_string(g.answer_type)},
                       {"answer_from", to_string(g.source)},
                       {"derivation", g.derivation},
                       {"scale", g.scale},
                       {"req_clari", g.req_clari},
                       {"clari_question", g.clarification_question}};
      for (auto it = t.extras.begin(); it != t.extras.end(); ++it) q[it.key()] = it.value();
      qs.push_back(std::move(q));
    }
    item["questions"] = qs;
    for (auto it = d.extras.begin(); it != d.extras.end(); ++it) item[it.key()] = it.value();
    root.push_back(std::move(item));
  }
  return root;
}

inline void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << corpus_to_json(corpus).dump(2) << "\n";
}

inline const Dialogue* find_dialogue(const Corpus& corpus, const std::string& id) {
  for (const auto& d : corpus.dialogues)
    if (d.id == id) return &d;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Statistics

using TypeSourceGrid = std::array<std::array<std::size_t, 3>, 5>;

struct CorpusStats {
  std::size_t dialogues = 0;
  std::size_t turns = 0;
  std::size_t clarifying_turns = 0;
  std::size_t question_words = 0;
  std::size_t answer_words = 0;
  TypeSourceGrid grid{};

  double mean_turns_per_dialogue() const { return dialogues ? double(turns) / double(dialogues) : 0.0; }
  double mean_words_per_question() const { return turns ? double(question_words) / double(turns) : 0.0; }
  double mean_words_per_answer() const { return turns ? double(answer_words) / double(turns) : 0.0; }

  std::size_t type_total(AnswerType t) const {
    const auto& row = grid[static_cast<std::size_t>(t)];
    return row[0] + row[1] + row[2];
  }
  std::size_t source_total(AnswerSource s) const {
    std::size_t n = 0;
    for (const auto& row : grid) n += row[static_cast<std::size_t>(s)];
    return n;
  }
};

inline std::size_t count_words(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r';
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

inline std::string answer_text(const GoldTurnAnswer& gold) {
  if (gold.answer_type == AnswerType::Clarification) return gold.clarification_question;
  std::string text;
  for (const auto& a : gold.answers) text += a + " ";
  return text;
}

inline CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats s;
  s.dialogues = corpus.dialogues.size();
  for (const auto& d : corpus.dialogues) {
    for (const auto& t : d.turns) {
      ++s.turns;
      if (t.gold.req_clari) ++s.clarifying_turns;
      s.question_words += count_words(t.question);
      s.answer_words += count_words(answer_text(t.gold));
      ++s.grid[static_cast<std::size_t>(t.gold.answer_type)][static_cast<std::size_t>(t.gold.source)];
    }
  }
  return s;
}

inline CorpusStats merge_stats(const CorpusStats& a, const CorpusStats& b) {
  CorpusStats s = a;
  s.dialogues += b.dialogues;
  s.turns += b.turns;
  s.clarifying_turns += b.clarifying_turns;
  s.question_words += b.question_words;
  s.answer_words += b.answer_words;
  for (std::size_t i = 0; i < s.grid.size(); ++i)
    for (std::size_t j = 0; j < s.grid[i].size(); ++j) s.grid[i][j] += b.grid[i][j];
  return s;
}

inline OrderedJson stats_to_json(const CorpusStats& s) {
  OrderedJson grid = OrderedJson::object();
  for (auto t : kAnswerTypes) {
    OrderedJson row = OrderedJson::object();
    for (auto src : kAnswerSources) row[to_string(src)] = s.grid[std::size_t(t)][std::size_t(src)];
    row["total"] = s.type_total(t);
    grid[to_string(t)] = row;
  }
  OrderedJson totals = OrderedJson::object();
  for (auto src : kAnswerSources) totals[to_string(src)] = s.source_total(src);
  totals["total"] = s.turns;
  grid["total"] = totals;
  return {{"dialogues", s.dialogues},
          {"turns", s.turns},
          {"clarifying_turns", s.clarifying_turns},
          {"mean_turns_per_dialogue", render_decimal(Rational(s.turns, std::max<std::size_t>(s.dialogues, 1)), 1)},
          {"mean_words_per_question", render_decimal(Rational(s.question_words, std::max<std::size_t>(s.turns, 1)), 1)},
          {"mean_words_per_answer", render_decimal(Rational(s.answer_words, std::max<std::size_t>(s.turns, 1)), 1)},
          {"grid", grid}};
}

// ---------------------------------------------------------------------------
// Training / evaluation examples

struct TurnExample {
  std::string dialogue_id;
  std::string turn_id;
  int order = 0;
  std::string input;
  std::string target;
  AnswerType answer_type = AnswerType::Span;
  AnswerSource source = AnswerSource::Table;
};

struct SkippedTurn {
  std::string turn_id;
  std::string reason;
};

struct ExampleSet {
  std::vector<TurnExample> examples;
  std::vector<SkippedTurn> skipped;
};

// Model input for turn `turn_index` (0-based) with the given prior system
// responses (one per earlier turn).
inline std::string turn_input(const HybridDocument& doc, const Dialogue& dialogue, std::size_t turn_index,
                              const std::vector<std::string>& prior_responses) {
  std::vector<std::string> history;
  for (std::size_t i = 0; i < turn_index; ++i) {
    history.push_back(dialogue.turns[i].question);
    history.push_back(i < prior_responses.size() ? prior_responses[i] : std::string());
  }
  history.push_back(dialogue.turns[turn_index].question);
  return build_model_input(doc, make_history(history));
}

inline std::vector<std::string> gold_responses(const Dialogue& dialogue) {
  std::vector<std::string> out;
  for (const auto& t : dialogue.turns) out.push_back(gold_response_text(t.gold));
  return out;
}

// Target sequence of one turn, or nullopt when the turn does not belong to
// the task (CQG holds clarifying turns only, CQA the others).
inline std::optional<std::string> turn_target(const DialogueTurn& turn, Task task) {
  const bool clarify = turn.gold.req_clari;
  if (task == Task::CNP) return format_target(Task::CNP, clarify, "");
  if (task == Task::CQG && !clarify) return std::nullopt;
  if (task == Task::CQA && clarify) return std::nullopt;
  return format_target(task, clarify, reconstruct_code(turn.gold));
}

// Inputs use gold prior responses (teacher forcing).
inline ExampleSet build_examples(const Corpus& corpus, Task task) {
  ExampleSet set;
  for (const auto& d : corpus.dialogues) {
    const auto& doc = corpus.documents.at(d.doc_uid);
    const auto responses = gold_responses(d);
    for (std::size_t i = 0; i < d.turns.size(); ++i) {
      const auto& t = d.turns[i];
      std::optional<std::string> target;
      try {
        target = turn_target(t, task);
      } catch (const Error& e) {
        set.skipped.push_back({t.turn_id, e.what()});
        continue;
      }
      if (!target) continue;
      set.examples.push_back(
          {d.id, t.turn_id, t.order, turn_input(doc, d, i, responses), *target, t.gold.answer_type, t.gold.source});
    }
  }
  return set;
}

// ---------------------------------------------------------------------------
// Validation

struct Finding {
  std::string kind;  // InvariantViolation, UnreconstructibleDerivation, ExecutionMismatch, StatMismatch
  std::string where;
  std::string detail;
};

struct ValidationReport {
  CorpusStats stats;
  std::vector<Finding> findings;
  std::size_t arithmetic_turns = 0;
  std::size_t arithmetic_validated = 0;

  bool ok() const { return findings.empty(); }
  double arithmetic_validation_rate() const {
    return arithmetic_turns ? double(arithmetic_validated) / double(arithmetic_turns) : 1.0;
  }
};

// Whether an executed value matches a gold number. Equal at the configured
// precision, or equal after rounding to the precision the gold was written
// with. Percent-scale golds are also tried as value * 100.
inline bool gold_value_agrees(const Rational& value, std::string_view gold_text, std::string_view scale, int precision) {
  auto gold = parse_plain_number(gold_text);
  if (!gold) return false;
  std::vector<Rational> candidates = {value};
  if (scale == "percent") candidates.push_back(value * 100);
  const int written = written_fraction_digits(gold_text);
  for (const auto& c : candidates) {
    if (render_decimal(c, precision) == render_decimal(*gold, precision)) return true;
    if (written < precision && render_decimal(c, written) == render_decimal(*gold, written)) return true;
  }
  return false;
}

struct ExpectedStats {
  std::optional<std::size_t> dialogues, turns, clarifying_turns;
  std::optional<std::string> mean_turns_per_dialogue, mean_words_per_question, mean_words_per_answer;
  // answer_type -> source (or "total") -> count
  std::map<std::string, std::map<std::string, std::size_t>> grid;
};

inline ExpectedStats parse_expected_stats(const Json& j) {
  ExpectedStats e;
  auto count = [&](const char* key, std::optional<std::size_t>& dst) {
    if (j.contains(key)) dst = j.at(key).get<std::size_t>();
  };
  auto mean = [&](const char* key, std::optional<std::string>& dst) {
    if (!j.contains(key)) return;
    const auto text = j.at(key).is_string() ? j.at(key).get<std::string>() : j.at(key).dump();
    auto value = parse_plain_number(text);
    if (!value) throw SchemaError(key, "expected a number");
    dst = render_decimal(*value, 1);
  };
  count("dialogues", e.dialogues);
  count("turns", e.turns);
  count("clarifying_turns", e.clarifying_turns);
  mean("mean_turns_per_dialogue", e.mean_turns_per_dialogue);
  mean("mean_words_per_question", e.mean_words_per_question);
  mean("mean_words_per_answer", e.mean_words_per_answer);
  if (j.contains("grid"))
    for (auto& [type, row] : j.at("grid").items())
      for (auto& [src, n] : row.items()) e.grid[type][src] = n.get<std::size_t>();
  return e;
}

inline ExpectedStats load_expected_stats(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path, "cannot open file");
  try {
    return parse_expected_stats(Json::parse(in));
  } catch (const Json::exception& e) {
    throw SchemaError(path, e.what());
  }
}

inline std::vector<Finding> diff_stats(const CorpusStats& s, const ExpectedStats& e) {
  std::vector<Finding> out;
  auto check = [&](const char* name, const auto& expected, const auto& actual) {
    if (expected && *expected != actual) {
      std::ostringstream msg;
      msg << "expected " << *expected << ", found " << actual;
      out.push_back({"StatMismatch", name, msg.str()});
    }
  };
  check("dialogues", e.dialogues, s.dialogues);
  check("turns", e.turns, s.turns);
  check("clarifying_turns", e.clarifying_turns, s.clarifying_turns);
  const auto json = stats_to_json(s);
  check("mean_turns_per_dialogue", e.mean_turns_per_dialogue, json["mean_turns_per_dialogue"].get<std::string>());
  check("mean_words_per_question", e.mean_words_per_question, json["mean_words_per_question"].get<std::string>());
  check("mean_words_per_answer", e.mean_words_per_answer, json["mean_words_per_answer"].get<std::string>());
  for (const auto& [type, row] : e.grid) {
    for (const auto& [src, n] : row) {
      std::optional<std::size_t> expected = n;
      std::size_t actual = 0;
      const std::string where = "grid." + type + "." + src;
      if (type == "total") {
        if (src == "total") actual = s.turns;
        else if (auto source = parse_answer_source(src)) actual = s.source_total(*source);
        else { out.push_back({"StatMismatch", where, "unknown source"}); continue; }
      } else if (auto t = parse_answer_type(type)) {
        if (src == "total") actual = s.type_total(*t);
        else if (auto source = parse_answer_source(src)) actual = s.grid[std::size_t(*t)][std::size_t(*source)];
        else { out.push_back({"StatMismatch", where, "unknown source"}); continue; }
      } else {
        out.push_back({"StatMismatch", where, "unknown answer type"});
        continue;
      }
      check(where.c_str(), expected, actual);
    }
  }
  return out;
}

inline ValidationReport validate_corpus(const Corpus& corpus, const std::optional<ExpectedStats>& expected = std::nullopt,
                                        const EvalConfig& config = {}) {
  ValidationReport report;
  report.stats = corpus_stats(corpus);
  for (const auto& v : corpus_violations(corpus)) report.findings.push_back({"InvariantViolation", v.where(), v.rule()});

  for (const auto& d : corpus.dialogues) {
    for (const auto& t : d.turns) {
      const auto& g = t.gold;
      if (g.answer_type != AnswerType::Arithmetic && g.answer_type != AnswerType::Count) continue;
      if (g.answer_type == AnswerType::Arithmetic) ++report.arithmetic_turns;
      std::string code;
      try {
        code = reconstruct_code(g);
      } catch (const UnreconstructibleDerivation& e) {
        report.findings.push_back({"UnreconstructibleDerivation", t.turn_id, e.what()});
        continue;
      }
      try {
        const auto result = execute_source(code, config);
        const std::string gold = g.answers.empty() ? std::string() : g.answers.front();
        bool agrees = false;
        std::string got = display(result);
        if (const auto* n = std::get_if<NumericValue>(&result.value)) {
          agrees = gold_value_agrees(n->exact, gold, g.scale, config.render_precision);
        } else if (const auto* c = std::get_if<CountValue>(&result.value)) {
          agrees = gold_value_agrees(Rational(c->count), gold, "", config.render_precision);
        }
        if (agrees) {
          if (g.answer_type == AnswerType::Arithmetic) ++report.arithmetic_validated;
        } else {
          report.findings.push_back(
              {"ExecutionMismatch", t.turn_id, "'" + code + "' executes to " + got + " but gold answer is '" + gold + "'"});
        }
      } catch (const DerivationError& e) {
        report.findings.push_back({"ExecutionMismatch", t.turn_id, "'" + code + "' fails: " + e.what()});
      }
    }
  }
  if (expected) {
    auto diffs = diff_stats(report.stats, *expected);
    report.findings.insert(report.findings.end(), diffs.begin(), diffs.end());
  }
  return report;
}

}  // namespace pcqa
