#pragma once

// End-to-end evaluation loop against a generation service: build inputs,
// request decodes, vote or take the greedy output, and score.
//
// Generation contract (one JSON object per request and response):
//
//   request:  {"turn_id": "...", "input": "...", "mode": "greedy" | "sample",
//              "num_samples": 40, "top_k": 40, "temperature": 0.5,
//              "max_target_length": 128}
//   response: {"outputs": [{"text": "...", "score": -1.2, "scale": "million"}]}
//
// "score" (sequence log-probability) and "scale" are optional. Greedy
// requests must return exactly one output, sample requests exactly
// num_samples. Replay fixtures are JSONL lines of
// {"turn_id", "mode", "outputs"} with the same output objects.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pcqa/corpus.hpp"
#include "pcqa/errors.hpp"
#include "pcqa/linearizer.hpp"
#include "pcqa/metrics.hpp"
#include "pcqa/voting.hpp"

namespace pcqa {

enum class GenerationMode { Greedy, Sample };

inline const char* to_string(GenerationMode mode) { return mode == GenerationMode::Greedy ? "greedy" : "sample"; }

struct GenerationRequest {
  std::string turn_id;
  std::string input;
  GenerationMode mode = GenerationMode::Greedy;
  int num_samples = 40;
  int top_k = 40;
  double temperature = 0.5;
  int max_target_length = 128;

  std::size_t expected_outputs() const { return mode == GenerationMode::Greedy ? 1 : static_cast<std::size_t>(num_samples); }
};

struct GeneratedOutput {
  std::string text;
  std::optional<double> score;
  std::string scale;
};

struct GenerationResponse {
  std::vector<GeneratedOutput> outputs;
};

inline nlohmann::ordered_json request_to_json(const GenerationRequest& r) {
  return {{"turn_id", r.turn_id},         {"input", r.input},         {"mode", to_string(r.mode)},
          {"num_samples", r.num_samples}, {"top_k", r.top_k},         {"temperature", r.temperature},
          {"max_target_length", r.max_target_length}};
}

// Parses a list of output objects. Throws ContractViolation on shape errors.
inline std::vector<GeneratedOutput> outputs_from_json(const nlohmann::json& outputs) {
  if (!outputs.is_array()) throw ContractViolation("\"outputs\" must be an array");
  std::vector<GeneratedOutput> out;
  for (const auto& o : outputs) {
    if (!o.is_object() || !o.contains("text") || !o["text"].is_string())
      throw ContractViolation("each output needs a string \"text\"");
    GeneratedOutput g;
    g.text = o["text"].get<std::string>();
    if (o.contains("score") && !o["score"].is_null()) {
      if (!o["score"].is_number()) throw ContractViolation("\"score\" must be a number");
      g.score = o["score"].get<double>();
    }
    if (o.contains("scale") && !o["scale"].is_null()) {
      if (!o["scale"].is_string()) throw ContractViolation("\"scale\" must be a string");
      g.scale = o["scale"].get<std::string>();
    }
    out.push_back(std::move(g));
  }
  return out;
}

inline void check_output_count(const GenerationRequest& request, const GenerationResponse& response) {
  if (response.outputs.size() != request.expected_outputs())
    throw ContractViolation(std::string(to_string(request.mode)) + " request for " + request.turn_id + " expected " +
                            std::to_string(request.expected_outputs()) + " outputs, got " +
                            std::to_string(response.outputs.size()));
}

class Generator {
 public:
  virtual ~Generator() = default;
  // Returns exactly the contracted number of outputs. Throws TransportError
  // when the service cannot be reached, ContractViolation on a bad response.
  virtual GenerationResponse generate(const GenerationRequest& request) = 0;
};

// Serves canned outputs keyed by (turn id, mode). Sample requests get the
// first num_samples recorded outputs.
class ReplayGenerator : public Generator {
 public:
  static ReplayGenerator from_stream(std::istream& in, const std::string& name = "replay fixture") {
    ReplayGenerator g;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const std::string where = name + ":" + std::to_string(line_no);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw SchemaError(where, e.what());
      }
      if (!j.is_object() || !j.contains("turn_id") || !j["turn_id"].is_string() || !j.contains("mode") ||
          !j["mode"].is_string() || !j.contains("outputs"))
        throw SchemaError(where, "expected {turn_id, mode, outputs}");
      const std::string mode = j["mode"];
      if (mode != "greedy" && mode != "sample") throw SchemaError(where, "mode must be greedy or sample");
      try {
        g.rows_[{j["turn_id"].get<std::string>(), mode}] = outputs_from_json(j["outputs"]);
      } catch (const ContractViolation& e) {
        throw SchemaError(where, e.what());
      }
    }
    return g;
  }

  static ReplayGenerator from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError(path, "cannot open replay fixture");
    return from_stream(in, path);
  }

  GenerationResponse generate(const GenerationRequest& request) override {
    auto it = rows_.find({request.turn_id, to_string(request.mode)});
    if (it == rows_.end())
      throw TransportError("replay fixture has no " + std::string(to_string(request.mode)) + " entry for " +
                           request.turn_id);
    GenerationResponse response;
    const std::size_t n = std::min(it->second.size(), request.expected_outputs());
    response.outputs.assign(it->second.begin(), it->second.begin() + static_cast<std::ptrdiff_t>(n));
    return response;
  }

 private:
  std::map<std::pair<std::string, std::string>, std::vector<GeneratedOutput>> rows_;
};

// ---------------------------------------------------------------------------
// Turn and run

enum class DecodeMode { Greedy, ConsensusVoting };
enum class HistoryMode { Gold, Predicted };

inline const char* to_string(DecodeMode m) { return m == DecodeMode::Greedy ? "greedy" : "cv"; }
inline const char* to_string(HistoryMode m) { return m == HistoryMode::Gold ? "gold" : "predicted"; }

struct RunConfig {
  DecodeMode decode = DecodeMode::ConsensusVoting;
  HistoryMode history = HistoryMode::Gold;
  Task task = Task::MultiTask;
  EvalConfig eval;
  int num_samples = 40;
  int top_k = 40;
  double temperature = 0.5;
  int max_target_length = 128;
  std::size_t concurrency = 8;

  void validate() const {
    eval.validate();
    if (num_samples < 1) throw std::invalid_argument("num_samples must be at least 1");
    if (top_k < 1) throw std::invalid_argument("top_k must be at least 1");
    if (!(temperature > 0)) throw std::invalid_argument("temperature must be positive");
    if (max_target_length < 1) throw std::invalid_argument("max_target_length must be at least 1");
    if (concurrency < 1) throw std::invalid_argument("concurrency must be at least 1");
  }
};

struct TurnResult {
  std::string turn_id;
  std::string dialogue_id;
  int order = 0;
  DecodeMode decode = DecodeMode::Greedy;
  std::string input;
  std::vector<GeneratedOutput> samples;   // outputs of the configured request
  std::optional<VoteResult> vote;         // consensus path
  std::optional<Canonicalized> greedy;    // greedy path or fallback
  bool fallback = false;
  std::vector<std::string> notes;
  std::optional<CanonicalAnswer> answer;  // nullopt is the empty answer
  std::string response;
  PredictionRecord record;
  RecordScores scores;
  double latency_ms = 0;  // not written to logs
};

// Final response text: the clarification question, or the answer with its
// scale appended.
inline std::string response_text(const std::optional<CanonicalAnswer>& answer) {
  if (!answer) return "";
  if (answer->kind == AnswerKind::Clarify) return answer->question;
  std::string text = predicted_text(answer);
  if (!answer->scale.empty()) text += " " + answer->scale;
  return text;
}

namespace detail {

inline SampleSet to_sample_set(const std::vector<GeneratedOutput>& outputs) {
  SampleSet set;
  for (std::size_t i = 0; i < outputs.size(); ++i) set.push_back({outputs[i].text, outputs[i].score, i, outputs[i].scale});
  return set;
}

inline GenerationRequest make_request(const std::string& turn_id, const std::string& input, GenerationMode mode,
                                      const RunConfig& config) {
  return {turn_id, input, mode, config.num_samples, config.top_k, config.temperature, config.max_target_length};
}

inline GenerationResponse checked_generate(Generator& generator, const GenerationRequest& request) {
  GenerationResponse response = generator.generate(request);
  check_output_count(request, response);
  return response;
}

// Clarification flag stated by a raw output, even when its payload fails.
inline std::optional<bool> stated_flag(const std::string& raw, Task task) {
  if (task == Task::CQG) return true;
  if (task == Task::CQA) return false;
  try {
    return parse_output(raw, task).clarification_flag;
  } catch (const MalformedOutput&) {
    return std::nullopt;
  }
}

// Greedy request; fills result.greedy and returns the answer or nullopt.
inline std::optional<CanonicalAnswer> run_greedy(Generator& generator, const std::string& turn_id,
                                                 const std::string& input, const RunConfig& config, TurnResult& result,
                                                 bool keep_samples) {
  GenerationResponse response;
  try {
    response = checked_generate(generator, make_request(turn_id, input, GenerationMode::Greedy, config));
  } catch (const ContractViolation& e) {
    result.notes.push_back(std::string("greedy contract violation: ") + e.what());
    return std::nullopt;
  }
  if (keep_samples) result.samples = response.outputs;
  const SampleSet set = to_sample_set(response.outputs);
  result.greedy = greedy_select(set, config.task, config.eval);
  if (const auto* a = std::get_if<CanonicalAnswer>(&*result.greedy)) return *a;
  result.notes.push_back("greedy output discarded: " + std::get<Discard>(*result.greedy).reason);
  return std::nullopt;
}

}  // namespace detail

// One turn: input, decode, vote or greedy, response, scores. Malformed
// model output never escapes; only TransportError propagates.
inline TurnResult run_turn(Generator& generator, const HybridDocument& doc, const ConversationHistory& history,
                           const DialogueTurn& turn, const RunConfig& config, const std::string& dialogue_id = "") {
  const auto start = std::chrono::steady_clock::now();
  TurnResult result;
  result.turn_id = turn.turn_id;
  result.dialogue_id = dialogue_id;
  result.order = turn.order;
  result.decode = config.decode;
  result.input = build_model_input(doc, history);

  std::optional<CanonicalAnswer> answer;
  std::optional<bool> flag;
  if (config.decode == DecodeMode::Greedy) {
    answer = detail::run_greedy(generator, turn.turn_id, result.input, config, result, true);
    if (!answer && !result.samples.empty()) flag = detail::stated_flag(result.samples.front().text, config.task);
  } else {
    try {
      auto response = detail::checked_generate(
          generator, detail::make_request(turn.turn_id, result.input, GenerationMode::Sample, config));
      result.samples = response.outputs;
      result.vote = consensus_vote(detail::to_sample_set(response.outputs), config.task, config.eval);
      answer = result.vote->winner;
    } catch (const ContractViolation& e) {
      result.notes.push_back(std::string("sample contract violation: ") + e.what());
    } catch (const AllSamplesDiscarded&) {
      result.notes.push_back("all samples discarded");
    }
    if (!result.vote) {
      result.fallback = true;
      answer = detail::run_greedy(generator, turn.turn_id, result.input, config, result, false);
    }
  }

  result.answer = answer;
  result.response = response_text(answer);
  result.record = make_record(turn.turn_id, answer, turn.gold);
  if (!answer && flag) result.record.clarification_pred = *flag;
  result.scores = score_record(result.record, config.eval);
  result.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return result;
}

inline nlohmann::ordered_json turn_to_json(const TurnResult& r) {
  using J = nlohmann::ordered_json;
  J j;
  j["turn_id"] = r.turn_id;
  j["dialogue_id"] = r.dialogue_id;
  j["order"] = r.order;
  j["decode"] = to_string(r.decode);
  j["input"] = r.input;
  J samples = J::array();
  for (const auto& s : r.samples) {
    J o{{"text", s.text}};
    if (s.score) o["score"] = *s.score;
    if (!s.scale.empty()) o["scale"] = s.scale;
    samples.push_back(std::move(o));
  }
  j["outputs"] = std::move(samples);
  j["vote"] = r.vote ? vote_to_json(*r.vote) : J(nullptr);
  if (!r.greedy) j["greedy"] = nullptr;
  else if (const auto* a = std::get_if<CanonicalAnswer>(&*r.greedy)) j["greedy"] = answer_to_json(*a);
  else j["greedy"] = J{{"discarded", std::get<Discard>(*r.greedy).reason}};
  j["fallback"] = r.fallback;
  j["notes"] = r.notes;
  j["response"] = r.response;
  j["clarification_pred"] = r.record.clarification_pred;
  j["clarification_gold"] = r.record.clarification_gold;
  j["gold"] = {{"answer_type", to_string(r.record.gold.answer_type)},
               {"answer_from", to_string(r.record.gold.source)},
               {"answer", r.record.gold.answers},
               {"scale", r.record.gold.scale},
               {"clari_question", r.record.gold.clarification_question}};
  j["scores"] = {{"em", r.scores.exact_match}, {"f1", r.scores.f1},
                 {"rouge2_f1", r.scores.rouge2 ? J(*r.scores.rouge2) : J(nullptr)}};
  return j;
}

struct EvalResult {
  MetricReport report;
  std::vector<TurnResult> turns;  // corpus order
};

namespace detail {

// Removes reserved markers so a predicted response can sit in a history.
inline std::string history_safe(std::string text) {
  for (auto marker : kReservedMarkers) replace_all(text, marker, " ");
  return normalize_whitespace(text);
}

// Runs jobs [0, n) on up to `width` threads. Stops handing out new jobs
// after the first exception, waits for running ones, then rethrows it.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t width, Fn fn) {
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (!failed) {
      const std::size_t i = next++;
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(width, n));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

// Evaluates every turn of the corpus. Gold-history mode runs turns
// independently; predicted-history mode runs each dialogue in order and
// feeds each final response into the next turn's history. The per-turn
// log (one JSON line per completed turn, corpus order) is written to `log`
// even when a TransportError aborts the run.
inline EvalResult run_eval(const Corpus& corpus, Generator& generator, const RunConfig& config,
                           std::ostream* log = nullptr) {
  config.validate();
  struct Slot {
    const Dialogue* dialogue;
    std::size_t index;
  };
  std::vector<Slot> slots;
  std::vector<std::size_t> dialogue_start;
  for (const auto& d : corpus.dialogues) {
    dialogue_start.push_back(slots.size());
    for (std::size_t i = 0; i < d.turns.size(); ++i) slots.push_back({&d, i});
  }
  std::vector<std::optional<TurnResult>> results(slots.size());

  auto run_slot = [&](std::size_t s, const std::vector<std::string>& responses) {
    const auto& d = *slots[s].dialogue;
    const std::size_t i = slots[s].index;
    std::vector<std::string> history;
    for (std::size_t k = 0; k < i; ++k) {
      history.push_back(d.turns[k].question);
      history.push_back(responses[k]);
    }
    history.push_back(d.turns[i].question);
    results[s] = run_turn(generator, corpus.documents.at(d.doc_uid), make_history(history), d.turns[i], config, d.id);
  };

  std::exception_ptr error;
  try {
    if (config.history == HistoryMode::Gold) {
      std::vector<std::vector<std::string>> gold(corpus.dialogues.size());
      for (std::size_t k = 0; k < corpus.dialogues.size(); ++k) gold[k] = gold_responses(corpus.dialogues[k]);
      std::map<const Dialogue*, std::size_t> index_of;
      for (std::size_t k = 0; k < corpus.dialogues.size(); ++k) index_of[&corpus.dialogues[k]] = k;
      detail::parallel_for(slots.size(), config.concurrency,
                           [&](std::size_t s) { run_slot(s, gold[index_of[slots[s].dialogue]]); });
    } else {
      detail::parallel_for(corpus.dialogues.size(), config.concurrency, [&](std::size_t k) {
        std::vector<std::string> responses;
        for (std::size_t i = 0; i < corpus.dialogues[k].turns.size(); ++i) {
          run_slot(dialogue_start[k] + i, responses);
          responses.push_back(detail::history_safe(results[dialogue_start[k] + i]->response));
        }
      });
    }
  } catch (...) {
    error = std::current_exception();
  }

  EvalResult out;
  for (auto& r : results) {
    if (!r) continue;
    if (log) *log << turn_to_json(*r).dump() << "\n";
    out.turns.push_back(std::move(*r));
  }
  if (log) log->flush();
  if (error) std::rethrow_exception(error);

  std::vector<PredictionRecord> records;
  for (const auto& t : out.turns) records.push_back(t.record);
  out.report = aggregate_report(records, config.eval);
  return out;
}

// ---------------------------------------------------------------------------
// Offline scoring

struct ScoreResult {
  MetricReport report;
  std::vector<PredictionRecord> records;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::optional<CanonicalAnswer> answer_from_split(bool clarification, const std::string& response,
                                                        const std::string& scale, const EvalConfig& config) {
  try {
    std::optional<CanonicalAnswer> a;
    if (clarification) {
      std::string question = response;
      try {
        const auto r = execute_source(response, config);
        if (const auto* list = std::get_if<SpanListValue>(&r.value); list && list->items.size() == 1)
          question = list->items.front();
      } catch (const DerivationError&) {
      }
      a = make_clarify_answer(normalize_whitespace(question));
    } else {
      a = answer_from_execution(execute_source(response, config), config);
    }
    a->scale = scale;
    return a;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace detail

// Scores a predictions JSONL stream against the corpus. Each line is
// {"turn_id", "text"} with a raw decoded output, or {"turn_id",
// "clarification", "response"} with the flag and payload already split;
// "scale" is optional in both. Lines that cannot be read are skipped with a
// warning; a readable line whose output fails to execute scores 0.
inline ScoreResult score_predictions(std::istream& in, const Corpus& corpus, const RunConfig& config) {
  std::map<std::string, const DialogueTurn*> turns;
  for (const auto& d : corpus.dialogues)
    for (const auto& t : d.turns) turns[t.turn_id] = &t;

  ScoreResult out;
  std::map<std::string, PredictionRecord> by_id;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      out.warnings.push_back(where + ": not valid JSON, skipped");
      continue;
    }
    if (!j.is_object() || !j.contains("turn_id") || !j["turn_id"].is_string()) {
      out.warnings.push_back(where + ": missing string turn_id, skipped");
      continue;
    }
    const std::string id = j["turn_id"];
    const auto found = turns.find(id);
    if (found == turns.end()) throw UnknownTurnId(id);
    if (by_id.count(id)) {
      out.warnings.push_back(where + ": duplicate prediction for " + id + ", kept the first");
      continue;
    }
    std::string scale;
    if (j.contains("scale") && j["scale"].is_string()) scale = j["scale"];

    std::optional<CanonicalAnswer> answer;
    std::optional<bool> flag;
    if (j.contains("text") && j["text"].is_string()) {
      const std::string text = j["text"];
      const auto c = canonicalize({text, std::nullopt, 0, scale}, config.task, config.eval);
      if (const auto* a = std::get_if<CanonicalAnswer>(&c)) answer = *a;
      else flag = detail::stated_flag(text, config.task);
    } else if (j.contains("clarification") && j["clarification"].is_boolean() && j.contains("response") &&
               j["response"].is_string()) {
      flag = j["clarification"].get<bool>();
      if (config.task == Task::CNP) answer = make_flag_answer(*flag);
      else answer = detail::answer_from_split(*flag, j["response"], scale, config.eval);
    } else {
      out.warnings.push_back(where + ": needs \"text\" or \"clarification\" + \"response\"; scored 0");
    }
    auto record = make_record(id, answer, found->second->gold);
    if (!answer && flag) record.clarification_pred = *flag;
    by_id.emplace(id, std::move(record));
  }
  // Corpus order.
  for (const auto& d : corpus.dialogues)
    for (const auto& t : d.turns)
      if (auto it = by_id.find(t.turn_id); it != by_id.end()) out.records.push_back(it->second);
  if (out.records.size() < turns.size())
    out.warnings.push_back(std::to_string(turns.size() - out.records.size()) + " corpus turns have no prediction");
  out.report = aggregate_report(out.records, config.eval);
  return out;
}

inline ScoreResult score_predictions(const std::string& path, const Corpus& corpus, const RunConfig& config) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path, "cannot open predictions file");
  return score_predictions(in, corpus, config);
}

}  // namespace pcqa
