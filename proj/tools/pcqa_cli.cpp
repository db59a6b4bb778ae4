// pcqa: command-line front end.
//
// Exit codes: 0 ok, 1 input error, 2 schema error, 3 transport error.

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pcqa/corpus.hpp"
#include "pcqa/derivation.hpp"
#include "pcqa/http_generator.hpp"
#include "pcqa/metrics.hpp"
#include "pcqa/orchestrator.hpp"

namespace {

using namespace pcqa;

enum ExitCode { kOk = 0, kInputError = 1, kSchemaError = 2, kTransportError = 3 };

struct Options {
  std::vector<std::string> corpus_paths;
  std::string corpus_path;
  std::string expected_path;
  std::string expression;
  std::string dialogue_id;
  int turn = 1;
  std::string predictions_path;
  std::string endpoint;
  std::string fixture_path;
  std::string log_path;
  std::string out_path;
  std::string report = "text";
  std::string mode = "cv";
  std::string history = "gold";
  std::string task = "multi";
  int precision = 4;
  int num_samples = 40;
  int top_k = 40;
  double temperature = 0.5;
  int max_target_length = 128;
  std::size_t concurrency = 8;
};

Task task_from(const std::string& name) {
  if (name == "multi") return Task::MultiTask;
  if (name == "cnp") return Task::CNP;
  if (name == "cqg") return Task::CQG;
  return Task::CQA;
}

RunConfig run_config(const Options& o) {
  RunConfig c;
  c.decode = o.mode == "greedy" ? DecodeMode::Greedy : DecodeMode::ConsensusVoting;
  c.history = o.history == "predicted" ? HistoryMode::Predicted : HistoryMode::Gold;
  c.task = task_from(o.task);
  c.eval.render_precision = o.precision;
  c.num_samples = o.num_samples;
  c.top_k = o.top_k;
  c.temperature = o.temperature;
  c.max_target_length = o.max_target_length;
  c.concurrency = o.concurrency;
  c.validate();
  return c;
}

void write_json_file(const std::string& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

void emit_report(const Options& o, const std::string& text, const nlohmann::ordered_json& json) {
  if (o.report == "text" || o.report == "both") std::cout << text;
  if (o.report == "json" || o.report == "both") std::cout << json.dump(2) << "\n";
  if (!o.out_path.empty()) write_json_file(o.out_path, json);
}

std::string stats_to_text(const CorpusStats& s) {
  const auto j = stats_to_json(s);
  std::ostringstream out;
  out << "Dialogues                 " << s.dialogues << "\n"
      << "Turns                     " << s.turns << "\n"
      << "Clarifying turns          " << s.clarifying_turns << "\n"
      << "Avg. turns / dialogue     " << j["mean_turns_per_dialogue"].get<std::string>() << "\n"
      << "Avg. words / question     " << j["mean_words_per_question"].get<std::string>() << "\n"
      << "Avg. words / answer       " << j["mean_words_per_answer"].get<std::string>() << "\n\n";
  out << std::left << std::setw(12) << "";
  for (auto src : kAnswerSources) out << std::right << std::setw(12) << display_label(src);
  out << std::right << std::setw(12) << "Total" << "\n";
  for (auto t : kAnswerTypes) {
    out << std::left << std::setw(12) << display_label(t);
    for (auto src : kAnswerSources) out << std::right << std::setw(12) << s.grid[std::size_t(t)][std::size_t(src)];
    out << std::right << std::setw(12) << s.type_total(t) << "\n";
  }
  out << std::left << std::setw(12) << "Total";
  for (auto src : kAnswerSources) out << std::right << std::setw(12) << s.source_total(src);
  out << std::right << std::setw(12) << s.turns << "\n";
  return out.str();
}

int cmd_validate(const Options& o) {
  const EvalConfig config = run_config(o).eval;
  std::optional<CorpusStats> merged;
  std::vector<Finding> findings;
  std::size_t arithmetic = 0, validated = 0;
  for (const auto& path : o.corpus_paths) {
    const auto report = validate_corpus(load_corpus(path), std::nullopt, config);
    merged = merged ? merge_stats(*merged, report.stats) : report.stats;
    findings.insert(findings.end(), report.findings.begin(), report.findings.end());
    arithmetic += report.arithmetic_turns;
    validated += report.arithmetic_validated;
  }
  if (!o.expected_path.empty()) {
    const auto diffs = diff_stats(*merged, load_expected_stats(o.expected_path));
    findings.insert(findings.end(), diffs.begin(), diffs.end());
  }
  nlohmann::ordered_json j;
  j["stats"] = stats_to_json(*merged);
  j["arithmetic_turns"] = arithmetic;
  j["arithmetic_validated"] = validated;
  j["findings"] = nlohmann::ordered_json::array();
  for (const auto& f : findings) j["findings"].push_back({{"kind", f.kind}, {"where", f.where}, {"detail", f.detail}});

  std::ostringstream text;
  text << stats_to_text(*merged) << "\nArithmetic derivations validated: " << validated << " / " << arithmetic << "\n";
  text << "Findings: " << findings.size() << "\n";
  for (const auto& f : findings) text << "  " << f.kind << " " << f.where << ": " << f.detail << "\n";
  emit_report(o, text.str(), j);
  return findings.empty() ? kOk : kInputError;
}

int cmd_eval_derivation(const Options& o) {
  EvalConfig config;
  config.render_precision = o.precision;
  const auto result = execute_source(o.expression, config);
  std::cout << display(result) << "\n";
  return kOk;
}

int cmd_linearize(const Options& o) {
  const auto corpus = load_corpus(o.corpus_path);
  const auto* d = find_dialogue(corpus, o.dialogue_id);
  if (!d) {
    std::cerr << "error: unknown dialogue id '" << o.dialogue_id << "'\n";
    return kInputError;
  }
  if (o.turn < 1 || static_cast<std::size_t>(o.turn) > d->turns.size()) {
    std::cerr << "error: dialogue " << d->id << " has turns 1.." << d->turns.size() << "\n";
    return kInputError;
  }
  std::cout << turn_input(corpus.documents.at(d->doc_uid), *d, static_cast<std::size_t>(o.turn - 1), gold_responses(*d))
            << "\n";
  return kOk;
}

int cmd_score(const Options& o) {
  const auto config = run_config(o);
  const auto corpus = load_corpus(o.corpus_path);
  const auto result = score_predictions(o.predictions_path, corpus, config);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  emit_report(o, report_to_text(result.report), report_to_json(result.report));
  return kOk;
}

int cmd_run(const Options& o) {
  const auto config = run_config(o);
  const auto corpus = load_corpus(o.corpus_path);
  std::unique_ptr<Generator> generator;
  if (!o.fixture_path.empty()) generator = std::make_unique<ReplayGenerator>(ReplayGenerator::from_file(o.fixture_path));
  else generator = std::make_unique<HttpGenerator>(o.endpoint);
  std::cerr << "note: inputs are sent untruncated; the service applies its own source length limit\n";

  std::ofstream log;
  if (!o.log_path.empty()) {
    log.open(o.log_path);
    if (!log) throw std::runtime_error("cannot write " + o.log_path);
  }
  const auto result = run_eval(corpus, *generator, config, log.is_open() ? &log : nullptr);
  emit_report(o, report_to_text(result.report), report_to_json(result.report));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Proactive conversational QA toolkit: derivations, linearization, voting and evaluation"};
  app.require_subcommand(1);

  auto report_option = [&](CLI::App* cmd) {
    cmd->add_option("--report", o.report, "Report format")->check(CLI::IsMember({"text", "json", "both"}));
    cmd->add_option("--out", o.out_path, "Also write the JSON report to this file");
  };
  auto precision_option = [&](CLI::App* cmd) {
    cmd->add_option("--precision", o.precision, "Decimal places for rendered numbers")->check(CLI::Range(0, 10));
  };
  auto task_option = [&](CLI::App* cmd) {
    cmd->add_option("--task", o.task, "Output format of the model")->check(CLI::IsMember({"multi", "cnp", "cqg", "cqa"}));
  };

  auto* validate = app.add_subcommand("validate", "Check a corpus and print its statistics");
  validate->add_option("corpus", o.corpus_paths, "Corpus JSON file(s); statistics are pooled")->required();
  validate->add_option("--expected", o.expected_path, "Expected statistics JSON");
  precision_option(validate);
  report_option(validate);

  auto* eval = app.add_subcommand("eval-derivation", "Execute one derivation and print its value");
  eval->add_option("expression", o.expression, "Derivation source, e.g. \"(36.6-20.5)/20.5\"")->required();
  precision_option(eval);

  auto* linearize = app.add_subcommand("linearize", "Print the model input for one turn (gold history)");
  linearize->add_option("corpus", o.corpus_path, "Corpus JSON file")->required();
  linearize->add_option("dialogue", o.dialogue_id, "Dialogue id")->required();
  linearize->add_option("turn", o.turn, "Turn number, starting at 1")->required();

  auto* score = app.add_subcommand("score", "Score a predictions JSONL file");
  score->add_option("predictions", o.predictions_path, "Predictions JSONL")->required();
  score->add_option("corpus", o.corpus_path, "Corpus JSON file")->required();
  precision_option(score);
  task_option(score);
  report_option(score);

  auto* run = app.add_subcommand("run", "Evaluate against a generation service or replay fixture");
  run->add_option("corpus", o.corpus_path, "Corpus JSON file")->required();
  auto* endpoint = run->add_option("--endpoint", o.endpoint, "Generation service URL, e.g. http://localhost:8080");
  auto* fixture = run->add_option("--fixture", o.fixture_path, "Replay fixture JSONL");
  endpoint->excludes(fixture);
  run->add_option("--mode", o.mode, "Decoding: greedy or consensus voting")->check(CLI::IsMember({"greedy", "cv"}));
  run->add_option("--history", o.history, "Conversation history source")->check(CLI::IsMember({"gold", "predicted"}));
  run->add_option("--num-samples", o.num_samples, "Samples per turn in cv mode")->check(CLI::PositiveNumber);
  run->add_option("--top-k", o.top_k, "Top-k sampling cutoff")->check(CLI::PositiveNumber);
  run->add_option("--temperature", o.temperature, "Sampling temperature")->check(CLI::PositiveNumber);
  run->add_option("--max-target-length", o.max_target_length, "Maximum decoded length")->check(CLI::PositiveNumber);
  run->add_option("--concurrency", o.concurrency, "In-flight generation requests")->check(CLI::PositiveNumber);
  run->add_option("--log", o.log_path, "Per-turn JSONL log");
  precision_option(run);
  task_option(run);
  report_option(run);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }
  if (run->parsed() && o.endpoint.empty() && o.fixture_path.empty()) {
    std::cerr << "error: run needs --endpoint or --fixture\n";
    return kInputError;
  }

  try {
    if (validate->parsed()) return cmd_validate(o);
    if (eval->parsed()) return cmd_eval_derivation(o);
    if (linearize->parsed()) return cmd_linearize(o);
    if (score->parsed()) return cmd_score(o);
    if (run->parsed()) return cmd_run(o);
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kSchemaError;
  } catch (const InvariantViolation& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kSchemaError;
  } catch (const TransportError& e) {
    std::cerr << "transport error: " << e.what() << "\n";
    return kTransportError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}
