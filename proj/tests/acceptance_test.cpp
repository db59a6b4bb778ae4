// Acceptance suite: one PASS/FAIL line per criterion.
//
// Set PACIFIC_DATA_DIR to a directory holding the public release split files
// (names containing "train", "dev" and "test") to check the dataset figures;
// otherwise the checked-in synthetic fixture is used.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "oracle_replay.hpp"
#include "oracles/gmp_expression_oracle.hpp"
#include "pcqa/corpus.hpp"
#include "pcqa/derivation.hpp"
#include "pcqa/metrics.hpp"
#include "pcqa/orchestrator.hpp"
#include "pcqa/voting.hpp"
#include "test_util.hpp"

namespace {

using namespace pcqa;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects failures; the first few are kept for the report line.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (failures_ <= 3) messages_ += (messages_.empty() ? "" : "; ") + what;
  }
  Outcome outcome(std::string detail) const {
    if (failures_ == 0) return {true, std::move(detail)};
    return {false, std::to_string(failures_) + " failure(s): " + messages_};
  }

 private:
  int failures_ = 0;
  std::string messages_;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fixed(double v, int digits) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(digits);
  out << v;
  return out.str();
}

std::string scientific(double v) {
  std::ostringstream out;
  out.setf(std::ios::scientific);
  out.precision(1);
  out << v;
  return out.str();
}

const char* kMulti = "[clari.] False [resp.] ";

SampleSet replay_samples(const std::string& turn_id, const std::string& mode) {
  std::istringstream in(testing::read_file(testing::data_path("case_study_replay.jsonl")));
  std::string line;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    if (j["turn_id"] != turn_id || j["mode"] != mode) continue;
    std::vector<std::string> raws;
    for (const auto& o : j["outputs"]) raws.push_back(o["text"]);
    return make_sample_set(raws);
  }
  throw std::runtime_error("no replay row for " + turn_id);
}

std::vector<std::size_t> votes_of(const VoteResult& r) {
  std::vector<std::size_t> v;
  for (const auto& t : r.tallies) v.push_back(t.votes);
  return v;
}

Outcome derivation_oracle() {
  Check c;
  oracle::ExpressionFuzzer fuzzer(1729);
  int compared = 0, zero_divisions = 0;
  const auto start = Clock::now();
  for (int i = 0; i < 10000; ++i) {
    const auto expected = fuzzer.generate(4);
    try {
      const auto result = execute_source(expected.source);
      const auto& numeric = std::get<NumericValue>(result.value);
      c.expect(expected.value && to_fraction_string(numeric.exact) == oracle::fraction_string(*expected.value),
               expected.source);
      ++compared;
    } catch (const DerivationError& e) {
      c.expect(!expected.value && e.kind() == DerivationErrorKind::DivisionByZero, expected.source + ": " + e.what());
      ++zero_divisions;
    }
  }
  const double elapsed = seconds_since(start);
  c.expect(elapsed < 5.0, "took " + fixed(elapsed, 2) + " s");
  return c.outcome("10000 expressions (" + std::to_string(compared) + " valued, " + std::to_string(zero_divisions) +
                   " division by zero) agree exactly in " + fixed(elapsed, 2) + " s");
}

Outcome execution_examples() {
  Check c;
  c.expect(display(execute_source("(36.6-20.5)/20.5")) == "0.7854", "(36.6-20.5)/20.5");
  const auto count = execute_source("len([\"2018\",\"2019\"])");
  c.expect(std::holds_alternative<CountValue>(count.value) && std::get<CountValue>(count.value).count == 2,
           "len([\"2018\",\"2019\"])");
  const auto vote = consensus_vote(make_sample_set({std::string(kMulti) + "(88-105)/105", std::string(kMulti) + "88/105-1"}),
                                   Task::MultiTask);
  c.expect(votes_of(vote) == std::vector<std::size_t>{2}, "(88-105)/105 and 88/105-1 split into separate groups");
  return c.outcome("0.7854, 2, and one group for (88-105)/105 | 88/105-1");
}

Outcome case_studies() {
  Check c;
  const auto one = consensus_vote(replay_samples("case1-t2", "sample"), Task::MultiTask);
  c.expect(votes_of(one) == std::vector<std::size_t>{24, 12, 4}, "case 1 tallies");
  bool both_orders = false, other_order = false;
  for (auto i : one.tallies.front().members) {
    const auto& raw = replay_samples("case1-t2", "sample")[i].raw;
    both_orders |= raw.ends_with("(1.06+0.91+4.04)/3");
    other_order |= raw.ends_with("(1.06+4.04+0.91)/3");
  }
  c.expect(both_orders && other_order, "case 1 winning group lacks an operand order");
  c.expect(one.winner.rendered == "2.0033", "case 1 winner " + one.winner.rendered);

  const auto two = consensus_vote(replay_samples("case2-t2", "sample"), Task::MultiTask);
  c.expect(votes_of(two) == std::vector<std::size_t>{22, 10, 4, 2}, "case 2 tallies");
  c.expect(two.winner.kind == AnswerKind::Clarify && two.winner.question == "Which period are you asking about?",
           "case 2 winner " + two.winner.rendered);

  const auto g1 = greedy_select(replay_samples("case1-t2", "greedy"), Task::MultiTask);
  const auto* a1 = std::get_if<CanonicalAnswer>(&g1);
  c.expect(a1 && a1->number == Rational(598, 300) && a1->rendered == "1.9933", "case 1 greedy row");
  const auto g2 = greedy_select(replay_samples("case2-t2", "greedy"), Task::MultiTask);
  const auto* a2 = std::get_if<CanonicalAnswer>(&g2);
  c.expect(a2 && a2->kind == AnswerKind::Numeric && a2->rendered == "0" && !a2->needs_clarification(),
           "case 2 greedy row");
  return c.outcome("tallies 24/12/4 and 22/10/4/2 (2 discarded); greedy rows 1.9933 and 0");
}

std::vector<std::string> release_files(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.path().extension() == ".json" && split_from_path(entry.path().string())) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

void expect_no_findings(Check& c, const std::vector<Finding>& findings, const std::string& label) {
  for (const auto& f : findings) c.expect(false, label + " " + f.where + ": " + f.detail);
}

Outcome corpus_validation(const char* release_dir) {
  Check c;
  if (!release_dir) {
    const auto stats = corpus_stats(load_corpus(testing::data_path("synthetic_corpus.json")));
    expect_no_findings(c, diff_stats(stats, load_expected_stats(testing::data_path("synthetic_expected_stats.json"))),
                       "synthetic");
    return c.outcome("synthetic fixture (PACIFIC_DATA_DIR unset): " + std::to_string(stats.dialogues) + " dialogues, " +
                     std::to_string(stats.turns) + " turns, " + std::to_string(stats.clarifying_turns) +
                     " clarifying, grid exact");
  }
  std::optional<CorpusStats> merged;
  int splits = 0;
  for (const auto& path : release_files(release_dir)) {
    const auto corpus = load_corpus(path);
    const auto stats = corpus_stats(corpus);
    const std::string name = to_string(corpus.split);
    expect_no_findings(c, diff_stats(stats, load_expected_stats(testing::data_path("release_expected_" + name + ".json"))),
                       name);
    merged = merged ? merge_stats(*merged, stats) : stats;
    ++splits;
  }
  c.expect(splits == 3, "expected train, dev and test files, found " + std::to_string(splits));
  if (merged)
    expect_no_findings(c, diff_stats(*merged, load_expected_stats(testing::data_path("release_expected_full.json"))),
                       "full");
  return c.outcome("release splits match 2,201/278/278 dialogues, 15,087/1,982/1,939 turns, 1,872/320/270 clarifying; "
                   "full grid 19,008 turns");
}

Outcome reconstruction_soundness(const char* release_dir) {
  std::vector<std::string> paths;
  if (release_dir) paths = release_files(release_dir);
  else paths = {testing::data_path("synthetic_corpus.json")};
  Check c;
  std::size_t total = 0, validated = 0;
  std::vector<std::string> mismatches;
  for (const auto& path : paths) {
    const auto report = validate_corpus(load_corpus(path));
    total += report.arithmetic_turns;
    validated += report.arithmetic_validated;
    for (const auto& f : report.findings)
      if (f.kind != "StatMismatch") mismatches.push_back(f.where + " (" + f.kind + ")");
  }
  const double rate = total ? double(validated) / double(total) : 0.0;
  c.expect(total > 0, "no arithmetic turns");
  c.expect(rate >= 0.99, "rate " + fixed(rate * 100, 2) + "%");
  std::string listed;
  for (std::size_t i = 0; i < mismatches.size() && i < 10; ++i) listed += (i ? ", " : "") + mismatches[i];
  return c.outcome(std::to_string(validated) + " / " + std::to_string(total) + " arithmetic turns validate (" +
                   fixed(rate * 100, 2) + "%)" + (mismatches.empty() ? "" : "; mismatches: " + listed));
}

Outcome metric_oracle() {
  Check c;
  const auto rows = nlohmann::json::parse(testing::read_file(testing::data_path("numeracy_f1_fixture.json")));
  c.expect(rows.size() == 50, "fixture has " + std::to_string(rows.size()) + " pairs");
  double worst = 0;
  for (const auto& row : rows) {
    const auto scores = drop::get_metrics(row["pred"].get<std::vector<std::string>>(),
                                          row["gold"].get<std::vector<std::string>>());
    const double diff = std::abs(scores.f1 - row["f1"].get<double>());
    worst = std::max(worst, diff);
    c.expect(diff <= 1e-6, "pair " + row["pred"].dump());
  }
  const double rouge = rouge2_f1("which year are you asking about", "which period are you asking about");
  c.expect(std::abs(rouge - 0.6) < 1e-12, "ROUGE-2 " + std::to_string(rouge));
  const auto prf = classification_prf({true, true, false, false}, {true, false, true, false});
  c.expect(prf.precision == 0.5 && prf.recall == 0.5 && prf.f1 == 0.5, "CNP P/R/F1");
  return c.outcome("50 pairs within 1e-6 (max diff " + scientific(worst) + "); ROUGE-2 0.6; P/R/F1 0.5/0.5/0.5");
}

// Copies of the synthetic fixture with fresh ids, cut to exactly `turns` turns.
Corpus scaled_corpus(std::size_t turns) {
  const auto base = OrderedJson::parse(testing::read_file(testing::data_path("synthetic_corpus.json")));
  OrderedJson out = OrderedJson::array();
  std::size_t count = 0;
  for (int copy = 0; count < turns; ++copy) {
    for (auto item : base) {
      const std::size_t n = item["questions"].size();
      if (count + n > turns) continue;
      const std::string prefix = "c" + std::to_string(copy) + "-";
      item["table"]["uid"] = prefix + item["table"]["uid"].get<std::string>();
      for (auto& q : item["questions"]) q["uid"] = prefix + q["uid"].get<std::string>();
      out.push_back(std::move(item));
      count += n;
    }
    if (copy > 1000) break;
  }
  return parse_corpus(out);
}

Outcome throughput() {
  Check c;
  const auto corpus = scaled_corpus(1939);
  std::ostringstream preds;
  std::size_t turns = 0;
  for (const auto& d : corpus.dialogues)
    for (const auto& t : d.turns) {
      preds << nlohmann::json{{"turn_id", t.turn_id}, {"text", *turn_target(t, Task::MultiTask)}, {"scale", t.gold.scale}}
                   .dump()
            << "\n";
      ++turns;
    }
  c.expect(turns == 1939, "synthesized " + std::to_string(turns) + " turns");
  std::istringstream in(preds.str());
  auto start = Clock::now();
  const auto scored = score_predictions(in, corpus, RunConfig{});
  const double score_seconds = seconds_since(start);
  c.expect(scored.report.turns == 1939, "scored " + std::to_string(scored.report.turns) + " turns");
  c.expect(score_seconds < 10.0, "scoring took " + fixed(score_seconds, 3) + " s");

  const auto samples = replay_samples("case1-t2", "sample");
  constexpr int kRounds = 200;
  start = Clock::now();
  std::size_t sink = 0;
  for (int i = 0; i < kRounds; ++i) sink += consensus_vote(samples, Task::MultiTask).tallies.size();
  const double per_turn_ms = seconds_since(start) * 1000.0 / kRounds;
  c.expect(sink == 3u * kRounds, "unexpected tallies");
  c.expect(per_turn_ms < 5.0, "vote took " + fixed(per_turn_ms, 3) + " ms");
  return c.outcome("score_predictions 1,939 turns in " + fixed(score_seconds, 3) + " s; consensus_vote N=40 in " +
                   fixed(per_turn_ms, 3) + " ms per turn");
}

Outcome oracle_replay_property() {
  Check c;
  const auto corpus = load_corpus(testing::data_path("synthetic_corpus.json"));
  std::vector<std::string> ids;
  for (const auto& d : corpus.dialogues)
    for (const auto& t : d.turns) ids.push_back(t.turn_id);
  const double n = static_cast<double>(ids.size());

  for (auto decode : {DecodeMode::Greedy, DecodeMode::ConsensusVoting})
    for (auto history : {HistoryMode::Gold, HistoryMode::Predicted}) {
      std::istringstream in(testing::oracle_replay(corpus, 40));
      auto replay = ReplayGenerator::from_stream(in);
      RunConfig config;
      config.decode = decode;
      config.history = history;
      const auto r = run_eval(corpus, replay, config);
      c.expect(r.report.overall.em() == 1.0 && r.report.overall.f1() == 1.0 && r.report.cnp.f1 == 1.0,
               "oracle replay below 1.0");
    }

  for (std::size_t k : {1u, 4u, 13u, 27u}) {
    std::set<std::string> corrupt(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k));
    std::istringstream in(testing::oracle_replay(corpus, 40, corrupt));
    auto replay = ReplayGenerator::from_stream(in);
    RunConfig config;
    config.decode = DecodeMode::ConsensusVoting;
    const auto r = run_eval(corpus, replay, config);
    const double drop = 1.0 - *r.report.overall.em();
    c.expect(std::abs(drop - static_cast<double>(k) / n) < 1e-12,
             "k=" + std::to_string(k) + " lowered EM by " + std::to_string(drop));
  }
  return c.outcome("EM = F1 = CNP F1 = 1.0 in all decode/history modes; corrupting k of 27 turns lowers EM by k/27 "
                   "for k = 1, 4, 13, 27");
}

}  // namespace

int main() {
  const char* release_dir = std::getenv("PACIFIC_DATA_DIR");
  if (release_dir && !*release_dir) release_dir = nullptr;

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"derivation-oracle", derivation_oracle},
      {"execution-examples", execution_examples},
      {"case-study-replay", case_studies},
      {"corpus-validation", [&] { return corpus_validation(release_dir); }},
      {"reconstruction-soundness", [&] { return reconstruction_soundness(release_dir); }},
      {"metric-oracle", metric_oracle},
      {"scoring-throughput", throughput},
      {"oracle-replay-property", oracle_replay_property},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
