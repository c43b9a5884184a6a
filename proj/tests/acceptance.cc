// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "classifier_data.h"
#include "decode_oracle.h"
#include "fixtures.h"
#include "gradient_check.h"
#include "midas/classifier.h"
#include "midas/cli.h"
#include "midas/context.h"
#include "midas/metrics.h"
#include "midas/segmenter.h"
#include "midas/swda.h"
#include "midas/text.h"
#include "segmenter_data.h"
#include "service_storm.h"
#include "swda_rows.h"

using namespace midas;

namespace {

// Limits, in seconds.
constexpr double kPairsLimit = 1.0;
constexpr double kDecodeLimit = 5.0;
constexpr double kGradientLimit = 10.0;
constexpr double kLearnLimit = 60.0;  // CPU time

constexpr double kGradientTolerance = 1e-4;
constexpr double kLearnF1 = 0.95;
constexpr double kTransferSlack = 0.05;
constexpr double kMetricTolerance = 1e-9;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(const std::string& name, double wall_limit, double cpu_limit,
               const std::function<Outcome()>& body) {
  auto wall0 = std::chrono::steady_clock::now();
  std::clock_t cpu0 = std::clock();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  double cpu = static_cast<double>(std::clock() - cpu0) / CLOCKS_PER_SEC;
  std::ostringstream timing;
  timing.precision(3);
  timing << std::fixed << wall << " s wall, " << cpu << " s cpu";
  if (wall_limit > 0 && wall >= wall_limit) {
    o.pass = false;
    timing << ", over the " << wall_limit << " s limit";
  }
  if (cpu_limit > 0 && cpu >= cpu_limit) {
    o.pass = false;
    timing << ", over the " << cpu_limit << " s cpu limit";
  }
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << " (" << timing.str()
            << ")" << std::endl;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

Outcome taxonomy_pairs() {
  const auto& tax = Taxonomy::midas();
  int total = 0, rejected = 0, wrong = 0;
  for (std::size_t i = 0; i < fixtures::kAllTags.size(); ++i) {
    for (std::size_t j = i + 1; j < fixtures::kAllTags.size(); ++j) {
      const auto& a = fixtures::kAllTags[i];
      const auto& b = fixtures::kAllTags[j];
      bool ok = tax.validate({a, b}).ok();
      wrong += ok == fixtures::crosses_exclusive_pair(a, b);
      rejected += !ok;
      ++total;
    }
  }
  return {total == 253 && wrong == 0 && rejected == 13,
          std::to_string(total) + " pairs, " + std::to_string(rejected) + " rejected, " +
              std::to_string(wrong) + " disagreements with the category table"};
}

Outcome decode_oracle() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int agree = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    auto s = fixtures::random_scores(rng);
    double threshold = rng() % 4 == 0 ? static_cast<double>(rng() % 5) / 4.0 : u(rng);
    agree += decode(s, {threshold}).tags() == fixtures::oracle_decode(s, threshold);
  }
  return {agree == n, std::to_string(agree) + "/" + std::to_string(n) + " vectors agree"};
}

Outcome gradient() {
  auto batch = fixtures::cue_examples(5, 3);
  TrainingConfig cfg;
  cfg.encoder.dim = 6;
  cfg.hidden = {5};
  cfg.epochs = 2;
  cfg.batch_size = 2;
  auto model = train(batch, cfg).bundle;
  auto multi = fixtures::check_gradient(model, batch, TrainingMode::multi_label);
  auto single = fixtures::check_gradient(model, fixtures::single_tag_cue_examples(5, 3),
                                         TrainingMode::single_label);
  double worst = std::max(multi.max_relative_error, single.max_relative_error);
  return {worst <= kGradientTolerance,
          "max relative error " + fmt(worst) + " over " + std::to_string(multi.parameters) +
              " parameters, 5-example batch, both losses"};
}

Outcome classifier_learnability() {
  auto data = fixtures::cue_examples(50, 1);
  auto cfg = fixtures::small_config();
  auto result = train(data, cfg);
  double f1 = result.training_scores.f1;
  return {f1 >= kLearnF1 && cfg.epochs <= 30,
          "sample F1 " + fmt(f1) + " on 50 examples after " + std::to_string(cfg.epochs) +
              " epochs"};
}

Outcome segmenter_learnability() {
  auto corpus = fixtures::cue_corpus(200, 3);
  auto result = train_segmenter(corpus, SegmenterConfig{});
  double held_out = evaluate_segmenter(result.model, fixtures::cue_corpus(50, 99)).f1;
  double f1 = result.training_scores.f1;
  return {f1 >= kLearnF1 && held_out >= kLearnF1,
          "boundary F1 " + fmt(f1) + " (training), " + fmt(held_out) + " (held out)"};
}

Outcome transfer() {
  auto pre = fixtures::single_tag_cue_examples(60, 21);
  auto target = fixtures::cue_examples(50, 1);
  TransferConfig cfg{fixtures::small_config(), fixtures::small_config()};
  auto result = transfer_pipeline(pre, target, cfg);
  auto scratch = train(target, cfg.finetune);
  double staged = result.stages.back().training_scores.f1;
  double base = scratch.training_scores.f1;
  bool ok = result.stages.size() == 2 && result.bundle.config().mode == TrainingMode::multi_label &&
            staged >= base - kTransferSlack;
  return {ok, "stage-2 F1 " + fmt(staged) + " vs from-scratch " + fmt(base)};
}

Outcome context_golden() {
  std::istringstream in(fixtures::kTable1Tsv);
  auto conv = ingest_turns(in, "table1.tsv").at(0);
  const auto& tax = Taxonomy::midas();
  int wrong = 0;
  auto expect = [&](const std::string& got, const std::string& want) { wrong += got != want; };
  expect(build_context(conv, "t1-t5-u1", ContextMode::text),
         "what book do you like <u_p> i haven't read a book in a while <u_c> "
         "do you have recommendations in the sci fi");
  expect(build_context(conv, "t1-t1-u0", ContextMode::text),
         "what do you want to talk about <u_p> <empty> <u_c> "
         "what can you tell me what the top books are right now");
  SegmentLabels known = {{"t1-t4-u3", tax.make_label_set({"opinion_question"})},
                         {"t1-t5-u0", tax.make_label_set({"negative_answer",
                                                          "statement_non_opinion"})}};
  expect(build_context(conv, "t1-t5-u1", ContextMode::da, known),
         "opinion_question <u_p> negative_answer statement_non_opinion <u_c> "
         "do you have recommendations in the sci fi");
  std::istringstream opener("c\thuman\thello there\n");
  auto human_first = ingest_turns(opener, "opener.tsv").at(0);
  expect(build_context(human_first, "c-t0-u0", ContextMode::text),
         "<empty> <u_p> <empty> <u_c> hello there");
  return {wrong == 0, std::to_string(4 - wrong) + "/4 golden strings byte-exact"};
}

Outcome mapping_fixture() {
  const auto& table = MappingTable::standard();
  int wrong = 0;
  std::size_t codes = 0;
  if (table.rows().size() != fixtures::kPublishedRows.size()) ++wrong;
  for (const auto& [members, expected] : fixtures::kPublishedRows) {
    for (const auto& code : members) {
      ++codes;
      const auto& t = table.map_tag(code);
      if (expected.empty()) {
        auto kind = fixtures::kDropped.count(code) ? MappingTarget::Kind::drop
                                                   : MappingTarget::Kind::unresolved;
        wrong += t.kind != kind;
      } else {
        wrong += t.kind != MappingTarget::Kind::tag || t.tag != expected;
      }
    }
  }
  wrong += table.map_tag("sd").tag != "statement_non_opinion";
  wrong += table.map_tag("b").tag != "back_channeling";
  wrong += table.code_count() != codes;
  return {wrong == 0, std::to_string(fixtures::kPublishedRows.size()) + " rows, " +
                          std::to_string(codes) + " codes, " + std::to_string(wrong) + " mismatches"};
}

Outcome metrics_fixtures() {
  const auto& tax = Taxonomy::midas();
  auto s = sample_prf(tax.make_label_set({"comment", "hold"}), tax.make_label_set({"comment"}));
  double worst = std::max({std::abs(s.precision - 1.0), std::abs(s.recall - 0.5),
                           std::abs(s.f1 - 2.0 / 3.0)});
  std::vector<std::string> x = {"a", "b", "a", "c", "b"};
  double self = cohen_kappa(x, x);
  worst = std::max(worst, std::abs(self - 1.0));
  // 10 segments: 5 thanks / 5 closing against one flip, p_o .9, p_e .5
  std::map<std::string, LabelSet> a, b;
  for (int i = 0; i < 10; ++i) {
    std::string id = "s" + std::to_string(i);
    a.emplace(id, tax.make_label_set({i < 5 ? "thanks" : "closing"}));
    b.emplace(id, tax.make_label_set({i < 5 || i == 9 ? "thanks" : "closing"}));
  }
  double k = cohen_kappa(a, b, KappaMode::exact_set, tax);
  worst = std::max(worst, std::abs(k - 0.8));
  return {worst <= kMetricTolerance, "P/R/F1 " + fmt(s.precision) + "/" + fmt(s.recall) + "/" +
                                         fmt(s.f1) + ", kappa(x,x) " + fmt(self) +
                                         ", 10-segment kappa " + fmt(k) + ", max deviation " +
                                         fmt(worst)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  int differing = 0, checks = 0;
  auto same = [&](const std::string& a, const std::string& b) {
    ++checks;
    differing += a != b;
  };
  auto data = fixtures::cue_examples(30, 2);
  auto cfg = fixtures::small_config();
  cfg.epochs = 5;
  auto m1 = train(data, cfg).bundle;
  auto m2 = train(data, cfg).bundle;
  same(m1.to_json(), m2.to_json());
  std::string p1, p2;
  for (const auto& ex : data) {
    auto s1 = m1.predict_scores(ex.input);
    auto s2 = m2.predict_scores(ex.input);
    p1.append(reinterpret_cast<const char*>(s1.data()), s1.size() * sizeof(double));
    p2.append(reinterpret_cast<const char*>(s2.data()), s2.size() * sizeof(double));
  }
  same(p1, p2);
  TransferConfig tcfg{cfg, cfg};
  auto pre = fixtures::single_tag_cue_examples(20, 4);
  same(transfer_pipeline(pre, data, tcfg).bundle.to_json(),
       transfer_pipeline(pre, data, tcfg).bundle.to_json());

  auto corpus = fixtures::cue_corpus(100, 5);
  auto s1 = train_segmenter(corpus, SegmenterConfig{}).model;
  auto s2 = train_segmenter(corpus, SegmenterConfig{}).model;
  same(s1.to_json(), s2.to_json());
  std::string seg1, seg2;
  for (const auto& ex : corpus) {
    for (const auto& u : s1.segment(join_tokens(ex.tokens))) seg1 += u + "\n";
    for (const auto& u : s2.segment(join_tokens(ex.tokens))) seg2 += u + "\n";
  }
  same(seg1, seg2);

  // Through the command line, into separate files.
  auto dir = std::filesystem::temp_directory_path() / "midas_acceptance_determinism";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  write_examples(data, dir / "ex.jsonl");
  std::ostringstream sink;
  for (const char* run : {"1", "2"}) {
    std::string model = (dir / (std::string("m") + run + ".json")).string();
    std::string pred = (dir / (std::string("p") + run + ".jsonl")).string();
    run_cli({"--seed", "5", "da", "train", "--input", (dir / "ex.jsonl").string(), "--output",
             model, "--epochs", "3", "--dim", "8", "--hidden", "8"},
            sink, sink);
    run_cli({"da", "predict", "--model", model, "--input", (dir / "ex.jsonl").string(),
             "--output", pred, "--scores"},
            sink, sink);
  }
  same(slurp(dir / "m1.json"), slurp(dir / "m2.json"));
  same(slurp(dir / "p1.jsonl"), slurp(dir / "p2.jsonl"));
  if (slurp(dir / "m1.json").empty()) ++differing;
  return {differing == 0,
          std::to_string(checks - differing) + "/" + std::to_string(checks) +
              " artifacts byte-identical (train, predict, transfer, segmenter, CLI)"};
}

Outcome service_storm() {
  auto r = fixtures::run_storm(std::filesystem::temp_directory_path() / "midas_acceptance_storm",
                               1000, 20240);
  bool ok = r.submissions == 1000 && r.http_failures == 0 && r.invalid_persisted == 0 &&
            r.lock_violations == 0 && r.repeat_tasks == 0 && r.verdict_mismatches == 0 &&
            r.persisted == r.accepted && r.replay_matches;
  std::ostringstream d;
  d << r.submissions << " submissions (" << r.accepted << " accepted, " << r.duplicate
    << " duplicate, " << r.rejected << " rejected, " << r.stale << " locked out), "
    << r.invalid_persisted << " invalid persisted, " << r.lock_violations
    << " lock violations, replay " << (r.replay_matches ? "matches" : "differs");
  return {ok, d.str()};
}

}  // namespace

int main() {
  criterion("taxonomy exhaustive pair test", kPairsLimit, 0, taxonomy_pairs);
  criterion("decode oracle equivalence", kDecodeLimit, 0, decode_oracle);
  criterion("gradient check", kGradientLimit, 0, gradient);
  criterion("toy learnability: classifier", 0, kLearnLimit, classifier_learnability);
  criterion("toy learnability: segmenter", 0, kLearnLimit, segmenter_learnability);
  criterion("transfer pipeline", 0, 0, transfer);
  criterion("context golden strings", 0, 0, context_golden);
  criterion("mapping fixture", 0, 0, mapping_fixture);
  criterion("metrics fixtures", 0, 0, metrics_fixtures);
  criterion("determinism", 0, 0, determinism);
  criterion("service storm", 0, 0, service_storm);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
