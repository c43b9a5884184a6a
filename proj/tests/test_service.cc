#include <filesystem>
#include <set>
#include <sstream>

#include "doctest.h"
#include "fixtures.h"
#include "httplib.h"
#include "json.hpp"
#include "midas/http_api.h"
#include "midas/metrics.h"
#include "service_storm.h"

using namespace midas;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const Taxonomy& tax() { return Taxonomy::midas(); }

AnnotatedCorpus table1() {
  std::istringstream in(fixtures::kTable1Tsv);
  AnnotatedCorpus c;
  c.conversations = ingest_turns(in, "table1.tsv");
  return c;
}

const std::vector<std::string> kHumanSegments = {"t1-t1-u0", "t1-t3-u0", "t1-t3-u1", "t1-t5-u0",
                                                 "t1-t5-u1"};

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("midas_service_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct FakeClock {
  std::chrono::system_clock::time_point t =
      std::chrono::system_clock::time_point(std::chrono::seconds(1700000000));
  Clock fn() {
    return [this] { return t; };
  }
};

SubmitResult submit(AnnotationService& s, const std::string& who, const std::string& seg,
                    std::vector<std::string> labels) {
  return s.submit({who, seg, std::move(labels), std::nullopt});
}

}  // namespace

TEST_CASE("tasks come in conversation order and run out") {
  auto dir = fresh_dir("order");
  AnnotationService s(tax(), table1(), dir / "log.jsonl");
  CHECK(s.segment_count() == 5);
  CHECK(s.register_annotator("ann1"));
  CHECK_FALSE(s.register_annotator("ann1"));
  CHECK_THROWS_AS(s.register_annotator("bad id"), UsageError);
  CHECK_THROWS_AS(s.next_task("nobody"), DataError);

  std::vector<std::string> seen;
  while (auto task = s.next_task("ann1")) {
    seen.push_back(task->segment_id);
    CHECK(task->lock.owner == "ann1");
    CHECK(task->speaker == Speaker::human);
    CHECK_FALSE(task->suggestion);
    CHECK(submit(s, "ann1", task->segment_id, {"comment"}).status ==
          SubmitResult::Status::accepted);
  }
  CHECK(seen == kHumanSegments);
  CHECK_FALSE(s.next_task("ann1"));
}

TEST_CASE("a task carries the text context of its segment") {
  auto dir = fresh_dir("context");
  AnnotationService s(tax(), table1(), dir / "log.jsonl");
  s.register_annotator("a");
  s.register_annotator("b");
  REQUIRE(submit(s, "b", "t1-t1-u0", {"opinion_question"}).status ==
          SubmitResult::Status::accepted);
  auto task = s.next_task("a");
  REQUIRE(task);
  CHECK(task->segment_id == "t1-t1-u0");
  CHECK(task->context.sys_unit == "what do you want to talk about");
  CHECK(task->context.user_prev == "<empty>");
  CHECK(task->labels_by_annotator.at("b").tags() == std::vector<std::string>{"opinion_question"});
  CHECK(task->conversation_id == "t1");
}

TEST_CASE("two annotators get disjoint locked tasks") {
  auto dir = fresh_dir("disjoint");
  AnnotationService s(tax(), table1(), dir / "log.jsonl");
  s.register_annotator("a");
  s.register_annotator("b");
  auto ta = s.next_task("a");
  auto tb = s.next_task("b");
  REQUIRE(ta);
  REQUIRE(tb);
  CHECK(ta->segment_id == "t1-t1-u0");
  CHECK(tb->segment_id == "t1-t3-u0");
  auto locks = s.live_locks();
  CHECK(locks.size() == 2);
  CHECK(locks.at(ta->segment_id).owner == "a");
  CHECK(locks.at(tb->segment_id).owner == "b");

  // Asking again moves the caller's single lock.
  auto ta2 = s.next_task("a");
  REQUIRE(ta2);
  CHECK(ta2->segment_id == "t1-t1-u0");
  CHECK(s.live_locks().size() == 2);
}

TEST_CASE("concurrent next_task calls never share a segment") {
  auto dir = fresh_dir("concurrent");
  AnnotatedCorpus corpus;
  corpus.conversations = fixtures::storm_corpus(10);
  AnnotationService s(tax(), corpus, dir / "log.jsonl");
  s.register_annotator("a");
  s.register_annotator("b");
  for (int round = 0; round < 50; ++round) {
    std::optional<AnnotationTask> ta, tb;
    std::thread x([&] { ta = s.next_task("a"); });
    std::thread y([&] { tb = s.next_task("b"); });
    x.join();
    y.join();
    REQUIRE(ta);
    REQUIRE(tb);
    CHECK(ta->segment_id != tb->segment_id);
    if (round % 3 == 0) submit(s, "a", ta->segment_id, {"hold"});
  }
}

TEST_CASE("locks expire and can be reclaimed") {
  auto dir = fresh_dir("expiry");
  FakeClock clock;
  ServiceOptions opts;
  opts.lock_ttl = std::chrono::seconds(600);
  opts.clock = clock.fn();
  AnnotationService s(tax(), table1(), dir / "log.jsonl", nullptr, opts);
  s.register_annotator("a");
  s.register_annotator("b");
  auto ta = s.next_task("a");
  REQUIRE(ta);
  CHECK(ta->lock.expires - clock.t == std::chrono::seconds(600));

  auto r = submit(s, "b", ta->segment_id, {"comment"});
  CHECK(r.status == SubmitResult::Status::stale_lock);
  CHECK(r.lock_owner == "a");

  clock.t += std::chrono::seconds(599);
  CHECK(s.next_task("b")->segment_id != ta->segment_id);
  clock.t += std::chrono::seconds(2);
  CHECK(s.live_locks().count(ta->segment_id) == 0);
  auto tb = s.next_task("b");
  REQUIRE(tb);
  CHECK(tb->segment_id == ta->segment_id);
  CHECK(submit(s, "b", tb->segment_id, {"comment"}).status == SubmitResult::Status::accepted);
  // a's lock is gone, so a may still submit its own labels.
  CHECK(submit(s, "a", ta->segment_id, {"complaint"}).status == SubmitResult::Status::accepted);
}

TEST_CASE("submissions are validated against the scheme") {
  auto dir = fresh_dir("validate");
  AnnotationService s(tax(), table1(), dir / "log.jsonl");
  s.register_annotator("a");
  auto ok = submit(s, "a", "t1-t5-u0", {"general_opinion", "negative_answer"});
  CHECK(ok.status == SubmitResult::Status::accepted);
  CHECK(ok.record->labels.tags() == std::vector<std::string>{"general_opinion", "negative_answer"});

  auto qa = submit(s, "a", "t1-t5-u1", {"factual_question", "positive_answer"});
  CHECK(qa.status == SubmitResult::Status::rejected);
  REQUIRE(qa.validation.violations.size() == 1);
  CHECK(qa.validation.violations[0].rule == Rule::exclusive_categories);

  auto three = submit(s, "a", "t1-t5-u1", {"comment", "hold", "thanks"});
  CHECK(three.status == SubmitResult::Status::rejected);
  CHECK(three.validation.violations[0].rule == Rule::max_two_tags);

  CHECK(submit(s, "a", "t1-t5-u1", {}).status == SubmitResult::Status::rejected);
  CHECK(submit(s, "a", "t1-t5-u1", {"made_up"}).status == SubmitResult::Status::rejected);
  CHECK_THROWS_AS(submit(s, "a", "t1-t0-u0", {"comment"}), DataError);  // machine segment
  CHECK_THROWS_AS(submit(s, "a", "nope", {"comment"}), DataError);
  CHECK_THROWS_AS(submit(s, "ghost", "t1-t5-u1", {"comment"}), DataError);
  CHECK(s.snapshot().records.size() == 1);
}

TEST_CASE("completed text is stored beside the untouched segment") {
  auto dir = fresh_dir("completion");
  AnnotationService s(tax(), table1(), dir / "log.jsonl");
  s.register_annotator("a");
  auto r = s.submit({"a", "t1-t3-u0", {"back_channeling"}, "oh, i see"});
  REQUIRE(r.status == SubmitResult::Status::accepted);
  auto snap = s.snapshot();
  CHECK(snap.records[0].completed_text == "oh, i see");
  CHECK(snap.conversations == table1().conversations);
}

TEST_CASE("resubmitting the same content is idempotent, revisions win") {
  auto dir = fresh_dir("idempotent");
  auto log = dir / "log.jsonl";
  {
    AnnotationService s(tax(), table1(), log);
    s.register_annotator("a");
    CHECK(submit(s, "a", "t1-t1-u0", {"comment"}).status == SubmitResult::Status::accepted);
    CHECK(submit(s, "a", "t1-t1-u0", {"comment"}).status == SubmitResult::Status::duplicate);
    CHECK(submit(s, "a", "t1-t1-u0", {"complaint"}).status == SubmitResult::Status::accepted);
    CHECK(submit(s, "a", "t1-t1-u0", {"comment"}).status == SubmitResult::Status::accepted);
    auto snap = s.snapshot();
    REQUIRE(snap.records.size() == 1);
    CHECK(snap.records[0].labels.tags() == std::vector<std::string>{"comment"});
  }
  auto events = read_annotation_log(log);
  std::size_t annotations = 0;
  for (const auto& e : events) annotations += e.kind == LogEvent::Kind::annotation;
  CHECK(annotations == 3);
}

TEST_CASE("restarting on the same log restores annotators and records") {
  auto dir = fresh_dir("replay");
  auto log = dir / "log.jsonl";
  AnnotatedCorpus before;
  {
    AnnotationService s(tax(), table1(), log);
    s.register_annotator("a");
    s.register_annotator("idle");
    submit(s, "a", "t1-t1-u0", {"opinion_question"});
    submit(s, "a", "t1-t3-u0", {"back_channeling"});
    s.next_task("a");
    before = s.snapshot();
  }
  AnnotationService s(tax(), table1(), log);
  CHECK(s.annotators() == std::vector<std::string>{"a", "idle"});
  CHECK(s.snapshot().records == before.records);
  CHECK(s.live_locks().empty());
  auto t = s.next_task("a");
  REQUIRE(t);
  CHECK(t->segment_id == "t1-t3-u1");
}

TEST_CASE("agreement report") {
  auto dir = fresh_dir("agreement");
  AnnotationService s(tax(), table1(), dir / "log.jsonl");
  for (auto id : {"a", "b", "c", "d"}) s.register_annotator(id);
  const std::vector<std::vector<std::string>> a_labels = {
      {"opinion_question"}, {"back_channeling"}, {"factual_question"}, {"statement_non_opinion"},
      {"yes_no_question"}};
  const std::vector<std::vector<std::string>> c_labels = {
      {"factual_question"}, {"back_channeling"}, {"factual_question"}, {"general_opinion"},
      {"yes_no_question", "task_command"}};
  for (std::size_t i = 0; i < kHumanSegments.size(); ++i) {
    submit(s, "a", kHumanSegments[i], a_labels[i]);
    submit(s, "b", kHumanSegments[i], a_labels[i]);
    submit(s, "c", kHumanSegments[i], c_labels[i]);
  }
  submit(s, "d", kHumanSegments[0], {"comment"});

  auto report = s.agreement_report();
  CHECK(report.segments == 5);
  CHECK(report.coverage.at("a") == 5);
  CHECK(report.coverage.at("d") == 1);
  std::map<std::pair<std::string, std::string>, PairAgreement> pairs;
  for (const auto& p : report.pairs) pairs[{p.first, p.second}] = p;
  CHECK(pairs.size() == 6);

  CHECK(*pairs.at({"a", "b"}).kappa_exact_set == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(*pairs.at({"a", "b"}).kappa_per_tag_mean == doctest::Approx(1.0).epsilon(1e-12));

  std::map<std::string, LabelSet> ma, mc;
  for (std::size_t i = 0; i < kHumanSegments.size(); ++i) {
    ma.emplace(kHumanSegments[i], tax().make_label_set(a_labels[i]));
    mc.emplace(kHumanSegments[i], tax().make_label_set(c_labels[i]));
  }
  const auto& ac = pairs.at({"a", "c"});
  CHECK(ac.overlap == 5);
  CHECK(*ac.kappa_exact_set == cohen_kappa(ma, mc, KappaMode::exact_set, tax()));
  CHECK(*ac.kappa_per_tag_mean == cohen_kappa(ma, mc, KappaMode::per_tag_mean, tax()));
  // Exact-set categories: a = {oq, bc, fq, sno, ynq}, c = {fq, bc, fq, go, ynq+tc}.
  // Observed 2/5; expected from the marginals 1/25 * (1*0 + 1*1 + 1*2 + ...) = 3/25.
  CHECK(*ac.kappa_exact_set == doctest::Approx((0.4 - 3.0 / 25) / (1 - 3.0 / 25)).epsilon(1e-12));

  const auto& ad = pairs.at({"a", "d"});
  CHECK(ad.overlap == 1);
  CHECK_FALSE(ad.kappa_exact_set);
  CHECK(json::parse(agreement_json(report))["pairs"][2]["status"] == "empty_overlap");
}

TEST_CASE("export round-trips through the corpus reader") {
  auto dir = fresh_dir("export");
  AnnotationService s(tax(), table1(), dir / "log.jsonl");
  s.register_annotator("a");
  s.register_annotator("b");
  submit(s, "a", "t1-t1-u0", {"opinion_question"});
  submit(s, "b", "t1-t1-u0", {"factual_question", "comment"});
  s.submit({"a", "t1-t5-u0", {"statement_non_opinion"}, "i have not read a book in a while"});
  auto path = dir / "export.jsonl";
  s.export_corpus(path);
  auto back = read_annotated_corpus(path);
  auto snap = s.snapshot();
  CHECK(back.conversations == snap.conversations);
  CHECK(back.latest_labels("a") == snap.latest_labels("a"));
  CHECK(back.latest_labels("b") == snap.latest_labels("b"));
  CHECK(back.records.size() == 3);
}

namespace {

// A model overfit on gold labels for the five human segments.
struct ToyModel {
  std::map<std::string, std::vector<std::string>> gold = {
      {"t1-t1-u0", {"opinion_question"}},
      {"t1-t3-u0", {"back_channeling"}},
      {"t1-t3-u1", {"factual_question"}},
      {"t1-t5-u0", {"statement_non_opinion"}},
      {"t1-t5-u1", {"yes_no_question", "task_command"}}};
  std::shared_ptr<const ModelBundle> bundle;

  ToyModel() {
    AnnotatedCorpus c = table1();
    for (const auto& [seg, labels] : gold) {
      c.records.push_back(make_record(tax(), {seg, "gold", labels, std::nullopt, "t"}));
    }
    auto ex = corpus_examples(c, ContextMode::text).examples;
    TrainingConfig cfg;
    cfg.encoder.dim = 16;
    cfg.hidden = {16};
    cfg.epochs = 200;
    cfg.batch_size = 1;
    cfg.learning_rate = 0.03;
    bundle = std::make_shared<ModelBundle>(train(ex, cfg).bundle);
  }
};

const ToyModel& toy() {
  static const ToyModel m;
  return m;
}

}  // namespace

TEST_CASE("suggestions from an overfit model match gold and are stable") {
  auto dir = fresh_dir("suggest");
  AnnotationService s(tax(), table1(), dir / "log.jsonl", toy().bundle);
  CHECK(s.has_model());
  CHECK(s.model_version() == toy().bundle->version());
  for (const auto& [seg, labels] : toy().gold) {
    auto sug = s.suggest(seg);
    REQUIRE(sug);
    CHECK(sug->labels.tags() == tax().make_label_set(labels).tags());
    CHECK(sug->scores.size() == tax().tag_count());
    CHECK(tax().validate(sug->labels.tags()).ok());
    auto again = s.suggest(seg);
    CHECK(again->scores == sug->scores);
    CHECK(again->labels == sug->labels);
  }
  CHECK_THROWS_AS(s.suggest("missing"), DataError);

  s.register_annotator("a");
  auto task = s.next_task("a");
  REQUIRE(task);
  REQUIRE(task->suggestion);
  CHECK(task->suggestion->model_version == s.model_version());

  AnnotationService plain(tax(), table1(), dir / "plain.jsonl");
  CHECK_FALSE(plain.suggest("t1-t1-u0"));
}

TEST_CASE("a model needing dialog-act history suggests only once history is labelled") {
  auto dir = fresh_dir("suggest_da");
  AnnotatedCorpus c = table1();
  auto gold = toy().gold;
  gold["t1-t0-u0"] = {"opinion_question"};
  gold["t1-t2-u1"] = {"general_opinion"};
  for (const auto& [seg, labels] : gold) {
    c.records.push_back(make_record(tax(), {seg, "gold", labels, std::nullopt, "t"}));
  }
  auto ex = corpus_examples(c, ContextMode::da_plus_text).examples;
  REQUIRE(ex.size() == 3);
  TrainingConfig cfg;
  cfg.context_mode = ContextMode::da_plus_text;
  cfg.epochs = 3;
  auto bundle = std::make_shared<ModelBundle>(train(ex, cfg).bundle);

  ServiceOptions opts;
  opts.include_machine_segments = true;
  AnnotationService s(tax(), table1(), dir / "log.jsonl", bundle, opts);
  CHECK(s.segment_count() > 5);
  CHECK_FALSE(s.suggest("t1-t1-u0"));
  CHECK_FALSE(s.suggest("t1-t0-u0"));  // machine segments get no suggestion
  s.register_annotator("a");
  submit(s, "a", "t1-t0-u0", {"opinion_question"});
  auto first = s.suggest("t1-t1-u0");
  REQUIRE(first);
  CHECK(tax().validate(first->labels.tags()).ok());
  CHECK_FALSE(s.suggest("t1-t3-u1"));
  submit(s, "a", "t1-t2-u1", {"general_opinion"});
  CHECK_FALSE(s.suggest("t1-t3-u1"));
  submit(s, "a", "t1-t3-u0", {"back_channeling"});
  CHECK(s.suggest("t1-t3-u1"));
}

namespace {

struct Running {
  AnnotationService& service;
  ApiServer server;
  int port;
  httplib::Client client;

  explicit Running(AnnotationService& s)
      : service(s), server(s), port(server.bind("127.0.0.1", 0)), client("127.0.0.1", port) {
    server.start();
  }

  httplib::Result post(const std::string& path, const json& body) {
    return client.Post(path, body.dump(), "application/json");
  }
};

}  // namespace

TEST_CASE("http endpoints") {
  auto dir = fresh_dir("http");
  AnnotationService service(tax(), table1(), dir / "log.jsonl", toy().bundle);
  Running run(service);

  auto health = run.client.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  auto hj = json::parse(health->body);
  CHECK(hj["status"] == "ok");
  CHECK(hj["segments"] == 5);
  CHECK(hj["model"] == service.model_version());
  CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");

  auto scheme = json::parse(run.client.Get("/scheme")->body);
  CHECK(scheme["tags"].size() == 23);
  CHECK(scheme["max_tags"] == 2);

  auto v = json::parse(run.post("/validate", {{"labels", {"factual_question", "positive_answer"}}})->body);
  CHECK(v["ok"] == false);
  CHECK(v["violations"][0]["rule"] == to_string(Rule::exclusive_categories));
  CHECK(json::parse(run.post("/validate", {{"labels", {"zzz"}}})->body)["unknown_tag"] == "zzz");

  CHECK(run.post("/annotators", {{"annotator_id", "ann"}})->status == 201);
  CHECK(run.post("/annotators", {{"annotator_id", "ann"}})->status == 200);
  CHECK(run.post("/annotators", {{"annotator_id", "a b"}})->status == 400);
  CHECK(run.post("/annotators", json::object())->status == 400);
  CHECK(run.client.Post("/annotators", "not json", "application/json")->status == 400);

  auto next = run.post("/tasks/next", {{"annotator_id", "ann"}});
  REQUIRE(next);
  CHECK(next->status == 200);
  auto task = json::parse(next->body)["task"];
  CHECK(task["segment_id"] == "t1-t1-u0");
  CHECK(task["lock"]["owner"] == "ann");
  CHECK(task["suggestion"]["labels"] == json{"opinion_question"});
  CHECK(task["suggestion"]["scores"].size() == 23);
  CHECK(run.post("/tasks/next", {{"annotator_id", "ghost"}})->status == 404);

  auto bad = run.post("/submit", {{"annotator_id", "ann"},
                                  {"segment_id", "t1-t1-u0"},
                                  {"labels", {"comment", "hold", "thanks"}}});
  CHECK(bad->status == 422);
  CHECK(json::parse(bad->body)["violations"][0]["rule"] == to_string(Rule::max_two_tags));

  auto good = run.post("/submit", {{"annotator_id", "ann"},
                                   {"segment_id", "t1-t1-u0"},
                                   {"labels", {"general_opinion", "negative_answer"}},
                                   {"completed_text", "what are the top books"}});
  CHECK(good->status == 200);
  auto gj = json::parse(good->body);
  CHECK(gj["status"] == "accepted");
  CHECK(gj["record"]["completed_text"] == "what are the top books");

  run.post("/annotators", {{"annotator_id", "other"}});
  auto theirs = json::parse(run.post("/tasks/next", {{"annotator_id", "other"}})->body);
  CHECK(theirs["task"]["segment_id"] == "t1-t1-u0");
  auto stale = run.post("/submit", {{"annotator_id", "ann"},
                                    {"segment_id", "t1-t1-u0"},
                                    {"labels", {"comment"}}});
  CHECK(stale->status == 409);
  CHECK(json::parse(stale->body)["lock_owner"] == "other");
  CHECK(run.post("/submit", {{"annotator_id", "ann"}, {"segment_id", "zz"}, {"labels", {"comment"}}})
            ->status == 404);

  auto sug = run.client.Get("/suggest?segment_id=t1-t3-u0");
  CHECK(sug->status == 200);
  CHECK(json::parse(sug->body)["suggestion"]["labels"] == json{"back_channeling"});
  CHECK(run.client.Get("/suggest?segment_id=zz")->status == 404);
  CHECK(run.client.Get("/suggest")->status == 400);

  auto agreement = json::parse(run.client.Get("/agreement")->body);
  CHECK(agreement["coverage"]["ann"] == 1);
  CHECK(agreement["coverage"]["other"] == 0);
  CHECK(agreement["pairs"][0]["status"] == "empty_overlap");

  auto exported = run.client.Get("/export");
  REQUIRE(exported);
  std::istringstream in(exported->body);
  auto back = parse_corpus(in, "export");
  CHECK(back.records.size() == 1);
  CHECK(back.conversations == table1().conversations);

  auto opts = run.client.Options("/submit");
  CHECK(opts->status == 204);
  CHECK(opts->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);
}

TEST_CASE("suggest endpoint without a model reports the feature as disabled") {
  auto dir = fresh_dir("http_nomodel");
  AnnotationService service(tax(), table1(), dir / "log.jsonl");
  Running run(service);
  auto sug = run.client.Get("/suggest?segment_id=t1-t1-u0");
  CHECK(sug->status == 200);
  CHECK(json::parse(sug->body)["enabled"] == false);
  CHECK(json::parse(run.client.Get("/health")->body)["model"].is_null());
}

TEST_CASE("server config resolves paths against its own directory") {
  auto dir = fresh_dir("config");
  {
    std::ofstream out(dir / "service.json");
    out << R"({"corpus": "c.jsonl", "log": "/abs/log.jsonl", "lock_ttl_seconds": 30, "port": 9000})";
  }
  auto cfg = ServerConfig::load(dir / "service.json");
  CHECK(cfg.corpus == (dir / "c.jsonl").string());
  CHECK(cfg.log == "/abs/log.jsonl");
  CHECK(cfg.model.empty());
  CHECK(cfg.lock_ttl_seconds == 30);
  CHECK(cfg.port == 9000);
  CHECK(cfg.host == "127.0.0.1");
  CHECK_THROWS_AS(ServerConfig::load(dir / "missing.json"), UsageError);
}

TEST_CASE("two-client submission storm persists only legal label sets") {
  auto report = fixtures::run_storm(fresh_dir("storm"), 1000, 11);
  CHECK(report.submissions == 1000);
  CHECK(report.http_failures == 0);
  CHECK(report.verdict_mismatches == 0);
  CHECK(report.lock_violations == 0);
  CHECK(report.repeat_tasks == 0);
  CHECK(report.invalid_persisted == 0);
  CHECK(report.persisted == report.accepted);
  CHECK(report.accepted > 100);
  CHECK(report.rejected > 100);
  CHECK(report.replay_matches);
}
