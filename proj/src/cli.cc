#include "midas/cli.h"

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "midas/classifier.h"
#include "midas/http_api.h"
#include "midas/segmenter.h"
#include "midas/swda.h"
#include "midas/text.h"

namespace midas {

namespace {

using nlohmann::json;

const Taxonomy& tax() { return Taxonomy::midas(); }

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) lines.push_back(line);
  }
  return lines;
}

std::vector<BoundaryExample> read_boundary_examples(const std::string& path) {
  std::vector<BoundaryExample> out;
  for (const auto& line : read_lines(path)) {
    auto ex = reformat(line);
    if (!ex.tokens.empty()) out.push_back(std::move(ex));
  }
  return out;
}

json scores_json(const SampleScore& s) {
  return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
}

json boundary_json(const BoundaryScores& s) {
  return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
}

std::vector<AnnotationDraft> read_drafts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open annotation file " + path);
  std::vector<AnnotationDraft> drafts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      AnnotationDraft d;
      d.segment_id = j.at("segment_id").get<std::string>();
      d.annotator_id = j.at("annotator_id").get<std::string>();
      d.labels = j.at("labels").get<std::vector<std::string>>();
      if (j.contains("completed_text")) d.completed_text = j["completed_text"].get<std::string>();
      d.created_at = j.value("created_at", "");
      drafts.push_back(std::move(d));
    } catch (const json::exception& e) {
      throw ParseError(path, lineno, e.what());
    }
  }
  return drafts;
}

// Gold and predicted example files paired by id.
std::vector<std::pair<LabelSet, LabelSet>> pair_by_id(const std::vector<DAExample>& gold,
                                                      const std::vector<DAExample>& pred) {
  std::map<std::string, const DAExample*> by_id;
  for (const auto& p : pred) {
    if (!by_id.emplace(p.id, &p).second) throw DataError("duplicate prediction id " + p.id);
  }
  std::vector<std::pair<LabelSet, LabelSet>> out;
  for (const auto& g : gold) {
    auto it = by_id.find(g.id);
    if (it == by_id.end()) throw DataError("no prediction for example " + g.id);
    out.emplace_back(tax().make_label_set(g.labels), tax().make_label_set(it->second->labels));
  }
  if (out.size() != pred.size()) throw DataError("predictions for ids missing from the gold file");
  return out;
}

struct TrainFlags {
  TrainingConfig config;
  std::string mode = "multi_label";
  std::string context = "text";

  void add(CLI::App* app, const std::string& prefix = "") {
    app->add_option("--" + prefix + "epochs", config.epochs, "Training epochs")
        ->capture_default_str();
    app->add_option("--" + prefix + "lr", config.learning_rate, "Adam learning rate")
        ->capture_default_str();
    app->add_option("--" + prefix + "batch-size", config.batch_size, "Examples per update")
        ->capture_default_str();
    app->add_option("--" + prefix + "hidden", config.hidden,
                    "Hidden layer widths, comma separated (empty for none)")
        ->delimiter(',')
        ->capture_default_str();
  }

  void add_mode(CLI::App* app) {
    app->add_option("--mode", mode, "single_label or multi_label")->capture_default_str();
  }

  void add_shared(CLI::App* app) {
    app->add_option("--encoder", config.encoder.kind, "ngram or precomputed")
        ->capture_default_str();
    app->add_option("--orders", config.encoder.orders, "N-gram orders, comma separated")
        ->delimiter(',')
        ->capture_default_str();
    app->add_option("--dim", config.encoder.dim, "Embedding width")->capture_default_str();
    app->add_option("--vectors", config.encoder.vectors,
                    "Vector file for the precomputed encoder (JSON lines)");
    app->add_option("--context-mode", context, "text, da or da_plus_text")
        ->capture_default_str();
    app->add_option("--threshold", config.decoding.second_label_threshold,
                    "Score a second tag needs to be kept")
        ->capture_default_str();
  }

  TrainingConfig finish() {
    auto m = training_mode_from_string(mode);
    if (!m) throw UsageError("unknown training mode '" + mode + "'");
    auto c = context_mode_from_string(context);
    if (!c) throw UsageError("unknown context mode '" + context + "'");
    config.mode = *m;
    config.context_mode = *c;
    check_config(config);
    return config;
  }
};

struct Cli {
  Cli(std::ostream& o, std::ostream& e) : out(o), err(e) {}

  std::ostream& out;
  std::ostream& err;
  std::uint64_t seed = 1;

  // ingest
  std::string turns, ingest_output, ingest_segmenter, annotations;

  // segment
  SegmenterConfig seg_config;
  std::string seg_input, seg_output, seg_model, seg_corpus, seg_lines;

  // context build
  std::string ctx_corpus, ctx_output, ctx_mode = "text", ctx_annotator;
  bool ctx_all = false;

  // da
  TrainFlags train_flags;
  TrainFlags pre_flags;
  TrainFlags fine_flags;
  std::string da_input, da_output, da_model, da_vectors, da_transfer, gold, pred;
  bool with_scores = false;

  // swda
  std::string swda_input, swda_output, swda_table, unresolved = "drop";
  std::vector<std::string> swda_codes;

  // eval kappa
  std::string kappa_corpus, first, second, kappa_mode = "exact_set";

  // scheme
  std::string scheme_output;
  std::vector<std::string> scheme_labels;

  // serve
  std::string service_config, serve_host;
  int serve_port = -1;

  void ingest() {
    std::ifstream in(turns);
    if (!in) throw DataError("cannot open " + turns);
    AnnotatedCorpus corpus;
    corpus.conversations = ingest_turns(in, turns);
    if (!ingest_segmenter.empty()) {
      resegment(SegmenterModel::load(ingest_segmenter), corpus.conversations);
    }
    if (!annotations.empty()) {
      corpus = attach_annotations(std::move(corpus.conversations), read_drafts(annotations), tax());
    }
    write_corpus(corpus, ingest_output);
    std::size_t units = 0;
    for (const auto& c : corpus.conversations) {
      for (const auto& t : c.turns) units += t.units.size();
    }
    out << json{{"conversations", corpus.conversations.size()},
                {"segments", units},
                {"annotations", corpus.records.size()}}
               .dump()
        << "\n";
  }

  void segment_train() {
    seg_config.seed = seed;
    auto examples = read_boundary_examples(seg_input);
    if (examples.empty()) throw DataError("no training utterances in " + seg_input);
    auto result = train_segmenter(examples, seg_config);
    result.model.save(seg_output);
    out << json{{"examples", examples.size()}, {"training", boundary_json(result.training_scores)}}
               .dump()
        << "\n";
  }

  void segment_apply() {
    auto model = SegmenterModel::load(seg_model);
    if (seg_corpus.empty() == seg_lines.empty()) {
      throw UsageError("give exactly one of --corpus and --lines");
    }
    if (!seg_corpus.empty()) {
      if (seg_output.empty()) throw UsageError("--output is required with --corpus");
      auto corpus = read_annotated_corpus(seg_corpus);
      if (!corpus.records.empty()) {
        throw DataError("refusing to re-segment an annotated corpus; annotations would dangle");
      }
      resegment(model, corpus.conversations);
      write_corpus(corpus.conversations, seg_output);
      return;
    }
    std::ostringstream buf;
    for (const auto& line : read_lines(seg_lines)) {
      auto units = model.segment(line);
      for (std::size_t i = 0; i < units.size(); ++i) buf << (i ? " [SEG] " : "") << units[i];
      buf << "\n";
    }
    if (seg_output.empty()) {
      out << buf.str();
    } else {
      open_output(seg_output) << buf.str();
    }
  }

  void segment_eval() {
    auto model = SegmenterModel::load(seg_model);
    auto examples = read_boundary_examples(seg_input);
    out << json{{"examples", examples.size()},
                {"scores", boundary_json(evaluate_segmenter(model, examples))}}
               .dump()
        << "\n";
  }

  void context_build() {
    auto mode = context_mode_from_string(ctx_mode);
    if (!mode) throw UsageError("unknown context mode '" + ctx_mode + "'");
    auto corpus = read_annotated_corpus(ctx_corpus);
    std::vector<DAExample> examples;
    std::size_t skipped = 0;
    if (ctx_all) {
      auto labels = corpus.latest_labels(ctx_annotator);
      for (const auto& conv : corpus.conversations) {
        for (const auto& turn : conv.turns) {
          if (turn.speaker != Speaker::human) continue;
          for (const auto& unit : turn.units) {
            DAExample ex{unit.id, "", {}};
            try {
              ex.input = build_context(conv, unit.id, *mode, labels, tax());
            } catch (const DataError&) {
              ++skipped;
              continue;
            }
            auto it = labels.find(unit.id);
            if (it != labels.end()) ex.labels = it->second.tags();
            examples.push_back(std::move(ex));
          }
        }
      }
    } else {
      auto result = corpus_examples(corpus, *mode, ctx_annotator, tax());
      examples = std::move(result.examples);
      skipped = result.skipped;
    }
    write_examples(examples, ctx_output);
    out << json{{"examples", examples.size()}, {"skipped", skipped}}.dump() << "\n";
  }

  void da_train() {
    TrainingConfig cfg = train_flags.finish();
    cfg.seed = seed;
    auto examples = read_examples(da_input);
    auto result = train(examples, cfg, tax());
    result.bundle.save(da_output);
    out << json{{"examples", examples.size()},
                {"final_loss", result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back()},
                {"training", scores_json(result.training_scores)},
                {"version", result.bundle.version()}}
               .dump()
        << "\n";
  }

  ModelBundle load_model() {
    std::shared_ptr<const PrecomputedVectors> vectors;
    if (!da_vectors.empty()) vectors = PrecomputedVectors::load(da_vectors);
    return ModelBundle::load(da_model, vectors);
  }

  void da_predict() {
    auto model = load_model();
    auto examples = read_examples(da_input);
    auto file = open_output(da_output);
    for (const auto& ex : examples) {
      auto scores = model.predict_scores(ex.input);
      json j{{"id", ex.id},
             {"input", ex.input},
             {"labels", decode(scores, model.decoding(), tax()).tags()}};
      if (with_scores) j["scores"] = scores;
      file << j.dump() << "\n";
    }
    out << json{{"examples", examples.size()}, {"model", model.version()}}.dump() << "\n";
  }

  void da_eval_prf() {
    auto pairs = pair_by_id(read_examples(gold), read_examples(pred));
    out << json{{"examples", pairs.size()}, {"scores", scores_json(corpus_prf(pairs))}}.dump()
        << "\n";
  }

  void da_eval_model() {
    auto model = load_model();
    auto examples = read_examples(da_input);
    out << json{{"examples", examples.size()},
                {"scores", scores_json(evaluate(model, examples, tax()))}}
               .dump()
        << "\n";
  }

  void da_transfer_run() {
    TransferConfig cfg;
    pre_flags.context = fine_flags.context = train_flags.context;
    pre_flags.config.encoder = fine_flags.config.encoder = train_flags.config.encoder;
    pre_flags.config.decoding = fine_flags.config.decoding = train_flags.config.decoding;
    pre_flags.mode = "single_label";
    fine_flags.mode = "multi_label";
    cfg.pretrain = pre_flags.finish();
    cfg.finetune = fine_flags.finish();
    cfg.pretrain.seed = cfg.finetune.seed = seed;
    std::vector<DAExample> transfer_examples;
    if (!da_transfer.empty()) transfer_examples = read_examples(da_transfer);
    auto result = transfer_pipeline(transfer_examples, read_examples(da_input), cfg, tax());
    result.bundle.save(da_output);
    json stages = json::array();
    for (const auto& s : result.stages) {
      stages.push_back({{"stage", s.stage},
                        {"examples", s.examples},
                        {"final_loss", s.final_loss},
                        {"training", scores_json(s.training_scores)}});
    }
    out << json{{"stages", stages}, {"version", result.bundle.version()}}.dump() << "\n";
  }

  MappingTable mapping() {
    return swda_table.empty() ? MappingTable::standard() : MappingTable::load(swda_table, tax());
  }

  void swda_map() {
    auto table = mapping();
    for (const auto& code : swda_codes) out << code << "\t" << table.map_tag(code).to_string() << "\n";
  }

  void swda_table_write() {
    if (swda_output.empty()) {
      mapping().write(out);
    } else {
      auto file = open_output(swda_output);
      mapping().write(file);
    }
  }

  void swda_build() {
    auto policy = UnresolvedPolicy::parse(unresolved, tax());
    TransferStats stats;
    auto examples = build_transfer_set(read_swda(swda_input), mapping(), policy, tax(), &stats,
                                       swda_input);
    write_examples(examples, swda_output);
    out << json{{"emitted", stats.emitted},
                {"dropped_act", stats.dropped_act},
                {"dropped_unresolved", stats.dropped_unresolved},
                {"dropped_empty", stats.dropped_empty}}
               .dump()
        << "\n";
  }

  void eval_kappa() {
    auto mode = kappa_mode_from_string(kappa_mode);
    if (!mode) throw UsageError("unknown kappa mode '" + kappa_mode + "'");
    auto corpus = read_annotated_corpus(kappa_corpus);
    auto a = corpus.latest_labels(first);
    auto b = corpus.latest_labels(second);
    std::map<std::string, LabelSet> sa, sb;
    for (const auto& [seg, labels] : a) {
      auto it = b.find(seg);
      if (it == b.end()) continue;
      sa.emplace(seg, labels);
      sb.emplace(seg, it->second);
    }
    if (sa.size() < 2) {
      throw DataError(first + " and " + second + " share " + std::to_string(sa.size()) +
                      " annotated segments; kappa needs at least 2");
    }
    out << json{{"overlap", sa.size()},
                {"mode", to_string(*mode)},
                {"kappa", cohen_kappa(sa, sb, *mode, tax())}}
               .dump()
        << "\n";
  }

  void scheme_export() {
    std::string text = json::parse(scheme_json(tax())).dump(2) + "\n";
    if (scheme_output.empty()) {
      out << text;
    } else {
      open_output(scheme_output) << text;
    }
  }

  void scheme_validate() {
    auto result = tax().validate(scheme_labels);
    if (!result.ok()) throw LabelSetError(result);
    out << "ok\t" << join_tokens(tax().make_label_set(scheme_labels).tags()) << "\n";
  }

  void serve() {
    if (service_config.empty()) throw UsageError("--service-config is required");
    auto cfg = ServerConfig::load(service_config);
    if (!serve_host.empty()) cfg.host = serve_host;
    if (serve_port >= 0) cfg.port = serve_port;
    if (cfg.corpus.empty() || cfg.log.empty()) {
      throw UsageError(service_config + ": 'corpus' and 'log' are required");
    }
    std::shared_ptr<const ModelBundle> model;
    if (!cfg.model.empty()) {
      std::shared_ptr<const PrecomputedVectors> vectors;
      if (!cfg.vectors.empty()) vectors = PrecomputedVectors::load(cfg.vectors);
      model = std::make_shared<ModelBundle>(ModelBundle::load(cfg.model, vectors));
    }
    ServiceOptions opts;
    opts.lock_ttl = std::chrono::seconds(cfg.lock_ttl_seconds);
    opts.include_machine_segments = cfg.include_machine_segments;
    AnnotationService service(tax(), read_annotated_corpus(cfg.corpus), cfg.log, model, opts);
    ApiServer server(service);
    int port = server.bind(cfg.host, cfg.port);
    out << "listening on http://" << cfg.host << ":" << port << std::endl;
    server.run();
  }
};

int exit_code(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::usage:
      return kExitUsage;
    case ErrorCategory::data:
      return kExitData;
    case ErrorCategory::model:
      break;
  }
  return kExitModel;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Cli cli(out, err);
  CLI::App app{"Dialog-act toolkit: segmentation, context building, classification, "
               "SwDA mapping, agreement and annotation service.",
               "midas"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML file with flag defaults, one [section] per subcommand")
      ->envname("MIDAS_CONFIG");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.add_option("--seed", cli.seed, "Seed for every random choice")->capture_default_str();
  std::function<void()> action;
  auto bind = [&](CLI::App* sub, void (Cli::*fn)()) {
    sub->callback([&, fn] { action = [&, fn] { (cli.*fn)(); }; });
  };

  auto* ingest = app.add_subcommand("ingest", "Turn a tab-separated turns file into a corpus file");
  ingest->add_option("--input", cli.turns, "conversation_id<TAB>speaker<TAB>text lines")
      ->required()
      ->check(CLI::ExistingFile);
  ingest->add_option("--output", cli.ingest_output, "Corpus file to write")->required();
  ingest->add_option("--segmenter", cli.ingest_segmenter,
                     "Segmenter model used to split human turns");
  ingest->add_option("--annotations", cli.annotations,
                     "JSON lines of {segment_id, annotator_id, labels, completed_text?}");
  bind(ingest, &Cli::ingest);

  auto* segment = app.add_subcommand("segment", "Segmenter for human turns");
  segment->require_subcommand(1);
  auto* seg_train = segment->add_subcommand("train", "Train on punctuated utterances, one per line");
  seg_train->add_option("--input", cli.seg_input, "Punctuated utterances")->required();
  seg_train->add_option("--output", cli.seg_output, "Model file to write")->required();
  seg_train->add_option("--epochs", cli.seg_config.epochs)->capture_default_str();
  seg_train->add_option("--lr", cli.seg_config.learning_rate)->capture_default_str();
  seg_train->add_option("--l2", cli.seg_config.l2)->capture_default_str();
  seg_train->add_option("--radius", cli.seg_config.window_radius, "Token window radius")
      ->capture_default_str();
  seg_train->add_option("--orders", cli.seg_config.ngram_orders, "N-gram orders")
      ->delimiter(',')
      ->capture_default_str();
  seg_train->add_option("--threshold", cli.seg_config.threshold, "Boundary probability cutoff")
      ->capture_default_str();
  bind(seg_train, &Cli::segment_train);
  auto* seg_apply = segment->add_subcommand("apply", "Split utterances or corpus turns");
  seg_apply->add_option("--model", cli.seg_model)->required();
  seg_apply->add_option("--corpus", cli.seg_corpus, "Unannotated corpus file to re-segment");
  seg_apply->add_option("--lines", cli.seg_lines, "Plain utterances, one per line");
  seg_apply->add_option("--output", cli.seg_output, "Defaults to stdout for --lines");
  bind(seg_apply, &Cli::segment_apply);
  auto* seg_eval = segment->add_subcommand("eval", "Boundary P/R/F1 on punctuated utterances");
  seg_eval->add_option("--model", cli.seg_model)->required();
  seg_eval->add_option("--input", cli.seg_input)->required();
  bind(seg_eval, &Cli::segment_eval);

  auto* context = app.add_subcommand("context", "Classifier inputs");
  context->require_subcommand(1);
  auto* ctx_build = context->add_subcommand("build", "Render context strings for segments");
  ctx_build->add_option("--corpus", cli.ctx_corpus)->required();
  ctx_build->add_option("--output", cli.ctx_output, "Example file (JSON lines)")->required();
  ctx_build->add_option("--mode", cli.ctx_mode, "text, da or da_plus_text")->capture_default_str();
  ctx_build->add_option("--annotator", cli.ctx_annotator, "Labels from this annotator only");
  ctx_build->add_flag("--all", cli.ctx_all, "Include unlabelled segments (empty labels)");
  bind(ctx_build, &Cli::context_build);

  auto* da = app.add_subcommand("da", "Dialog-act classifier");
  da->require_subcommand(1);
  auto* da_train = da->add_subcommand("train", "Train a model bundle");
  da_train->add_option("--input", cli.da_input, "Example file")->required();
  da_train->add_option("--output", cli.da_output, "Model bundle to write")->required();
  cli.train_flags.add(da_train);
  cli.train_flags.add_mode(da_train);
  cli.train_flags.add_shared(da_train);
  bind(da_train, &Cli::da_train);
  auto* da_predict = da->add_subcommand("predict", "Decode label sets for examples");
  da_predict->add_option("--model", cli.da_model)->required();
  da_predict->add_option("--input", cli.da_input)->required();
  da_predict->add_option("--output", cli.da_output, "Prediction file")->required();
  da_predict->add_option("--vectors", cli.da_vectors, "Vector file for precomputed encoders");
  da_predict->add_flag("--scores", cli.with_scores, "Also write the per-tag scores");
  bind(da_predict, &Cli::da_predict);
  auto* da_eval = da->add_subcommand("eval", "Sample-averaged precision, recall and F1");
  da_eval->require_subcommand(1);
  auto* da_eval_prf = da_eval->add_subcommand("prf", "Compare a prediction file to a gold file");
  da_eval_prf->add_option("--gold", cli.gold)->required();
  da_eval_prf->add_option("--pred", cli.pred)->required();
  bind(da_eval_prf, &Cli::da_eval_prf);
  auto* da_eval_model = da_eval->add_subcommand("model", "Score a model on an example file");
  da_eval_model->add_option("--model", cli.da_model)->required();
  da_eval_model->add_option("--input", cli.da_input)->required();
  da_eval_model->add_option("--vectors", cli.da_vectors);
  bind(da_eval_model, &Cli::da_eval_model);
  auto* da_transfer = da->add_subcommand("transfer", "Single-label pretraining, then fine-tuning");
  da_transfer->add_option("--transfer", cli.da_transfer, "Transfer examples (from swda build)");
  da_transfer->add_option("--input", cli.da_input, "Target examples")->required();
  da_transfer->add_option("--output", cli.da_output)->required();
  cli.pre_flags.add(da_transfer, "pretrain-");
  cli.fine_flags.add(da_transfer);
  cli.train_flags.add_shared(da_transfer);
  bind(da_transfer, &Cli::da_transfer_run);

  auto* swda = app.add_subcommand("swda", "Switchboard tag mapping");
  swda->require_subcommand(1);
  auto* swda_map = swda->add_subcommand("map", "Print the target of each tag");
  swda_map->add_option("codes", cli.swda_codes, "SWBD-DAMSL tags")->required();
  swda_map->add_option("--table", cli.swda_table, "Mapping table (default: built in)");
  bind(swda_map, &Cli::swda_map);
  auto* swda_table = swda->add_subcommand("table", "Write the mapping table");
  swda_table->add_option("--table", cli.swda_table, "Table to normalize (default: built in)");
  swda_table->add_option("--output", cli.swda_output, "Defaults to stdout");
  bind(swda_table, &Cli::swda_table_write);
  auto* swda_build = swda->add_subcommand("build", "Transfer examples from a transcript file");
  swda_build->add_option("--input", cli.swda_input,
                         "conversation<TAB>speaker<TAB>act_tag<TAB>text lines")
      ->required();
  swda_build->add_option("--output", cli.swda_output, "Example file")->required();
  swda_build->add_option("--table", cli.swda_table, "Mapping table (default: built in)");
  swda_build->add_option("--unresolved", cli.unresolved, "drop or map_to:<tag>")
      ->capture_default_str();
  bind(swda_build, &Cli::swda_build);

  auto* eval = app.add_subcommand("eval", "Evaluation");
  eval->require_subcommand(1);
  auto* eval_prf = eval->add_subcommand("prf", "Same as da eval prf");
  eval_prf->add_option("--gold", cli.gold)->required();
  eval_prf->add_option("--pred", cli.pred)->required();
  bind(eval_prf, &Cli::da_eval_prf);
  auto* eval_kappa = eval->add_subcommand("kappa", "Cohen's kappa between two annotators");
  eval_kappa->add_option("--corpus", cli.kappa_corpus, "Annotated corpus file")->required();
  eval_kappa->add_option("--first", cli.first)->required();
  eval_kappa->add_option("--second", cli.second)->required();
  eval_kappa->add_option("--mode", cli.kappa_mode, "exact_set or per_tag_mean")
      ->capture_default_str();
  bind(eval_kappa, &Cli::eval_kappa);

  auto* scheme = app.add_subcommand("scheme", "The tag scheme");
  scheme->require_subcommand(1);
  auto* scheme_export = scheme->add_subcommand("export", "Write the scheme as JSON");
  scheme_export->add_option("--output", cli.scheme_output, "Defaults to stdout");
  bind(scheme_export, &Cli::scheme_export);
  auto* scheme_validate = scheme->add_subcommand("validate", "Check a label set");
  scheme_validate->add_option("labels", cli.scheme_labels, "Tag ids or names")->required();
  bind(scheme_validate, &Cli::scheme_validate);

  auto* serve = app.add_subcommand("serve", "Run the annotation service");
  serve->add_option("--service-config", cli.service_config,
                    "JSON file: corpus, log, model, vectors, lock_ttl_seconds, host, port");
  serve->add_option("--host", cli.serve_host, "Overrides the config file");
  serve->add_option("--port", cli.serve_port, "Overrides the config file");
  bind(serve, &Cli::serve);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    if (code == 0) return 0;
    return kExitUsage;
  }
  try {
    action();
    return 0;
  } catch (const Error& e) {
    err << "error[" << to_string(e.category()) << "]: " << e.what() << "\n";
    return exit_code(e.category());
  } catch (const nlohmann::json::exception& e) {
    err << "error[data]: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error[data]: " << e.what() << "\n";
    return kExitData;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace midas
