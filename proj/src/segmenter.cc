#include "midas/segmenter.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "midas/text.h"

namespace midas {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "midas-segmenter";
constexpr int kVersion = 1;

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

void check_config(const SegmenterConfig& c) {
  if (c.window_radius == 0) throw UsageError("segmenter window radius must be positive");
  if (c.ngram_orders.empty()) throw UsageError("segmenter needs at least one n-gram order");
  for (int n : c.ngram_orders) {
    if (n < 1 || static_cast<std::size_t>(n) > 2 * c.window_radius) {
      throw UsageError("n-gram order " + std::to_string(n) + " does not fit the window");
    }
  }
  if (!(c.learning_rate > 0)) throw UsageError("learning rate must be positive");
  if (c.epochs < 1) throw UsageError("epochs must be positive");
  if (c.l2 < 0) throw UsageError("l2 must be non-negative");
  if (!(c.threshold >= 0 && c.threshold <= 1)) throw UsageError("threshold must be in [0,1]");
}

json config_to_json(const SegmenterConfig& c) {
  return {{"window_radius", c.window_radius}, {"ngram_orders", c.ngram_orders},
          {"learning_rate", c.learning_rate}, {"epochs", c.epochs},
          {"l2", c.l2},                       {"threshold", c.threshold},
          {"seed", c.seed}};
}

SegmenterConfig config_from_json(const json& j) {
  SegmenterConfig c;
  c.window_radius = j.at("window_radius").get<std::size_t>();
  c.ngram_orders = j.at("ngram_orders").get<std::vector<int>>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.l2 = j.at("l2").get<double>();
  c.threshold = j.at("threshold").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

BoundaryExample reformat(std::string_view punctuated_text) {
  BoundaryExample ex;
  for (auto& sentence : split_sentences(punctuated_text)) {
    if (!ex.tokens.empty()) ex.boundaries.push_back(ex.tokens.size() - 1);
    for (auto& t : sentence) ex.tokens.push_back(std::move(t));
  }
  if (ex.tokens.empty()) throw DataError("text is empty after normalization");
  return ex;
}

std::vector<std::string> split_at(const std::vector<std::string>& tokens,
                                  const std::vector<std::size_t>& boundaries) {
  std::vector<std::string> units;
  std::size_t start = 0;
  for (std::size_t b : boundaries) {
    units.push_back(join_tokens(tokens, start, b + 1));
    start = b + 1;
  }
  if (start < tokens.size()) units.push_back(join_tokens(tokens, start, tokens.size()));
  return units;
}

std::vector<std::string> gap_features(const std::vector<std::string>& tokens, std::size_t gap,
                                      const SegmenterConfig& config) {
  // Window covers tokens gap-r+1 .. gap+r; offsets are relative to the first
  // token after the gap, so offset -1 is the last token before it.
  const long r = static_cast<long>(config.window_radius);
  const long g = static_cast<long>(gap);
  const long n_tokens = static_cast<long>(tokens.size());
  auto token_at = [&](long pos) -> std::string_view {
    if (pos < 0) return "<s>";
    if (pos >= n_tokens) return "</s>";
    return tokens[static_cast<std::size_t>(pos)];
  };
  std::vector<std::string> features;
  for (int order : config.ngram_orders) {
    for (long start = g - r + 1; start + order - 1 <= g + r; ++start) {
      std::string f = std::to_string(order) + "@" + std::to_string(start - g - 1) + "=";
      for (long k = 0; k < order; ++k) {
        if (k) f += '|';
        f += token_at(start + k);
      }
      features.push_back(std::move(f));
    }
  }
  return features;
}

SegmenterModel::SegmenterModel(SegmenterConfig config, std::map<std::string, double> weights,
                               double bias)
    : config_(std::move(config)), weights_(std::move(weights)), bias_(bias) {
  check_config(config_);
}

double SegmenterModel::probability(const std::vector<std::string>& tokens, std::size_t gap) const {
  double z = bias_;
  for (const auto& f : gap_features(tokens, gap, config_)) {
    auto it = weights_.find(f);
    if (it != weights_.end()) z += it->second;
  }
  return sigmoid(z);
}

std::vector<std::size_t> SegmenterModel::predict_boundaries(
    const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> out;
  for (std::size_t gap = 0; gap + 1 < tokens.size(); ++gap) {
    if (probability(tokens, gap) >= config_.threshold) out.push_back(gap);
  }
  return out;
}

std::vector<std::string> SegmenterModel::segment(std::string_view utterance) const {
  auto tokens = split_tokens(normalize_text(utterance));
  return split_at(tokens, predict_boundaries(tokens));
}

std::string SegmenterModel::to_json() const {
  json weights = json::object();
  for (const auto& [f, w] : weights_) weights[f] = w;
  json j{{"format", kFormat},
         {"version", kVersion},
         {"config", config_to_json(config_)},
         {"bias", bias_},
         {"weights", weights}};
  return j.dump() + "\n";
}

SegmenterModel SegmenterModel::from_json(const std::string& text) {
  try {
    json j = json::parse(text);
    if (j.at("format") != kFormat) throw ModelError("not a segmenter model file");
    if (j.at("version") != kVersion) throw ModelError("unsupported segmenter model version");
    std::map<std::string, double> weights;
    for (const auto& [f, w] : j.at("weights").items()) weights.emplace(f, w.get<double>());
    return SegmenterModel(config_from_json(j.at("config")), std::move(weights),
                          j.at("bias").get<double>());
  } catch (const json::exception& e) {
    throw ModelError(std::string("malformed segmenter model: ") + e.what());
  } catch (const UsageError& e) {
    throw ModelError(std::string("bad segmenter config: ") + e.what());
  }
}

void SegmenterModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ModelError("cannot write model file " + path.string());
  out << to_json();
}

SegmenterModel SegmenterModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open model file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

SegmenterTraining train_segmenter(const std::vector<BoundaryExample>& examples,
                                  const SegmenterConfig& config) {
  check_config(config);
  // Each gap becomes one instance with interned feature ids.
  std::unordered_map<std::string, std::size_t> feature_ids;
  std::vector<std::string> feature_names;
  struct Instance {
    std::vector<std::size_t> features;
    double label;
  };
  std::vector<Instance> instances;
  bool any_boundary = false;
  for (const auto& ex : examples) {
    for (std::size_t b : ex.boundaries) {
      if (b + 1 >= ex.tokens.size()) throw DataError("boundary position out of range");
    }
    any_boundary = any_boundary || !ex.boundaries.empty();
    for (std::size_t gap = 0; gap + 1 < ex.tokens.size(); ++gap) {
      Instance inst;
      inst.label = std::binary_search(ex.boundaries.begin(), ex.boundaries.end(), gap) ? 1 : 0;
      for (auto& f : gap_features(ex.tokens, gap, config)) {
        auto [it, added] = feature_ids.emplace(f, feature_names.size());
        if (added) feature_names.push_back(f);
        inst.features.push_back(it->second);
      }
      instances.push_back(std::move(inst));
    }
  }
  if (!any_boundary) throw DataError("training corpus contains no sentence boundaries");

  std::vector<double> w(feature_names.size(), 0.0);
  double bias = 0.0;
  std::vector<std::size_t> order(instances.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(config.seed);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t idx : order) {
      const Instance& inst = instances[idx];
      double z = bias;
      for (std::size_t f : inst.features) z += w[f];
      double g = sigmoid(z) - inst.label;
      bias -= config.learning_rate * g;
      for (std::size_t f : inst.features) {
        w[f] -= config.learning_rate * (g + config.l2 * w[f]);
      }
    }
  }

  std::map<std::string, double> weights;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] != 0.0) weights.emplace(feature_names[i], w[i]);
  }
  SegmenterModel model(config, std::move(weights), bias);
  BoundaryScores scores = evaluate_segmenter(model, examples);
  return {std::move(model), scores};
}

BoundaryScores boundary_prf(const std::vector<std::vector<std::size_t>>& gold,
                            const std::vector<std::vector<std::size_t>>& predicted) {
  if (gold.size() != predicted.size()) {
    throw DataError("gold and predicted example counts differ");
  }
  std::size_t tp = 0, n_gold = 0, n_pred = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::vector<std::size_t> g = gold[i], p = predicted[i];
    std::sort(g.begin(), g.end());
    std::sort(p.begin(), p.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    p.erase(std::unique(p.begin(), p.end()), p.end());
    std::vector<std::size_t> common;
    std::set_intersection(g.begin(), g.end(), p.begin(), p.end(), std::back_inserter(common));
    tp += common.size();
    n_gold += g.size();
    n_pred += p.size();
  }
  if (n_gold == 0 && n_pred == 0) return {1.0, 1.0, 1.0};
  BoundaryScores s;
  s.precision = n_pred ? static_cast<double>(tp) / static_cast<double>(n_pred) : 0.0;
  s.recall = n_gold ? static_cast<double>(tp) / static_cast<double>(n_gold) : 0.0;
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

BoundaryScores evaluate_segmenter(const SegmenterModel& model,
                                  const std::vector<BoundaryExample>& gold) {
  if (gold.empty()) throw DataError("no gold examples to evaluate");
  std::vector<std::vector<std::size_t>> g, p;
  for (const auto& ex : gold) {
    g.push_back(ex.boundaries);
    p.push_back(model.predict_boundaries(ex.tokens));
  }
  return boundary_prf(g, p);
}

void resegment(const SegmenterModel& model, std::vector<Conversation>& conversations,
               Speaker speaker) {
  for (auto& conv : conversations) {
    for (std::size_t t = 0; t < conv.turns.size(); ++t) {
      Turn& turn = conv.turns[t];
      if (turn.speaker != speaker) continue;
      std::vector<std::string> tokens;
      for (auto& sentence : split_sentences(turn.raw_text)) {
        for (auto& tok : sentence) tokens.push_back(std::move(tok));
      }
      if (tokens.empty()) continue;
      set_units(turn, conv.id, t, split_at(tokens, model.predict_boundaries(tokens)));
    }
  }
}

}  // namespace midas
