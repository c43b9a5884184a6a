#include "midas/classifier.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <utility>

#include "json.hpp"
#include "midas/text.h"

namespace midas {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "midas-da-model";
constexpr int kVersion = 1;
constexpr double kLogitClamp = 30.0;

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

json config_to_json(const TrainingConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"mode", to_string(c.mode)},
          {"hidden", c.hidden},
          {"encoder",
           {{"kind", c.encoder.kind},
            {"orders", c.encoder.orders},
            {"dim", c.encoder.dim},
            {"vectors", c.encoder.vectors}}},
          {"context_mode", to_string(c.context_mode)},
          {"decoding", {{"second_label_threshold", c.decoding.second_label_threshold}}}};
}

TrainingConfig config_from_json(const json& j) {
  TrainingConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  auto mode = training_mode_from_string(j.at("mode").get<std::string>());
  if (!mode) throw ModelError("unknown training mode in model file");
  c.mode = *mode;
  c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  const json& e = j.at("encoder");
  c.encoder.kind = e.at("kind").get<std::string>();
  c.encoder.orders = e.at("orders").get<std::vector<int>>();
  c.encoder.dim = e.at("dim").get<std::size_t>();
  c.encoder.vectors = e.at("vectors").get<std::string>();
  auto cm = context_mode_from_string(j.at("context_mode").get<std::string>());
  if (!cm) throw ModelError("unknown context mode in model file");
  c.context_mode = *cm;
  c.decoding.second_label_threshold =
      j.at("decoding").at("second_label_threshold").get<double>();
  return c;
}

// Per-example target: tag indices (exactly one in single_label mode).
std::vector<std::size_t> target_of(const DAExample& ex, TrainingMode mode,
                                   const Taxonomy& taxonomy) {
  LabelSet labels = taxonomy.make_label_set(ex.labels);
  if (mode == TrainingMode::single_label && labels.size() != 1) {
    throw DataError("example " + (ex.id.empty() ? std::string("<unnamed>") : ex.id) + " has " +
                    std::to_string(labels.size()) + " tags in single_label mode");
  }
  std::vector<std::size_t> out;
  for (const auto& t : labels.tags()) out.push_back(taxonomy.tag(t).index);
  return out;
}

// Loss of one example from its logits; writes d(loss)/d(logits) into dz.
double example_loss(const std::vector<double>& z, const std::vector<std::size_t>& target,
                    TrainingMode mode, std::vector<double>& dz) {
  dz.assign(z.size(), 0.0);
  double loss = 0;
  if (mode == TrainingMode::multi_label) {
    std::vector<char> y(z.size(), 0);
    for (std::size_t t : target) y[t] = 1;
    for (std::size_t i = 0; i < z.size(); ++i) {
      loss += softplus(z[i]) - (y[i] ? z[i] : 0.0);
      dz[i] = sigmoid(z[i]) - (y[i] ? 1.0 : 0.0);
    }
  } else {
    double m = *std::max_element(z.begin(), z.end());
    double sum = 0;
    for (double v : z) sum += std::exp(v - m);
    double lse = m + std::log(sum);
    loss = lse - z[target[0]];
    for (std::size_t i = 0; i < z.size(); ++i) dz[i] = std::exp(z[i] - lse);
    dz[target[0]] -= 1.0;
  }
  return loss;
}

std::vector<DenseLayer> init_layers(std::size_t in, const std::vector<std::size_t>& hidden,
                                    std::size_t out, std::mt19937_64& rng) {
  std::vector<std::size_t> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    DenseLayer d;
    d.inputs = sizes[l];
    d.outputs = sizes[l + 1];
    double limit = std::sqrt(6.0 / static_cast<double>(d.inputs + d.outputs));
    std::uniform_real_distribution<double> dist(-limit, limit);
    d.weight.resize(d.inputs * d.outputs);
    for (auto& w : d.weight) w = dist(rng);
    d.bias.assign(d.outputs, 0.0);
    layers.push_back(std::move(d));
  }
  return layers;
}

}  // namespace

const char* to_string(TrainingMode mode) {
  return mode == TrainingMode::single_label ? "single_label" : "multi_label";
}

std::optional<TrainingMode> training_mode_from_string(std::string_view name) {
  if (name == "single_label") return TrainingMode::single_label;
  if (name == "multi_label") return TrainingMode::multi_label;
  return std::nullopt;
}

void check_config(const TrainingConfig& c) {
  if (!(c.learning_rate > 0)) throw UsageError("learning rate must be positive");
  if (c.epochs < 1) throw UsageError("epochs must be positive");
  if (c.batch_size < 1) throw UsageError("batch size must be positive");
  for (std::size_t h : c.hidden) {
    if (h == 0) throw UsageError("hidden layer sizes must be positive");
  }
  if (c.encoder.kind == "ngram") {
    if (c.encoder.dim == 0) throw UsageError("encoder width must be positive");
    if (c.encoder.orders.empty()) throw UsageError("encoder needs at least one n-gram order");
    for (int n : c.encoder.orders) {
      if (n < 1) throw UsageError("n-gram orders must be positive");
    }
  } else if (c.encoder.kind == "precomputed") {
    if (c.encoder.vectors.empty()) throw UsageError("precomputed encoder needs a vector file");
  } else {
    throw UsageError("unknown encoder kind '" + c.encoder.kind + "'");
  }
  double t = c.decoding.second_label_threshold;
  if (!(t >= 0 && t <= 1)) throw UsageError("second label threshold must be in [0,1]");
}

LabelSet decode(std::span<const double> scores, const DecodingConfig& config,
                const Taxonomy& taxonomy) {
  if (scores.size() != taxonomy.tag_count()) {
    throw DataError("expected " + std::to_string(taxonomy.tag_count()) + " scores, got " +
                    std::to_string(scores.size()));
  }
  auto better = [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; };
  std::size_t t1 = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (better(i, t1)) t1 = i;
  }
  const auto& tags = taxonomy.tags();
  if (scores.size() < 2) return taxonomy.make_label_set({tags[t1].id});
  std::size_t t2 = t1 == 0 ? 1 : 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i != t1 && better(i, t2)) t2 = i;
  }
  if (scores[t2] >= config.second_label_threshold &&
      !taxonomy.exclusive(tags[t1].id, tags[t2].id)) {
    return taxonomy.make_label_set({tags[t1].id, tags[t2].id});
  }
  return taxonomy.make_label_set({tags[t1].id});
}

ModelBundle::ModelBundle(std::vector<std::string> tags, std::unique_ptr<Encoder> encoder,
                         std::vector<DenseLayer> layers, TrainingConfig config)
    : tags_(std::move(tags)),
      encoder_(std::move(encoder)),
      layers_(std::move(layers)),
      config_(std::move(config)) {
  if (!encoder_) throw ModelError("model has no encoder");
  if (layers_.empty()) throw ModelError("model has no layers");
  std::size_t width = encoder_->width();
  for (const auto& l : layers_) {
    if (l.inputs != width || l.weight.size() != l.inputs * l.outputs ||
        l.bias.size() != l.outputs) {
      throw ModelError("layer shapes do not chain");
    }
    width = l.outputs;
  }
  if (width != tags_.size()) {
    throw ModelError("model has " + std::to_string(width) + " outputs for " +
                     std::to_string(tags_.size()) + " tags");
  }
}

ModelBundle::ModelBundle(const ModelBundle& other)
    : tags_(other.tags_),
      encoder_(other.encoder_->clone()),
      layers_(other.layers_),
      config_(other.config_) {}

ModelBundle& ModelBundle::operator=(const ModelBundle& other) {
  if (this != &other) {
    tags_ = other.tags_;
    encoder_ = other.encoder_->clone();
    layers_ = other.layers_;
    config_ = other.config_;
  }
  return *this;
}

void ModelBundle::set_decoding(const DecodingConfig& decoding) {
  if (!(decoding.second_label_threshold >= 0 && decoding.second_label_threshold <= 1)) {
    throw UsageError("second label threshold must be in [0,1]");
  }
  config_.decoding = decoding;
}

std::vector<double> ModelBundle::logits(std::string_view input) const {
  return logits(encoder_->prepare(input));
}

std::vector<double> ModelBundle::logits(const EncodedInput& input) const {
  std::vector<double> h(encoder_->width());
  encoder_->encode(input, h);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& d = layers_[l];
    std::vector<double> a(d.bias);
    for (std::size_t o = 0; o < d.outputs; ++o) {
      const double* row = d.weight.data() + o * d.inputs;
      double s = 0;
      for (std::size_t i = 0; i < d.inputs; ++i) s += row[i] * h[i];
      a[o] += s;
    }
    if (l + 1 < layers_.size()) {
      for (auto& v : a) v = std::tanh(v);
    }
    h = std::move(a);
  }
  return h;
}

std::vector<double> ModelBundle::predict_scores(std::string_view input) const {
  auto z = logits(input);
  for (auto& v : z) v = sigmoid(std::clamp(v, -kLogitClamp, kLogitClamp));
  return z;
}

LabelSet ModelBundle::predict(std::string_view input, const Taxonomy& taxonomy) const {
  return decode(predict_scores(input), config_.decoding, taxonomy);
}

std::size_t ModelBundle::parameter_count() const {
  std::size_t n = encoder_->parameters().size();
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

std::vector<double> ModelBundle::parameters() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  auto enc = std::as_const(*encoder_).parameters();
  out.insert(out.end(), enc.begin(), enc.end());
  for (const auto& l : layers_) {
    out.insert(out.end(), l.weight.begin(), l.weight.end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

void ModelBundle::set_parameters(std::span<const double> values) {
  if (values.size() != parameter_count()) throw ModelError("parameter count mismatch");
  auto it = values.begin();
  auto enc = encoder_->parameters();
  std::copy(it, it + static_cast<long>(enc.size()), enc.begin());
  it += static_cast<long>(enc.size());
  for (auto& l : layers_) {
    std::copy(it, it + static_cast<long>(l.weight.size()), l.weight.begin());
    it += static_cast<long>(l.weight.size());
    std::copy(it, it + static_cast<long>(l.bias.size()), l.bias.begin());
    it += static_cast<long>(l.bias.size());
  }
}

void ModelBundle::check_taxonomy(const Taxonomy& taxonomy) const {
  bool same = tags_.size() == taxonomy.tag_count();
  for (std::size_t i = 0; same && i < tags_.size(); ++i) same = tags_[i] == taxonomy.tags()[i].id;
  if (!same) throw ModelError("model tag vocabulary does not match the scheme");
}

// Forward/backward over prepared inputs with gradients in per-block buffers.
class Trainer {
 public:
  explicit Trainer(ModelBundle& bundle) : bundle_(bundle) {
    enc_grad_.assign(bundle.encoder_->parameters().size(), 0.0);
    for (const auto& l : bundle.layers_) {
      w_grad_.emplace_back(l.weight.size(), 0.0);
      b_grad_.emplace_back(l.bias.size(), 0.0);
    }
  }

  // Adds the gradient of weight * loss(example) and returns the unweighted loss.
  double accumulate(const EncodedInput& input, const std::vector<std::size_t>& target,
                    TrainingMode mode, double weight) {
    const auto& layers = bundle_.layers_;
    const Encoder& enc = *bundle_.encoder_;
    std::vector<std::vector<double>> acts(layers.size() + 1);
    acts[0].resize(enc.width());
    enc.encode(input, acts[0]);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const DenseLayer& d = layers[l];
      std::vector<double> a(d.bias);
      for (std::size_t o = 0; o < d.outputs; ++o) {
        const double* row = d.weight.data() + o * d.inputs;
        for (std::size_t i = 0; i < d.inputs; ++i) a[o] += row[i] * acts[l][i];
      }
      if (l + 1 < layers.size()) {
        for (auto& v : a) v = std::tanh(v);
      }
      acts[l + 1] = std::move(a);
    }
    std::vector<double> delta;
    double loss = example_loss(acts.back(), target, mode, delta);
    for (auto& v : delta) v *= weight;

    for (std::size_t l = layers.size(); l-- > 0;) {
      const DenseLayer& d = layers[l];
      const auto& below = acts[l];
      for (std::size_t o = 0; o < d.outputs; ++o) {
        b_grad_[l][o] += delta[o];
        double* grow = w_grad_[l].data() + o * d.inputs;
        for (std::size_t i = 0; i < d.inputs; ++i) grow[i] += delta[o] * below[i];
      }
      std::vector<double> down(d.inputs, 0.0);
      for (std::size_t o = 0; o < d.outputs; ++o) {
        const double* row = d.weight.data() + o * d.inputs;
        for (std::size_t i = 0; i < d.inputs; ++i) down[i] += row[i] * delta[o];
      }
      if (l > 0) {
        for (std::size_t i = 0; i < d.inputs; ++i) down[i] *= 1.0 - below[i] * below[i];
      }
      delta = std::move(down);
    }
    auto rows = enc.backward(input, delta, enc_grad_);
    touched_.insert(touched_.end(), rows.begin(), rows.end());
    return loss;
  }

  std::vector<double> flat_gradient() const {
    std::vector<double> out(enc_grad_);
    for (std::size_t l = 0; l < w_grad_.size(); ++l) {
      out.insert(out.end(), w_grad_[l].begin(), w_grad_[l].end());
      out.insert(out.end(), b_grad_[l].begin(), b_grad_[l].end());
    }
    return out;
  }

  // One Adam step. Embedding rows are updated only when touched by the batch.
  void adam_step(double lr) {
    if (enc_m_.empty()) {
      enc_m_.assign(enc_grad_.size(), 0.0);
      enc_v_.assign(enc_grad_.size(), 0.0);
      for (std::size_t l = 0; l < w_grad_.size(); ++l) {
        w_m_.emplace_back(w_grad_[l].size(), 0.0);
        w_v_.emplace_back(w_grad_[l].size(), 0.0);
        b_m_.emplace_back(b_grad_[l].size(), 0.0);
        b_v_.emplace_back(b_grad_[l].size(), 0.0);
      }
    }
    ++step_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_));
    auto update = [&](double* p, double* g, double* m, double* v, std::size_t n) {
      for (std::size_t i = 0; i < n; ++i) {
        m[i] = kBeta1 * m[i] + (1 - kBeta1) * g[i];
        v[i] = kBeta2 * v[i] + (1 - kBeta2) * g[i] * g[i];
        p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
        g[i] = 0.0;
      }
    };
    auto& layers = bundle_.layers_;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      update(layers[l].weight.data(), w_grad_[l].data(), w_m_[l].data(), w_v_[l].data(),
             w_grad_[l].size());
      update(layers[l].bias.data(), b_grad_[l].data(), b_m_[l].data(), b_v_[l].data(),
             b_grad_[l].size());
    }
    std::sort(touched_.begin(), touched_.end());
    touched_.erase(std::unique(touched_.begin(), touched_.end()), touched_.end());
    auto enc = bundle_.encoder_->parameters();
    std::size_t dim = bundle_.encoder_->width();
    for (std::size_t row : touched_) {
      std::size_t at = row * dim;
      update(enc.data() + at, enc_grad_.data() + at, enc_m_.data() + at, enc_v_.data() + at, dim);
    }
    touched_.clear();
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  ModelBundle& bundle_;
  std::vector<double> enc_grad_;
  std::vector<std::vector<double>> w_grad_, b_grad_;
  std::vector<std::size_t> touched_;
  std::vector<double> enc_m_, enc_v_;
  std::vector<std::vector<double>> w_m_, w_v_, b_m_, b_v_;
  long step_ = 0;
};

double ModelBundle::loss(const std::vector<DAExample>& batch, TrainingMode mode,
                         std::vector<double>* gradient, const Taxonomy& taxonomy) const {
  if (batch.empty()) throw DataError("empty batch");
  check_taxonomy(taxonomy);
  ModelBundle& self = const_cast<ModelBundle&>(*this);  // Trainer only reads parameters here
  Trainer trainer(self);
  double total = 0;
  double weight = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) {
    total += trainer.accumulate(encoder_->prepare(ex.input), target_of(ex, mode, taxonomy), mode,
                                weight);
  }
  if (gradient) *gradient = trainer.flat_gradient();
  return total * weight;
}

std::string ModelBundle::to_json() const {
  json enc;
  if (const auto* ng = dynamic_cast<const NgramEncoder*>(encoder_.get())) {
    enc = {{"kind", ng->kind()},
           {"orders", ng->orders()},
           {"dim", ng->width()},
           {"vocabulary", ng->vocabulary()},
           {"embeddings", ng->embeddings()}};
  } else if (const auto* pc = dynamic_cast<const PrecomputedEncoder*>(encoder_.get())) {
    enc = {{"kind", pc->kind()}, {"dim", pc->width()}, {"vectors", pc->vectors().source()}};
  } else {
    throw ModelError("encoder kind '" + encoder_->kind() + "' cannot be saved");
  }
  json layers = json::array();
  for (const auto& l : layers_) {
    layers.push_back({{"inputs", l.inputs},
                      {"outputs", l.outputs},
                      {"weight", l.weight},
                      {"bias", l.bias}});
  }
  json j{{"format", kFormat},
         {"version", kVersion},
         {"tags", tags_},
         {"separators",
          {{"user_prev", kUserPrevSeparator}, {"user_cur", kUserCurSeparator}, {"empty", kEmptyToken}}},
         {"context_mode", to_string(config_.context_mode)},
         {"decoding", {{"second_label_threshold", config_.decoding.second_label_threshold}}},
         {"encoder", enc},
         {"layers", layers},
         {"training", config_to_json(config_)}};
  return j.dump() + "\n";
}

ModelBundle ModelBundle::from_json(const std::string& text,
                                   std::shared_ptr<const PrecomputedVectors> vectors) {
  try {
    json j = json::parse(text);
    if (j.at("format") != kFormat) throw ModelError("not a dialog-act model file");
    if (j.at("version") != kVersion) throw ModelError("unsupported dialog-act model version");
    const json& sep = j.at("separators");
    if (sep.at("user_prev") != kUserPrevSeparator || sep.at("user_cur") != kUserCurSeparator ||
        sep.at("empty") != kEmptyToken) {
      throw ModelError("model uses different context separator tokens");
    }
    TrainingConfig config = config_from_json(j.at("training"));
    auto cm = context_mode_from_string(j.at("context_mode").get<std::string>());
    if (!cm) throw ModelError("unknown context mode in model file");
    config.context_mode = *cm;
    config.decoding.second_label_threshold =
        j.at("decoding").at("second_label_threshold").get<double>();

    const json& e = j.at("encoder");
    std::unique_ptr<Encoder> encoder;
    std::string kind = e.at("kind").get<std::string>();
    if (kind == "ngram") {
      auto ng = std::make_unique<NgramEncoder>(e.at("orders").get<std::vector<int>>(),
                                               e.at("dim").get<std::size_t>());
      ng->set_table(e.at("vocabulary").get<std::vector<std::string>>(),
                    e.at("embeddings").get<std::vector<double>>());
      encoder = std::move(ng);
    } else if (kind == "precomputed") {
      if (!vectors) {
        try {
          vectors = PrecomputedVectors::load(e.at("vectors").get<std::string>());
        } catch (const DataError& err) {
          throw ModelError(std::string("cannot load the model's vectors: ") + err.what());
        }
      }
      if (vectors->dim() != e.at("dim").get<std::size_t>()) {
        throw ModelError("vector width differs from the model's encoder width");
      }
      encoder = std::make_unique<PrecomputedEncoder>(std::move(vectors));
    } else {
      throw ModelError("unknown encoder kind '" + kind + "'");
    }

    std::vector<DenseLayer> layers;
    for (const auto& l : j.at("layers")) {
      DenseLayer d;
      d.inputs = l.at("inputs").get<std::size_t>();
      d.outputs = l.at("outputs").get<std::size_t>();
      d.weight = l.at("weight").get<std::vector<double>>();
      d.bias = l.at("bias").get<std::vector<double>>();
      layers.push_back(std::move(d));
    }
    return ModelBundle(j.at("tags").get<std::vector<std::string>>(), std::move(encoder),
                       std::move(layers), std::move(config));
  } catch (const json::exception& e) {
    throw ModelError(std::string("malformed dialog-act model: ") + e.what());
  } catch (const UsageError& e) {
    throw ModelError(std::string("bad model configuration: ") + e.what());
  }
}

void ModelBundle::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ModelError("cannot write model file " + path.string());
  out << to_json();
}

ModelBundle ModelBundle::load(const std::filesystem::path& path,
                              std::shared_ptr<const PrecomputedVectors> vectors) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open model file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str(), std::move(vectors));
}

std::string ModelBundle::version() const { return hash_hex(to_json()); }

TrainingResult train(const std::vector<DAExample>& examples, const TrainingConfig& config,
                     const Taxonomy& taxonomy, const ModelBundle* init) {
  check_config(config);
  if (examples.empty()) throw DataError("no training examples");
  std::vector<std::vector<std::size_t>> targets;
  for (const auto& ex : examples) targets.push_back(target_of(ex, config.mode, taxonomy));

  std::mt19937_64 rng(config.seed);
  std::vector<std::string> inputs;
  for (const auto& ex : examples) inputs.push_back(ex.input);

  std::optional<ModelBundle> bundle;
  if (init) {
    init->check_taxonomy(taxonomy);
    bundle.emplace(*init);
    if (auto* ng = dynamic_cast<NgramEncoder*>(&bundle->encoder())) ng->extend(inputs, rng);
    TrainingConfig kept = config;
    kept.hidden = init->config().hidden;
    kept.encoder = init->config().encoder;
    bundle->config_ = kept;
  } else {
    std::unique_ptr<Encoder> encoder;
    if (config.encoder.kind == "ngram") {
      encoder = std::make_unique<NgramEncoder>(
          NgramEncoder::fit(inputs, config.encoder.orders, config.encoder.dim, rng));
    } else {
      encoder = std::make_unique<PrecomputedEncoder>(PrecomputedVectors::load(config.encoder.vectors));
    }
    std::vector<std::string> tags;
    for (const auto& t : taxonomy.tags()) tags.push_back(t.id);
    auto layers = init_layers(encoder->width(), config.hidden, tags.size(), rng);
    bundle.emplace(std::move(tags), std::move(encoder), std::move(layers), config);
  }

  std::vector<EncodedInput> prepared;
  for (const auto& ex : examples) prepared.push_back(bundle->encoder().prepare(ex.input));

  Trainer trainer(*bundle);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> epoch_loss;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::size_t end = std::min(order.size(), start + config.batch_size);
      double weight = 1.0 / static_cast<double>(end - start);
      for (std::size_t k = start; k < end; ++k) {
        total += trainer.accumulate(prepared[order[k]], targets[order[k]], config.mode, weight);
      }
      trainer.adam_step(config.learning_rate);
    }
    epoch_loss.push_back(total / static_cast<double>(examples.size()));
  }
  SampleScore scores = evaluate(*bundle, examples, taxonomy);
  return {std::move(*bundle), std::move(epoch_loss), scores};
}

SampleScore evaluate(const ModelBundle& bundle, const std::vector<DAExample>& examples,
                     const Taxonomy& taxonomy) {
  bundle.check_taxonomy(taxonomy);
  std::vector<std::pair<LabelSet, LabelSet>> pairs;
  for (const auto& ex : examples) {
    pairs.emplace_back(taxonomy.make_label_set(ex.labels), bundle.predict(ex.input, taxonomy));
  }
  return corpus_prf(pairs);
}

TransferResult transfer_pipeline(const std::vector<DAExample>& transfer_examples,
                                 const std::vector<DAExample>& examples,
                                 const TransferConfig& config, const Taxonomy& taxonomy) {
  TrainingConfig finetune = config.finetune;
  finetune.mode = TrainingMode::multi_label;
  std::vector<StageReport> stages;
  if (transfer_examples.empty()) {
    auto result = train(examples, finetune, taxonomy);
    stages.push_back({"finetune", examples.size(), result.epoch_loss.back(), result.training_scores});
    return {std::move(result.bundle), std::move(stages)};
  }
  TrainingConfig pretrain = config.pretrain;
  pretrain.mode = TrainingMode::single_label;
  auto first = train(transfer_examples, pretrain, taxonomy);
  stages.push_back({"pretrain", transfer_examples.size(), first.epoch_loss.back(),
                    first.training_scores});
  auto second = train(examples, finetune, taxonomy, &first.bundle);
  stages.push_back({"finetune", examples.size(), second.epoch_loss.back(), second.training_scores});
  return {std::move(second.bundle), std::move(stages)};
}

std::vector<DAExample> read_examples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open example file " + path.string());
  std::vector<DAExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      DAExample ex;
      ex.id = j.value("id", "");
      ex.input = j.at("input").get<std::string>();
      ex.labels = j.at("labels").get<std::vector<std::string>>();
      out.push_back(std::move(ex));
    } catch (const json::exception& e) {
      throw ParseError(path.string(), lineno, e.what());
    }
  }
  return out;
}

void write_examples(const std::vector<DAExample>& examples, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write example file " + path.string());
  for (const auto& ex : examples) {
    out << json{{"id", ex.id}, {"input", ex.input}, {"labels", ex.labels}}.dump() << "\n";
  }
}

CorpusExamples corpus_examples(const AnnotatedCorpus& corpus, ContextMode mode,
                               const std::string& annotator, const Taxonomy& taxonomy) {
  auto labels = corpus.latest_labels(annotator);
  CorpusExamples out;
  for (const auto& conv : corpus.conversations) {
    for (const auto& turn : conv.turns) {
      if (turn.speaker != Speaker::human) continue;
      for (const auto& unit : turn.units) {
        auto it = labels.find(unit.id);
        if (it == labels.end()) continue;
        std::string input;
        try {
          input = build_context(conv, unit.id, mode, labels, taxonomy);
        } catch (const DataError&) {
          if (mode == ContextMode::text) throw;
          ++out.skipped;
          continue;
        }
        out.examples.push_back({unit.id, std::move(input), it->second.tags()});
      }
    }
  }
  return out;
}

}  // namespace midas
