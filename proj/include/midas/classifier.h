// classifier.h: multi-label dialog-act prediction.
//
// An encoder feeds a small multi-layer perceptron whose last layer yields one
// score per tag. Scores are squashed per tag with the logistic function at
// prediction time; single-label training instead puts a softmax over the
// same layer. Decoding keeps the best tag and adds the runner-up when its
// score reaches the threshold and the pair is legal.

#ifndef MIDAS_CLASSIFIER_H_
#define MIDAS_CLASSIFIER_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "midas/context.h"
#include "midas/encoder.h"
#include "midas/metrics.h"

namespace midas {

struct DecodingConfig {
  double second_label_threshold = 0.5;

  bool operator==(const DecodingConfig&) const = default;
};

// Scores must have one entry per tag. Ties go to the earlier tag in the
// vocabulary. The result always has the top tag.
LabelSet decode(std::span<const double> scores, const DecodingConfig& config = {},
                const Taxonomy& taxonomy = Taxonomy::midas());

enum class TrainingMode { single_label, multi_label };

const char* to_string(TrainingMode mode);
std::optional<TrainingMode> training_mode_from_string(std::string_view name);

struct EncoderConfig {
  std::string kind = "ngram";  // "ngram" or "precomputed"
  std::vector<int> orders = {1, 2};
  std::size_t dim = 32;
  std::string vectors;  // vector file for "precomputed"

  bool operator==(const EncoderConfig&) const = default;
};

struct TrainingConfig {
  double learning_rate = 0.02;
  int epochs = 30;
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;
  TrainingMode mode = TrainingMode::multi_label;
  std::vector<std::size_t> hidden = {64};
  EncoderConfig encoder;
  ContextMode context_mode = ContextMode::text;
  DecodingConfig decoding;

  bool operator==(const TrainingConfig&) const = default;
};

// Throws UsageError for non-positive hyperparameters or an unknown encoder.
void check_config(const TrainingConfig& config);

struct DAExample {
  std::string id;
  std::string input;  // rendered context string
  std::vector<std::string> labels;
};

struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<double> weight;  // outputs x inputs, row-major
  std::vector<double> bias;

  bool operator==(const DenseLayer&) const = default;
};

struct TrainingResult;

class ModelBundle {
 public:
  ModelBundle(std::vector<std::string> tags, std::unique_ptr<Encoder> encoder,
              std::vector<DenseLayer> layers, TrainingConfig config);
  ModelBundle(const ModelBundle& other);
  ModelBundle& operator=(const ModelBundle& other);
  ModelBundle(ModelBundle&&) noexcept = default;
  ModelBundle& operator=(ModelBundle&&) noexcept = default;

  const std::vector<std::string>& tags() const { return tags_; }
  const Encoder& encoder() const { return *encoder_; }
  Encoder& encoder() { return *encoder_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  const TrainingConfig& config() const { return config_; }
  const DecodingConfig& decoding() const { return config_.decoding; }
  void set_decoding(const DecodingConfig& decoding);
  ContextMode context_mode() const { return config_.context_mode; }

  // Raw last-layer values (before any squashing).
  std::vector<double> logits(std::string_view input) const;
  std::vector<double> logits(const EncodedInput& input) const;
  // One score per tag, each strictly inside (0,1).
  std::vector<double> predict_scores(std::string_view input) const;
  LabelSet predict(std::string_view input, const Taxonomy& taxonomy = Taxonomy::midas()) const;

  // Every trainable value in a fixed order: encoder block, then per layer the
  // weights followed by the biases.
  std::size_t parameter_count() const;
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> values);

  // Mean loss over the batch; when `gradient` is given it receives
  // d(loss)/d(parameters()) in the same order.
  double loss(const std::vector<DAExample>& batch, TrainingMode mode,
              std::vector<double>* gradient = nullptr,
              const Taxonomy& taxonomy = Taxonomy::midas()) const;

  std::string to_json() const;
  // `vectors` overrides the vector file recorded for a precomputed encoder.
  static ModelBundle from_json(const std::string& text,
                               std::shared_ptr<const PrecomputedVectors> vectors = nullptr);
  void save(const std::filesystem::path& path) const;
  static ModelBundle load(const std::filesystem::path& path,
                          std::shared_ptr<const PrecomputedVectors> vectors = nullptr);

  // Digest of the serialized bundle.
  std::string version() const;

  // Throws ModelError unless the tag vocabulary equals the taxonomy's.
  void check_taxonomy(const Taxonomy& taxonomy) const;

 private:
  friend class Trainer;
  friend TrainingResult train(const std::vector<DAExample>&, const TrainingConfig&,
                              const Taxonomy&, const ModelBundle*);

  std::vector<std::string> tags_;
  std::unique_ptr<Encoder> encoder_;
  std::vector<DenseLayer> layers_;
  TrainingConfig config_;
};

struct TrainingResult {
  ModelBundle bundle;
  std::vector<double> epoch_loss;
  SampleScore training_scores;
};

// Deterministic for a fixed config. With `init`, training continues from
// that bundle: its encoder (vocabulary extended with the new inputs) and
// layers are reused and config.hidden / config.encoder are ignored.
// Throws DataError with no examples, LabelSetError / UnknownTagError for bad
// labels, and DataError for a multi-tag example in single_label mode.
TrainingResult train(const std::vector<DAExample>& examples, const TrainingConfig& config,
                     const Taxonomy& taxonomy = Taxonomy::midas(),
                     const ModelBundle* init = nullptr);

SampleScore evaluate(const ModelBundle& bundle, const std::vector<DAExample>& examples,
                     const Taxonomy& taxonomy = Taxonomy::midas());

struct TransferConfig {
  TrainingConfig pretrain;  // mode forced to single_label
  TrainingConfig finetune;  // mode forced to multi_label
};

struct StageReport {
  std::string stage;
  std::size_t examples = 0;
  double final_loss = 0;
  SampleScore training_scores;
};

struct TransferResult {
  ModelBundle bundle;
  std::vector<StageReport> stages;
};

// Single-label pretraining on transfer data, then multi-label fine-tuning.
// With no transfer examples only the fine-tuning stage runs.
TransferResult transfer_pipeline(const std::vector<DAExample>& transfer_examples,
                                 const std::vector<DAExample>& examples,
                                 const TransferConfig& config,
                                 const Taxonomy& taxonomy = Taxonomy::midas());

// Example files: JSON lines {"id": ..., "input": ..., "labels": [...]}.
std::vector<DAExample> read_examples(const std::filesystem::path& path);
void write_examples(const std::vector<DAExample>& examples, const std::filesystem::path& path);

struct CorpusExamples {
  std::vector<DAExample> examples;
  std::size_t skipped = 0;  // labelled segments whose history lacks labels
};

// One example per labelled human segment (latest label set, from `annotator`
// or anyone). In da modes segments with unlabelled history are skipped.
CorpusExamples corpus_examples(const AnnotatedCorpus& corpus, ContextMode mode,
                               const std::string& annotator = "",
                               const Taxonomy& taxonomy = Taxonomy::midas());

}  // namespace midas

#endif  // MIDAS_CLASSIFIER_H_
