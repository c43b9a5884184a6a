// segmenter.h: sentence-boundary prediction on unpunctuated utterances.
//
// Training data comes from punctuated text: sentence-final punctuation becomes
// a boundary position and is otherwise discarded. The model is a logistic
// classifier over every gap between adjacent tokens, with n-gram features
// drawn from a symmetric token window around the gap.

#ifndef MIDAS_SEGMENTER_H_
#define MIDAS_SEGMENTER_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "midas/corpus.h"

namespace midas {

// Boundary position i means "a sentence ends after token i". The utterance
// end is implicit and never stored, so every position is < tokens.size() - 1.
struct BoundaryExample {
  std::vector<std::string> tokens;
  std::vector<std::size_t> boundaries;  // ascending

  bool operator==(const BoundaryExample&) const = default;
};

// Throws DataError when nothing is left after normalization.
BoundaryExample reformat(std::string_view punctuated_text);

// Units of an example, each a space-joined token run.
std::vector<std::string> split_at(const std::vector<std::string>& tokens,
                                  const std::vector<std::size_t>& boundaries);

struct SegmenterConfig {
  std::size_t window_radius = 2;
  std::vector<int> ngram_orders = {1, 2};
  double learning_rate = 0.2;
  int epochs = 10;
  double l2 = 1e-6;
  double threshold = 0.5;
  std::uint64_t seed = 1;

  bool operator==(const SegmenterConfig&) const = default;
};

struct BoundaryScores {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

class SegmenterModel {
 public:
  SegmenterModel(SegmenterConfig config, std::map<std::string, double> weights, double bias);

  const SegmenterConfig& config() const { return config_; }
  const std::map<std::string, double>& weights() const { return weights_; }
  double bias() const { return bias_; }

  // Boundary probability for the gap after token `gap`.
  double probability(const std::vector<std::string>& tokens, std::size_t gap) const;
  std::vector<std::size_t> predict_boundaries(const std::vector<std::string>& tokens) const;

  // Normalizes the utterance and splits it at predicted boundaries. Returns at
  // least one unit for any input with at least one token.
  std::vector<std::string> segment(std::string_view utterance) const;

  std::string to_json() const;
  static SegmenterModel from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static SegmenterModel load(const std::filesystem::path& path);

  bool operator==(const SegmenterModel&) const = default;

 private:
  SegmenterConfig config_;
  std::map<std::string, double> weights_;
  double bias_;
};

// Feature strings for one gap; exposed for tests.
std::vector<std::string> gap_features(const std::vector<std::string>& tokens, std::size_t gap,
                                      const SegmenterConfig& config);

struct SegmenterTraining {
  SegmenterModel model;
  BoundaryScores training_scores;
};

// Deterministic for a fixed config (including seed). Throws DataError when no
// example has a boundary.
SegmenterTraining train_segmenter(const std::vector<BoundaryExample>& examples,
                                  const SegmenterConfig& config);

// Micro-averaged over boundary positions; a predicted boundary counts only at
// its exact gold position. Precision is 0 with no predictions and recall is 0
// with no gold boundaries; when both sides are empty everywhere the score is 1.
BoundaryScores boundary_prf(const std::vector<std::vector<std::size_t>>& gold,
                            const std::vector<std::vector<std::size_t>>& predicted);

BoundaryScores evaluate_segmenter(const SegmenterModel& model,
                                  const std::vector<BoundaryExample>& gold);

// Re-segments every turn spoken by `speaker` with the model.
void resegment(const SegmenterModel& model, std::vector<Conversation>& conversations,
               Speaker speaker = Speaker::human);

}  // namespace midas

#endif  // MIDAS_SEGMENTER_H_
