// Synthetic dialog-act data where the label set is a function of one cue token.

#ifndef MIDAS_TESTS_CLASSIFIER_DATA_H_
#define MIDAS_TESTS_CLASSIFIER_DATA_H_

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "midas/classifier.h"

namespace fixtures {

struct Cue {
  std::string token;
  std::vector<std::string> labels;
};

inline const std::vector<Cue> kCues = {
    {"yeah", {"positive_answer"}},
    {"nope", {"negative_answer", "statement_non_opinion"}},
    {"thanks", {"thanks"}},
    {"hello", {"opening"}},
    {"why", {"factual_question"}},
    {"love", {"general_opinion"}},
    {"play", {"task_command"}},
    {"mhm", {"back_channeling"}},
    {"sorry", {"apology"}},
    {"awesome", {"appreciation", "yes_no_question"}},
};

inline const std::vector<std::string> kFiller = {
    "the", "movie", "book", "i", "you", "it", "was", "some", "about", "really",
    "music", "we", "that", "just", "maybe", "again", "for", "a", "time", "today"};

inline std::string cue_sentence(const std::string& cue, std::mt19937& rng) {
  std::size_t len = 3 + rng() % 4;
  std::size_t at = rng() % (len + 1);
  std::string s;
  for (std::size_t i = 0; i <= len; ++i) {
    std::string w = i == at ? cue : kFiller[rng() % kFiller.size()];
    s += (s.empty() ? "" : " ") + w;
  }
  return s;
}

// Rendered context inputs with random filler history; cue in the current slot.
inline std::vector<midas::DAExample> cue_examples(std::size_t n, unsigned seed,
                                                  const std::vector<Cue>& cues = kCues) {
  std::mt19937 rng(seed);
  std::vector<midas::DAExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const Cue& cue = cues[i % cues.size()];
    midas::ContextWindow w{cue_sentence(kFiller[rng() % kFiller.size()], rng), "<empty>",
                           cue_sentence(cue.token, rng)};
    out.push_back({"ex" + std::to_string(i), w.render(), cue.labels});
  }
  return out;
}

// Single-tag version for pretraining: every cue keeps only its first tag.
inline std::vector<midas::DAExample> single_tag_cue_examples(std::size_t n, unsigned seed) {
  std::vector<Cue> cues;
  for (const auto& c : kCues) cues.push_back({c.token, {c.labels.front()}});
  return cue_examples(n, seed, cues);
}

inline midas::TrainingConfig small_config() {
  midas::TrainingConfig c;
  c.encoder.dim = 16;
  c.hidden = {24};
  c.learning_rate = 0.03;
  c.epochs = 30;
  c.batch_size = 5;
  return c;
}

}  // namespace fixtures

#endif  // MIDAS_TESTS_CLASSIFIER_DATA_H_
