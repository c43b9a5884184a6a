// metrics.h: sample-averaged multi-label scores and annotator agreement.

#ifndef MIDAS_METRICS_H_
#define MIDAS_METRICS_H_

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "midas/taxonomy.h"

namespace midas {

struct SampleScore {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

// p = |gold & pred| / |pred|, r = |gold & pred| / |gold|, f1 = 2pr / (p + r) or 0.
SampleScore sample_prf(const LabelSet& gold, const LabelSet& pred);

// Unweighted mean of per-sample scores (reported elsewhere as "micro F1").
// Throws DataError on empty input.
SampleScore corpus_prf(const std::vector<std::pair<LabelSet, LabelSet>>& gold_pred);

enum class KappaMode { exact_set, per_tag_mean };

const char* to_string(KappaMode mode);
std::optional<KappaMode> kappa_mode_from_string(std::string_view name);

// Cohen's kappa over paired categorical judgements. When expected agreement is
// 1 (both raters constant on the same category) the result is 1.
double cohen_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b);

// exact_set: each distinct label set is one category.
// per_tag_mean: binary present/absent kappa per tag, averaged over tags whose
// expected agreement is below 1; 1 when no tag qualifies.
// Both annotators must cover the same segment ids (at least two).
double cohen_kappa(const std::map<std::string, LabelSet>& a, const std::map<std::string, LabelSet>& b,
                   KappaMode mode, const Taxonomy& taxonomy = Taxonomy::midas());

}  // namespace midas

#endif  // MIDAS_METRICS_H_
