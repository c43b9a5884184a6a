#include "midas/metrics.h"

#include <set>

namespace midas {

SampleScore sample_prf(const LabelSet& gold, const LabelSet& pred) {
  std::size_t common = 0;
  for (const auto& t : pred.tags()) common += gold.contains(t) ? 1 : 0;
  SampleScore s;
  s.precision = pred.size() ? static_cast<double>(common) / static_cast<double>(pred.size()) : 0.0;
  s.recall = gold.size() ? static_cast<double>(common) / static_cast<double>(gold.size()) : 0.0;
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

SampleScore corpus_prf(const std::vector<std::pair<LabelSet, LabelSet>>& gold_pred) {
  if (gold_pred.empty()) throw DataError("no samples to score");
  SampleScore sum;
  for (const auto& [gold, pred] : gold_pred) {
    auto s = sample_prf(gold, pred);
    sum.precision += s.precision;
    sum.recall += s.recall;
    sum.f1 += s.f1;
  }
  double n = static_cast<double>(gold_pred.size());
  return {sum.precision / n, sum.recall / n, sum.f1 / n};
}

const char* to_string(KappaMode mode) {
  return mode == KappaMode::exact_set ? "exact_set" : "per_tag_mean";
}

std::optional<KappaMode> kappa_mode_from_string(std::string_view name) {
  if (name == "exact_set") return KappaMode::exact_set;
  if (name == "per_tag_mean") return KappaMode::per_tag_mean;
  return std::nullopt;
}

namespace {

// Returns observed and expected agreement.
std::pair<double, double> agreement(const std::vector<std::string>& a,
                                    const std::vector<std::string>& b) {
  std::map<std::string, double> freq_a, freq_b;
  double observed = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    freq_a[a[i]] += 1;
    freq_b[b[i]] += 1;
    observed += a[i] == b[i] ? 1 : 0;
  }
  double n = static_cast<double>(a.size());
  double expected = 0;
  for (const auto& [category, count] : freq_a) {
    auto it = freq_b.find(category);
    if (it != freq_b.end()) expected += (count / n) * (it->second / n);
  }
  return {observed / n, expected};
}

}  // namespace

double cohen_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.size() != b.size()) throw DataError("kappa needs paired judgements");
  if (a.size() < 2) throw DataError("kappa needs at least two items");
  auto [po, pe] = agreement(a, b);
  if (pe >= 1.0) return 1.0;
  return (po - pe) / (1.0 - pe);
}

double cohen_kappa(const std::map<std::string, LabelSet>& a, const std::map<std::string, LabelSet>& b,
                   KappaMode mode, const Taxonomy& taxonomy) {
  std::vector<std::string> only_a, only_b;
  for (const auto& [id, _] : a) {
    if (!b.count(id)) only_a.push_back(id);
  }
  for (const auto& [id, _] : b) {
    if (!a.count(id)) only_b.push_back(id);
  }
  if (!only_a.empty() || !only_b.empty()) {
    throw DataError("annotators cover different segments (" + std::to_string(only_a.size()) +
                    " only in first, " + std::to_string(only_b.size()) + " only in second)");
  }
  if (a.size() < 2) throw DataError("kappa needs at least two segments");

  if (mode == KappaMode::exact_set) {
    std::vector<std::string> ca, cb;
    for (const auto& [id, labels] : a) {
      ca.push_back(labels.to_string());
      cb.push_back(b.at(id).to_string());
    }
    return cohen_kappa(ca, cb);
  }

  double sum = 0;
  int used = 0;
  for (const auto& tag : taxonomy.tags()) {
    std::vector<std::string> ca, cb;
    for (const auto& [id, labels] : a) {
      ca.push_back(labels.contains(tag.id) ? "1" : "0");
      cb.push_back(b.at(id).contains(tag.id) ? "1" : "0");
    }
    auto [po, pe] = agreement(ca, cb);
    if (pe >= 1.0) continue;
    sum += (po - pe) / (1.0 - pe);
    ++used;
  }
  return used ? sum / used : 1.0;
}

}  // namespace midas
