// service.h: the annotation workflow behind the HTTP API.
//
// Annotators register, take segments one at a time under a lock, and submit
// label sets. Every accepted submission is appended to a log before it
// becomes visible; restarting the service on the same corpus and log restores
// all state except locks.

#ifndef MIDAS_SERVICE_H_
#define MIDAS_SERVICE_H_

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "midas/classifier.h"
#include "midas/corpus.h"

namespace midas {

using Clock = std::function<std::chrono::system_clock::time_point()>;

struct ServiceOptions {
  std::chrono::seconds lock_ttl{600};
  bool include_machine_segments = false;
  Clock clock;  // system clock when empty
};

struct Suggestion {
  LabelSet labels;
  std::vector<double> scores;  // one per tag, vocabulary order
  std::string model_version;
};

struct SegmentLock {
  std::string owner;
  std::chrono::system_clock::time_point expires;
};

struct AnnotationTask {
  std::string segment_id;
  std::string conversation_id;
  Speaker speaker = Speaker::human;
  std::string text;
  ContextWindow context;  // text-mode history of the segment
  std::map<std::string, LabelSet> labels_by_annotator;
  std::optional<Suggestion> suggestion;
  SegmentLock lock;
};

struct SubmitRequest {
  std::string annotator_id;
  std::string segment_id;
  std::vector<std::string> labels;
  std::optional<std::string> completed_text;
};

struct SubmitResult {
  // duplicate: same content as the caller's latest record, nothing written.
  enum class Status { accepted, duplicate, rejected, stale_lock } status = Status::rejected;
  ValidationResult validation;
  std::string message;
  std::optional<AnnotationRecord> record;
  std::string lock_owner;  // for stale_lock
};

const char* to_string(SubmitResult::Status status);

struct PairAgreement {
  std::string first;
  std::string second;
  std::size_t overlap = 0;
  // Both empty when fewer than two segments are shared.
  std::optional<double> kappa_exact_set;
  std::optional<double> kappa_per_tag_mean;
};

struct AgreementReport {
  std::size_t segments = 0;  // annotatable segments
  std::map<std::string, std::size_t> coverage;  // annotator -> segments annotated
  std::vector<PairAgreement> pairs;
};

class AnnotationService {
 public:
  // Replays `log_path` when it exists. The taxonomy must outlive the service.
  AnnotationService(const Taxonomy& taxonomy, AnnotatedCorpus corpus,
                    std::filesystem::path log_path,
                    std::shared_ptr<const ModelBundle> model = nullptr, ServiceOptions options = {});

  const Taxonomy& taxonomy() const { return taxonomy_; }
  std::size_t segment_count() const { return annotatable_.size(); }
  bool has_model() const { return model_ != nullptr; }
  std::string model_version() const { return model_version_; }

  // Returns false when the id was already registered. Throws UsageError for
  // an empty id or one with characters outside [A-Za-z0-9_.@-].
  bool register_annotator(const std::string& annotator_id);
  std::vector<std::string> annotators() const;

  // First segment in corpus order that the caller has not annotated and no
  // one else holds a live lock on. Takes the lock (dropping any other lock
  // the caller held). Throws DataError for an unregistered annotator.
  std::optional<AnnotationTask> next_task(const std::string& annotator_id);

  // Throws DataError for unknown annotators or segments; every other outcome
  // is reported in the result.
  SubmitResult submit(const SubmitRequest& request);

  // Empty when no model is configured or the segment's context cannot be
  // built for the model's context mode. Throws DataError for unknown segments.
  std::optional<Suggestion> suggest(const std::string& segment_id) const;

  AgreementReport agreement_report() const;

  // Latest record per (annotator, segment), in the order they arrived.
  AnnotatedCorpus snapshot() const;
  void export_corpus(const std::filesystem::path& path) const;

  // Live locks at this moment, by segment.
  std::map<std::string, SegmentLock> live_locks() const;

 private:
  std::chrono::system_clock::time_point now() const;
  bool is_live(const SegmentLock& lock, std::chrono::system_clock::time_point at) const;
  AnnotationTask make_task(const std::string& segment_id) const;
  void apply(const AnnotationRecord& record);

  const Taxonomy& taxonomy_;
  std::vector<Conversation> conversations_;
  std::unique_ptr<CorpusIndex> index_;
  std::vector<std::string> annotatable_;  // in corpus order
  std::set<std::string> annotatable_set_;
  std::shared_ptr<const ModelBundle> model_;
  std::string model_version_;
  ServiceOptions options_;

  mutable std::shared_mutex mutex_;
  std::vector<std::string> annotators_;
  std::vector<AnnotationRecord> records_;  // arrival order, every revision
  // annotator -> segment -> index into records_ of the latest record
  std::map<std::string, std::map<std::string, std::size_t>> latest_;
  std::map<std::string, SegmentLock> locks_;
  std::unique_ptr<AnnotationLogWriter> log_;

  mutable std::mutex cache_mutex_;
  mutable std::map<std::string, Suggestion> suggestions_;  // keyed by rendered input
};

}  // namespace midas

#endif  // MIDAS_SERVICE_H_
