#include "midas/service.h"

#include <algorithm>

#include "midas/metrics.h"

namespace midas {

namespace {

bool valid_annotator_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '.' || c == '@' || c == '-';
  });
}

}  // namespace

const char* to_string(SubmitResult::Status status) {
  switch (status) {
    case SubmitResult::Status::accepted:
      return "accepted";
    case SubmitResult::Status::duplicate:
      return "duplicate";
    case SubmitResult::Status::rejected:
      return "rejected";
    case SubmitResult::Status::stale_lock:
      break;
  }
  return "stale_lock";
}

AnnotationService::AnnotationService(const Taxonomy& taxonomy, AnnotatedCorpus corpus,
                                     std::filesystem::path log_path,
                                     std::shared_ptr<const ModelBundle> model,
                                     ServiceOptions options)
    : taxonomy_(taxonomy),
      conversations_(std::move(corpus.conversations)),
      model_(std::move(model)),
      options_(std::move(options)) {
  if (options_.lock_ttl.count() <= 0) throw UsageError("lock TTL must be positive");
  index_ = std::make_unique<CorpusIndex>(conversations_);
  for (const auto& conv : conversations_) {
    for (const auto& turn : conv.turns) {
      if (turn.speaker != Speaker::human && !options_.include_machine_segments) continue;
      for (const auto& unit : turn.units) annotatable_.push_back(unit.id);
    }
  }
  annotatable_set_.insert(annotatable_.begin(), annotatable_.end());
  if (model_) {
    model_->check_taxonomy(taxonomy_);
    model_version_ = model_->version();
  }
  for (auto& record : corpus.records) {
    if (!index_->find(record.segment_id)) {
      throw DataError("annotation for unknown segment " + record.segment_id);
    }
    if (std::find(annotators_.begin(), annotators_.end(), record.annotator_id) == annotators_.end()) {
      annotators_.push_back(record.annotator_id);
    }
    apply(record);
  }
  if (std::filesystem::exists(log_path)) {
    for (auto& event : read_annotation_log(log_path, taxonomy_)) {
      if (std::find(annotators_.begin(), annotators_.end(), event.annotator_id) ==
          annotators_.end()) {
        annotators_.push_back(event.annotator_id);
      }
      if (event.kind == LogEvent::Kind::annotation) {
        if (!index_->find(event.record->segment_id)) {
          throw DataError(log_path.string() + ": annotation for unknown segment " +
                          event.record->segment_id);
        }
        apply(*event.record);
      }
    }
  }
  log_ = std::make_unique<AnnotationLogWriter>(log_path);
}

std::chrono::system_clock::time_point AnnotationService::now() const {
  return options_.clock ? options_.clock() : std::chrono::system_clock::now();
}

bool AnnotationService::is_live(const SegmentLock& lock,
                                std::chrono::system_clock::time_point at) const {
  return lock.expires > at;
}

void AnnotationService::apply(const AnnotationRecord& record) {
  latest_[record.annotator_id][record.segment_id] = records_.size();
  records_.push_back(record);
}

bool AnnotationService::register_annotator(const std::string& annotator_id) {
  if (!valid_annotator_id(annotator_id)) {
    throw UsageError("invalid annotator id '" + annotator_id + "'");
  }
  std::unique_lock lock(mutex_);
  if (std::find(annotators_.begin(), annotators_.end(), annotator_id) != annotators_.end()) {
    return false;
  }
  log_->append_annotator(annotator_id, to_iso8601(now()));
  annotators_.push_back(annotator_id);
  return true;
}

std::vector<std::string> AnnotationService::annotators() const {
  std::shared_lock lock(mutex_);
  return annotators_;
}

AnnotationTask AnnotationService::make_task(const std::string& segment_id) const {
  const UnitLocation* loc = index_->find(segment_id);
  const Conversation& conv = conversations_[loc->conversation];
  const Turn& turn = conv.turns[loc->turn];
  AnnotationTask task;
  task.segment_id = segment_id;
  task.conversation_id = conv.id;
  task.speaker = turn.speaker;
  task.text = turn.units[loc->unit].text;
  if (turn.speaker == Speaker::human) {
    task.context = context_window(conv, segment_id, ContextMode::text, {}, taxonomy_);
  } else {
    task.context = {std::string(kEmptyToken), std::string(kEmptyToken), task.text};
  }
  for (const auto& [annotator, segments] : latest_) {
    auto it = segments.find(segment_id);
    if (it != segments.end()) task.labels_by_annotator.emplace(annotator, records_[it->second].labels);
  }
  auto lock = locks_.find(segment_id);
  if (lock != locks_.end()) task.lock = lock->second;
  return task;
}

std::optional<AnnotationTask> AnnotationService::next_task(const std::string& annotator_id) {
  std::unique_lock lock(mutex_);
  if (std::find(annotators_.begin(), annotators_.end(), annotator_id) == annotators_.end()) {
    throw DataError("unknown annotator '" + annotator_id + "'");
  }
  const auto t = now();
  const auto done_it = latest_.find(annotator_id);
  std::optional<std::string> chosen;
  for (const auto& seg : annotatable_) {
    if (done_it != latest_.end() && done_it->second.count(seg)) continue;
    auto held = locks_.find(seg);
    if (held != locks_.end() && held->second.owner != annotator_id && is_live(held->second, t)) {
      continue;
    }
    chosen = seg;
    break;
  }
  for (auto it = locks_.begin(); it != locks_.end();) {
    bool drop = !is_live(it->second, t) || it->second.owner == annotator_id;
    it = drop ? locks_.erase(it) : std::next(it);
  }
  if (!chosen) return std::nullopt;
  locks_[*chosen] = {annotator_id, t + options_.lock_ttl};
  AnnotationTask task = make_task(*chosen);
  lock.unlock();
  task.suggestion = suggest(*chosen);
  return task;
}

SubmitResult AnnotationService::submit(const SubmitRequest& request) {
  std::unique_lock lock(mutex_);
  if (std::find(annotators_.begin(), annotators_.end(), request.annotator_id) ==
      annotators_.end()) {
    throw DataError("unknown annotator '" + request.annotator_id + "'");
  }
  if (!annotatable_set_.count(request.segment_id)) {
    throw DataError("segment '" + request.segment_id + "' is not open for annotation");
  }
  SubmitResult result;
  try {
    result.validation = taxonomy_.validate(request.labels);
  } catch (const UnknownTagError& e) {
    result.status = SubmitResult::Status::rejected;
    result.message = e.what();
    return result;
  }
  if (!result.validation.ok()) {
    result.status = SubmitResult::Status::rejected;
    result.message = result.validation.summary();
    return result;
  }
  const auto t = now();
  auto held = locks_.find(request.segment_id);
  if (held != locks_.end() && held->second.owner != request.annotator_id && is_live(held->second, t)) {
    result.status = SubmitResult::Status::stale_lock;
    result.lock_owner = held->second.owner;
    result.message = "segment is locked by " + held->second.owner;
    return result;
  }

  AnnotationDraft draft{request.segment_id, request.annotator_id, request.labels,
                        request.completed_text, to_iso8601(t)};
  if (draft.completed_text && draft.completed_text->empty()) draft.completed_text.reset();
  AnnotationRecord record = make_record(taxonomy_, draft);
  if (held != locks_.end()) locks_.erase(held);

  auto mine = latest_.find(request.annotator_id);
  if (mine != latest_.end()) {
    auto prev = mine->second.find(request.segment_id);
    if (prev != mine->second.end() &&
        records_[prev->second].content_hash() == record.content_hash()) {
      result.status = SubmitResult::Status::duplicate;
      result.record = records_[prev->second];
      return result;
    }
  }
  log_->append(record);
  apply(record);
  result.status = SubmitResult::Status::accepted;
  result.record = std::move(record);
  return result;
}

std::optional<Suggestion> AnnotationService::suggest(const std::string& segment_id) const {
  if (!index_->find(segment_id)) throw DataError("unknown segment '" + segment_id + "'");
  if (!model_) return std::nullopt;
  const UnitLocation* loc = index_->find(segment_id);
  const Conversation& conv = conversations_[loc->conversation];
  std::string input;
  try {
    SegmentLabels labels;
    if (model_->context_mode() != ContextMode::text) {
      std::shared_lock lock(mutex_);
      // latest record from anyone, by arrival
      std::map<std::string, std::size_t> newest;
      for (const auto& [_, segments] : latest_) {
        for (const auto& [seg, idx] : segments) {
          auto& slot = newest[seg];
          slot = std::max(slot, idx + 1);
        }
      }
      for (const auto& [seg, idx] : newest) labels.emplace(seg, records_[idx - 1].labels);
    }
    input = build_context(conv, segment_id, model_->context_mode(), labels, taxonomy_);
  } catch (const DataError&) {
    return std::nullopt;
  }
  {
    std::lock_guard lock(cache_mutex_);
    auto it = suggestions_.find(input);
    if (it != suggestions_.end()) return it->second;
  }
  auto scores = model_->predict_scores(input);
  Suggestion s{decode(scores, model_->decoding(), taxonomy_), std::move(scores), model_version_};
  std::lock_guard lock(cache_mutex_);
  return suggestions_.emplace(input, std::move(s)).first->second;
}

AgreementReport AnnotationService::agreement_report() const {
  std::shared_lock lock(mutex_);
  AgreementReport report;
  report.segments = annotatable_.size();
  std::vector<std::string> ids = annotators_;
  std::sort(ids.begin(), ids.end());
  auto labels_of = [&](const std::string& a) {
    std::map<std::string, LabelSet> out;
    auto it = latest_.find(a);
    if (it == latest_.end()) return out;
    for (const auto& [seg, idx] : it->second) out.emplace(seg, records_[idx].labels);
    return out;
  };
  std::map<std::string, std::map<std::string, LabelSet>> by;
  for (const auto& a : ids) {
    by[a] = labels_of(a);
    report.coverage[a] = by[a].size();
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      PairAgreement pair{ids[i], ids[j], 0, std::nullopt, std::nullopt};
      std::map<std::string, LabelSet> a, b;
      for (const auto& [seg, labels] : by[ids[i]]) {
        auto other = by[ids[j]].find(seg);
        if (other == by[ids[j]].end()) continue;
        a.emplace(seg, labels);
        b.emplace(seg, other->second);
      }
      pair.overlap = a.size();
      if (pair.overlap >= 2) {
        pair.kappa_exact_set = cohen_kappa(a, b, KappaMode::exact_set, taxonomy_);
        pair.kappa_per_tag_mean = cohen_kappa(a, b, KappaMode::per_tag_mean, taxonomy_);
      }
      report.pairs.push_back(std::move(pair));
    }
  }
  return report;
}

AnnotatedCorpus AnnotationService::snapshot() const {
  std::shared_lock lock(mutex_);
  std::vector<std::size_t> keep;
  for (const auto& [_, segments] : latest_) {
    for (const auto& [seg, idx] : segments) keep.push_back(idx);
  }
  std::sort(keep.begin(), keep.end());
  AnnotatedCorpus out;
  out.conversations = conversations_;
  for (std::size_t idx : keep) out.records.push_back(records_[idx]);
  return out;
}

void AnnotationService::export_corpus(const std::filesystem::path& path) const {
  write_corpus(snapshot(), path);
}

std::map<std::string, SegmentLock> AnnotationService::live_locks() const {
  std::shared_lock lock(mutex_);
  const auto t = now();
  std::map<std::string, SegmentLock> out;
  for (const auto& [seg, l] : locks_) {
    if (is_live(l, t)) out.emplace(seg, l);
  }
  return out;
}

}  // namespace midas
