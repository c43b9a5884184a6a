// corpus.h: conversations, segment units, annotation records and their files.
//
// Corpus file (JSON lines):
//   line 1   {"format":"midas-corpus","schema_version":1}
//   line 2.. one conversation per line:
//     {"id": str,
//      "turns": [{"speaker": "machine"|"human", "raw_text": str,
//                 "units": [{"id": str, "text": str}, ...]}, ...],
//      "annotations": [record, ...]}        (optional)
//   record = {"segment_id": str, "annotator_id": str, "labels": [tag, ...],
//             "completed_text": str (optional), "created_at": ISO-8601 str}
//
// Unit texts are in normal form (see text.h). When a turn has units, their
// texts joined by single spaces equal the normalized raw text with boundary
// markers removed. Segment ids are unique across the corpus.
//
// Annotation log (JSON lines, append-only):
//   line 1   {"format":"midas-annotation-log","schema_version":1}
//   line 2.. {"kind":"annotator","annotator_id":str,"created_at":str}
//            {"kind":"annotation", <record fields>, "content_hash": str}

#ifndef MIDAS_CORPUS_H_
#define MIDAS_CORPUS_H_

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "midas/taxonomy.h"

namespace midas {

inline constexpr int kCorpusSchemaVersion = 1;

enum class Speaker { machine, human };

const char* to_string(Speaker speaker);
// Accepts machine/system/bot and human/user (case-insensitive).
std::optional<Speaker> speaker_from_string(std::string_view name);

struct SegmentUnit {
  std::string id;
  std::string text;
  Speaker speaker = Speaker::human;
  std::size_t index_in_turn = 0;

  bool operator==(const SegmentUnit&) const = default;
};

struct Turn {
  Speaker speaker = Speaker::human;
  std::string raw_text;
  std::vector<SegmentUnit> units;

  bool operator==(const Turn&) const = default;
};

struct Conversation {
  std::string id;
  std::vector<Turn> turns;

  bool operator==(const Conversation&) const = default;
};

// Default segment id scheme used by ingest and re-segmentation.
std::string make_unit_id(const std::string& conversation_id, std::size_t turn, std::size_t unit);

// Replaces the units of `turn` with `texts`, assigning ids and positions.
void set_units(Turn& turn, const std::string& conversation_id, std::size_t turn_index,
               const std::vector<std::string>& texts);

// Throws DataError when a conversation breaks a structural invariant.
void check_conversation(const Conversation& conversation);

struct AnnotationRecord {
  std::string segment_id;
  std::string annotator_id;
  LabelSet labels;
  std::optional<std::string> completed_text;
  std::string created_at;

  bool operator==(const AnnotationRecord&) const = default;

  // Stable digest of (annotator, segment, labels, completed_text).
  std::string content_hash() const;
};

// An annotation as it arrives from outside, before label validation.
struct AnnotationDraft {
  std::string segment_id;
  std::string annotator_id;
  std::vector<std::string> labels;
  std::optional<std::string> completed_text;
  std::string created_at;
};

// Throws LabelSetError (or UnknownTagError) if the labels are not a legal set.
AnnotationRecord make_record(const Taxonomy& taxonomy, const AnnotationDraft& draft);

struct UnitLocation {
  std::size_t conversation = 0;
  std::size_t turn = 0;
  std::size_t unit = 0;
};

class CorpusIndex {
 public:
  explicit CorpusIndex(const std::vector<Conversation>& conversations);

  const UnitLocation* find(const std::string& segment_id) const;
  const SegmentUnit& unit(const UnitLocation& loc) const;
  const std::vector<Conversation>& conversations() const { return *conversations_; }

  // Segment ids in conversation order.
  const std::vector<std::string>& order() const { return order_; }

 private:
  const std::vector<Conversation>* conversations_;
  std::map<std::string, UnitLocation> locations_;
  std::vector<std::string> order_;
};

struct AnnotatedCorpus {
  std::vector<Conversation> conversations;
  std::vector<AnnotationRecord> records;  // in arrival order

  // All records for one segment, in arrival order.
  std::vector<const AnnotationRecord*> annotations_for(const std::string& segment_id) const;
  // Latest record per segment from one annotator, or from anyone when empty.
  std::map<std::string, LabelSet> latest_labels(const std::string& annotator_id = "") const;
  std::vector<std::string> annotators() const;
};

// Checks that every record's segment resolves and every label set is legal.
AnnotatedCorpus attach_annotations(std::vector<Conversation> corpus,
                                   const std::vector<AnnotationDraft>& drafts,
                                   const Taxonomy& taxonomy);

AnnotatedCorpus parse_corpus(std::istream& in, const std::string& source,
                             const Taxonomy& taxonomy = Taxonomy::midas());
void write_corpus(std::ostream& out, const AnnotatedCorpus& corpus);

std::vector<Conversation> read_corpus(const std::filesystem::path& path);
AnnotatedCorpus read_annotated_corpus(const std::filesystem::path& path,
                                      const Taxonomy& taxonomy = Taxonomy::midas());
void write_corpus(const std::vector<Conversation>& conversations,
                  const std::filesystem::path& path);
void write_corpus(const AnnotatedCorpus& corpus, const std::filesystem::path& path);

// Tab-separated turns: conversation_id <TAB> speaker <TAB> text. Turns of one
// conversation must be contiguous. Units are split at sentence-final
// punctuation and boundary markers.
std::vector<Conversation> ingest_turns(std::istream& in, const std::string& source);

// UTC with milliseconds: 2024-01-31T12:00:00.000Z
std::string to_iso8601(std::chrono::system_clock::time_point time);
std::string now_iso8601();

struct LogEvent {
  enum class Kind { annotator, annotation } kind;
  std::string annotator_id;
  std::string created_at;
  std::optional<AnnotationRecord> record;
};

// Replays an annotation log, re-validating every record.
std::vector<LogEvent> read_annotation_log(const std::filesystem::path& path,
                                          const Taxonomy& taxonomy = Taxonomy::midas());

// Appends to an annotation log; writes the header when the file is new.
// Appends from multiple threads are serialized.
class AnnotationLogWriter {
 public:
  explicit AnnotationLogWriter(const std::filesystem::path& path);

  void append_annotator(const std::string& annotator_id, const std::string& created_at);
  void append(const AnnotationRecord& record);

 private:
  void write_line(const std::string& line);

  std::mutex mutex_;
  std::ofstream out_;
};

}  // namespace midas

#endif  // MIDAS_CORPUS_H_
