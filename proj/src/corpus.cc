#include "midas/corpus.h"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <ctime>
#include <set>
#include <sstream>

#include "json.hpp"
#include "midas/text.h"

namespace midas {

using nlohmann::json;

namespace {

constexpr const char* kCorpusFormat = "midas-corpus";
constexpr const char* kLogFormat = "midas-annotation-log";

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

json record_to_json(const AnnotationRecord& r) {
  json j{{"segment_id", r.segment_id},
         {"annotator_id", r.annotator_id},
         {"labels", r.labels.tags()},
         {"created_at", r.created_at}};
  if (r.completed_text) j["completed_text"] = *r.completed_text;
  return j;
}

// Field accessors that turn type mismatches into ParseErrors.
struct Fields {
  const json& j;
  const std::string& source;
  std::size_t line;

  ParseError error(const std::string& detail) const { return ParseError(source, line, detail); }

  const json& get(const char* key) const {
    auto it = j.find(key);
    if (it == j.end()) throw error(std::string("missing field '") + key + "'");
    return *it;
  }
  std::string str(const char* key) const {
    const json& v = get(key);
    if (!v.is_string()) throw error(std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
  }
  std::optional<std::string> opt_str(const char* key) const {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw error(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
  }
  const json& array(const char* key) const {
    const json& v = get(key);
    if (!v.is_array()) throw error(std::string("field '") + key + "' must be an array");
    return v;
  }
};

AnnotationDraft draft_from_json(const Fields& f) {
  AnnotationDraft d;
  d.segment_id = f.str("segment_id");
  d.annotator_id = f.str("annotator_id");
  for (const auto& l : f.array("labels")) {
    if (!l.is_string()) throw f.error("labels must be strings");
    d.labels.push_back(l.get<std::string>());
  }
  d.completed_text = f.opt_str("completed_text");
  d.created_at = f.opt_str("created_at").value_or("");
  return d;
}

AnnotationRecord record_at(const Taxonomy& taxonomy, const AnnotationDraft& draft,
                           const std::string& source, std::size_t line) {
  try {
    return make_record(taxonomy, draft);
  } catch (const DataError& e) {
    throw ParseError(source, line, "annotation on '" + draft.segment_id + "': " + e.what());
  }
}

json parse_line(const std::string& line, const std::string& source, std::size_t lineno) {
  try {
    json j = json::parse(line);
    if (!j.is_object()) throw ParseError(source, lineno, "record must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw ParseError(source, lineno, std::string("malformed record: ") + e.what());
  }
}

void check_header(const json& j, const char* format, const std::string& source) {
  Fields f{j, source, 1};
  if (f.str("format") != format) throw f.error(std::string("expected format '") + format + "'");
  const json& v = f.get("schema_version");
  if (!v.is_number_integer()) throw f.error("schema_version must be an integer");
  if (v.get<int>() != kCorpusSchemaVersion) {
    throw f.error("unsupported schema_version " + std::to_string(v.get<int>()));
  }
}

}  // namespace

const char* to_string(Speaker speaker) {
  return speaker == Speaker::machine ? "machine" : "human";
}

std::optional<Speaker> speaker_from_string(std::string_view name) {
  std::string s = to_lower(name);
  if (s == "machine" || s == "system" || s == "bot") return Speaker::machine;
  if (s == "human" || s == "user") return Speaker::human;
  return std::nullopt;
}

std::string make_unit_id(const std::string& conversation_id, std::size_t turn, std::size_t unit) {
  return conversation_id + "-t" + std::to_string(turn) + "-u" + std::to_string(unit);
}

void set_units(Turn& turn, const std::string& conversation_id, std::size_t turn_index,
               const std::vector<std::string>& texts) {
  turn.units.clear();
  for (std::size_t i = 0; i < texts.size(); ++i) {
    turn.units.push_back({make_unit_id(conversation_id, turn_index, i), texts[i], turn.speaker, i});
  }
}

void check_conversation(const Conversation& c) {
  if (c.id.empty()) throw DataError("conversation with empty id");
  for (std::size_t t = 0; t < c.turns.size(); ++t) {
    const Turn& turn = c.turns[t];
    std::string where = "conversation '" + c.id + "' turn " + std::to_string(t);
    if (turn.units.empty()) continue;
    std::vector<std::string> joined;
    for (std::size_t u = 0; u < turn.units.size(); ++u) {
      const SegmentUnit& unit = turn.units[u];
      if (unit.id.empty()) throw DataError(where + ": unit with empty id");
      if (unit.text.empty()) throw DataError(where + ": unit '" + unit.id + "' has empty text");
      if (normalize_text(unit.text) != unit.text) {
        throw DataError(where + ": unit '" + unit.id + "' text is not normalized");
      }
      if (unit.speaker != turn.speaker || unit.index_in_turn != u) {
        throw DataError(where + ": unit '" + unit.id + "' speaker/position mismatch");
      }
      joined.push_back(unit.text);
    }
    std::string raw;
    for (const auto& sentence : split_sentences(turn.raw_text)) {
      if (!raw.empty()) raw += ' ';
      raw += join_tokens(sentence);
    }
    if (join_tokens(joined) != raw) {
      throw DataError(where + ": unit texts do not reconstruct the raw text");
    }
  }
}

std::string AnnotationRecord::content_hash() const {
  json j{{"a", annotator_id}, {"s", segment_id}, {"l", labels.tags()}};
  if (completed_text) j["c"] = *completed_text;
  return hash_hex(j.dump());
}

AnnotationRecord make_record(const Taxonomy& taxonomy, const AnnotationDraft& draft) {
  if (draft.segment_id.empty()) throw DataError("annotation without segment id");
  if (draft.annotator_id.empty()) throw DataError("annotation without annotator id");
  return AnnotationRecord{draft.segment_id, draft.annotator_id,
                          taxonomy.make_label_set(draft.labels), draft.completed_text,
                          draft.created_at};
}

CorpusIndex::CorpusIndex(const std::vector<Conversation>& conversations)
    : conversations_(&conversations) {
  for (std::size_t c = 0; c < conversations.size(); ++c) {
    for (std::size_t t = 0; t < conversations[c].turns.size(); ++t) {
      const auto& units = conversations[c].turns[t].units;
      for (std::size_t u = 0; u < units.size(); ++u) {
        if (!locations_.emplace(units[u].id, UnitLocation{c, t, u}).second) {
          throw DataError("duplicate segment id '" + units[u].id + "'");
        }
        order_.push_back(units[u].id);
      }
    }
  }
}

const UnitLocation* CorpusIndex::find(const std::string& segment_id) const {
  auto it = locations_.find(segment_id);
  return it == locations_.end() ? nullptr : &it->second;
}

const SegmentUnit& CorpusIndex::unit(const UnitLocation& loc) const {
  return (*conversations_)[loc.conversation].turns[loc.turn].units[loc.unit];
}

std::vector<const AnnotationRecord*> AnnotatedCorpus::annotations_for(
    const std::string& segment_id) const {
  std::vector<const AnnotationRecord*> out;
  for (const auto& r : records) {
    if (r.segment_id == segment_id) out.push_back(&r);
  }
  return out;
}

std::map<std::string, LabelSet> AnnotatedCorpus::latest_labels(
    const std::string& annotator_id) const {
  std::map<std::string, LabelSet> out;
  for (const auto& r : records) {
    if (!annotator_id.empty() && r.annotator_id != annotator_id) continue;
    out.insert_or_assign(r.segment_id, r.labels);
  }
  return out;
}

std::vector<std::string> AnnotatedCorpus::annotators() const {
  std::set<std::string> ids;
  for (const auto& r : records) ids.insert(r.annotator_id);
  return {ids.begin(), ids.end()};
}

AnnotatedCorpus attach_annotations(std::vector<Conversation> corpus,
                                   const std::vector<AnnotationDraft>& drafts,
                                   const Taxonomy& taxonomy) {
  AnnotatedCorpus out{std::move(corpus), {}};
  CorpusIndex index(out.conversations);
  std::vector<std::string> unresolved;
  for (const auto& d : drafts) {
    if (!index.find(d.segment_id)) unresolved.push_back(d.segment_id);
  }
  if (!unresolved.empty()) {
    throw DataError("annotations reference unknown segment ids: " + join_tokens(unresolved, ", "));
  }
  for (const auto& d : drafts) out.records.push_back(make_record(taxonomy, d));
  return out;
}

AnnotatedCorpus parse_corpus(std::istream& in, const std::string& source,
                             const Taxonomy& taxonomy) {
  AnnotatedCorpus corpus;
  std::set<std::string> conversation_ids;
  std::set<std::string> segment_ids;
  std::vector<std::pair<std::size_t, AnnotationDraft>> drafts;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;

  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = parse_line(line, source, lineno);
    if (!header) {
      if (lineno != 1) throw ParseError(source, lineno, "corpus header must be the first line");
      check_header(j, kCorpusFormat, source);
      header = true;
      continue;
    }
    Fields f{j, source, lineno};
    Conversation c;
    c.id = f.str("id");
    if (!conversation_ids.insert(c.id).second) {
      throw f.error("duplicate conversation id '" + c.id + "'");
    }
    for (const auto& tj : f.array("turns")) {
      if (!tj.is_object()) throw f.error("turn must be an object");
      Fields tf{tj, source, lineno};
      Turn turn;
      auto speaker = speaker_from_string(tf.str("speaker"));
      if (!speaker) throw f.error("unknown speaker '" + tf.str("speaker") + "'");
      turn.speaker = *speaker;
      turn.raw_text = tf.str("raw_text");
      for (const auto& uj : tf.array("units")) {
        if (!uj.is_object()) throw f.error("unit must be an object");
        Fields uf{uj, source, lineno};
        SegmentUnit unit{uf.str("id"), uf.str("text"), turn.speaker, turn.units.size()};
        if (!segment_ids.insert(unit.id).second) {
          throw f.error("duplicate segment id '" + unit.id + "'");
        }
        turn.units.push_back(std::move(unit));
      }
      c.turns.push_back(std::move(turn));
    }
    try {
      check_conversation(c);
    } catch (const DataError& e) {
      throw f.error(e.what());
    }
    if (auto it = j.find("annotations"); it != j.end()) {
      if (!it->is_array()) throw f.error("annotations must be an array");
      for (const auto& aj : *it) {
        if (!aj.is_object()) throw f.error("annotation must be an object");
        drafts.emplace_back(lineno, draft_from_json(Fields{aj, source, lineno}));
      }
    }
    corpus.conversations.push_back(std::move(c));
  }
  if (!header) throw ParseError(source, std::max<std::size_t>(lineno, 1), "missing corpus header");

  for (const auto& [at, d] : drafts) {
    if (!segment_ids.count(d.segment_id)) {
      throw ParseError(source, at, "annotation on unknown segment '" + d.segment_id + "'");
    }
    corpus.records.push_back(record_at(taxonomy, d, source, at));
  }
  return corpus;
}

void write_corpus(std::ostream& out, const AnnotatedCorpus& corpus) {
  out << json{{"format", kCorpusFormat}, {"schema_version", kCorpusSchemaVersion}}.dump() << '\n';
  CorpusIndex index(corpus.conversations);
  std::vector<std::vector<const AnnotationRecord*>> per_conversation(corpus.conversations.size());
  for (const auto& r : corpus.records) {
    const UnitLocation* loc = index.find(r.segment_id);
    if (!loc) throw DataError("annotation on unknown segment '" + r.segment_id + "'");
    per_conversation[loc->conversation].push_back(&r);
  }
  for (std::size_t c = 0; c < corpus.conversations.size(); ++c) {
    const Conversation& conv = corpus.conversations[c];
    json turns = json::array();
    for (const auto& turn : conv.turns) {
      json units = json::array();
      for (const auto& u : turn.units) units.push_back({{"id", u.id}, {"text", u.text}});
      turns.push_back(
          {{"speaker", to_string(turn.speaker)}, {"raw_text", turn.raw_text}, {"units", units}});
    }
    json j{{"id", conv.id}, {"turns", turns}};
    if (!per_conversation[c].empty()) {
      json anns = json::array();
      for (const auto* r : per_conversation[c]) anns.push_back(record_to_json(*r));
      j["annotations"] = anns;
    }
    out << j.dump() << '\n';
  }
}

std::vector<Conversation> read_corpus(const std::filesystem::path& path) {
  return read_annotated_corpus(path).conversations;
}

AnnotatedCorpus read_annotated_corpus(const std::filesystem::path& path,
                                      const Taxonomy& taxonomy) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file " + path.string());
  return parse_corpus(in, path.string(), taxonomy);
}

void write_corpus(const std::vector<Conversation>& conversations,
                  const std::filesystem::path& path) {
  write_corpus(AnnotatedCorpus{conversations, {}}, path);
}

void write_corpus(const AnnotatedCorpus& corpus, const std::filesystem::path& path) {
  std::ostringstream buffer;
  write_corpus(buffer, corpus);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write corpus file " + path.string());
  out << buffer.str();
  if (!out) throw DataError("failed writing corpus file " + path.string());
}

std::vector<Conversation> ingest_turns(std::istream& in, const std::string& source) {
  std::vector<Conversation> out;
  std::set<std::string> closed;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto tab1 = line.find('\t');
    auto tab2 = tab1 == std::string::npos ? tab1 : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos) {
      throw ParseError(source, lineno, "expected conversation_id<TAB>speaker<TAB>text");
    }
    std::string conv_id = line.substr(0, tab1);
    std::string speaker_name = line.substr(tab1 + 1, tab2 - tab1 - 1);
    std::string text = line.substr(tab2 + 1);
    if (conv_id.empty()) throw ParseError(source, lineno, "empty conversation id");
    auto speaker = speaker_from_string(speaker_name);
    if (!speaker) throw ParseError(source, lineno, "unknown speaker '" + speaker_name + "'");

    if (out.empty() || out.back().id != conv_id) {
      if (!out.empty()) closed.insert(out.back().id);
      if (closed.count(conv_id)) {
        throw ParseError(source, lineno, "turns of conversation '" + conv_id + "' are not contiguous");
      }
      out.push_back(Conversation{conv_id, {}});
    }
    Conversation& conv = out.back();
    Turn turn{*speaker, text, {}};
    std::vector<std::string> texts;
    for (const auto& sentence : split_sentences(text)) texts.push_back(join_tokens(sentence));
    if (texts.empty()) throw ParseError(source, lineno, "turn text is empty after normalization");
    set_units(turn, conv.id, conv.turns.size(), texts);
    conv.turns.push_back(std::move(turn));
  }
  return out;
}

std::string now_iso8601() { return to_iso8601(std::chrono::system_clock::now()); }

std::string to_iso8601(std::chrono::system_clock::time_point now) {
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()) % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms.count()));
  return out;
}

std::vector<LogEvent> read_annotation_log(const std::filesystem::path& path,
                                          const Taxonomy& taxonomy) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open annotation log " + path.string());
  const std::string source = path.string();
  std::vector<LogEvent> events;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = parse_line(line, source, lineno);
    if (!header) {
      check_header(j, kLogFormat, source);
      header = true;
      continue;
    }
    Fields f{j, source, lineno};
    std::string kind = f.str("kind");
    if (kind == "annotator") {
      events.push_back({LogEvent::Kind::annotator, f.str("annotator_id"),
                        f.opt_str("created_at").value_or(""), std::nullopt});
    } else if (kind == "annotation") {
      auto draft = draft_from_json(f);
      auto record = record_at(taxonomy, draft, source, lineno);
      if (auto hash = f.opt_str("content_hash"); hash && *hash != record.content_hash()) {
        throw f.error("content hash mismatch");
      }
      events.push_back({LogEvent::Kind::annotation, record.annotator_id, record.created_at,
                        std::move(record)});
    } else {
      throw f.error("unknown log record kind '" + kind + "'");
    }
  }
  return events;
}

AnnotationLogWriter::AnnotationLogWriter(const std::filesystem::path& path) {
  bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  out_.open(path, std::ios::app | std::ios::binary);
  if (!out_) throw DataError("cannot open annotation log " + path.string() + " for append");
  if (fresh) {
    write_line(json{{"format", kLogFormat}, {"schema_version", kCorpusSchemaVersion}}.dump());
  }
}

void AnnotationLogWriter::append_annotator(const std::string& annotator_id,
                                           const std::string& created_at) {
  write_line(
      json{{"kind", "annotator"}, {"annotator_id", annotator_id}, {"created_at", created_at}}
          .dump());
}

void AnnotationLogWriter::append(const AnnotationRecord& record) {
  json j = record_to_json(record);
  j["kind"] = "annotation";
  j["content_hash"] = record.content_hash();
  write_line(j.dump());
}

void AnnotationLogWriter::write_line(const std::string& line) {
  std::lock_guard<std::mutex> lock(mutex_);
  out_ << line << '\n';
  out_.flush();
  if (!out_) throw DataError("failed appending to annotation log");
}

}  // namespace midas
