#include "midas/swda.h"

#include <fstream>
#include <sstream>

#include "midas/text.h"

namespace midas {

namespace {

// Rows in the order of the published mapping; blank targets are DROP for acts
// the transfer data leaves out and UNRESOLVED for the wh-question family.
constexpr const char* kStandardTable =
    "# codes\ttarget\tSWBD-DAMSL act\n"
    "sd\tstatement non_opinion\tStatement-non-opinion\n"
    "b\tback-channeling\tAcknowledge (Backchannel)\n"
    "sv\tgeneral opinion\tStatement-opinion\n"
    "aa\tpos answer\tAgree/Accept\n"
    "%-\tabandon\tAbandoned or Turn-Exit\n"
    "ba\tappreciation\tAppreciation\n"
    "qy\tyes-no question\tYes-No-Question\n"
    "x\tDROP\tNon-verbal\n"
    "ny\tpos answer\tYes answers\n"
    "fc\tclosing\tConventional-closing\n"
    "%\tabandon\tUninterpretable\n"
    "qw\tUNRESOLVED\tWh-Question\n"
    "nn\tneg answer\tNo answers\n"
    "bk\tback-channeling\tResponse Acknowledgement\n"
    "h\tother answers\tHedge\n"
    "qy^d\tyes-no question\tDeclarative Yes-No-Question\n"
    "o,fo,bc,by,fw\tother\tOther\n"
    "bh\tback-channeling\tBackchannel in question form\n"
    "^q\tother opinion\tQuotation\n"
    "bf\tother opinion\tSummarize/reformulate\n"
    "na,ny^e\tpos answer\tAffirmative non-yes answers\n"
    "ad\ttask command\tAction-directive\n"
    "^2\tgeneral opinion\tCollaborative Completion\n"
    "b^m\tgeneral opinion\tRepeat-phrase\n"
    "qo\tUNRESOLVED\tOpen-Question\n"
    "qh\tUNRESOLVED\tRhetorical-Questions\n"
    "^h\thold\tHold before answer/agreement\n"
    "ar\tneg answer\tReject\n"
    "ng,nn^e\tneg answer\tNegative non-no answers\n"
    "br\tcomplaint\tSignal-non-understanding\n"
    "no\tother answer\tOther answers\n"
    "fp\topening\tConventional-opening\n"
    "qrr\tother\tOr-Clause\n"
    "arp,nd\tneg answer\tDispreferred answers\n"
    "t3\tDROP\t3rd-party-talk\n"
    "oo,cc,co\tother\tOffers, Options Commits\n"
    "t1\tother\tSelf-talk\n"
    "bd\tapology response\tDownplayer\n"
    "aap/am\tpos answer\tMaybe/Accept-part\n"
    "^g\tother\tTag-Question\n"
    "qw^d\tUNRESOLVED\tDeclarative Wh-Question\n"
    "fa\tapology\tApology\n"
    "ft\tthanking\tThanking\n";

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::string MappingTarget::to_string() const {
  switch (kind) {
    case Kind::tag:
      return tag;
    case Kind::drop:
      return std::string(kDropTarget);
    case Kind::unresolved:
      break;
  }
  return std::string(kUnresolvedTarget);
}

std::vector<std::string> split_codes(std::string_view cell) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(cur);
    cur.clear();
  };
  for (char c : cell) {
    if (c == ',' || c == '/') {
      flush();
    } else if (c != ' ' && c != '\t') {
      cur += c;
    }
  }
  flush();
  return out;
}

const MappingTable& MappingTable::standard() {
  static const MappingTable table = [] {
    std::istringstream in(kStandardTable);
    return parse(in, "<standard table>");
  }();
  return table;
}

std::string MappingTable::standard_text() { return kStandardTable; }

MappingTable MappingTable::parse(std::istream& in, const std::string& source,
                                 const Taxonomy& taxonomy) {
  MappingTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto cells = split_tabs(line);
    if (cells.size() < 2 || cells.size() > 3) {
      throw ParseError(source, lineno, "expected codes<TAB>target[<TAB>name]");
    }
    MappingRow row;
    row.codes = split_codes(cells[0]);
    if (row.codes.empty()) throw ParseError(source, lineno, "no source codes");
    std::string target = trim(cells[1]);
    if (target == kDropTarget) {
      row.target.kind = MappingTarget::Kind::drop;
    } else if (target == kUnresolvedTarget) {
      row.target.kind = MappingTarget::Kind::unresolved;
    } else {
      auto id = taxonomy.resolve(target);
      if (!id) throw ParseError(source, lineno, "unknown target tag '" + target + "'");
      row.target.kind = MappingTarget::Kind::tag;
      row.target.tag = *id;
    }
    if (cells.size() == 3) row.name = trim(cells[2]);
    for (const auto& code : row.codes) {
      if (!table.by_code_.emplace(code, table.rows_.size()).second) {
        throw ParseError(source, lineno, "code '" + code + "' already mapped");
      }
    }
    table.rows_.push_back(std::move(row));
  }
  return table;
}

MappingTable MappingTable::load(const std::filesystem::path& path, const Taxonomy& taxonomy) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open mapping table " + path.string());
  return parse(in, path.string(), taxonomy);
}

void MappingTable::write(std::ostream& out) const {
  out << "# codes\ttarget\tSWBD-DAMSL act\n";
  for (const auto& row : rows_) {
    out << join_tokens(row.codes, ",") << '\t' << row.target.to_string();
    if (!row.name.empty()) out << '\t' << row.name;
    out << '\n';
  }
}

const MappingTarget& MappingTable::map_tag(std::string_view code) const {
  std::string key;
  for (char c : code) {
    if (c != ' ' && c != '\t') key += c;
  }
  auto it = by_code_.find(key);
  if (it == by_code_.end()) throw DataError("unknown SWBD-DAMSL tag '" + std::string(code) + "'");
  return rows_[it->second].target;
}

std::optional<std::string> preprocess_utterance(std::string_view raw) {
  std::string text = normalize_text(raw);
  if (text.empty()) return std::nullopt;
  return text;
}

std::vector<SwdaUtterance> read_swda(std::istream& in, const std::string& source) {
  std::vector<SwdaUtterance> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split_tabs(line);
    if (cells.size() != 4) {
      throw ParseError(source, lineno, "expected conversation<TAB>speaker<TAB>act_tag<TAB>text");
    }
    SwdaUtterance u{trim(cells[0]), trim(cells[1]), trim(cells[2]), cells[3], lineno};
    if (u.conversation_id.empty()) throw ParseError(source, lineno, "empty conversation id");
    if (u.speaker.empty()) throw ParseError(source, lineno, "empty speaker");
    out.push_back(std::move(u));
  }
  return out;
}

std::vector<SwdaUtterance> read_swda(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open transcript file " + path.string());
  return read_swda(in, path.string());
}

UnresolvedPolicy UnresolvedPolicy::parse(std::string_view text, const Taxonomy& taxonomy) {
  if (text == "drop") return {};
  constexpr std::string_view prefix = "map_to:";
  if (text.substr(0, prefix.size()) == prefix) {
    std::string name = trim(text.substr(prefix.size()));
    auto id = taxonomy.resolve(name);
    if (!id) throw UsageError("unknown tag '" + name + "' in unresolved policy");
    return {*id};
  }
  throw UsageError("unresolved policy must be 'drop' or 'map_to:<tag>'");
}

std::vector<DAExample> build_transfer_set(const std::vector<SwdaUtterance>& utterances,
                                          const MappingTable& table,
                                          const UnresolvedPolicy& policy,
                                          const Taxonomy& taxonomy, TransferStats* stats,
                                          const std::string& source) {
  TransferStats local;
  std::vector<DAExample> out;
  std::string conv;
  std::vector<std::pair<std::string, std::string>> said;  // non-empty (speaker, text)
  std::string last_speaker;
  std::string run_prev;  // previous text of last_speaker since the other spoke
  std::size_t index = 0;
  for (const auto& u : utterances) {
    if (u.conversation_id != conv) {
      conv = u.conversation_id;
      said.clear();
      last_speaker.clear();
      run_prev.clear();
      index = 0;
    }
    MappingTarget target;
    try {
      target = table.map_tag(u.act_tag);
    } catch (const DataError& e) {
      throw ParseError(source, u.line, e.what());
    }
    auto text = preprocess_utterance(u.text);

    std::string sys;
    for (auto it = said.rbegin(); it != said.rend(); ++it) {
      if (it->first != u.speaker) {
        sys = it->second;
        break;
      }
    }
    std::string prev = u.speaker == last_speaker ? run_prev : "";

    std::optional<std::string> tag;
    if (target.kind == MappingTarget::Kind::tag) {
      tag = target.tag;
    } else if (target.kind == MappingTarget::Kind::unresolved && policy.map_to) {
      tag = policy.map_to;
    }
    if (!text) {
      ++local.dropped_empty;
    } else if (target.kind == MappingTarget::Kind::drop) {
      ++local.dropped_act;
    } else if (!tag) {
      ++local.dropped_unresolved;
    } else {
      taxonomy.make_label_set({*tag});
      ContextWindow w{sys.empty() ? std::string(kEmptyToken) : sys,
                      prev.empty() ? std::string(kEmptyToken) : prev, *text};
      out.push_back({conv + "-" + std::to_string(index), w.render(), {*tag}});
      ++local.emitted;
    }
    if (text) {
      if (u.speaker != last_speaker) run_prev.clear();
      last_speaker = u.speaker;
      run_prev = *text;
      said.emplace_back(u.speaker, *text);
    }
    ++index;
  }
  if (stats) *stats = local;
  return out;
}

}  // namespace midas
