// swda.h: SWBD-DAMSL tags to dialog-act tags, and single-label transfer data.

#ifndef MIDAS_SWDA_H_
#define MIDAS_SWDA_H_

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "midas/classifier.h"

namespace midas {

inline constexpr std::string_view kDropTarget = "DROP";
inline constexpr std::string_view kUnresolvedTarget = "UNRESOLVED";

struct MappingTarget {
  enum class Kind { tag, drop, unresolved } kind = Kind::drop;
  std::string tag;  // set for Kind::tag

  std::string to_string() const;
  bool operator==(const MappingTarget&) const = default;
};

struct MappingRow {
  std::vector<std::string> codes;  // member codes of a combined entry
  MappingTarget target;
  std::string name;  // SWBD-DAMSL act name
};

// Table file: one rule per line, tab separated
//   codes <TAB> target <TAB> name
// where codes is a comma or slash separated list ("o,fo,bc,by,fw"), target a
// tag name (ids, display names and scheme aliases accepted), DROP, or
// UNRESOLVED. '#' starts a comment line.
class MappingTable {
 public:
  // The built-in table with one row per source act group.
  static const MappingTable& standard();
  static std::string standard_text();

  static MappingTable parse(std::istream& in, const std::string& source,
                            const Taxonomy& taxonomy = Taxonomy::midas());
  static MappingTable load(const std::filesystem::path& path,
                           const Taxonomy& taxonomy = Taxonomy::midas());
  // Writes canonical tag ids.
  void write(std::ostream& out) const;

  const std::vector<MappingRow>& rows() const { return rows_; }
  std::size_t code_count() const { return by_code_.size(); }

  // Throws DataError naming an unknown code.
  const MappingTarget& map_tag(std::string_view code) const;

 private:
  std::vector<MappingRow> rows_;
  std::map<std::string, std::size_t, std::less<>> by_code_;
};

// Splits a combined code cell into member codes: "na, ny^e" -> {na, ny^e};
// whitespace inside a code is removed ("% -" -> "%-").
std::vector<std::string> split_codes(std::string_view cell);

// Normalized text, or nullopt when nothing is left (the utterance is dropped).
std::optional<std::string> preprocess_utterance(std::string_view raw);

struct SwdaUtterance {
  std::string conversation_id;
  std::string speaker;
  std::string act_tag;
  std::string text;
  std::size_t line = 0;
};

// Tab separated: conversation_id <TAB> speaker <TAB> act_tag <TAB> text.
std::vector<SwdaUtterance> read_swda(std::istream& in, const std::string& source);
std::vector<SwdaUtterance> read_swda(const std::filesystem::path& path);

struct UnresolvedPolicy {
  std::optional<std::string> map_to;  // empty: drop

  // "drop" or "map_to:<tag>".
  static UnresolvedPolicy parse(std::string_view text, const Taxonomy& taxonomy = Taxonomy::midas());
};

struct TransferStats {
  std::size_t emitted = 0;
  std::size_t dropped_act = 0;
  std::size_t dropped_unresolved = 0;
  std::size_t dropped_empty = 0;
};

// Text-mode context examples with exactly one tag each, in input order. The
// other speaker's last non-empty utterance fills the system slot; the previous
// utterance of the same speaker since the other last spoke fills the
// previous-segment slot. Unknown act tags raise ParseError at their line.
std::vector<DAExample> build_transfer_set(const std::vector<SwdaUtterance>& utterances,
                                          const MappingTable& table,
                                          const UnresolvedPolicy& policy,
                                          const Taxonomy& taxonomy = Taxonomy::midas(),
                                          TransferStats* stats = nullptr,
                                          const std::string& source = "<swda>");

}  // namespace midas

#endif  // MIDAS_SWDA_H_
