// context.h: classifier input strings built from conversation history.
//
// A rendered input has the shape
//   <sys_unit> <u_p> <user_prev> <u_c> <user_cur>
// where sys_unit is the most recent machine segment before the current one,
// user_prev the previous segment of the current human turn, and user_cur the
// segment being classified. Missing history is written as <empty>.

#ifndef MIDAS_CONTEXT_H_
#define MIDAS_CONTEXT_H_

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "midas/corpus.h"

namespace midas {

inline constexpr std::string_view kUserPrevSeparator = "<u_p>";
inline constexpr std::string_view kUserCurSeparator = "<u_c>";
inline constexpr std::string_view kEmptyToken = "<empty>";

enum class ContextMode { text, da, da_plus_text };

const char* to_string(ContextMode mode);
std::optional<ContextMode> context_mode_from_string(std::string_view name);

struct ContextWindow {
  std::string sys_unit;
  std::string user_prev;
  std::string user_cur;

  std::string render() const;
  bool operator==(const ContextWindow&) const = default;
};

// Splits a rendered string on the two separators. Returns nullopt unless each
// separator occurs exactly once, in order.
std::optional<ContextWindow> parse_context(std::string_view rendered);

using SegmentLabels = std::map<std::string, LabelSet>;

// In da mode the history slots hold label ids (two labels joined by a space,
// in the scheme's default priority order); in da_plus_text mode the label ids
// are followed by the segment text.
// Throws DataError when the segment is missing or not human, or when a history
// segment needed by da / da_plus_text has no labels.
ContextWindow context_window(const Conversation& conversation, const std::string& segment_id,
                             ContextMode mode, const SegmentLabels& labels = {},
                             const Taxonomy& taxonomy = Taxonomy::midas());

std::string build_context(const Conversation& conversation, const std::string& segment_id,
                          ContextMode mode, const SegmentLabels& labels = {},
                          const Taxonomy& taxonomy = Taxonomy::midas());

// Label ids of a set joined by spaces, ordered by default priority.
std::string label_slot(const LabelSet& labels, const Taxonomy& taxonomy = Taxonomy::midas());

}  // namespace midas

#endif  // MIDAS_CONTEXT_H_
