#include "midas/context.h"

#include <algorithm>

#include "midas/text.h"

namespace midas {

const char* to_string(ContextMode mode) {
  switch (mode) {
    case ContextMode::text: return "text";
    case ContextMode::da: return "da";
    case ContextMode::da_plus_text: return "da_plus_text";
  }
  return "unknown";
}

std::optional<ContextMode> context_mode_from_string(std::string_view name) {
  if (name == "text") return ContextMode::text;
  if (name == "da") return ContextMode::da;
  if (name == "da_plus_text" || name == "da+text") return ContextMode::da_plus_text;
  return std::nullopt;
}

std::string ContextWindow::render() const {
  std::string out;
  out.reserve(sys_unit.size() + user_prev.size() + user_cur.size() + 12);
  out += sys_unit;
  out += ' ';
  out += kUserPrevSeparator;
  out += ' ';
  out += user_prev;
  out += ' ';
  out += kUserCurSeparator;
  out += ' ';
  out += user_cur;
  return out;
}

std::optional<ContextWindow> parse_context(std::string_view rendered) {
  const std::string up = " " + std::string(kUserPrevSeparator) + " ";
  const std::string uc = " " + std::string(kUserCurSeparator) + " ";
  auto p = rendered.find(up);
  if (p == std::string_view::npos) return std::nullopt;
  auto c = rendered.find(uc, p + up.size());
  if (c == std::string_view::npos) return std::nullopt;
  ContextWindow w{std::string(rendered.substr(0, p)),
                  std::string(rendered.substr(p + up.size(), c - p - up.size())),
                  std::string(rendered.substr(c + uc.size()))};
  for (const auto* field : {&w.sys_unit, &w.user_prev, &w.user_cur}) {
    if (field->find(kUserPrevSeparator) != std::string::npos ||
        field->find(kUserCurSeparator) != std::string::npos) {
      return std::nullopt;
    }
  }
  return w;
}

std::string label_slot(const LabelSet& labels, const Taxonomy& taxonomy) {
  auto order = taxonomy.default_priority();
  std::vector<std::string> ids = labels.tags();
  std::stable_sort(ids.begin(), ids.end(), [&](const std::string& a, const std::string& b) {
    return order.rank(taxonomy.tag(a).category) < order.rank(taxonomy.tag(b).category);
  });
  return join_tokens(ids);
}

namespace {

std::string history_slot(const SegmentUnit* unit, ContextMode mode, const SegmentLabels& labels,
                         const Taxonomy& taxonomy) {
  if (!unit) return std::string(kEmptyToken);
  if (mode == ContextMode::text) return unit->text;
  auto it = labels.find(unit->id);
  if (it == labels.end()) {
    throw DataError("context mode " + std::string(to_string(mode)) + " needs labels for segment '" +
                    unit->id + "'");
  }
  std::string slot = label_slot(it->second, taxonomy);
  if (mode == ContextMode::da_plus_text) slot += " " + unit->text;
  return slot;
}

}  // namespace

ContextWindow context_window(const Conversation& conversation, const std::string& segment_id,
                             ContextMode mode, const SegmentLabels& labels,
                             const Taxonomy& taxonomy) {
  const SegmentUnit* sys = nullptr;
  for (const auto& turn : conversation.turns) {
    for (std::size_t u = 0; u < turn.units.size(); ++u) {
      const SegmentUnit& unit = turn.units[u];
      if (unit.id == segment_id) {
        if (turn.speaker != Speaker::human) {
          throw DataError("segment '" + segment_id + "' is not a human segment");
        }
        const SegmentUnit* prev = u > 0 ? &turn.units[u - 1] : nullptr;
        return ContextWindow{history_slot(sys, mode, labels, taxonomy),
                             history_slot(prev, mode, labels, taxonomy),
                             unit.text};
      }
      if (turn.speaker == Speaker::machine) sys = &unit;
    }
  }
  throw DataError("segment '" + segment_id + "' not found in conversation '" + conversation.id +
                  "'");
}

std::string build_context(const Conversation& conversation, const std::string& segment_id,
                          ContextMode mode, const SegmentLabels& labels,
                          const Taxonomy& taxonomy) {
  return context_window(conversation, segment_id, mode, labels, taxonomy).render();
}

}  // namespace midas
