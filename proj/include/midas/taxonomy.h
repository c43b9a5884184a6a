// taxonomy.h: the dialog-act scheme tree and label-set legality rules.
//
// The scheme is two trees (semantic request, functional request). Internal
// nodes are types, classes, categories and subcategories; tags are the leaves
// and are the only labels that can be assigned to a segment. A segment carries
// one or two tags, and two tags may not come from an exclusive category pair.
//
// Every tag belongs to exactly one category for priority and exclusivity
// purposes: its nearest ancestor of kind `category`, or the tag itself when it
// hangs directly off a class or type (statement_non_opinion, the functional
// tags).

#ifndef MIDAS_TAXONOMY_H_
#define MIDAS_TAXONOMY_H_

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "midas/error.h"

namespace midas {

enum class NodeKind { type, class_, category, subcategory, tag };

const char* to_string(NodeKind kind);
std::optional<NodeKind> node_kind_from_string(std::string_view name);

struct SchemeNode {
  std::string id;
  NodeKind kind = NodeKind::tag;
  std::string parent;  // empty for roots
  std::string display_name;
  std::string description;
  std::string example;

  bool operator==(const SchemeNode&) const = default;
};

struct Tag {
  std::string id;
  std::string display_name;
  std::vector<std::string> path;  // root first, tag id last
  std::string category;
  std::size_t index = 0;          // position in the tag vocabulary
};

// Two categories whose tags may not co-occur in one label set.
struct ExclusionRule {
  std::string first;
  std::string second;

  bool operator==(const ExclusionRule&) const = default;
};

// One or two tag ids that passed validation, kept in vocabulary order.
// Only a Taxonomy can construct one.
class LabelSet {
 public:
  const std::vector<std::string>& tags() const { return tags_; }
  std::size_t size() const { return tags_.size(); }
  bool contains(std::string_view tag) const;
  std::string to_string() const;  // space separated

  bool operator==(const LabelSet&) const = default;
  auto operator<=>(const LabelSet&) const = default;

 private:
  friend class Taxonomy;
  explicit LabelSet(std::vector<std::string> tags) : tags_(std::move(tags)) {}
  std::vector<std::string> tags_;
};

enum class Rule { empty_set, duplicate_tag, max_two_tags, exclusive_categories };

const char* to_string(Rule rule);

struct Violation {
  Rule rule;
  std::vector<std::string> tags;
  std::string message;
};

struct ValidationResult {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

class LabelSetError : public DataError {
 public:
  explicit LabelSetError(ValidationResult result)
      : DataError("invalid label set: " + result.summary()), result_(std::move(result)) {}

  const ValidationResult& result() const { return result_; }

 private:
  ValidationResult result_;
};

// Category ranking used to pick at most two tags out of a larger candidate set.
class PriorityOrder {
 public:
  const std::vector<std::string>& categories() const { return categories_; }
  std::size_t rank(std::string_view category) const;

 private:
  friend class Taxonomy;
  explicit PriorityOrder(std::vector<std::string> categories)
      : categories_(std::move(categories)) {}
  std::vector<std::string> categories_;
};

class Taxonomy {
 public:
  // The built-in dialog-act scheme (23 tags). Constructed once, immutable.
  static const Taxonomy& midas();

  // Builds and checks a scheme. Throws DataError naming the offending node path.
  static Taxonomy from_parts(std::vector<SchemeNode> nodes, std::vector<ExclusionRule> exclusions,
                             std::vector<std::pair<std::string, std::string>> aliases,
                             const std::string& source = "<scheme>");

  // Declarative scheme file: JSON lines, a header record followed by one record
  // per node (with a parent pointer), exclusion rule, or alias.
  static Taxonomy parse(std::istream& in, const std::string& source);
  static Taxonomy load(const std::filesystem::path& path);
  // Canonical form: nodes in depth-first tree order, then exclusions, then
  // aliases sorted by alias.
  void write(std::ostream& out) const;
  std::string to_scheme_text() const;

  // Markdown reference table of all tags.
  std::string documentation_table() const;

  std::size_t tag_count() const { return tags_.size(); }
  const std::vector<Tag>& tags() const { return tags_; }
  const std::vector<SchemeNode>& nodes() const { return nodes_; }
  const std::vector<std::string>& categories() const { return categories_; }
  const std::vector<ExclusionRule>& exclusions() const { return exclusions_; }
  const std::map<std::string, std::string>& aliases() const { return aliases_; }

  const Tag* find(std::string_view id) const;
  const Tag& tag(std::string_view id) const;  // throws UnknownTagError
  const SchemeNode* node(std::string_view id) const;

  // Maps an id, a display name, or an alias to a canonical tag id.
  std::optional<std::string> resolve(std::string_view name) const;

  bool exclusive(std::string_view tag_a, std::string_view tag_b) const;

  // Throws UnknownTagError for unknown ids; every other problem is a violation.
  ValidationResult validate(const std::vector<std::string>& ids) const;
  // Throws LabelSetError when validation fails.
  LabelSet make_label_set(const std::vector<std::string>& ids) const;

  PriorityOrder default_priority() const;
  // `leading` categories first, then every remaining category in tree order.
  PriorityOrder priority(const std::vector<std::string>& leading) const;

  // Picks up to two candidates by category rank (tree order within a rank),
  // skipping any candidate that would make the set illegal.
  LabelSet prioritize(const std::vector<std::string>& candidates,
                      const PriorityOrder& order) const;

 private:
  Taxonomy() = default;

  std::vector<SchemeNode> nodes_;  // depth-first order
  std::vector<Tag> tags_;
  std::vector<std::string> categories_;
  std::vector<ExclusionRule> exclusions_;
  std::map<std::string, std::string> aliases_;  // slugified alias -> tag id
  std::map<std::string, std::string> alias_spelling_;  // slugified alias -> as written
  std::map<std::string, std::size_t, std::less<>> tag_index_;
  std::map<std::string, std::size_t, std::less<>> node_index_;
};

// The default priority list for the built-in scheme.
extern const std::vector<std::string> kDefaultPriorityHead;

}  // namespace midas

#endif  // MIDAS_TAXONOMY_H_
