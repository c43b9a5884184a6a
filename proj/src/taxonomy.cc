#include "midas/taxonomy.h"

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "json.hpp"
#include "midas/text.h"

namespace midas {

using nlohmann::json;

const std::vector<std::string> kDefaultPriorityHead = {"answer", "command", "opinion",
                                                       "statement_non_opinion", "question"};

const char* to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::type: return "type";
    case NodeKind::class_: return "class";
    case NodeKind::category: return "category";
    case NodeKind::subcategory: return "subcategory";
    case NodeKind::tag: return "tag";
  }
  return "unknown";
}

std::optional<NodeKind> node_kind_from_string(std::string_view name) {
  for (auto kind : {NodeKind::type, NodeKind::class_, NodeKind::category, NodeKind::subcategory,
                    NodeKind::tag}) {
    if (name == to_string(kind)) return kind;
  }
  return std::nullopt;
}

const char* to_string(Rule rule) {
  switch (rule) {
    case Rule::empty_set: return "empty_set";
    case Rule::duplicate_tag: return "duplicate_tag";
    case Rule::max_two_tags: return "max_two_tags";
    case Rule::exclusive_categories: return "exclusive_categories";
  }
  return "unknown";
}

bool LabelSet::contains(std::string_view tag) const {
  return std::find(tags_.begin(), tags_.end(), tag) != tags_.end();
}

std::string LabelSet::to_string() const { return join_tokens(tags_); }

std::string ValidationResult::summary() const {
  if (ok()) return "ok";
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "; ";
    out += midas::to_string(v.rule);
    out += ": ";
    out += v.message;
  }
  return out;
}

std::size_t PriorityOrder::rank(std::string_view category) const {
  auto it = std::find(categories_.begin(), categories_.end(), category);
  return static_cast<std::size_t>(it - categories_.begin());
}

namespace {

std::string node_path(const std::map<std::string, const SchemeNode*>& by_id,
                      const SchemeNode& node) {
  std::vector<std::string> parts{node.id};
  std::set<std::string> seen{node.id};
  const SchemeNode* cur = &node;
  while (!cur->parent.empty()) {
    auto it = by_id.find(cur->parent);
    if (it == by_id.end() || seen.count(cur->parent)) {
      parts.push_back(cur->parent + "?");
      break;
    }
    cur = it->second;
    seen.insert(cur->id);
    parts.push_back(cur->id);
  }
  std::reverse(parts.begin(), parts.end());
  return join_tokens(parts, "/");
}

}  // namespace

Taxonomy Taxonomy::from_parts(std::vector<SchemeNode> nodes, std::vector<ExclusionRule> exclusions,
                              std::vector<std::pair<std::string, std::string>> aliases,
                              const std::string& source) {
  std::map<std::string, const SchemeNode*> by_id;
  auto fail = [&](const SchemeNode& n, const std::string& detail) -> DataError {
    return DataError(source + ": " + node_path(by_id, n) + ": " + detail);
  };

  for (const auto& n : nodes) {
    if (n.id.empty() || slugify(n.id) != n.id) {
      throw fail(n, "node id must be non-empty snake_case");
    }
    if (!by_id.emplace(n.id, &n).second) throw fail(n, "duplicate node id '" + n.id + "'");
  }

  std::map<std::string, std::vector<const SchemeNode*>> children;
  std::vector<const SchemeNode*> roots;
  for (const auto& n : nodes) {
    if (n.parent.empty()) {
      if (n.kind != NodeKind::type) throw fail(n, "root node must be of kind type");
      roots.push_back(&n);
      continue;
    }
    auto parent = by_id.find(n.parent);
    if (parent == by_id.end()) throw fail(n, "unknown parent '" + n.parent + "'");
    if (n.kind == NodeKind::type) throw fail(n, "type node must be a root");
    if (parent->second->kind == NodeKind::tag) {
      throw fail(*parent->second, "tag must be a leaf but has child '" + n.id + "'");
    }
    children[n.parent].push_back(&n);
  }
  if (roots.empty()) throw DataError(source + ": scheme has no root node");

  Taxonomy t;
  std::vector<std::string> path;
  std::function<void(const SchemeNode&, const std::string&)> visit =
      [&](const SchemeNode& n, const std::string& category) {
        path.push_back(n.id);
        t.node_index_.emplace(n.id, t.nodes_.size());
        t.nodes_.push_back(n);
        std::string cat = n.kind == NodeKind::category ? n.id : category;
        if (n.kind == NodeKind::tag) {
          Tag tag;
          tag.id = n.id;
          tag.display_name = n.display_name.empty() ? n.id : n.display_name;
          tag.path = path;
          tag.category = cat.empty() ? n.id : cat;
          tag.index = t.tags_.size();
          t.tag_index_.emplace(tag.id, tag.index);
          if (std::find(t.categories_.begin(), t.categories_.end(), tag.category) ==
              t.categories_.end()) {
            t.categories_.push_back(tag.category);
          }
          t.tags_.push_back(std::move(tag));
        } else {
          auto it = children.find(n.id);
          if (it == children.end()) throw fail(n, "non-tag node has no children");
          for (const auto* c : it->second) visit(*c, cat);
        }
        path.pop_back();
      };
  for (const auto* r : roots) visit(*r, "");

  if (t.nodes_.size() != nodes.size()) {
    for (const auto& n : nodes) {
      if (!t.node_index_.count(n.id)) throw fail(n, "node is not reachable from a root (cycle)");
    }
  }

  std::set<std::pair<std::string, std::string>> seen_rules;
  for (auto& rule : exclusions) {
    for (const auto& c : {rule.first, rule.second}) {
      if (std::find(t.categories_.begin(), t.categories_.end(), c) == t.categories_.end()) {
        throw DataError(source + ": exclusion names unknown category '" + c + "'");
      }
    }
    if (rule.first == rule.second) {
      throw DataError(source + ": exclusion pairs category '" + rule.first + "' with itself");
    }
    auto key = std::minmax(rule.first, rule.second);
    if (!seen_rules.emplace(key.first, key.second).second) {
      throw DataError(source + ": duplicate exclusion " + rule.first + " x " + rule.second);
    }
    t.exclusions_.push_back(rule);
  }

  for (const auto& [alias, target] : aliases) {
    std::string key = slugify(alias);
    if (key.empty()) throw DataError(source + ": empty alias");
    if (!t.tag_index_.count(target)) {
      throw DataError(source + ": alias '" + alias + "' targets unknown tag '" + target + "'");
    }
    if (t.tag_index_.count(key) && key != target) {
      throw DataError(source + ": alias '" + alias + "' shadows tag '" + key + "'");
    }
    if (!t.aliases_.emplace(key, target).second) {
      throw DataError(source + ": duplicate alias '" + alias + "'");
    }
    t.alias_spelling_.emplace(key, alias);
  }
  return t;
}

Taxonomy Taxonomy::parse(std::istream& in, const std::string& source) {
  std::vector<SchemeNode> nodes;
  std::vector<ExclusionRule> exclusions;
  std::vector<std::pair<std::string, std::string>> aliases;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;

  auto str_field = [&](const json& j, const char* key, bool required) -> std::string {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
      if (required) throw ParseError(source, lineno, std::string("missing field '") + key + "'");
      return {};
    }
    if (!it->is_string()) {
      throw ParseError(source, lineno, std::string("field '") + key + "' must be a string");
    }
    return it->get<std::string>();
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(source, lineno, std::string("malformed record: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(source, lineno, "record must be an object");
    std::string record = str_field(j, "record", true);
    if (!header) {
      if (record != "header" || str_field(j, "format", true) != "midas-scheme") {
        throw ParseError(source, lineno, "expected midas-scheme header record");
      }
      auto v = j.find("version");
      if (v == j.end() || !v->is_number_integer() || v->get<int>() != 1) {
        throw ParseError(source, lineno, "unsupported scheme version");
      }
      header = true;
      continue;
    }
    if (record == "node") {
      SchemeNode n;
      n.id = str_field(j, "id", true);
      auto kind = node_kind_from_string(str_field(j, "kind", true));
      if (!kind) throw ParseError(source, lineno, "node '" + n.id + "' has unknown kind");
      n.kind = *kind;
      n.parent = str_field(j, "parent", false);
      n.display_name = str_field(j, "display", false);
      n.description = str_field(j, "description", false);
      n.example = str_field(j, "example", false);
      nodes.push_back(std::move(n));
    } else if (record == "exclusive") {
      auto cats = j.find("categories");
      if (cats == j.end() || !cats->is_array() || cats->size() != 2 ||
          !(*cats)[0].is_string() || !(*cats)[1].is_string()) {
        throw ParseError(source, lineno, "exclusive record needs two category names");
      }
      exclusions.push_back({(*cats)[0].get<std::string>(), (*cats)[1].get<std::string>()});
    } else if (record == "alias") {
      aliases.emplace_back(str_field(j, "alias", true), str_field(j, "tag", true));
    } else {
      throw ParseError(source, lineno, "unknown record type '" + record + "'");
    }
  }
  if (!header) throw ParseError(source, lineno, "missing header record");
  return from_parts(std::move(nodes), std::move(exclusions), std::move(aliases), source);
}

Taxonomy Taxonomy::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open scheme file " + path.string());
  return parse(in, path.string());
}

void Taxonomy::write(std::ostream& out) const {
  out << json{{"record", "header"}, {"format", "midas-scheme"}, {"version", 1}}.dump() << '\n';
  for (const auto& n : nodes_) {
    json j{{"record", "node"}, {"id", n.id}, {"kind", to_string(n.kind)}};
    j["parent"] = n.parent.empty() ? json(nullptr) : json(n.parent);
    if (!n.display_name.empty()) j["display"] = n.display_name;
    if (!n.description.empty()) j["description"] = n.description;
    if (!n.example.empty()) j["example"] = n.example;
    out << j.dump() << '\n';
  }
  for (const auto& r : exclusions_) {
    out << json{{"record", "exclusive"}, {"categories", {r.first, r.second}}}.dump() << '\n';
  }
  for (const auto& [key, target] : aliases_) {
    out << json{{"record", "alias"}, {"alias", alias_spelling_.at(key)}, {"tag", target}}.dump()
        << '\n';
  }
}

std::string Taxonomy::to_scheme_text() const {
  std::ostringstream out;
  write(out);
  return out.str();
}

std::string Taxonomy::documentation_table() const {
  std::ostringstream out;
  out << "| Tag | Display name | Tree path | Category | Description | Example |\n";
  out << "|---|---|---|---|---|---|\n";
  for (const auto& tag : tags_) {
    const SchemeNode& n = nodes_[node_index_.find(tag.id)->second];
    std::vector<std::string> names;
    for (std::size_t i = 0; i + 1 < tag.path.size(); ++i) {
      names.push_back(nodes_[node_index_.find(tag.path[i])->second].display_name);
    }
    out << "| " << tag.id << " | " << tag.display_name << " | " << join_tokens(names, " > ")
        << " | " << tag.category << " | " << n.description << " | " << n.example << " |\n";
  }
  return out.str();
}

const Tag* Taxonomy::find(std::string_view id) const {
  auto it = tag_index_.find(id);
  return it == tag_index_.end() ? nullptr : &tags_[it->second];
}

const Tag& Taxonomy::tag(std::string_view id) const {
  const Tag* t = find(id);
  if (!t) throw UnknownTagError(std::string(id));
  return *t;
}

const SchemeNode* Taxonomy::node(std::string_view id) const {
  auto it = node_index_.find(id);
  return it == node_index_.end() ? nullptr : &nodes_[it->second];
}

std::optional<std::string> Taxonomy::resolve(std::string_view name) const {
  if (find(name)) return std::string(name);
  std::string key = slugify(name);
  if (find(key)) return key;
  for (const auto& t : tags_) {
    if (slugify(t.display_name) == key) return t.id;
  }
  auto it = aliases_.find(key);
  if (it != aliases_.end()) return it->second;
  return std::nullopt;
}

bool Taxonomy::exclusive(std::string_view tag_a, std::string_view tag_b) const {
  const std::string& a = tag(tag_a).category;
  const std::string& b = tag(tag_b).category;
  for (const auto& r : exclusions_) {
    if ((r.first == a && r.second == b) || (r.first == b && r.second == a)) return true;
  }
  return false;
}

ValidationResult Taxonomy::validate(const std::vector<std::string>& ids) const {
  for (const auto& id : ids) tag(id);

  ValidationResult result;
  if (ids.empty()) {
    result.violations.push_back({Rule::empty_set, {}, "a label set needs at least one tag"});
    return result;
  }
  std::vector<std::string> unique;
  for (const auto& id : ids) {
    if (std::find(unique.begin(), unique.end(), id) != unique.end()) {
      result.violations.push_back({Rule::duplicate_tag, {id}, "tag '" + id + "' listed twice"});
    } else {
      unique.push_back(id);
    }
  }
  if (unique.size() > 2) {
    result.violations.push_back({Rule::max_two_tags, unique,
                                 "at most two tags allowed, got " +
                                     std::to_string(unique.size())});
  }
  for (std::size_t i = 0; i < unique.size(); ++i) {
    for (std::size_t j = i + 1; j < unique.size(); ++j) {
      if (exclusive(unique[i], unique[j])) {
        result.violations.push_back(
            {Rule::exclusive_categories,
             {unique[i], unique[j]},
             unique[i] + " (" + tag(unique[i]).category + ") cannot co-occur with " + unique[j] +
                 " (" + tag(unique[j]).category + ")"});
      }
    }
  }
  return result;
}

LabelSet Taxonomy::make_label_set(const std::vector<std::string>& ids) const {
  auto result = validate(ids);
  if (!result.ok()) throw LabelSetError(std::move(result));
  std::vector<std::string> sorted = ids;
  std::sort(sorted.begin(), sorted.end(), [&](const std::string& a, const std::string& b) {
    return tag(a).index < tag(b).index;
  });
  return LabelSet(std::move(sorted));
}

PriorityOrder Taxonomy::default_priority() const {
  std::vector<std::string> head;
  for (const auto& c : kDefaultPriorityHead) {
    if (std::find(categories_.begin(), categories_.end(), c) != categories_.end()) {
      head.push_back(c);
    }
  }
  return priority(head);
}

PriorityOrder Taxonomy::priority(const std::vector<std::string>& leading) const {
  std::vector<std::string> order;
  for (const auto& c : leading) {
    if (std::find(categories_.begin(), categories_.end(), c) == categories_.end()) {
      throw DataError("priority order names unknown category '" + c + "'");
    }
    if (std::find(order.begin(), order.end(), c) != order.end()) {
      throw DataError("priority order lists category '" + c + "' twice");
    }
    order.push_back(c);
  }
  for (const auto& c : categories_) {
    if (std::find(order.begin(), order.end(), c) == order.end()) order.push_back(c);
  }
  return PriorityOrder(std::move(order));
}

LabelSet Taxonomy::prioritize(const std::vector<std::string>& candidates,
                              const PriorityOrder& order) const {
  if (candidates.empty()) throw DataError("prioritize needs at least one candidate tag");
  std::vector<const Tag*> ranked;
  for (const auto& id : candidates) {
    const Tag* t = &tag(id);
    if (std::find(ranked.begin(), ranked.end(), t) == ranked.end()) ranked.push_back(t);
  }
  std::sort(ranked.begin(), ranked.end(), [&](const Tag* a, const Tag* b) {
    auto ra = order.rank(a->category), rb = order.rank(b->category);
    return ra != rb ? ra < rb : a->index < b->index;
  });

  std::vector<std::string> chosen;
  for (const Tag* t : ranked) {
    if (chosen.size() == 2) break;
    if (!chosen.empty() && exclusive(chosen.front(), t->id)) continue;
    chosen.push_back(t->id);
  }
  return make_label_set(chosen);
}

}  // namespace midas
