#include "minekg/ontology.hpp"

#include <algorithm>
#include <set>

#include "minekg/error.hpp"
#include "minekg/io.hpp"
#include "minekg/text.hpp"

namespace minekg::ontology {
namespace {

constexpr std::string_view kInstruction =
    "Extract and list only the triples from the following context based on the specified "
    "entity types and relation types. Do not include any explanatory or intermediate text in "
    "your output. In the output, only include the triples in the given output format: "
    "relation(subject, object). Attempt to extract as many entities and relations as you can.";

enum class Section { None, Entities, Relations };

bool starts_with_key(std::string_view line, std::string_view key, std::string_view& value) {
  if (line.size() <= key.size() || line.substr(0, key.size()) != key) return false;
  if (line[key.size()] != ':') return false;
  value = text::trim(line.substr(key.size() + 1));
  return true;
}

void add_unique(std::vector<std::string>& list, const std::string& name) {
  if (std::find(list.begin(), list.end(), name) == list.end()) list.push_back(name);
}

std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

}  // namespace

bool Ontology::has_entity(std::string_view type) const {
  return std::find(entity_types.begin(), entity_types.end(), type) != entity_types.end();
}

bool Ontology::has_relation(std::string_view type) const {
  return std::find(relation_types.begin(), relation_types.end(), type) != relation_types.end();
}

bool Ontology::has_relation_ci(std::string_view type) const {
  const std::string needle = text::to_lower_ascii(text::trim(type));
  return std::any_of(relation_types.begin(), relation_types.end(),
                     [&](const std::string& r) { return text::to_lower_ascii(r) == needle; });
}

bool same_ontology(const Ontology& a, const Ontology& b) {
  return a.name == b.name && as_set(a.entity_types) == as_set(b.entity_types) &&
         as_set(a.relation_types) == as_set(b.relation_types);
}

std::string_view default_instruction() { return kInstruction; }

OntologyTemplate make_template(const Ontology& ontology) {
  return {"tpl-" + ontology.name, ontology.name, std::string(kInstruction)};
}

Ontology parse_ontology(std::string_view content, std::string_view origin) {
  Ontology result;
  Section section = Section::None;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  auto fail = [&](Errc code, const std::string& msg) {
    throw Error(code, std::string(origin) + ":" + std::to_string(line_no) + ": " + msg);
  };

  while (pos < content.size()) {
    std::size_t eol = content.find('\n', pos);
    if (eol == std::string_view::npos) eol = content.size();
    const std::string_view line = text::trim(content.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;

    std::string_view value;
    if (starts_with_key(line, "name", value)) {
      if (value.empty()) fail(Errc::MalformedFile, "empty name");
      if (!result.name.empty()) fail(Errc::MalformedFile, "name given twice");
      result.name = std::string(value);
      section = Section::None;
    } else if (starts_with_key(line, "source", value)) {
      result.source = std::string(value);
      section = Section::None;
    } else if (line == "entities:") {
      section = Section::Entities;
    } else if (line == "relations:") {
      section = Section::Relations;
    } else {
      if (section == Section::None) fail(Errc::MalformedFile, "item outside a section");
      std::string_view item = line;
      if (item.front() == '-') item = text::trim(item.substr(1));
      if (item.empty()) fail(Errc::MalformedFile, "empty item");
      if (item.find_first_of("(),") != std::string_view::npos)
        fail(Errc::MalformedFile, "type names may not contain '(' ')' or ','");
      auto& list = section == Section::Entities ? result.entity_types : result.relation_types;
      const std::string name(item);
      if (std::find(list.begin(), list.end(), name) != list.end())
        fail(Errc::DuplicateName, "'" + name + "' listed twice");
      list.push_back(name);
    }
  }
  if (result.name.empty()) throw Error(Errc::MalformedFile, std::string(origin) + ": no name");
  if (result.entity_types.empty() || result.relation_types.empty())
    throw Error(Errc::EmptyOntology,
                std::string(origin) + ": ontology '" + result.name + "' has an empty section");
  if (result.source.empty()) result.source = result.name;
  return result;
}

Ontology load_ontology(const std::filesystem::path& path) {
  return parse_ontology(io::read_file(path), path.string());
}

Ontology merge_ontologies(const std::vector<Ontology>& parts, std::string merged_name) {
  if (parts.empty()) throw Error(Errc::EmptyInput, "merge_ontologies needs at least one part");
  Ontology merged;
  std::vector<std::string> names;
  for (const Ontology& part : parts) {
    for (const std::string& e : part.entity_types) add_unique(merged.entity_types, e);
    for (const std::string& r : part.relation_types) add_unique(merged.relation_types, r);
    add_unique(names, part.name);
  }
  if (!merged_name.empty()) {
    merged.name = std::move(merged_name);
  } else {
    merged.name = names.size() == 1 ? names.front() : "merged";
  }
  merged.source = names.size() == 1 ? parts.front().source : text::join(names, "+");
  return merged;
}

nlohmann::json to_json(const Ontology& ontology) {
  return {{"name", ontology.name},
          {"entity_types", ontology.entity_types},
          {"relation_types", ontology.relation_types},
          {"source", ontology.source}};
}

Ontology ontology_from_json(const nlohmann::json& row) {
  try {
    return Ontology{row.at("name").get<std::string>(),
                    row.at("entity_types").get<std::vector<std::string>>(),
                    row.at("relation_types").get<std::vector<std::string>>(),
                    row.value("source", std::string{})};
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedFile, std::string("ontology json: ") + e.what());
  }
}

}  // namespace minekg::ontology
