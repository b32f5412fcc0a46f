#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace minekg::ontology {

/// Entity and relation types constraining extraction. Both lists keep the
/// order in which names were first seen (prompts render them in that order)
/// and contain no duplicates.
struct Ontology {
  std::string name;
  std::vector<std::string> entity_types;
  std::vector<std::string> relation_types;
  std::string source;

  /// Exact, case-sensitive membership.
  bool has_entity(std::string_view type) const;
  bool has_relation(std::string_view type) const;
  /// ASCII case-insensitive membership, used when checking model output.
  bool has_relation_ci(std::string_view type) const;
};

/// Same name and the same entity/relation sets, ignoring order and source.
bool same_ontology(const Ontology& a, const Ontology& b);

struct OntologyTemplate {
  std::string template_id;
  std::string ontology_name;
  std::string instruction_text;
};

/// Default extraction instruction used by make_template().
std::string_view default_instruction();

/// One template per ontology with id "tpl-<name>".
OntologyTemplate make_template(const Ontology& ontology);

/// Parses the sectioned ontology format:
///
///   # comment
///   name: Accident
///   source: IMSMA Core
///   entities:
///     - Accident
///     - Location
///   relations:
///     - hasLocation
///
/// Items may be written with or without the "- " marker. Names are trimmed
/// and compared case-sensitively.
/// Errors: MalformedFile, DuplicateName, EmptyOntology.
Ontology parse_ontology(std::string_view content, std::string_view origin = "<memory>");
Ontology load_ontology(const std::filesystem::path& path);

/// Set union of all parts. The merged name is the common part name when all
/// parts agree, "merged" otherwise; source lists the distinct part names.
/// Errors: EmptyInput.
Ontology merge_ontologies(const std::vector<Ontology>& parts, std::string merged_name = {});

nlohmann::json to_json(const Ontology& ontology);
Ontology ontology_from_json(const nlohmann::json& row);

}  // namespace minekg::ontology
