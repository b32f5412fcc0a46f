#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "minekg/corpus.hpp"
#include "minekg/ontology.hpp"
#include "minekg/triple.hpp"

namespace minekg::prompts {

enum class Strategy { ZeroShot, RandomSentence, RandomParagraph, OntologySentence, OntologyParagraph };

inline constexpr std::array<Strategy, 5> kAllStrategies = {
    Strategy::ZeroShot, Strategy::RandomSentence, Strategy::RandomParagraph,
    Strategy::OntologySentence, Strategy::OntologyParagraph};

std::string_view to_string(Strategy s) noexcept;
/// ZS, RS, RP, OS, OP
std::string_view short_code(Strategy s) noexcept;
/// Accepts the long name or the short code, case-insensitively.
Strategy parse_strategy(std::string_view name);

enum class Granularity { Sentence, Paragraph };

std::string_view to_string(Granularity g) noexcept;
Granularity parse_granularity(std::string_view name);

struct Demonstration {
  std::string demo_id;
  std::string context;
  std::vector<triples::Triple> answer;
  std::string ontology_name;
  Granularity granularity = Granularity::Paragraph;
  std::size_t length = 0;  // words of context + words of the serialized answer
};

/// Builds a demonstration and computes its length. The answer is
/// de-duplicated; an empty answer or context raises InvalidArgument.
Demonstration make_demonstration(std::string demo_id, std::string context,
                                 std::vector<triples::Triple> answer, std::string ontology_name,
                                 Granularity granularity);

/// True when either text, after normalize_text, contains the other as a
/// contiguous token run. Texts that normalize to nothing count as overlapping.
bool contexts_overlap(std::string_view a, std::string_view b);

/// Shortest demonstration for the target ontology and granularity whose
/// context does not overlap the target; a longer one is taken only when every
/// shorter match overlaps. Ties go to the lexicographically smaller context,
/// then demo_id. Errors: NoEligibleDemonstration.
Demonstration retrieve_demonstration(std::span<const Demonstration> pool,
                                     std::string_view target_ontology,
                                     std::string_view target_context, Granularity granularity);

struct PromptSpec {
  std::string prompt_id;
  std::string chunk_id;
  std::string template_id;
  Strategy strategy = Strategy::ZeroShot;
  std::string rendered_text;
  std::optional<std::string> demonstration_id;
  std::optional<std::uint64_t> sample_seed;  // RS/RP only
};

/// "<chunk_id>.<template_id>"; the same pair keeps its id across strategies
/// so references and completions line up.
std::string make_prompt_id(std::string_view chunk_id, std::string_view template_id);

/// Sections in order: Instruction, Entity Types, Relation Types, optional
/// Example (Sentence/Paragraph + Output), Context.
std::string render_extraction_prompt(const ontology::OntologyTemplate& tmpl,
                                     const ontology::Ontology& onto,
                                     const Demonstration* demonstration,
                                     std::string_view context);

/// OS/OP use retrieve_demonstration(). RS/RP draw uniformly among
/// demonstrations of the matching granularity from a different ontology whose
/// context does not overlap the chunk, using a seed derived from
/// (seed, prompt_id, strategy) and recorded in sample_seed.
PromptSpec build_extraction_prompt(const corpus::Chunk& chunk,
                                   const ontology::OntologyTemplate& tmpl,
                                   const ontology::Ontology& onto, Strategy strategy,
                                   std::span<const Demonstration> pool, std::uint64_t seed);

/// One prompt per (chunk, template) pair in (chunk order, template_id) order.
/// Duplicate chunk or template ids are collapsed to their first occurrence.
std::vector<PromptSpec> generate_prompt_set(std::span<const corpus::Chunk> chunks,
                                            std::span<const ontology::OntologyTemplate> templates,
                                            std::span<const ontology::Ontology> ontologies,
                                            Strategy strategy,
                                            std::span<const Demonstration> pool,
                                            std::uint64_t seed);

struct AnnotatedExample {
  std::string prompt_id;
  std::string context;
  std::string ontology_name;
  triples::TripleSet answer;
};

/// Paragraph demonstrations are the annotated examples themselves. Sentence
/// demonstrations are the sentences of each context paired with the answer
/// triples whose subject and object both occur in that sentence.
std::vector<Demonstration> derive_demonstrations(std::span<const AnnotatedExample> examples);

nlohmann::json to_json(const PromptSpec& p);
PromptSpec prompt_from_json(const nlohmann::json& row);
nlohmann::json to_json(const Demonstration& d);
Demonstration demonstration_from_json(const nlohmann::json& row);

}  // namespace minekg::prompts
