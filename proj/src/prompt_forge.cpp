#include "minekg/prompt_forge.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "minekg/error.hpp"
#include "minekg/rng.hpp"
#include "minekg/text.hpp"

namespace minekg::prompts {
namespace {

using triples::Triple;
using triples::TripleSet;

TripleSet as_set(const std::vector<Triple>& answer) {
  TripleSet ts;
  for (const Triple& t : answer) ts.add(t);
  return ts;
}

bool ordered_before(const Demonstration& a, const Demonstration& b) {
  return std::tie(a.length, a.context, a.demo_id) < std::tie(b.length, b.context, b.demo_id);
}

}  // namespace

std::string_view to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::ZeroShot: return "ZeroShot";
    case Strategy::RandomSentence: return "RandomSentence";
    case Strategy::RandomParagraph: return "RandomParagraph";
    case Strategy::OntologySentence: return "OntologySentence";
    case Strategy::OntologyParagraph: return "OntologyParagraph";
  }
  return "ZeroShot";
}

std::string_view short_code(Strategy s) noexcept {
  switch (s) {
    case Strategy::ZeroShot: return "ZS";
    case Strategy::RandomSentence: return "RS";
    case Strategy::RandomParagraph: return "RP";
    case Strategy::OntologySentence: return "OS";
    case Strategy::OntologyParagraph: return "OP";
  }
  return "ZS";
}

Strategy parse_strategy(std::string_view name) {
  const std::string lower = text::to_lower_ascii(text::trim(name));
  for (Strategy s : kAllStrategies) {
    if (lower == text::to_lower_ascii(to_string(s)) || lower == text::to_lower_ascii(short_code(s)))
      return s;
  }
  throw Error(Errc::InvalidArgument, "unknown strategy '" + std::string(name) + "'");
}

std::string_view to_string(Granularity g) noexcept {
  return g == Granularity::Sentence ? "sentence" : "paragraph";
}

Granularity parse_granularity(std::string_view name) {
  const std::string lower = text::to_lower_ascii(text::trim(name));
  if (lower == "sentence") return Granularity::Sentence;
  if (lower == "paragraph") return Granularity::Paragraph;
  throw Error(Errc::InvalidArgument, "unknown granularity '" + std::string(name) + "'");
}

Demonstration make_demonstration(std::string demo_id, std::string context,
                                  std::vector<Triple> answer, std::string ontology_name,
                                  Granularity granularity) {
  TripleSet unique = as_set(answer);
  if (unique.triples.empty())
    throw Error(Errc::InvalidArgument, "demonstration " + demo_id + " has no answer triples");
  if (text::count_words(context) == 0)
    throw Error(Errc::InvalidArgument, "demonstration " + demo_id + " has an empty context");
  Demonstration d;
  d.demo_id = std::move(demo_id);
  d.length = text::count_words(context) + text::count_words(triples::canonical_serialize(unique));
  d.context = std::move(context);
  d.answer = std::move(unique.triples);
  d.ontology_name = std::move(ontology_name);
  d.granularity = granularity;
  return d;
}

bool contexts_overlap(std::string_view a, std::string_view b) {
  const std::vector<std::string> ta = triples::normalized_tokens(a);
  const std::vector<std::string> tb = triples::normalized_tokens(b);
  return text::contains_run<std::string>(ta, tb) || text::contains_run<std::string>(tb, ta);
}

Demonstration retrieve_demonstration(std::span<const Demonstration> pool,
                                     std::string_view target_ontology,
                                     std::string_view target_context, Granularity granularity) {
  std::vector<const Demonstration*> matches;
  for (const Demonstration& d : pool)
    if (d.ontology_name == target_ontology && d.granularity == granularity) matches.push_back(&d);
  std::sort(matches.begin(), matches.end(),
            [](const Demonstration* a, const Demonstration* b) { return ordered_before(*a, *b); });
  for (const Demonstration* d : matches)
    if (!contexts_overlap(d->context, target_context)) return *d;
  throw Error(Errc::NoEligibleDemonstration,
              std::to_string(matches.size()) + " " + std::string(to_string(granularity)) +
                  " demonstrations for ontology '" + std::string(target_ontology) +
                  "', none free of overlap with the target context");
}

std::string make_prompt_id(std::string_view chunk_id, std::string_view template_id) {
  std::string id(chunk_id);
  id += '.';
  id += template_id;
  return id;
}

std::string render_extraction_prompt(const ontology::OntologyTemplate& tmpl,
                                     const ontology::Ontology& onto,
                                     const Demonstration* demonstration,
                                     std::string_view context) {
  std::string out;
  out += "Instruction:\n";
  out += tmpl.instruction_text;
  out += "\n\nEntity Types:\n";
  out += text::join(onto.entity_types, ", ");
  out += "\n\nRelation Types:\n";
  out += text::join(onto.relation_types, ", ");
  out += "\n\n";
  if (demonstration != nullptr) {
    out += "Example:\n";
    out += demonstration->granularity == Granularity::Sentence ? "Sentence:\n" : "Paragraph:\n";
    out += demonstration->context;
    out += "\n\nOutput:\n";
    out += triples::canonical_serialize(as_set(demonstration->answer));
    out += "\n\n";
  }
  out += "Context:\n";
  out += context;
  out += '\n';
  return out;
}

PromptSpec build_extraction_prompt(const corpus::Chunk& chunk,
                                   const ontology::OntologyTemplate& tmpl,
                                   const ontology::Ontology& onto, Strategy strategy,
                                   std::span<const Demonstration> pool, std::uint64_t seed) {
  PromptSpec spec;
  spec.prompt_id = make_prompt_id(chunk.chunk_id, tmpl.template_id);
  spec.chunk_id = chunk.chunk_id;
  spec.template_id = tmpl.template_id;
  spec.strategy = strategy;

  std::optional<Demonstration> demo;
  switch (strategy) {
    case Strategy::ZeroShot:
      break;
    case Strategy::OntologySentence:
    case Strategy::OntologyParagraph: {
      const Granularity g = strategy == Strategy::OntologySentence ? Granularity::Sentence
                                                                    : Granularity::Paragraph;
      demo = retrieve_demonstration(pool, onto.name, chunk.text, g);
      break;
    }
    case Strategy::RandomSentence:
    case Strategy::RandomParagraph: {
      const Granularity g = strategy == Strategy::RandomSentence ? Granularity::Sentence
                                                                  : Granularity::Paragraph;
      std::vector<const Demonstration*> eligible;
      for (const Demonstration& d : pool) {
        if (d.granularity == g && d.ontology_name != onto.name &&
            !contexts_overlap(d.context, chunk.text))
          eligible.push_back(&d);
      }
      if (eligible.empty())
        throw Error(Errc::NoEligibleDemonstration,
                    "no " + std::string(to_string(g)) +
                        " demonstration from an ontology other than '" + onto.name + "'");
      std::sort(eligible.begin(), eligible.end(), [](const Demonstration* a, const Demonstration* b) {
        return std::tie(a->demo_id, a->context) < std::tie(b->demo_id, b->context);
      });
      const std::uint64_t draw_seed =
          derive_seed(seed, spec.prompt_id + "|" + std::string(short_code(strategy)));
      DeterministicRng rng(draw_seed);
      demo = *eligible[rng.index(eligible.size())];
      spec.sample_seed = draw_seed;
      break;
    }
  }
  if (demo) spec.demonstration_id = demo->demo_id;
  spec.rendered_text = render_extraction_prompt(tmpl, onto, demo ? &*demo : nullptr, chunk.text);
  return spec;
}

std::vector<PromptSpec> generate_prompt_set(std::span<const corpus::Chunk> chunks,
                                            std::span<const ontology::OntologyTemplate> templates,
                                            std::span<const ontology::Ontology> ontologies,
                                            Strategy strategy,
                                            std::span<const Demonstration> pool,
                                            std::uint64_t seed) {
  std::vector<const ontology::OntologyTemplate*> ordered;
  std::set<std::string> template_ids;
  for (const auto& t : templates)
    if (template_ids.insert(t.template_id).second) ordered.push_back(&t);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto* a, const auto* b) { return a->template_id < b->template_id; });

  std::map<std::string, const ontology::Ontology*> by_name;
  for (const auto& o : ontologies) by_name.emplace(o.name, &o);
  for (const auto* t : ordered) {
    if (!by_name.count(t->ontology_name))
      throw Error(Errc::InvalidArgument, "template " + t->template_id +
                                             " refers to unknown ontology " + t->ontology_name);
  }

  std::vector<PromptSpec> prompts;
  prompts.reserve(chunks.size() * ordered.size());
  std::set<std::string> chunk_ids;
  for (const corpus::Chunk& chunk : chunks) {
    if (!chunk_ids.insert(chunk.chunk_id).second) continue;
    for (const auto* t : ordered)
      prompts.push_back(
          build_extraction_prompt(chunk, *t, *by_name.at(t->ontology_name), strategy, pool, seed));
  }
  return prompts;
}

std::vector<Demonstration> derive_demonstrations(std::span<const AnnotatedExample> examples) {
  std::vector<const AnnotatedExample*> ordered;
  for (const auto& e : examples) ordered.push_back(&e);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto* a, const auto* b) { return a->prompt_id < b->prompt_id; });

  std::vector<Demonstration> pool;
  for (const AnnotatedExample* ex : ordered) {
    if (ex->answer.triples.empty() || text::count_words(ex->context) == 0) continue;
    pool.push_back(make_demonstration(ex->prompt_id + "/P", ex->context, ex->answer.triples,
                                      ex->ontology_name, Granularity::Paragraph));
    std::size_t index = 0;
    for (std::string_view paragraph : text::split_paragraphs(ex->context)) {
      for (std::string_view sentence : text::split_sentences(paragraph)) {
        const std::vector<std::string> sentence_tokens = triples::normalized_tokens(sentence);
        std::vector<Triple> grounded;
        for (const Triple& t : ex->answer.triples) {
          const auto s = triples::normalized_tokens(t.subject);
          const auto o = triples::normalized_tokens(t.object);
          if (!s.empty() && !o.empty() && text::contains_run<std::string>(sentence_tokens, s) &&
              text::contains_run<std::string>(sentence_tokens, o))
            grounded.push_back(t);
        }
        if (!grounded.empty()) {
          pool.push_back(make_demonstration(ex->prompt_id + "/S" + std::to_string(index),
                                            std::string(sentence), std::move(grounded),
                                            ex->ontology_name, Granularity::Sentence));
        }
        ++index;
      }
    }
  }
  return pool;
}

nlohmann::json to_json(const PromptSpec& p) {
  nlohmann::json row = {{"prompt_id", p.prompt_id},
                        {"chunk_id", p.chunk_id},
                        {"template_id", p.template_id},
                        {"strategy", to_string(p.strategy)},
                        {"demonstration_id", nullptr},
                        {"sample_seed", nullptr},
                        {"rendered_text", p.rendered_text}};
  if (p.demonstration_id) row["demonstration_id"] = *p.demonstration_id;
  if (p.sample_seed) row["sample_seed"] = *p.sample_seed;
  return row;
}

PromptSpec prompt_from_json(const nlohmann::json& row) {
  try {
    PromptSpec p;
    p.prompt_id = row.at("prompt_id").get<std::string>();
    p.chunk_id = row.at("chunk_id").get<std::string>();
    p.template_id = row.at("template_id").get<std::string>();
    p.strategy = parse_strategy(row.at("strategy").get<std::string>());
    p.rendered_text = row.at("rendered_text").get<std::string>();
    if (row.contains("demonstration_id") && !row["demonstration_id"].is_null())
      p.demonstration_id = row["demonstration_id"].get<std::string>();
    if (row.contains("sample_seed") && !row["sample_seed"].is_null())
      p.sample_seed = row["sample_seed"].get<std::uint64_t>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedFile, std::string("prompt row: ") + e.what());
  }
}

nlohmann::json to_json(const Demonstration& d) {
  std::vector<std::string> answer;
  for (const Triple& t : d.answer) answer.push_back(triples::render(t));
  return {{"demo_id", d.demo_id},
          {"ontology", d.ontology_name},
          {"granularity", to_string(d.granularity)},
          {"context", d.context},
          {"answer", answer},
          {"length", d.length}};
}

Demonstration demonstration_from_json(const nlohmann::json& row) {
  try {
    std::vector<Triple> answer;
    for (const auto& line : row.at("answer")) {
      std::optional<Triple> t = triples::parse_line(line.get<std::string>());
      if (!t)
        throw Error(Errc::MalformedFile, "demonstration answer line does not parse: " +
                                             line.get<std::string>());
      answer.push_back(std::move(*t));
    }
    return make_demonstration(row.at("demo_id").get<std::string>(),
                              row.at("context").get<std::string>(), std::move(answer),
                              row.at("ontology").get<std::string>(),
                              parse_granularity(row.at("granularity").get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedFile, std::string("demonstration row: ") + e.what());
  }
}

}  // namespace minekg::prompts
