#include <map>
#include <set>

#include "doctest.h"
#include "minekg/error.hpp"
#include "minekg/prompt_forge.hpp"

using namespace minekg;
using prompts::Demonstration;
using prompts::Granularity;
using prompts::Strategy;

namespace {

ontology::Ontology admin_ontology() {
  return {"Administrative",
          {"AdministrativeArea", "Association", "Location", "Organisation", "MedicalFacility"},
          {"hasAdministrativeArea", "hasAssociation", "hasLocation", "hasOrganisation",
           "locatedNear"},
          ""};
}

ontology::Ontology accident_ontology() {
  return {"Accident", {"Accident", "Cause", "Damage"}, {"CausedBy", "hasLocation"}, ""};
}

const char* kMeetingContext =
    "On Thursday, March 16, 2023, at the agency headquarters in the capital, the director met "
    "a visiting delegation to review cooperation on survey training.";

Demonstration wartime_sentence() {
  return prompts::make_demonstration(
      "acc/S0",
      "The accidental detonation of old wartime munitions causes significant infrastructure "
      "damage to the nearby village roads and buildings.",
      {{"CausedBy", "infrastructure damage", "old wartime munitions", {}}}, "Accident",
      Granularity::Sentence);
}

Demonstration demo(std::string id, std::string context, std::string onto, Granularity g,
                   std::string relation = "hasLocation") {
  return prompts::make_demonstration(std::move(id), std::move(context),
                                     {{std::move(relation), "site", "village", {}}},
                                     std::move(onto), g);
}

}  // namespace

TEST_CASE("strategy names") {
  CHECK(prompts::parse_strategy("os") == Strategy::OntologySentence);
  CHECK(prompts::parse_strategy("RandomParagraph") == Strategy::RandomParagraph);
  CHECK(prompts::short_code(Strategy::ZeroShot) == "ZS");
  CHECK_THROWS_AS(prompts::parse_strategy("XX"), Error);
  CHECK(prompts::parse_granularity("Sentence") == Granularity::Sentence);
}

TEST_CASE("demonstration length counts context and answer words") {
  const auto d = wartime_sentence();
  // 18 context words + "CausedBy(infrastructure damage, old wartime munitions)" = 5 words
  CHECK(d.length == 18 + 5);
  CHECK_THROWS_AS(prompts::make_demonstration("x", "ctx", {}, "A", Granularity::Sentence), Error);
  CHECK_THROWS_AS(prompts::make_demonstration("x", " ", {{"r", "a", "b", {}}}, "A",
                                              Granularity::Sentence),
                  Error);
}

TEST_CASE("overlap is a contiguous normalised token run either way") {
  CHECK(prompts::contexts_overlap("Mines were cleared.", "In 2020 mines were cleared near X."));
  CHECK(prompts::contexts_overlap("In 2020 MINES were cleared near X", "mine were clear"));
  CHECK_FALSE(prompts::contexts_overlap("mines cleared", "mines were cleared"));
  CHECK(prompts::contexts_overlap("...", "anything"));
}

TEST_CASE("retrieval: shortest eligible, next shortest when it overlaps") {
  const std::string target = "the survey team marked the minefield near the pagoda";
  std::vector<Demonstration> pool{
      demo("long", "one two three four five six seven eight nine ten", "A", Granularity::Sentence),
      demo("short", "alpha beta gamma", "A", Granularity::Sentence),
      demo("other-onto", "x", "B", Granularity::Sentence),
      demo("paragraph", "p", "A", Granularity::Paragraph),
  };
  CHECK(prompts::retrieve_demonstration(pool, "A", target, Granularity::Sentence).demo_id == "short");

  // shorter than "short" but contained in the target
  pool.push_back(demo("tiny-inside", "minefield", "A", Granularity::Sentence));
  CHECK(prompts::retrieve_demonstration(pool, "A", target, Granularity::Sentence).demo_id == "short");
  CHECK(prompts::retrieve_demonstration(pool, "A", target, Granularity::Paragraph).demo_id ==
        "paragraph");
  CHECK_THROWS_AS(prompts::retrieve_demonstration(pool, "C", target, Granularity::Sentence), Error);

  std::vector<Demonstration> only_overlapping{demo("o", "the pagoda", "A", Granularity::Sentence)};
  try {
    prompts::retrieve_demonstration(only_overlapping, "A", target, Granularity::Sentence);
    FAIL("expected NoEligibleDemonstration");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NoEligibleDemonstration);
  }
}

TEST_CASE("ties go to the smaller context, then the id") {
  std::vector<Demonstration> pool{demo("b", "zeta eta", "A", Granularity::Sentence),
                                  demo("c", "beta eta", "A", Granularity::Sentence),
                                  demo("a", "beta eta", "A", Granularity::Sentence)};
  CHECK(prompts::retrieve_demonstration(pool, "A", "unrelated text", Granularity::Sentence).demo_id ==
        "a");
}

TEST_CASE("rendered prompt sections") {
  const auto onto = admin_ontology();
  const auto tmpl = ontology::make_template(onto);
  const corpus::Chunk chunk{"cmac#0000", "cmac", 0, kMeetingContext, 25};
  const Demonstration pool[] = {wartime_sentence()};

  const auto zs = prompts::build_extraction_prompt(chunk, tmpl, onto, Strategy::ZeroShot, {}, 1);
  CHECK(zs.rendered_text.find("Example:") == std::string::npos);
  CHECK(zs.prompt_id == "cmac#0000.tpl-Administrative");
  CHECK_FALSE(zs.demonstration_id);
  CHECK(zs.rendered_text.rfind("Instruction:\n", 0) == 0);
  CHECK(zs.rendered_text.find("\n\nEntity Types:\nAdministrativeArea, Association, Location, "
                              "Organisation, MedicalFacility\n\nRelation Types:\n"
                              "hasAdministrativeArea, hasAssociation, hasLocation, "
                              "hasOrganisation, locatedNear\n\nContext:\n") != std::string::npos);

  const auto rs = prompts::build_extraction_prompt(chunk, tmpl, onto, Strategy::RandomSentence,
                                                   pool, 1);
  CHECK(rs.rendered_text.find("Example:\nSentence:\nThe accidental detonation") != std::string::npos);
  CHECK(rs.rendered_text.find("\n\nOutput:\nCausedBy(infrastructure damage, old wartime munitions)\n\n"
                              "Context:\n") != std::string::npos);
  CHECK(rs.demonstration_id == "acc/S0");
  CHECK(rs.sample_seed);

  CHECK_THROWS_AS(
      prompts::build_extraction_prompt(chunk, tmpl, onto, Strategy::RandomParagraph, pool, 1),
      Error);
  CHECK_THROWS_AS(
      prompts::build_extraction_prompt(chunk, tmpl, onto, Strategy::OntologySentence, pool, 1),
      Error);
}

TEST_CASE("ontology strategies share the ontology, random ones never do") {
  const auto onto = accident_ontology();
  const auto tmpl = ontology::make_template(onto);
  const corpus::Chunk chunk{"c#0000", "c", 0, "A tractor struck a mine on the road.", 8};
  std::vector<Demonstration> pool{wartime_sentence(),
                                  demo("adm/S0", "The district office is near the market.",
                                       "Administrative", Granularity::Sentence, "locatedNear"),
                                  demo("adm/S1", "The clinic belongs to the health department.",
                                       "Administrative", Granularity::Sentence, "hasOrganisation"),
                                  demo("adm/P0", "Paragraph about offices.", "Administrative",
                                       Granularity::Paragraph)};
  const auto os = prompts::build_extraction_prompt(chunk, tmpl, onto, Strategy::OntologySentence,
                                                   pool, 4);
  CHECK(os.demonstration_id == "acc/S0");
  CHECK_FALSE(os.sample_seed);

  std::map<std::string, int> drawn;
  for (int i = 0; i < 400; ++i) {
    const corpus::Chunk c{"c#" + std::to_string(i), "c", 0, chunk.text, 8};
    const auto rs = prompts::build_extraction_prompt(c, tmpl, onto, Strategy::RandomSentence, pool, 4);
    ++drawn[*rs.demonstration_id];
    // same inputs, same draw
    CHECK(prompts::build_extraction_prompt(c, tmpl, onto, Strategy::RandomSentence, pool, 4)
              .rendered_text == rs.rendered_text);
  }
  CHECK(drawn.size() == 2);
  CHECK(drawn["adm/S0"] > 140);
  CHECK(drawn["adm/S1"] > 140);
}

TEST_CASE("prompt sets enumerate chunk x template pairs") {
  const auto a = accident_ontology();
  const auto b = admin_ontology();
  const std::vector<ontology::Ontology> ontos{a, b, {"Third", {"E"}, {"r"}, ""}};
  std::vector<ontology::OntologyTemplate> templates;
  for (const auto& o : ontos) templates.push_back(ontology::make_template(o));
  const std::vector<corpus::Chunk> chunks{{"d#0000", "d", 0, "first chunk", 2},
                                          {"d#0001", "d", 1, "second chunk", 2}};
  CHECK(prompts::generate_prompt_set({}, templates, ontos, Strategy::ZeroShot, {}, 0).empty());
  const auto set = prompts::generate_prompt_set(chunks, templates, ontos, Strategy::ZeroShot, {}, 0);
  REQUIRE(set.size() == 6);
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& p : set) pairs.emplace(p.chunk_id, p.template_id);
  CHECK(pairs.size() == 6);
  CHECK(set[0].template_id == "tpl-Accident");
  CHECK(set[1].template_id == "tpl-Administrative");
  CHECK(set[3].chunk_id == "d#0001");

  auto dup = templates;
  dup.push_back(templates[0]);
  CHECK(prompts::generate_prompt_set(chunks, dup, ontos, Strategy::ZeroShot, {}, 0).size() == 6);
  auto unknown = templates;
  unknown.push_back({"tpl-X", "Missing", "i"});
  CHECK_THROWS_AS(prompts::generate_prompt_set(chunks, unknown, ontos, Strategy::ZeroShot, {}, 0),
                  Error);
}

TEST_CASE("derived demonstrations") {
  triples::TripleSet answer;
  answer.add({"hasLocation", "Platoon 12", "Veal Village", {}});
  answer.add({"hasQuantity", "anti-tank mines", "41", {}});
  const prompts::AnnotatedExample ex{
      "p1", "Platoon 12 worked at Veal Village. It found 41 anti-tank mines.", "Clearance", answer};
  const auto pool = prompts::derive_demonstrations(std::span(&ex, 1));
  REQUIRE(pool.size() == 3);
  CHECK(pool[0].demo_id == "p1/P");
  CHECK(pool[0].granularity == Granularity::Paragraph);
  CHECK(pool[0].answer.size() == 2);
  CHECK(pool[1].demo_id == "p1/S0");
  CHECK(pool[1].context == "Platoon 12 worked at Veal Village.");
  REQUIRE(pool[1].answer.size() == 1);
  CHECK(pool[1].answer[0].relation == "hasLocation");
  CHECK(pool[2].demo_id == "p1/S1");
  CHECK(pool[2].answer[0].object == "41");
}

TEST_CASE("prompt and demonstration JSON round trip") {
  const auto onto = admin_ontology();
  const corpus::Chunk chunk{"cmac#0000", "cmac", 0, kMeetingContext, 25};
  const Demonstration pool[] = {wartime_sentence()};
  const auto p = prompts::build_extraction_prompt(chunk, ontology::make_template(onto), onto,
                                                  Strategy::RandomSentence, pool, 3);
  const auto q = prompts::prompt_from_json(prompts::to_json(p));
  CHECK(q.rendered_text == p.rendered_text);
  CHECK(q.sample_seed == p.sample_seed);
  CHECK(q.demonstration_id == p.demonstration_id);
  const auto d = prompts::demonstration_from_json(prompts::to_json(pool[0]));
  CHECK(d.length == pool[0].length);
  CHECK(d.answer == pool[0].answer);
}
