#include <algorithm>
#include <random>

#include "doctest.h"
#include "minekg/error.hpp"
#include "minekg/io.hpp"
#include "minekg/ontology.hpp"
#include "minekg/triple.hpp"
#include "test_support.hpp"

using namespace minekg;
using triples::Triple;
using triples::TripleSet;

namespace {

const char* kAdminOntology =
    "# ontology used by the one-shot random sentence example\n"
    "name: Administrative\n"
    "entities:\n"
    "  - AdministrativeArea\n  - Association\n  - Location\n  - Organisation\n"
    "  - MedicalFacility\n"
    "relations:\n"
    "  - hasAdministrativeArea\n  - hasAssociation\n  - hasLocation\n  - hasOrganisation\n"
    "  - locatedNear\n";

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return Errc::Io;
}

}  // namespace

TEST_CASE("ontology parsing") {
  const auto o = ontology::parse_ontology(kAdminOntology);
  CHECK(o.name == "Administrative");
  CHECK(o.entity_types.size() == 5);
  CHECK(o.relation_types.size() == 5);
  CHECK(o.relation_types.front() == "hasAdministrativeArea");
  CHECK(o.has_relation("locatedNear"));
  CHECK_FALSE(o.has_relation("locatednear"));
  CHECK(o.has_relation_ci("LOCATEDNEAR"));
  CHECK_FALSE(o.has_relation_ci("locatedNearby"));

  CHECK(code_of([] {
          ontology::parse_ontology("name: X\nentities:\n- A\nrelations:\n- hasLocation\n- hasLocation\n");
        }) == Errc::DuplicateName);
  CHECK(code_of([] { ontology::parse_ontology("name: X\nentities:\n- A\nrelations:\n"); }) ==
        Errc::EmptyOntology);
  CHECK(code_of([] { ontology::parse_ontology("entities:\n- A\nrelations:\n- r\n"); }) ==
        Errc::MalformedFile);
}

TEST_CASE("ontology files and templates") {
  const auto o = ontology::load_ontology(testing::data_dir() / "mini" / "ontologies" / "clearance.ont");
  CHECK(o.name == "Clearance");
  CHECK(o.relation_types.size() == 6);
  const auto t = ontology::make_template(o);
  CHECK(t.template_id == "tpl-Clearance");
  CHECK(t.ontology_name == "Clearance");
  CHECK(t.instruction_text == ontology::default_instruction());
  CHECK(ontology::same_ontology(ontology::ontology_from_json(ontology::to_json(o)), o));
}

TEST_CASE("merging ontologies is a set union") {
  ontology::Ontology a{"A", {"E1", "E2", "E3"}, {"r1", "r2"}, ""};
  ontology::Ontology b{"B", {"E4", "E5"}, {"r3", "r4", "r5", "r6"}, ""};
  const auto m = ontology::merge_ontologies({a, b}, "HMA");
  CHECK(m.entity_types.size() == 5);
  CHECK(m.relation_types.size() == 6);
  CHECK(m.name == "HMA");

  ontology::Ontology c{"C", {"E1", "E9"}, {"r1", "r9"}, ""};
  const auto overlap = ontology::merge_ontologies({a, c});
  CHECK(overlap.entity_types.size() == 4);
  CHECK(overlap.relation_types.size() == 3);
  CHECK(overlap.name == "merged");
  CHECK(code_of([] { ontology::merge_ontologies({}); }) == Errc::EmptyInput);
}

// ---------------------------------------------------------------------------

TEST_CASE("normalize_text") {
  CHECK(triples::normalize_text("") == "");
  CHECK(triples::normalize_text("Landmines Cleared!") == "landmin clear");
  CHECK(triples::normalize_text("2,500,011 square meters") == "2,500,011 square meter");
  CHECK(triples::normalize_text("3.5 km, north") == "3.5 km north");
  CHECK(triples::normalize_text("Quality of Life Survey (QLS)") == "qualiti of life survei ql");
  for (const char* s : {"Mine Clearance Agency (MCA)", "a,b 1,2, x", "Ou Chrov Health Centre.",
                        "landmine/ERW affected areas", "--", "ÉCOLE 12.5%"}) {
    const std::string once = triples::normalize_text(s);
    CHECK_MESSAGE(triples::normalize_text(once) == once, s);
  }
}

TEST_CASE("parse_line: edge cases") {
  const auto a = triples::parse_line("CausedBy(infrastructure damage, old wartime munitions)");
  REQUIRE(a);
  CHECK(a->relation == "CausedBy");
  CHECK(a->subject == "infrastructure damage");
  CHECK(a->object == "old wartime munitions");

  const auto b =
      triples::parse_line("hasReliabilityInfo(2,500,011 square meters, landmine/ERW affected areas)");
  REQUIRE(b);
  CHECK(b->subject == "2,500,011 square meters");
  CHECK(b->object == "landmine/ERW affected areas");

  const auto c = triples::parse_line(
      "hasAccidentOrganisationInfo(Quality of Life Survey (QLS), Department of Victim Assistance "
      "of CMAA)");
  REQUIRE(c);
  CHECK(c->subject == "Quality of Life Survey (QLS)");
  CHECK(c->object == "Department of Victim Assistance of CMAA");

  // nested parentheses hide commas; the first eligible comma splits
  const auto d = triples::parse_line("r(a (b, c), d, e)");
  REQUIRE(d);
  CHECK(d->subject == "a (b, c)");
  CHECK(d->object == "d, e");
  const auto e = triples::parse_line("  hasQuantity (1,000, 2,000)  ");
  REQUIRE(e);
  CHECK(e->relation == "hasQuantity");
  CHECK(e->subject == "1,000");
  CHECK(e->object == "2,000");

  for (const char* bad : {"no triple here", "r(a)", "r(, b)", "r(a, )", "r(a, b", "(a, b)",
                          "1. r(a, b)", "r(a, b) trailing", "r(a), b)", "r(a (b, c)", "- r(a, b)",
                          "r: a -> b", "r(1,2)"}) {
    CHECK_MESSAGE(!triples::parse_line(bad), bad);
  }
}

TEST_CASE("parse_output keeps counts consistent") {
  const std::string raw =
      "hasLocation(mine, Veal Village)\n"
      "\n"
      "Here are the triples:\n"
      "HASLOCATION(Mines, veal village.)\n"
      "hasLocation(mine, Veal Village)\n"
      "causedBy(explosion, mine)\n";
  const TripleSet ts = triples::parse_output(raw, "p1");
  CHECK(ts.prompt_id == "p1");
  CHECK(ts.triples.size() == 2);
  CHECK(ts.duplicate_lines == 2);
  REQUIRE(ts.nonconforming_lines.size() == 1);
  CHECK(ts.nonconforming_lines[0] == "Here are the triples:");
  CHECK(ts.candidate_lines() == 5);
  CHECK(ts.triples[0].raw_line == "hasLocation(mine, Veal Village)");

  const TripleSet none = triples::parse_output("no triple here");
  CHECK(none.triples.empty());
  CHECK(none.nonconforming_lines.size() == 1);
}

TEST_CASE("canonical serialisation") {
  TripleSet ts;
  ts.add({"B", "x", "y", {}});
  ts.add({"A", "x", "y", {}});
  CHECK_FALSE(ts.add({"b", "X", "y.", {}}));
  CHECK(triples::canonical_serialize(ts) == "A(x, y)\nB(x, y)");

  std::mt19937 gen(9);
  std::vector<Triple> pool;
  for (int i = 0; i < 12; ++i)
    pool.push_back({"r" + std::to_string(i % 3), "s" + std::to_string(i), "o" + std::to_string(i * 7), {}});
  TripleSet base;
  for (const auto& t : pool) base.add(t);
  for (int k = 0; k < 20; ++k) {
    std::shuffle(pool.begin(), pool.end(), gen);
    TripleSet p;
    for (const auto& t : pool) p.add(t);
    CHECK(triples::canonical_serialize(p) == triples::canonical_serialize(base));
  }
  const TripleSet back = triples::parse_output(triples::canonical_serialize(base));
  CHECK(back.nonconforming_lines.empty());
  CHECK(triples::canonical_serialize(back) == triples::canonical_serialize(base));
}

TEST_CASE("JSONL rows round trip and group by prompt") {
  TripleSet a;
  a.prompt_id = "p2";
  a.add({"r", "s, t", "o (x)", "r(s, t, o (x))"});
  TripleSet b;
  b.prompt_id = "p1";
  b.add({"q", "1,000", "2", {}});
  auto rows = triples::to_rows(a);
  for (auto& r : triples::to_rows(b)) rows.push_back(r);
  CHECK(rows[1]["raw_line"] == "q(1,000, 2)");
  const auto grouped = triples::group_rows(io::parse_jsonl(io::to_jsonl(rows), "mem"));
  REQUIRE(grouped.size() == 2);
  CHECK(grouped.at("p2").triples[0] == a.triples[0]);
  CHECK(grouped.at("p1").triples[0].subject == "1,000");
  CHECK_THROWS_AS(triples::group_rows({nlohmann::json{{"prompt_id", "x"}}}), Error);
}
