// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Expected values come from oracles written here, not from the
// library under test.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "minekg/annotation.hpp"
#include "minekg/error.hpp"
#include "minekg/io.hpp"
#include "minekg/judge_eval.hpp"
#include "minekg/pipeline.hpp"
#include "minekg/prompt_forge.hpp"
#include "minekg/ref_eval.hpp"
#include "minekg/triple.hpp"
#include "test_support.hpp"

using namespace minekg;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// harness

struct Failures {
  std::vector<std::string> messages;
  void expect(bool ok, const std::string& what) {
    if (!ok && messages.size() < 8) messages.push_back(what);
    if (!ok && messages.size() == 8) messages.push_back("...");
  }
  void near(double got, double want, double tol, const std::string& what) {
    char buf[160];
    std::snprintf(buf, sizeof buf, " (got %.17g, want %.17g)", got, want);
    expect(std::fabs(got - want) <= tol, what + buf);
  }
};

struct Criterion {
  int number;
  std::string title;
  double budget_seconds;  // 0 = no runtime bound
  std::function<void(Failures&)> body;
};

std::string str(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. triple grammar

std::string random_word(std::mt19937_64& g) {
  static const char* letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
  std::string w;
  const int n = 1 + static_cast<int>(g() % 8);
  for (int i = 0; i < n; ++i) w += letters[g() % 52];
  return w;
}

std::string random_number(std::mt19937_64& g) {
  switch (g() % 3) {
    case 0: return std::to_string(g() % 1000);
    case 1: {  // thousands groups
      std::string s = std::to_string(1 + g() % 999);
      const int groups = 1 + static_cast<int>(g() % 3);
      for (int i = 0; i < groups; ++i) {
        char buf[8];
        std::snprintf(buf, sizeof buf, ",%03d", static_cast<int>(g() % 1000));
        s += buf;
      }
      return s;
    }
    default: return std::to_string(g() % 100) + "." + std::to_string(g() % 100);
  }
}

// Text that may contain commas only between digits at the top level; inside
// parentheses anything goes.
std::string random_phrase(std::mt19937_64& g, int depth, bool allow_top_commas) {
  std::string out;
  const int pieces = 1 + static_cast<int>(g() % 4);
  for (int i = 0; i < pieces; ++i) {
    if (i) {
      const auto sep = g() % 6;
      out += sep == 0 ? "/" : sep == 1 && allow_top_commas ? ", " : " ";
    }
    const auto kind = g() % 5;
    if (kind == 0) {
      out += random_number(g);
    } else if (kind == 1 && depth < 3) {
      out += "(" + random_phrase(g, depth + 1, true) + ")";
    } else {
      out += random_word(g);
    }
  }
  return out;
}

void triple_grammar(Failures& f) {
  struct Case {
    const char* line;
    const char* relation;
    const char* subject;
    const char* object;
  };
  const Case cases[] = {
      {"CausedBy(infrastructure damage, old wartime munitions)", "CausedBy", "infrastructure damage",
       "old wartime munitions"},
      {"hasReliabilityInfo(2,500,011 square meters, landmine/ERW affected areas)", "hasReliabilityInfo",
       "2,500,011 square meters", "landmine/ERW affected areas"},
      {"hasAccidentOrganisationInfo(Quality of Life Survey (QLS), Department of Victim Assistance of CMAA)",
       "hasAccidentOrganisationInfo", "Quality of Life Survey (QLS)",
       "Department of Victim Assistance of CMAA"},
  };
  for (const Case& c : cases) {
    const auto t = triples::parse_line(c.line);
    f.expect(t.has_value(), std::string("did not parse: ") + c.line);
    if (!t) continue;
    f.expect(t->relation == c.relation && t->subject == c.subject && t->object == c.object,
             std::string("wrong fields for ") + c.line);
  }

  std::mt19937_64 g(2024);
  for (int i = 0; i < 1000; ++i) {
    std::vector<triples::Triple> batch;
    const int n = 1 + static_cast<int>(g() % 4);
    for (int k = 0; k < n; ++k) {
      triples::Triple t{"r" + std::to_string(k) + random_word(g), random_phrase(g, 0, false),
                        random_phrase(g, 0, true), {}};
      batch.push_back(t);
      const std::string line = triples::render(t);
      const auto back = triples::parse_line(line);
      f.expect(back && *back == t, "round trip lost fields: " + line);
    }
    // whole sets through the serializer and the output parser
    triples::TripleSet set;
    for (const auto& t : batch) set.add(t);
    const auto parsed = triples::parse_output(triples::canonical_serialize(set));
    f.expect(parsed.nonconforming_lines.empty() && parsed.duplicate_lines == 0 &&
                 parsed.triples.size() == set.triples.size(),
             "set round trip lost lines");
    for (const auto& t : set.triples)
      f.expect(std::find(parsed.triples.begin(), parsed.triples.end(), t) != parsed.triples.end(),
               "set round trip lost " + triples::render(t));
  }
}

// ---------------------------------------------------------------------------
// 2. hallucination oracle

bool has_run(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
  if (needle.empty()) return false;
  for (std::size_t start = 0; start + needle.size() <= hay.size(); ++start) {
    bool all = true;
    for (std::size_t k = 0; k < needle.size() && all; ++k) all = hay[start + k] == needle[k];
    if (all) return true;
  }
  return false;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

void hallucination_oracle(Failures& f) {
  const std::vector<std::string> vocab{"Mine", "mines", "cleared", "village", "Veal", "road", "tractor",
                                       "2,500", "m2", "anti-tank", "(ERW)", "north", "of", "the",
                                       "survey", "team", "CMAA", "struck", "field", "42"};
  const std::vector<std::string> relations{"hasLocation", "causedBy", "hasQuantity", "locatedNear"};
  std::mt19937_64 g(77);
  int flagged = 0, clean = 0;
  for (int i = 0; i < 200; ++i) {
    std::vector<std::string> words;
    const int len = 4 + static_cast<int>(g() % 16);
    for (int k = 0; k < len; ++k) words.push_back(vocab[g() % vocab.size()]);
    std::string context;
    for (std::size_t k = 0; k < words.size(); ++k) context += (k ? (g() % 5 == 0 ? ", " : " ") : "") + words[k];
    context += ".";

    auto argument = [&]() -> std::string {
      const auto pick = g() % 7;  // grounded spans more often than not
      switch (pick < 4 ? 0 : pick - 3) {
        case 0: {  // an exact span, recased
          const std::size_t a = g() % words.size();
          const std::size_t b = a + 1 + g() % std::min<std::size_t>(3, words.size() - a);
          std::string s;
          for (std::size_t k = a; k < b; ++k) s += (k > a ? " " : "") + (g() % 2 ? lower(words[k]) : words[k]);
          return s;
        }
        case 1: {  // a span with a word dropped from the middle
          const std::size_t a = g() % words.size();
          if (a + 2 >= words.size()) return words[a];
          return words[a] + " " + words[a + 2];
        }
        case 2: return vocab[g() % vocab.size()] + " " + vocab[g() % vocab.size()];
        default: return g() % 4 == 0 ? std::string("--") : "unseen " + vocab[g() % vocab.size()];
      }
    };
    std::string relation = relations[g() % relations.size()];
    if (g() % 4 == 0) relation = lower(relation);
    if (g() % 8 == 0) relation = "hasColour";
    const triples::Triple t{relation, argument(), argument(), {}};
    const ontology::Ontology onto{"O", {"E"}, relations, ""};

    const auto ctx = triples::normalized_tokens(context);
    const bool s_flag = !has_run(ctx, triples::normalized_tokens(t.subject));
    const bool o_flag = !has_run(ctx, triples::normalized_tokens(t.object));
    bool r_flag = true;
    for (const auto& r : relations) r_flag = r_flag && lower(r) != lower(t.relation);

    const auto got = eval::hallucination_assess(t, context, onto);
    f.expect(got.subject_flag == s_flag && got.object_flag == o_flag && got.relation_flag == r_flag &&
                 got.triple_flag == (s_flag || o_flag || r_flag),
             "disagreement on " + triples::render(t) + " in '" + context + "'");
    (s_flag || o_flag || r_flag) ? ++flagged : ++clean;
  }
  f.expect(flagged > 20 && clean > 20, "generator is lopsided: " + std::to_string(flagged) + " flagged");
}

// ---------------------------------------------------------------------------
// 3. metric oracles

void metric_oracles(Failures& f) {
  const double eps = eval::kBleuEpsilon;
  auto smoothed = [&](double m, double n) { return std::log((m + eps) / (n + eps)); };

  // BLEU: clipped n-gram counts worked out by hand
  f.near(eval::bleu_score("the cat sat on the mat", "the cat is on the mat"),
         std::exp((smoothed(5, 6) + smoothed(3, 5) + smoothed(1, 4) + smoothed(0, 3)) / 4), 1e-9,
         "bleu cat/mat");
  f.near(eval::bleu_score("a b c", "a b c d e"), std::exp(-2.0 / 3.0), 1e-9, "bleu brevity");
  f.near(eval::bleu_score("a a a a", "a b"),
         std::exp((smoothed(1, 4) + smoothed(0, 3) + smoothed(0, 2) + smoothed(0, 1)) / 4), 1e-9,
         "bleu clipping");

  // ROUGE-L F1 = 2PR/(P+R) from the LCS length
  f.near(eval::rouge_l_score("the cat sat on the mat", "the cat is on the mat"), 5.0 / 6.0, 1e-9,
         "rouge 5/6");
  f.near(eval::rouge_l_score("a b c d e f", "a b x c d y e f"), 6.0 / 7.0, 1e-9, "rouge 6/7");
  f.near(eval::rouge_l_score("a b c d", "d e f g h x"), 0.2, 1e-9, "rouge 0.2");
  f.near(eval::rouge_l_score("the mine was cleared", "mine cleared quickly"), 4.0 / 7.0, 1e-9,
         "rouge 4/7");

  // METEOR with alpha 0.9, beta 3, gamma 0.5
  f.near(eval::meteor_score("a b x c", "a b c"), (0.75 / 0.775) * (1 - 0.5 * std::pow(2.0 / 3.0, 3)),
         1e-9, "meteor two chunks");
  f.near(eval::meteor_score("mines cleared", "mine clear"), 0.9375, 1e-9, "meteor stem stage");
  f.near(eval::meteor_score("c b a", "a b c"), 0.5, 1e-9, "meteor reversed");
  f.near(eval::meteor_score("a b c d e f g h i j", "a b c d e f g h i j"), 0.9995, 1e-9,
         "meteor identity m=10");

  // identity and disjoint pairs
  std::mt19937_64 g(3);
  for (int i = 0; i < 50; ++i) {
    std::string s;
    const int m = 1 + static_cast<int>(g() % 12);
    for (int k = 0; k < m; ++k) s += (k ? " " : "") + std::string(1, static_cast<char>('a' + g() % 6));
    f.near(eval::bleu_score(s, s), 1.0, 1e-12, "bleu identity " + s);
    f.near(eval::rouge_l_score(s, s), 1.0, 1e-12, "rouge identity " + s);
    f.near(eval::meteor_score(s, s), 1.0 - 0.5 * std::pow(1.0 / m, 3), 1e-12, "meteor identity " + s);
  }
  for (const auto& [c, r] : std::vector<std::pair<const char*, const char*>>{
           {"a b c d", "e f g h"}, {"x", "y z"}, {"p q r s t u", "v"}}) {
    f.expect(eval::bleu_score(c, r) <= eps, std::string("bleu disjoint above floor: ") + c);
    f.expect(eval::rouge_l_score(c, r) == 0.0, std::string("rouge disjoint: ") + c);
    f.expect(eval::meteor_score(c, r) == 0.0, std::string("meteor disjoint: ") + c);
  }
}

// ---------------------------------------------------------------------------
// 4. combined score

void combined_score(Failures& f) {
  // five configurations x five scored metrics
  std::vector<eval::MetricVector> m{
      {0.10, 0.30, 0.20, 0.50, 0.40, 0.9},
      {0.20, 0.60, 0.25, 0.55, 0.10, 0.8},
      {0.40, 0.50, 0.30, 0.70, 0.20, 1.0},
      {0.30, 0.20, 0.35, 0.60, 0.30, 0.5},
      {0.50, 0.40, 0.40, 0.65, 0.00, 0.7},
  };
  // BLEU     0.1..0.5  -> 0, .25, .75, .5, 1
  // ROUGE-L  0.2..0.6  -> .25, 1, .75, 0, .5
  // METEOR   0.2..0.4  -> 0, .25, .5, .75, 1
  // Embed    0.5..0.7  -> 0, .25, 1, .5, .75
  // Halluc.  0..0.4    -> 1, .25, .5, .75, 0  (inverted: 0, .75, .5, .25, 1)
  const double hand[] = {
      100 * (0 + .25 + 0 + 0 + 0) / 5,     100 * (.25 + 1 + .25 + .25 + .75) / 5,
      100 * (.75 + .75 + .5 + 1 + .5) / 5, 100 * (.5 + 0 + .75 + .5 + .25) / 5,
      100 * (1 + .5 + 1 + .75 + 1) / 5,
  };
  const auto got = eval::combined_score(m);
  f.expect(got.size() == 5, "five scores");
  for (std::size_t i = 0; i < got.size(); ++i) f.near(got[i], hand[i], 1e-9, "row " + std::to_string(i));

  // an all-equal column
  auto flat = m;
  for (auto& row : flat) row.meteor = 0.33;
  for (const auto& n : eval::normalize_matrix(flat)) f.expect(n.meteor == 0.5, "constant column is not 0.5");
  const double constant[] = {0.7, 0.7, 0.7};
  for (double v : eval::min_max_normalize(constant)) f.expect(v == 0.5, "constant vector is not 0.5");

  // format conformance takes no part
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    auto perturbed = m;
    for (auto& row : perturbed) row.format_conformance = u(g);
    const auto again = eval::combined_score(perturbed);
    f.expect(std::memcmp(again.data(), got.data(), got.size() * sizeof(double)) == 0,
             "format conformance changed the combined score");
  }
}

// ---------------------------------------------------------------------------
// 5. expectation score

void expectation_score(Failures& f) {
  for (std::size_t mu = 2; mu <= 5; ++mu) {
    judge::RankHistogram h(mu);
    std::map<std::string, std::vector<int>> planted;
    std::size_t total = 1;
    for (std::size_t i = 0; i < mu; ++i) total *= 3;
    for (std::size_t code = 1; code < total; ++code) {  // every count vector in {0,1,2}^mu but zero
      std::vector<int> counts(mu);
      std::size_t c = code;
      for (std::size_t i = 0; i < mu; ++i, c /= 3) counts[i] = static_cast<int>(c % 3);
      const std::string id = "m" + std::to_string(code);
      planted[id] = counts;
      for (std::size_t i = 0; i < mu; ++i)
        if (counts[i]) h.add(id, static_cast<int>(i + 1), static_cast<std::size_t>(counts[i]));
    }
    const auto e = judge::expectation_score(h);
    f.expect(e.size() == planted.size(), "missing models for mu=" + std::to_string(mu));
    for (const auto& [id, counts] : planted) {
      long num = 0, den = 0;
      for (std::size_t i = 0; i < mu; ++i) {
        num += static_cast<long>(i + 1) * counts[i];
        den += counts[i];
      }
      f.near(e.at(id), static_cast<double>(num) / static_cast<double>(den), 1e-12, id);
    }

    judge::RankHistogram edge(mu);
    edge.add("first", 1, 7);
    for (std::size_t i = 1; i <= mu; ++i) edge.add("uniform", static_cast<int>(i), 4);
    const auto ee = judge::expectation_score(edge);
    f.expect(ee.at("first") == 1.0, "always rank 1");
    f.near(ee.at("uniform"), (static_cast<double>(mu) + 1) / 2, 1e-12, "uniform");
  }
}

// ---------------------------------------------------------------------------
// 6. correlations

judge::Ranking ranking_of(const std::vector<int>& ranks) {
  judge::Ranking r;
  for (std::size_t i = 0; i < ranks.size(); ++i) r["m" + std::to_string(i)] = ranks[i];
  return r;
}

void correlations(Failures& f) {
  const auto same = judge::rank_correlations(ranking_of({1, 2, 3, 4, 5}), ranking_of({1, 2, 3, 4, 5}));
  f.expect(same.spearman_rho == 1.0 && same.kendall_tau == 1.0, "identical is not (1,1)");
  const auto rev = judge::rank_correlations(ranking_of({1, 2, 3, 4, 5}), ranking_of({5, 4, 3, 2, 1}));
  f.expect(rev.spearman_rho == -1.0 && rev.kendall_tau == -1.0, "reversed is not (-1,-1)");
  const auto swap = judge::rank_correlations(ranking_of({1, 2, 3, 4, 5}), ranking_of({2, 1, 3, 4, 5}));
  f.near(swap.spearman_rho, 0.9, 1e-12, "adjacent swap rho");
  f.near(swap.kendall_tau, 0.8, 1e-12, "adjacent swap tau");

  std::mt19937_64 g(11);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + g() % 11;
    std::vector<int> a(n), b(n);
    std::iota(a.begin(), a.end(), 1);
    std::iota(b.begin(), b.end(), 1);
    std::shuffle(a.begin(), a.end(), g);
    std::shuffle(b.begin(), b.end(), g);

    long concordant = 0, discordant = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        ((a[i] - a[j]) * (b[i] - b[j]) > 0 ? concordant : discordant)++;
    const long pairs = static_cast<long>(n * (n - 1) / 2);

    // Spearman as the Pearson correlation of the rank vectors
    const double mean = (static_cast<double>(n) + 1) / 2;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sab += (a[i] - mean) * (b[i] - mean);
      saa += (a[i] - mean) * (a[i] - mean);
      sbb += (b[i] - mean) * (b[i] - mean);
    }
    const auto got = judge::rank_correlations(ranking_of(a), ranking_of(b));
    f.near(got.kendall_tau, static_cast<double>(concordant - discordant) / static_cast<double>(pairs), 1e-12,
           "tau n=" + std::to_string(n));
    const long implied_discordant = std::lround((1.0 - got.kendall_tau) * static_cast<double>(pairs) / 2);
    f.expect(implied_discordant == discordant, "discordant pair count differs");
    f.near(got.spearman_rho, sab / std::sqrt(saa * sbb), 1e-12, "rho n=" + std::to_string(n));
  }
}

// ---------------------------------------------------------------------------
// 7. position bias

void position_bias(Failures& f) {
  constexpr std::size_t mu = 5;
  const ontology::Ontology onto{"O", {"E"}, {"hasLocation"}, ""};
  // always prefers the slots in display order
  auto biased = std::make_shared<llm::FunctionProvider>([](const llm::CompletionRequest&) {
    return std::string("Ranking: [1: Model 1; 2: Model 2; 3: Model 3; 4: Model 4; 5: Model 5]");
  });
  llm::GatewayOptions go;
  go.mode = llm::Mode::Live;
  go.concurrency = 4;
  llm::Gateway gateway(go, biased);

  std::vector<judge::JudgeItem> items;
  for (int p = 0; p < 1000; ++p) {
    judge::JudgeItem item{"prompt-" + std::to_string(p), "context " + std::to_string(p), &onto, {}};
    item.candidates.prompt_id = item.prompt_id;
    for (std::size_t m = 0; m < mu; ++m) {
      judge::CandidateAnswer a;
      a.model_id = "model-" + std::to_string(m + 1);
      a.raw_output = "hasLocation(site " + std::to_string(m) + ", village)";
      item.candidates.answers.push_back(a);
    }
    items.push_back(std::move(item));
  }

  judge::JudgeOptions basic{judge::JudgeMethod::Basic, "mock", 1, 256};
  const auto b = judge::judge_round(std::span(items).subspan(0, 200), basic, gateway);
  const auto eb = judge::expectation_score(b.histogram);
  f.expect(eb.at("model-1") == 1.0, "Basic: E(slot-1 model) = " + str(eb.at("model-1")));

  judge::JudgeOptions rf{judge::JudgeMethod::RandomizedFair, "mock", 2024, 256};
  const auto r = judge::judge_round(items, rf, gateway);
  f.expect(r.verdicts.size() == items.size(), "RandomizedFair lost verdicts");
  const auto er = judge::expectation_score(r.histogram);
  for (const auto& [model, e] : er) f.expect(std::fabs(e - 3.0) <= 0.25, model + " E = " + str(e));

  std::size_t exact = 0;
  for (const auto& v : r.verdicts) {
    const auto perm = judge::shuffle_permutation(rf.seed, v.prompt_id, mu);
    bool ok = v.shuffle_map == perm;
    // the judge ranked slot k at k; slot k showed candidate perm[k]
    for (std::size_t slot = 0; slot < mu && ok; ++slot)
      ok = v.ranking.at("model-" + std::to_string(perm[slot] + 1)) == static_cast<int>(slot + 1);
    exact += ok;
  }
  f.expect(exact == r.verdicts.size(),
           "de-shuffle exact on " + std::to_string(exact) + " of " + std::to_string(r.verdicts.size()));
}

// ---------------------------------------------------------------------------
// 8. demonstration retrieval

std::size_t word_count(const std::string& s) {
  std::istringstream in(s);
  std::size_t n = 0;
  for (std::string w; in >> w;) ++n;
  return n;
}

bool overlaps(const std::string& a, const std::string& b) {
  const auto ta = triples::normalized_tokens(a);
  const auto tb = triples::normalized_tokens(b);
  if (ta.empty() || tb.empty()) return true;
  return has_run(ta, tb) || has_run(tb, ta);
}

void demonstration_retrieval(Failures& f) {
  const std::vector<std::string> vocab{"mine", "Field", "cleared", "road", "village", "team", "north",
                                       "survey", "blast", "school"};
  const char* ontos[] = {"A", "B", "C"};
  std::mt19937_64 g(99);
  auto phrase = [&](std::size_t len) {
    std::string s;
    for (std::size_t k = 0; k < len; ++k) s += (k ? " " : "") + vocab[g() % vocab.size()];
    return s;
  };

  int forced = 0, none = 0;
  for (int c = 0; c < 500; ++c) {
    const std::string target = phrase(6 + g() % 8);
    const std::string target_onto = ontos[g() % 3];
    const auto gran = g() % 2 ? prompts::Granularity::Sentence : prompts::Granularity::Paragraph;

    struct Raw {
      std::string id, context, onto;
      prompts::Granularity gran;
      std::vector<triples::Triple> answer;
    };
    std::vector<Raw> raw;
    const std::size_t n = 1 + g() % 12;
    for (std::size_t i = 0; i < n; ++i) {
      Raw r{"d" + std::to_string(g() % 1000) + "-" + std::to_string(i), phrase(1 + g() % 6), ontos[g() % 3],
            g() % 2 ? prompts::Granularity::Sentence : prompts::Granularity::Paragraph, {}};
      const std::size_t k = 1 + g() % 3;
      for (std::size_t t = 0; t < k; ++t)
        r.answer.push_back({"rel" + std::to_string(t), phrase(1 + g() % 3), phrase(1 + g() % 3), {}});
      raw.push_back(std::move(r));
    }
    if (c % 2 == 0) {
      // the shortest match copies a run of the target
      std::istringstream words(target);
      std::vector<std::string> tw;
      for (std::string w; words >> w;) tw.push_back(w);
      const std::size_t a = g() % tw.size();
      Raw r{"forced-" + std::to_string(c), tw[a], target_onto, gran, {{"rel0", "x", "y", {}}}};
      raw.push_back(std::move(r));
      ++forced;
    }

    std::vector<prompts::Demonstration> pool;
    for (const auto& r : raw) pool.push_back(prompts::make_demonstration(r.id, r.context, r.answer, r.onto, r.gran));

    // exhaustive scan with the length recomputed from the rendered answer
    const Raw* best = nullptr;
    std::size_t best_len = 0;
    for (const auto& r : raw) {
      if (r.onto != target_onto || r.gran != gran || overlaps(r.context, target)) continue;
      std::size_t len = word_count(r.context);
      for (const auto& t : r.answer) len += word_count(t.relation + "(" + t.subject + ", " + t.object + ")");
      const bool better = !best || len < best_len ||
                          (len == best_len && (r.context < best->context ||
                                               (r.context == best->context && r.id < best->id)));
      if (better) {
        best = &r;
        best_len = len;
      }
    }

    try {
      const auto got = prompts::retrieve_demonstration(pool, target_onto, target, gran);
      f.expect(best && got.demo_id == best->id,
               "case " + std::to_string(c) + ": got " + got.demo_id + ", oracle " + (best ? best->id : "none"));
      f.expect(!best || got.length == best_len, "case " + std::to_string(c) + ": length differs");
    } catch (const Error& e) {
      f.expect(!best && e.code() == Errc::NoEligibleDemonstration,
               "case " + std::to_string(c) + ": unexpected " + e.what());
      ++none;
    }
  }
  f.expect(forced >= 200 && none < 400, "generator did not exercise overlap enough");
}

// ---------------------------------------------------------------------------
// 9. prompt-set cardinality

void prompt_cardinality(Failures& f) {
  std::vector<ontology::Ontology> ontos;
  std::vector<ontology::OntologyTemplate> templates;
  for (int i = 0; i < 7; ++i) {
    ontos.push_back({"Onto" + std::to_string(i), {"E" + std::to_string(i)}, {"rel" + std::to_string(i)}, ""});
    templates.push_back(ontology::make_template(ontos.back()));
  }
  std::vector<corpus::Chunk> chunks;
  for (int d = 0; d < 12; ++d)
    for (int k = 0; k < 30; ++k)
      chunks.push_back({corpus::make_chunk_id("doc" + std::to_string(d), static_cast<std::size_t>(k)),
                        "doc" + std::to_string(d), static_cast<std::size_t>(k),
                        "Chunk " + std::to_string(k) + " of document " + std::to_string(d) + ".", 5});
  const auto set = prompts::generate_prompt_set(chunks, templates, ontos, prompts::Strategy::ZeroShot, {}, 1);
  f.expect(chunks.size() == 360, "fixture has " + std::to_string(chunks.size()) + " chunks");
  f.expect(set.size() == 2520, "prompt set has " + std::to_string(set.size()) + " prompts");
  std::set<std::pair<std::string, std::string>> pairs;
  std::set<std::string> ids;
  for (const auto& p : set) {
    pairs.emplace(p.chunk_id, p.template_id);
    ids.insert(p.prompt_id);
  }
  f.expect(pairs.size() == 2520 && ids.size() == 2520, "pairs or ids repeat");
}

// ---------------------------------------------------------------------------
// 10. agreement

void agreement(Failures& f) {
  auto set_of = [](const std::vector<int>& items) {
    triples::TripleSet s;
    for (int i : items) s.add({"r", "s" + std::to_string(i), "o", {}});
    return s;
  };
  const auto abc = annotation::agreement_metrics(set_of({0, 1}), set_of({1, 2}));
  f.near(abc.jaccard, 1.0 / 3.0, 1e-15, "jaccard");
  f.near(abc.dice, 0.5, 1e-15, "dice");
  f.near(abc.overlap, 0.5, 1e-15, "overlap");
  const auto same = annotation::agreement_metrics(set_of({3, 4, 5}), set_of({5, 4, 3}));
  f.expect(same.jaccard == 1.0 && same.dice == 1.0 && same.overlap == 1.0, "identical is not 1");
  const auto apart = annotation::agreement_metrics(set_of({1, 2}), set_of({3}));
  f.expect(apart.jaccard == 0.0 && apart.dice == 0.0 && apart.overlap == 0.0, "disjoint is not 0");

  std::mt19937_64 g(123);
  for (int i = 0; i < 1000; ++i) {
    std::vector<int> a, b;
    for (int k = 0; k < 12; ++k) {
      if (g() % 2) a.push_back(k);
      if (g() % 3 == 0) b.push_back(k);
    }
    if (a.empty()) a.push_back(static_cast<int>(g() % 12));
    if (b.empty()) b.push_back(static_cast<int>(g() % 12));
    const auto m = annotation::agreement_metrics(set_of(a), set_of(b));
    f.expect(m.overlap >= m.dice && m.dice >= m.jaccard, "ordering violated");
  }
}

// ---------------------------------------------------------------------------
// 11. end-to-end determinism

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).generic_string()] = io::read_file(e.path());
  return files;
}

void run_everything(const fs::path& out) {
  auto c = pipeline::load_config(testing::mini_config());
  c.output_dir = out;
  pipeline::run_extraction(c, nullptr);
  pipeline::run_reference_eval(c);
  pipeline::run_judge_eval(c, nullptr);
  pipeline::AnnotateOptions opt;
  opt.annotator = "scripted";
  opt.k = 4;
  std::istringstream in("a\nr\n3\na\nu\nr\n1\nq\n");
  std::ostringstream sink;
  pipeline::run_annotation(c, opt, in, sink);
  pipeline::export_report(pipeline::run_dir(c));
  pipeline::write_manifest(pipeline::run_dir(c), c);
}

void determinism(Failures& f) {
  testing::TempDir first("accept-a"), second("accept-b");
  run_everything(first.path());
  run_everything(second.path());
  const auto a = snapshot(first.path());
  const auto b = snapshot(second.path());
  f.expect(a.size() > 50, "only " + std::to_string(a.size()) + " output files");
  f.expect(a.size() == b.size(), "file lists differ");
  for (const auto& [name, content] : a) {
    auto it = b.find(name);
    f.expect(it != b.end(), name + " missing from the second run");
    if (it != b.end()) f.expect(it->second == content, name + " differs");
  }
  for (const char* must : {"mini/manifest.json", "mini/report.md", "mini/eval/report.jsonl",
                           "mini/judge/correlations.csv", "mini/annotation/scripted.reference.jsonl"})
    f.expect(a.count(must) == 1, std::string("missing ") + must);
}

// ---------------------------------------------------------------------------
// 12. self-evaluation

void self_evaluation(Failures& f) {
  testing::TempDir dir("accept-self");
  auto c = pipeline::load_config(testing::mini_config());
  c.output_dir = dir.path();
  const auto inputs = pipeline::run_ingest(c);
  const auto refs = pipeline::load_triple_sets(*c.reference);

  std::map<std::string, const ontology::Ontology*> by_template;
  for (const auto& t : inputs.templates)
    for (const auto& o : inputs.ontologies)
      if (o.name == t.ontology_name) by_template[t.template_id] = &o;

  std::vector<eval::EvalItem> items;
  std::map<std::string, eval::CandidateOutput> outputs;
  double meteor_identity = 0;
  std::size_t scored = 0;
  for (const auto& chunk : inputs.chunks)
    for (const auto& [tid, onto] : by_template) {
      const std::string id = prompts::make_prompt_id(chunk.chunk_id, tid);
      auto it = refs.find(id);
      if (it == refs.end()) continue;
      items.push_back({id, chunk.text, onto, it->second});
      outputs[id] = {it->second, triples::canonical_serialize(it->second)};
      if (it->second.triples.empty()) continue;
      const double m =
          static_cast<double>(triples::normalized_tokens(triples::canonical_serialize(it->second)).size());
      meteor_identity += 1.0 - 0.5 * std::pow(1.0 / m, 3);
      ++scored;
    }
  f.expect(scored >= 10, "only " + std::to_string(scored) + " reference prompts");
  if (scored == 0) return;
  meteor_identity /= static_cast<double>(scored);

  const eval::CharNgramEmbedding emb;
  const auto s = eval::evaluate_configuration("reference", "self", items, outputs, emb);
  f.expect(s.raw.bleu <= 1.0 && 1.0 - s.raw.bleu <= eval::kBleuEpsilon, "BLEU " + str(s.raw.bleu));
  f.near(s.raw.rouge_l, 1.0, 1e-12, "ROUGE-L");
  f.near(s.raw.embed_sim, 1.0, 1e-9, "embedding similarity");
  f.near(s.raw.meteor, meteor_identity, 1e-12, "METEOR against its identity value");
  f.expect(s.raw.hallucination_rate == 0.0, "hallucination " + str(s.raw.hallucination_rate));
  f.expect(s.raw.format_conformance == 1.0, "format conformance " + str(s.raw.format_conformance));
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "triple grammar: paper lines and 1000 round trips", 1.0, triple_grammar},
      {2, "hallucination flags match a brute-force scanner on 200 cases", 5.0, hallucination_oracle},
      {3, "BLEU / ROUGE-L / METEOR hand values, identity and disjoint pairs", 0, metric_oracles},
      {4, "combined score equals hand-normalised means; format excluded", 0, combined_score},
      {5, "expectation score over enumerated histograms", 0, expectation_score},
      {6, "Spearman and Kendall against a brute-force pair counter", 0, correlations},
      {7, "position bias: Basic vs RandomizedFair with a slot-1 judge", 10.0, position_bias},
      {8, "demonstration retrieval matches an exhaustive scan on 500 pools", 0, demonstration_retrieval},
      {9, "360 chunks x 7 templates give 2520 unique prompts", 0, prompt_cardinality},
      {10, "agreement coefficients and their ordering", 0, agreement},
      {11, "replayed pipeline is byte-identical across runs", 30.0, determinism},
      {12, "reference self-evaluation", 0, self_evaluation},
  };

  int failed = 0;
  for (const Criterion& c : criteria) {
    Failures f;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.body(f);
    } catch (const std::exception& e) {
      f.messages.push_back(std::string("threw: ") + e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0 && seconds >= c.budget_seconds)
      f.messages.push_back("took " + str(seconds) + " s, limit " + str(c.budget_seconds) + " s");
    const bool ok = f.messages.empty();
    failed += !ok;
    std::printf("%s  criterion %2d  %-66s %8.3f s\n", ok ? "PASS" : "FAIL", c.number, c.title.c_str(), seconds);
    for (const auto& m : f.messages) std::printf("        %s\n", m.c_str());
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
