#include "minekg/judge_eval.hpp"

#include <algorithm>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>

#include "minekg/error.hpp"
#include "minekg/io.hpp"
#include "minekg/rng.hpp"
#include "minekg/text.hpp"

namespace minekg::judge {
namespace {

constexpr std::size_t kExcerptBytes = 2000;

std::string count_word(std::size_t n) {
  static const char* const kWords[] = {"zero", "one", "two", "three", "four", "five",
                                       "six",  "seven", "eight", "nine", "ten"};
  return n < std::size(kWords) ? kWords[n] : std::to_string(n);
}

std::string ranking_format(std::size_t mu, std::string_view label) {
  std::string out = "[";
  for (std::size_t i = 1; i <= mu; ++i) {
    if (i > 1) out += "; ";
    out += std::to_string(i) + ": " + std::string(label);
  }
  return out + "]";
}

std::string answer_text(const CandidateAnswer& a) {
  if (!text::trim(a.raw_output).empty()) return std::string(text::trim(a.raw_output));
  std::string canonical = triples::canonical_serialize(a.triples);
  return canonical.empty() ? "(no output)" : canonical;
}

std::string model_outputs(const CandidateSet& c, const std::vector<std::size_t>& order) {
  std::string out;
  for (std::size_t slot = 0; slot < order.size(); ++slot) {
    out += "Model " + std::to_string(slot + 1) + ":\n";
    out += answer_text(c.answers[order[slot]]) + "\n\n";
  }
  return out;
}

std::string ontology_sections(const ontology::Ontology& onto, std::string_view context) {
  return "Entity Types: " + text::join(std::span<const std::string>(onto.entity_types), ", ") +
         "\n\nRelation Types: " +
         text::join(std::span<const std::string>(onto.relation_types), ", ") +
         "\n\nContext: " + std::string(context) + "\n\n";
}

std::string basic_prompt(std::size_t mu, const ontology::Ontology& onto, std::string_view context,
                         const std::string& outputs) {
  const std::string n = std::to_string(mu);
  std::string s;
  s += "Instruction:\n";
  s += "You are a judge who ranks " + count_word(mu) + " models from 1 to " + n +
       " on a triple extraction task. You must assign 1 to the model with the best answer and " +
       n + " to the model with the worst answer. Your ranking should be provided directly in "
           "this format: " + ranking_format(mu, "model x") + ".\n\n";
  s += "Ranking Criteria:\n\n";
  s += "Correctness:\nThe triples must conform to the format relation(subject, object) and must "
       "accurately reflect relationships stated in the context. Models with significant "
       "formatting errors should be penalized.\n\n";
  s += "Coverage:\nThe number of correct triples extracted. More accurate triples are better, but "
       "avoid penalizing slight redundancies unless they detract from the overall relevance.\n\n";
  s += "Relevance:\nThe triples must be relevant to the specified entity and relation types and "
       "should align well with the specific context provided.\n\n";
  s += "Edge Cases:\nIf a model extracts many triples but includes incorrect or redundant ones, "
       "balance accuracy and redundancy in your ranking. Correctness should be prioritized, "
       "followed by Relevance, then Coverage.\n\n";
  s += ontology_sections(onto, context);
  s += "Model Outputs:\n" + outputs;
  s += "Your ranking:\n";
  return s;
}

std::string fair_prompt(std::size_t mu, const ontology::Ontology& onto, std::string_view context,
                        const std::string& outputs) {
  const std::string n = std::to_string(mu);
  std::string s;
  s += "Instruction:\n";
  s += "You are a judge tasked with evaluating and ranking " + count_word(mu) +
       " models based on their performance in a triple extraction task. Your role is to ensure "
       "fairness, impartiality, and accuracy by independently evaluating each model's output "
       "without any positional bias. Do not assume that the first model is better or worse "
       "simply because of its position; all models must be treated equally.\n\n";
  s += "Evaluation Guidelines:\n";
  s += "1. Independence of Evaluation:\n   Evaluate each model independently without comparing it "
       "to others until all models are scored. Avoid assumptions based on position or order in "
       "the list.\n";
  s += "2. Evaluation Criteria:\n";
  s += "   a. Correctness of Triples (Highest Priority):\n"
       "      - Triples must strictly conform to the format relation(subject, object).\n"
       "      - Relationships must match the Given Relation Types provided below.\n"
       "      - Triples containing fabricated or hallucinated relationships must result in a "
       "significant penalty.\n";
  s += "   b. Relevance:\n"
       "      - Triples must accurately reflect relationships mentioned in the Context.\n"
       "      - Irrelevant triples or hallucinations must receive a lower score.\n";
  s += "   c. Coverage:\n"
       "      - The number of correct triples extracted. Higher coverage is better only if "
       "triples meet correctness and relevance criteria.\n";
  s += "3. Ranking Process:\n"
       "   - Step 1: Independently evaluate each model's output and assign scores (from 1 to 10) "
       "for each criterion: Correctness, Relevance, and Coverage. Summarize the total score for "
       "each model.\n"
       "   - Step 2: Rank all " + count_word(mu) + " models from 1 (best) to " + n +
       " (worst) based solely on their total scores.\n"
       "   - Break ties by prioritizing Correctness first, then Relevance, and finally "
       "Coverage.\n\n";
  s += "Important Note:\nTreat all models equally regardless of position. Your goal is to be an "
       "impartial judge. Avoid positional bias and ensure the evaluation reflects only the "
       "quality of the model outputs.\n\n";
  s += "Output Format:\nProvide your output strictly in this format:\nEvaluation:\n";
  for (std::size_t i = 1; i <= mu; ++i)
    s += "Model " + std::to_string(i) +
         ": Correctness = X, Relevance = X, Coverage = X, Total = Y\n";
  s += "Ranking:\n" + ranking_format(mu, "Model X") + "\n\n";
  s += ontology_sections(onto, context);
  s += "Model Outputs:\n" + outputs;
  s += "Your evaluation and ranking:\n";
  return s;
}

std::string format_reminder(std::size_t mu) {
  return "\n\nYour previous reply did not contain a readable ranking. End your reply with one "
         "line in exactly this format: " + ranking_format(mu, "Model X") + "\n";
}

// Tail of the reply, where the ranking sits, cut on a UTF-8 boundary.
std::string excerpt(std::string_view raw) {
  if (raw.size() <= kExcerptBytes) return std::string(raw);
  std::size_t start = raw.size() - kExcerptBytes;
  while (start < raw.size() && (static_cast<unsigned char>(raw[start]) & 0xC0) == 0x80) ++start;
  return std::string(raw.substr(start));
}

struct Entry {
  std::optional<std::size_t> rank;
  std::size_t slot = 0;
};

std::vector<Entry> bracket_entries(std::string_view raw) {
  static const std::regex kEntry(R"((\d+)\s*[:.)]\s*model\s*(\d+))", std::regex::icase);
  std::size_t close = raw.size();
  while (true) {
    close = raw.rfind(']', close == 0 ? std::string_view::npos : close - 1);
    if (close == std::string_view::npos) return {};
    const std::size_t open = raw.rfind('[', close);
    if (open == std::string_view::npos) return {};
    const std::string inner(raw.substr(open + 1, close - open - 1));
    std::vector<Entry> entries;
    for (auto it = std::sregex_iterator(inner.begin(), inner.end(), kEntry);
         it != std::sregex_iterator(); ++it)
      entries.push_back({std::stoul((*it)[1].str()), std::stoul((*it)[2].str())});
    if (!entries.empty()) return entries;
    if (open == 0) return {};
    close = open;
  }
}

// "Ranking" heading followed by one "Model k" per line.
std::vector<Entry> heading_entries(std::string_view raw, std::size_t mu) {
  static const std::regex kModel(R"(model\s*(\d+))", std::regex::icase);
  static const std::regex kNumbered(R"(^\W*(\d+)\s*[:.)]\s*\W*model\s*(\d+))", std::regex::icase);
  const std::string lower = text::to_lower_ascii(raw);
  std::size_t pos = lower.size();
  while (pos > 0) {
    pos = lower.rfind("ranking", pos - 1);
    if (pos == std::string::npos) break;
    const std::size_t line_end = raw.find('\n', pos);
    if (line_end == std::string_view::npos) continue;
    std::istringstream lines{std::string(raw.substr(line_end + 1))};
    std::vector<Entry> entries;
    std::string line;
    while (entries.size() < mu && std::getline(lines, line)) {
      std::smatch m;
      if (std::regex_search(line, m, kNumbered))
        entries.push_back({std::stoul(m[1].str()), std::stoul(m[2].str())});
      else if (std::regex_search(line, m, kModel))
        entries.push_back({std::nullopt, std::stoul(m[1].str())});
    }
    if (!entries.empty()) return entries;
  }
  return {};
}

std::map<std::size_t, CriterionScores> criterion_scores(std::string_view raw) {
  static const std::regex kScores(
      R"(model\s*(\d+)\W*correctness\s*[=:]\s*([0-9.]+)\W+relevance\s*[=:]\s*([0-9.]+)\W+coverage\s*[=:]\s*([0-9.]+)\W+total\s*[=:]\s*([0-9.]+))",
      std::regex::icase);
  std::map<std::size_t, CriterionScores> out;
  std::istringstream lines{std::string(raw)};
  std::string line;
  while (std::getline(lines, line)) {
    std::smatch m;
    if (!std::regex_search(line, m, kScores)) continue;
    try {
      out[std::stoul(m[1].str())] = {std::stod(m[2].str()), std::stod(m[3].str()),
                                     std::stod(m[4].str()), std::stod(m[5].str())};
    } catch (const std::exception&) {
      // "1.2.3" and the like; the ranking is what matters
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(JudgeMethod m) noexcept {
  switch (m) {
    case JudgeMethod::Basic: return "basic";
    case JudgeMethod::Fair: return "fair";
    case JudgeMethod::RandomizedFair: return "randomized-fair";
  }
  return "basic";
}

JudgeMethod parse_method(std::string_view name) {
  std::string key = text::to_lower_ascii(text::trim(name));
  std::replace(key.begin(), key.end(), '_', '-');
  if (key == "basic") return JudgeMethod::Basic;
  if (key == "fair") return JudgeMethod::Fair;
  if (key == "randomized-fair" || key == "randomised-fair" || key == "rfair")
    return JudgeMethod::RandomizedFair;
  throw Error(Errc::InvalidArgument, "unknown judge method '" + std::string(name) + "'");
}

void validate(const CandidateSet& candidates) {
  if (candidates.answers.size() < 2)
    throw Error(Errc::InvalidArgument,
                candidates.prompt_id + ": a judge needs at least two candidate answers");
  std::set<std::string> seen;
  for (const CandidateAnswer& a : candidates.answers)
    if (!seen.insert(a.model_id).second)
      throw Error(Errc::InvalidArgument,
                  candidates.prompt_id + ": model '" + a.model_id + "' appears twice");
}

std::vector<std::size_t> shuffle_permutation(std::uint64_t seed, std::string_view prompt_id,
                                             std::size_t mu) {
  DeterministicRng rng(derive_seed(seed, prompt_id));
  return rng.permutation(mu);
}

JudgePrompt build_judge_prompt(JudgeMethod method, const ontology::Ontology& onto,
                               std::string_view context, const CandidateSet& candidates,
                               std::uint64_t seed, const std::vector<std::size_t>* permutation) {
  validate(candidates);
  const std::size_t mu = candidates.answers.size();
  JudgePrompt out;
  out.shuffle_map.resize(mu);
  std::iota(out.shuffle_map.begin(), out.shuffle_map.end(), std::size_t{0});
  if (method == JudgeMethod::RandomizedFair) {
    if (permutation != nullptr) {
      std::vector<std::size_t> sorted = *permutation;
      std::sort(sorted.begin(), sorted.end());
      if (sorted != out.shuffle_map)
        throw Error(Errc::InvalidArgument, "explicit shuffle is not a permutation of 0.." +
                                               std::to_string(mu - 1));
      out.shuffle_map = *permutation;
    } else {
      out.shuffle_map = shuffle_permutation(seed, candidates.prompt_id, mu);
    }
  }
  const std::string outputs = model_outputs(candidates, out.shuffle_map);
  out.text = method == JudgeMethod::Basic ? basic_prompt(mu, onto, context, outputs)
                                          : fair_prompt(mu, onto, context, outputs);
  return out;
}

ParsedVerdict parse_verdict(std::string_view raw, std::span<const std::size_t> shuffle_map,
                            std::size_t mu) {
  if (!shuffle_map.empty() && shuffle_map.size() != mu)
    throw Error(Errc::InvalidArgument, "shuffle map does not cover every candidate");
  std::vector<Entry> entries = bracket_entries(raw);
  if (entries.empty()) entries = heading_entries(raw, mu);
  if (entries.empty()) throw Error(Errc::MalformedVerdict, "no ranking found in judge reply");
  if (entries.size() != mu)
    throw Error(Errc::MalformedVerdict, "ranking lists " + std::to_string(entries.size()) +
                                            " models, expected " + std::to_string(mu));

  const bool explicit_ranks =
      std::all_of(entries.begin(), entries.end(), [](const Entry& e) { return e.rank.has_value(); });
  auto original = [&](std::size_t slot) {
    return shuffle_map.empty() ? slot - 1 : shuffle_map[slot - 1];
  };

  ParsedVerdict v;
  v.best_first.assign(mu, mu);
  std::vector<bool> slot_seen(mu + 1, false);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const std::size_t rank = explicit_ranks ? *entries[k].rank : k + 1;
    const std::size_t slot = entries[k].slot;
    if (rank < 1 || rank > mu)
      throw Error(Errc::MalformedVerdict, "rank " + std::to_string(rank) + " out of range");
    if (slot < 1 || slot > mu)
      throw Error(Errc::MalformedVerdict, "model " + std::to_string(slot) + " out of range");
    if (v.best_first[rank - 1] != mu)
      throw Error(Errc::MalformedVerdict, "rank " + std::to_string(rank) + " given twice");
    if (slot_seen[slot])
      throw Error(Errc::MalformedVerdict, "model " + std::to_string(slot) + " ranked twice");
    slot_seen[slot] = true;
    v.best_first[rank - 1] = original(slot);
  }
  for (const auto& [slot, scores] : criterion_scores(raw))
    if (slot >= 1 && slot <= mu) v.scores[original(slot)] = scores;
  return v;
}

std::vector<std::string> ranked_models(const JudgeVerdict& v) {
  std::vector<std::pair<int, std::string>> order;
  for (const auto& [model, rank] : v.ranking) order.emplace_back(rank, model);
  std::sort(order.begin(), order.end());
  std::vector<std::string> out;
  for (auto& [rank, model] : order) out.push_back(std::move(model));
  return out;
}

nlohmann::json to_json(const JudgeVerdict& v) {
  nlohmann::json scores = nlohmann::json::object();
  for (const auto& [model, s] : v.scores)
    scores[model] = {{"correctness", s.correctness},
                     {"relevance", s.relevance},
                     {"coverage", s.coverage},
                     {"total", s.total}};
  return {{"prompt_id", v.prompt_id},
          {"method", to_string(v.method)},
          {"judge_model", v.judge_model},
          {"ranking", v.ranking},
          {"scores", scores},
          {"shuffle_map", v.shuffle_map.empty() ? nlohmann::json(nullptr) : nlohmann::json(v.shuffle_map)},
          {"raw_excerpt", v.raw_excerpt}};
}

JudgeVerdict verdict_from_json(const nlohmann::json& row) {
  try {
    JudgeVerdict v;
    v.prompt_id = row.at("prompt_id").get<std::string>();
    v.method = parse_method(row.at("method").get<std::string>());
    v.judge_model = row.at("judge_model").get<std::string>();
    v.ranking = row.at("ranking").get<std::map<std::string, int>>();
    if (row.contains("scores"))
      for (const auto& [model, s] : row.at("scores").items())
        v.scores[model] = {s.at("correctness").get<double>(), s.at("relevance").get<double>(),
                           s.at("coverage").get<double>(), s.at("total").get<double>()};
    if (row.contains("shuffle_map") && !row.at("shuffle_map").is_null())
      v.shuffle_map = row.at("shuffle_map").get<std::vector<std::size_t>>();
    v.raw_excerpt = row.value("raw_excerpt", std::string{});
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedFile, std::string("verdict row: ") + e.what());
  }
}

void RankHistogram::add(const std::string& model_id, int rank, std::size_t times) {
  if (mu_ == 0) throw Error(Errc::InvalidArgument, "histogram has no rank range");
  if (rank < 1 || static_cast<std::size_t>(rank) > mu_)
    throw Error(Errc::InvalidArgument, "rank " + std::to_string(rank) + " outside 1.." +
                                           std::to_string(mu_));
  auto& row = counts_[model_id];
  if (row.empty()) row.assign(mu_, 0);
  row[static_cast<std::size_t>(rank - 1)] += times;
}

void RankHistogram::add(const JudgeVerdict& v) {
  if (mu_ == 0) mu_ = v.ranking.size();
  if (v.ranking.size() != mu_)
    throw Error(Errc::InvalidArgument, v.prompt_id + ": verdict ranks " +
                                           std::to_string(v.ranking.size()) + " models, expected " +
                                           std::to_string(mu_));
  for (const auto& [model, rank] : v.ranking) add(model, rank);
}

std::map<std::string, double> expectation_score(const RankHistogram& h) {
  if (h.empty()) throw Error(Errc::EmptyHistogram, "no verdicts were accumulated");
  std::map<std::string, double> out;
  for (const auto& [model, row] : h.counts()) {
    double weighted = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) {
      weighted += static_cast<double>(i + 1) * static_cast<double>(row[i]);
      total += static_cast<double>(row[i]);
    }
    if (total == 0.0) throw Error(Errc::EmptyHistogram, "model '" + model + "' was never ranked");
    out[model] = weighted / total;
  }
  return out;
}

std::vector<std::string> expectation_ranking(const std::map<std::string, double>& scores) {
  std::vector<std::pair<double, std::string>> order;
  for (const auto& [model, e] : scores) order.emplace_back(e, model);
  std::sort(order.begin(), order.end());
  std::vector<std::string> out;
  for (auto& [e, model] : order) out.push_back(std::move(model));
  return out;
}

Ranking ranking_from_order(std::span<const std::string> best_first) {
  Ranking r;
  for (std::size_t i = 0; i < best_first.size(); ++i)
    if (!r.emplace(best_first[i], static_cast<int>(i + 1)).second)
      throw Error(Errc::InvalidArgument, "model '" + best_first[i] + "' listed twice");
  return r;
}

namespace {

// Positions 1..n in order of rank value.
std::map<std::string, std::size_t> positions(const Ranking& r) {
  std::vector<std::pair<int, std::string>> order;
  for (const auto& [model, rank] : r) order.emplace_back(rank, model);
  std::sort(order.begin(), order.end());
  std::map<std::string, std::size_t> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i > 0 && order[i].first == order[i - 1].first)
      throw Error(Errc::InvalidArgument, "tied ranks for '" + order[i - 1].second + "' and '" +
                                             order[i].second + "'");
    out[order[i].second] = i + 1;
  }
  return out;
}

std::size_t count_inversions(std::vector<std::size_t>& v, std::vector<std::size_t>& scratch,
                             std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::size_t inv = count_inversions(v, scratch, lo, mid) + count_inversions(v, scratch, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[i] <= v[j]) {
      scratch[k++] = v[i++];
    } else {
      inv += mid - i;
      scratch[k++] = v[j++];
    }
  }
  while (i < mid) scratch[k++] = v[i++];
  while (j < hi) scratch[k++] = v[j++];
  std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo),
            scratch.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return inv;
}

}  // namespace

CorrelationResult rank_correlations(const Ranking& a, const Ranking& b) {
  if (a.size() != b.size() ||
      !std::equal(a.begin(), a.end(), b.begin(),
                  [](const auto& x, const auto& y) { return x.first == y.first; }))
    throw Error(Errc::MismatchedModels, "rankings cover different models");
  const std::size_t n = a.size();
  if (n < 2) throw Error(Errc::InvalidArgument, "correlation needs at least two models");

  const auto pa = positions(a);
  const auto pb = positions(b);
  double d2 = 0.0;
  for (const auto& [model, p] : pa) {
    const double d = static_cast<double>(p) - static_cast<double>(pb.at(model));
    d2 += d * d;
  }
  const double nd = static_cast<double>(n);

  // b's positions listed in a's order; every inversion is a discordant pair
  std::vector<std::size_t> seq(n);
  for (const auto& [model, p] : pa) seq[p - 1] = pb.at(model);
  std::vector<std::size_t> scratch(n);
  const double discordant = static_cast<double>(count_inversions(seq, scratch, 0, n));
  const double pairs = nd * (nd - 1.0) / 2.0;

  CorrelationResult r;
  r.spearman_rho = 1.0 - 6.0 * d2 / (nd * (nd * nd - 1.0));
  r.kendall_tau = (pairs - 2.0 * discordant) / pairs;
  return r;
}

JudgeRoundResult judge_round(std::span<const JudgeItem> items, const JudgeOptions& options,
                             llm::Gateway& gateway) {
  JudgeRoundResult result;
  if (items.empty()) return result;

  std::set<std::string> models;
  std::map<std::string, const JudgeItem*> by_id;
  for (const JudgeItem& item : items) {
    if (item.ontology == nullptr)
      throw Error(Errc::InvalidArgument, item.prompt_id + ": no ontology for judge prompt");
    validate(item.candidates);
    std::set<std::string> these;
    for (const CandidateAnswer& a : item.candidates.answers) these.insert(a.model_id);
    if (models.empty()) models = these;
    if (these != models)
      throw Error(Errc::InvalidArgument,
                  item.prompt_id + ": candidate models differ from the other prompts");
    if (!by_id.emplace(item.prompt_id, &item).second)
      throw Error(Errc::InvalidArgument, item.prompt_id + ": judged twice in one round");
  }
  const std::size_t mu = models.size();
  result.histogram = RankHistogram(mu);

  std::map<std::string, JudgePrompt> prompts;
  std::vector<std::pair<std::string, llm::CompletionRequest>> requests;
  for (const auto& [id, item] : by_id) {
    JudgePrompt p = build_judge_prompt(options.method, *item->ontology, item->context,
                                       item->candidates, options.seed);
    requests.push_back({id, {options.judge_model, p.text, 0.0, 1.0, options.max_tokens}});
    prompts.emplace(id, std::move(p));
  }

  std::map<std::string, std::string> replies = gateway.complete_all(requests);
  std::map<std::string, std::pair<ParsedVerdict, std::string>> parsed;
  std::vector<std::pair<std::string, llm::CompletionRequest>> retries;
  for (auto& [id, request] : requests) {
    try {
      parsed.emplace(id, std::pair{parse_verdict(replies.at(id), prompts.at(id).shuffle_map, mu),
                                   replies.at(id)});
    } catch (const Error& e) {
      if (e.code() != Errc::MalformedVerdict) throw;
      llm::CompletionRequest again = request;
      again.prompt_text += format_reminder(mu);
      retries.push_back({id, std::move(again)});
    }
  }
  if (!retries.empty()) {
    std::map<std::string, std::string> second = gateway.complete_all(retries);
    for (const auto& [id, request] : retries) {
      try {
        parsed.emplace(id, std::pair{parse_verdict(second.at(id), prompts.at(id).shuffle_map, mu),
                                     second.at(id)});
      } catch (const Error& e) {
        if (e.code() != Errc::MalformedVerdict) throw;
        result.warnings.push_back(id + ": judge " + options.judge_model + " (" +
                                  std::string(to_string(options.method)) +
                                  ") gave no usable ranking after one retry: " + e.what());
      }
    }
  }
  if (parsed.empty())
    throw Error(Errc::AllVerdictsMalformed, "judge " + options.judge_model + " (" +
                                                std::string(to_string(options.method)) +
                                                ") produced no usable verdict");

  for (const auto& [id, entry] : parsed) {
    const auto& [pv, raw] = entry;
    const CandidateSet& c = by_id.at(id)->candidates;
    JudgeVerdict v;
    v.prompt_id = id;
    v.method = options.method;
    v.judge_model = options.judge_model;
    for (std::size_t r = 0; r < pv.best_first.size(); ++r)
      v.ranking[c.answers[pv.best_first[r]].model_id] = static_cast<int>(r + 1);
    for (const auto& [index, scores] : pv.scores) v.scores[c.answers[index].model_id] = scores;
    if (options.method == JudgeMethod::RandomizedFair) v.shuffle_map = prompts.at(id).shuffle_map;
    v.raw_excerpt = excerpt(raw);
    result.histogram.add(v);
    result.verdicts.push_back(std::move(v));
  }
  return result;
}

AggregatedAnswers aggregate_best_answers(std::span<const JudgeVerdict> verdicts,
                                         std::span<const CandidateSet> candidates) {
  std::map<std::string, const JudgeVerdict*> by_prompt;
  for (const JudgeVerdict& v : verdicts) by_prompt.emplace(v.prompt_id, &v);

  std::vector<const CandidateSet*> ordered;
  for (const CandidateSet& c : candidates) ordered.push_back(&c);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto* a, const auto* b) { return a->prompt_id < b->prompt_id; });

  AggregatedAnswers out;
  out.merged.prompt_id = "aggregate";
  for (const CandidateSet* c : ordered) {
    auto it = by_prompt.find(c->prompt_id);
    if (it == by_prompt.end())
      throw Error(Errc::MissingVerdict, c->prompt_id + ": no verdict to pick a best answer");
    const std::vector<std::string> order = ranked_models(*it->second);
    const auto best = std::find_if(c->answers.begin(), c->answers.end(), [&](const auto& a) {
      return !order.empty() && a.model_id == order.front();
    });
    if (best == c->answers.end())
      throw Error(Errc::MissingVerdict,
                  c->prompt_id + ": verdict does not match the candidate models");
    triples::TripleSet chosen = best->triples;
    chosen.prompt_id = c->prompt_id;
    for (const triples::Triple& t : chosen.triples) out.merged.add(t);
    out.per_prompt.emplace(c->prompt_id, std::move(chosen));
  }
  return out;
}

std::string correlation_csv(std::span<const CorrelationRow> rows) {
  std::string out = "judge_model,method,spearman,kendall\n";
  for (const CorrelationRow& r : rows)
    out += io::csv_field(r.judge_model) + "," + std::string(to_string(r.method)) + "," +
           io::format_fixed(r.result.spearman_rho, 6) + "," +
           io::format_fixed(r.result.kendall_tau, 6) + "\n";
  return out;
}

}  // namespace minekg::judge
