#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "minekg/llm_gateway.hpp"
#include "minekg/ontology.hpp"
#include "minekg/triple.hpp"

namespace minekg::judge {

enum class JudgeMethod { Basic, Fair, RandomizedFair };

std::string_view to_string(JudgeMethod m) noexcept;
/// basic, fair, randomized-fair (also "randomized_fair", "rfair"), any case.
JudgeMethod parse_method(std::string_view name);

struct CandidateAnswer {
  std::string model_id;
  triples::TripleSet triples;
  std::string raw_output;  // shown to the judge when non-empty
};

struct CandidateSet {
  std::string prompt_id;
  std::vector<CandidateAnswer> answers;  // mu = answers.size()
};

/// Errors: InvalidArgument when mu < 2 or model ids repeat.
void validate(const CandidateSet& candidates);

struct JudgePrompt {
  std::string text;
  /// shuffle_map[slot] = index into CandidateSet::answers shown as
  /// "Model <slot + 1>". Identity for Basic and Fair.
  std::vector<std::size_t> shuffle_map;
};

/// Permutation used by RandomizedFair; derived from (seed, prompt_id).
std::vector<std::size_t> shuffle_permutation(std::uint64_t seed, std::string_view prompt_id,
                                             std::size_t mu);

/// Renders the judge prompt. RandomizedFair shows candidates in the order of
/// shuffle_permutation() unless `permutation` is given explicitly.
JudgePrompt build_judge_prompt(JudgeMethod method, const ontology::Ontology& onto,
                               std::string_view context, const CandidateSet& candidates,
                               std::uint64_t seed,
                               const std::vector<std::size_t>* permutation = nullptr);

struct CriterionScores {
  double correctness = 0.0;
  double relevance = 0.0;
  double coverage = 0.0;
  double total = 0.0;
};

/// A verdict in original candidate space.
struct ParsedVerdict {
  std::vector<std::size_t> best_first;  // candidate indices, rank 1 first
  std::map<std::size_t, CriterionScores> scores;
};

/// Reads the last "[1: Model a; 2: Model b; ...]" bracket (case and spacing
/// are free; ';' or ',' separate entries). When there is none, a "Ranking"
/// heading followed by one "Model k" per line is accepted. Slots are mapped
/// back through `shuffle_map` (empty = identity). Per-model
/// "Correctness = x, Relevance = x, Coverage = x, Total = y" lines are kept
/// when present.
/// Errors: MalformedVerdict (no ranking, wrong length, repeated or missing
/// ranks or models).
ParsedVerdict parse_verdict(std::string_view raw, std::span<const std::size_t> shuffle_map,
                            std::size_t mu);

struct JudgeVerdict {
  std::string prompt_id;
  JudgeMethod method = JudgeMethod::Basic;
  std::string judge_model;
  std::map<std::string, int> ranking;  // model_id -> rank in 1..mu
  std::map<std::string, CriterionScores> scores;
  std::vector<std::size_t> shuffle_map;  // empty unless RandomizedFair
  std::string raw_excerpt;
};

/// Model ids ordered by rank.
std::vector<std::string> ranked_models(const JudgeVerdict& v);

nlohmann::json to_json(const JudgeVerdict& v);
JudgeVerdict verdict_from_json(const nlohmann::json& row);

class RankHistogram {
 public:
  RankHistogram() = default;
  explicit RankHistogram(std::size_t mu) : mu_(mu) {}

  /// Errors: InvalidArgument when the verdict ranks a different number of
  /// models than earlier ones.
  void add(const JudgeVerdict& v);
  void add(const std::string& model_id, int rank, std::size_t times = 1);

  std::size_t mu() const noexcept { return mu_; }
  bool empty() const noexcept { return counts_.empty(); }
  /// counts()[m][i - 1] = P_m(i)
  const std::map<std::string, std::vector<std::size_t>>& counts() const noexcept { return counts_; }

 private:
  std::size_t mu_ = 0;
  std::map<std::string, std::vector<std::size_t>> counts_;
};

/// E(m) = sum_i i P_m(i) / sum_i P_m(i).
/// Errors: EmptyHistogram when there are no models or a model has no counts.
std::map<std::string, double> expectation_score(const RankHistogram& h);

/// Models by ascending E; ties broken by model id.
std::vector<std::string> expectation_ranking(const std::map<std::string, double>& scores);

/// model_id -> rank
using Ranking = std::map<std::string, int>;
/// Rank 1 for the first entry, 2 for the next and so on.
Ranking ranking_from_order(std::span<const std::string> best_first);

struct CorrelationResult {
  double spearman_rho = 0.0;
  double kendall_tau = 0.0;
};

/// Spearman from squared rank differences and Kendall tau-a from the count of
/// discordant pairs. Rank values only need to be distinct; they are reduced to
/// positions 1..n first.
/// Errors: MismatchedModels; InvalidArgument for ties or fewer than 2 models.
CorrelationResult rank_correlations(const Ranking& a, const Ranking& b);

struct JudgeItem {
  std::string prompt_id;
  std::string context;
  const ontology::Ontology* ontology = nullptr;
  CandidateSet candidates;
};

struct JudgeOptions {
  JudgeMethod method = JudgeMethod::RandomizedFair;
  std::string judge_model;
  std::uint64_t seed = 0;
  int max_tokens = 2048;
};

struct JudgeRoundResult {
  std::vector<JudgeVerdict> verdicts;  // sorted by prompt_id
  RankHistogram histogram;
  std::vector<std::string> warnings;
};

/// Judges every item once. A reply that does not parse is retried once with
/// a format reminder appended; a second failure skips the prompt with a
/// warning. All items must offer the same set of models.
/// Errors: AllVerdictsMalformed when items were given but none parsed;
/// InvalidArgument for inconsistent candidate sets; gateway errors.
JudgeRoundResult judge_round(std::span<const JudgeItem> items, const JudgeOptions& options,
                             llm::Gateway& gateway);

/// Rank-1 answer per prompt and the de-duplicated union in prompt order.
struct AggregatedAnswers {
  std::map<std::string, triples::TripleSet> per_prompt;
  triples::TripleSet merged;
};

/// Errors: MissingVerdict when a candidate set has no verdict.
AggregatedAnswers aggregate_best_answers(std::span<const JudgeVerdict> verdicts,
                                         std::span<const CandidateSet> candidates);

struct CorrelationRow {
  std::string judge_model;
  JudgeMethod method = JudgeMethod::Basic;
  CorrelationResult result;
};

/// judge_model,method,spearman,kendall
std::string correlation_csv(std::span<const CorrelationRow> rows);

}  // namespace minekg::judge
