#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "minekg/ontology.hpp"
#include "minekg/triple.hpp"

namespace minekg::eval {

// ---------------------------------------------------------------------------
// String metrics. Inputs are whitespace-tokenised and expected to be
// normalised already (triples::normalize_text). An empty reference raises
// EmptyReference; an empty candidate scores 0.

/// Additive smoothing applied to the numerator and denominator of every
/// modified n-gram precision.
inline constexpr double kBleuEpsilon = 1e-9;

/// Sentence BLEU against one reference: geometric mean of modified 1..N-gram
/// precisions, N = min(4, candidate length), times the brevity penalty.
double bleu_score(std::string_view candidate, std::string_view reference);

/// ROUGE-L F1 (beta = 1) from the longest common subsequence.
double rouge_l_score(std::string_view candidate, std::string_view reference);

struct MeteorParams {
  double alpha = 0.9;
  double beta = 3.0;
  double gamma = 0.5;
};

/// Unigram alignment in two stages (exact, then text::stem equality). Within a
/// stage candidate tokens are visited left to right; each takes the reference
/// position right after its predecessor's match when that position is free and
/// matches, otherwise the leftmost free matching position.
///   Fmean   = P R / (alpha P + (1 - alpha) R)
///   penalty = gamma (chunks / matches)^beta
///   score   = Fmean (1 - penalty)
double meteor_score(std::string_view candidate, std::string_view reference,
                    const MeteorParams& params = {});

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dimension() const = 0;
  /// Deterministic per token; must return exactly dimension() values.
  virtual std::vector<double> embed(std::string_view token) const = 0;
};

/// Hashed character-trigram vectors of the token wrapped in '<' '>'. Needs no
/// model files and gives related surface forms related vectors.
class CharNgramEmbedding final : public EmbeddingProvider {
 public:
  explicit CharNgramEmbedding(std::size_t dimension = 128) : dimension_(dimension) {}
  std::size_t dimension() const override { return dimension_; }
  std::vector<double> embed(std::string_view token) const override;

 private:
  std::size_t dimension_;
};

/// Fixed token table. Unknown tokens go to `fallback` when one is given and
/// raise ProviderFailure otherwise.
class TableEmbedding final : public EmbeddingProvider {
 public:
  TableEmbedding(std::size_t dimension, std::shared_ptr<const EmbeddingProvider> fallback = nullptr);

  void add(std::string token, std::vector<double> vector);
  std::size_t dimension() const override { return dimension_; }
  std::vector<double> embed(std::string_view token) const override;

  /// word2vec text format: optional "<count> <dim>" header, then
  /// "<token> <v1> ... <vd>" per line. A fallback whose dimension differs
  /// from the table is swapped for CharNgramEmbedding of the table dimension.
  static std::shared_ptr<TableEmbedding> load_text(
      const std::filesystem::path& path, std::shared_ptr<const EmbeddingProvider> fallback);

 private:
  std::size_t dimension_;
  std::unordered_map<std::string, std::vector<double>> table_;
  std::shared_ptr<const EmbeddingProvider> fallback_;
};

/// Greedy max-cosine matching in both directions, returning the F1 of the
/// two averaged maxima. Range [-1, 1]; callers clamp for reporting.
/// Errors: EmptyReference, ProviderFailure.
double embedding_similarity_score(std::string_view candidate, std::string_view reference,
                                  const EmbeddingProvider& provider);

// ---------------------------------------------------------------------------
// Hallucination and format.

struct HallucinationFlags {
  bool subject_flag = false;
  bool relation_flag = false;
  bool object_flag = false;
  bool triple_flag = false;  // any of the above
};

/// Subject/object are flagged when their normalised tokens do not occur as a
/// contiguous run in the normalised context (an argument that normalises to
/// nothing is flagged). The relation is flagged when it is not in the
/// ontology, compared case-insensitively.
HallucinationFlags hallucination_assess(const triples::Triple& t, std::string_view context,
                                        const ontology::Ontology& onto);
HallucinationFlags hallucination_assess(const triples::Triple& t,
                                        std::span<const std::string> context_tokens,
                                        const ontology::Ontology& onto);

struct HallucinationRates {
  double subject = 0.0;
  double relation = 0.0;
  double object = 0.0;
  double triple = 0.0;
};

/// Fraction of flagged triples; an empty set has rate 0.
HallucinationRates hallucination_rates(const triples::TripleSet& ts, std::string_view context,
                                       const ontology::Ontology& onto);

/// Accepted lines over candidate lines using the triple grammar; 1 when the
/// output has no candidate lines.
double format_conformance_rate(std::string_view raw);

// ---------------------------------------------------------------------------
// Aggregation and the combined score.

struct MetricVector {
  double bleu = 0.0;
  double rouge_l = 0.0;
  double meteor = 0.0;
  double embed_sim = 0.0;
  double hallucination_rate = 0.0;
  double format_conformance = 0.0;
};

/// (v - min) / (max - min); every value becomes 0.5 when max == min.
/// Errors: InvalidArgument on empty input.
std::vector<double> min_max_normalize(std::span<const double> values);

struct NormalizedMetrics {
  double bleu = 0.0;
  double rouge_l = 0.0;
  double meteor = 0.0;
  double embed_sim = 0.0;
  double hallucination_rate = 0.0;
};

/// Column-wise min-max normalisation across the configurations given.
std::vector<NormalizedMetrics> normalize_matrix(std::span<const MetricVector> matrix);

/// Mean of the five normalised terms (BLEU, ROUGE-L, METEOR, embedding
/// similarity, 1 - hallucination) on a 0..100 scale. Format conformance does
/// not take part. Errors: InvalidArgument on an empty matrix.
std::vector<double> combined_score(std::span<const MetricVector> matrix);

struct EvalItem {
  std::string prompt_id;
  std::string context;
  const ontology::Ontology* ontology = nullptr;
  triples::TripleSet reference;
};

struct CandidateOutput {
  triples::TripleSet triples;
  std::string raw;
};

struct ConfigurationScores {
  std::string model_id;
  std::string strategy;
  std::size_t prompts = 0;
  MetricVector raw;
  HallucinationRates components;
  std::vector<std::string> warnings;
  std::vector<nlohmann::json> flags;  // one row per assessed triple
};

/// Scores one (model, strategy) configuration against the references.
/// Candidate and reference sets are canonically serialised and normalised
/// before the string metrics run; every score is macro-averaged over the
/// prompts that have a non-empty reference. Missing candidates count as empty
/// output. Errors: EmptyReference when no prompt has a reference triple.
ConfigurationScores evaluate_configuration(std::string model_id, std::string strategy,
                                           std::span<const EvalItem> items,
                                           const std::map<std::string, CandidateOutput>& outputs,
                                           const EmbeddingProvider& embeddings);

struct EvaluationRow {
  ConfigurationScores scores;
  NormalizedMetrics normalized;
  double combined = 0.0;
};

struct EvaluationReport {
  std::vector<EvaluationRow> rows;
};

EvaluationReport build_report(std::vector<ConfigurationScores> configurations);

std::string report_csv(const EvaluationReport& report);
std::vector<nlohmann::json> report_rows(const EvaluationReport& report);

}  // namespace minekg::eval
