#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "minekg/corpus.hpp"
#include "minekg/judge_eval.hpp"
#include "minekg/llm_gateway.hpp"
#include "minekg/ontology.hpp"
#include "minekg/prompt_forge.hpp"
#include "minekg/ref_eval.hpp"

namespace minekg::pipeline {

namespace fs = std::filesystem;

struct RunConfig {
  fs::path corpus_manifest;
  std::vector<fs::path> ontologies;
  std::optional<fs::path> demonstrations;
  std::optional<fs::path> reference;
  std::optional<fs::path> embeddings;  // word2vec text; char n-grams otherwise
  std::vector<prompts::Strategy> strategies{prompts::kAllStrategies.begin(),
                                            prompts::kAllStrategies.end()};
  std::vector<std::string> extractor_models;
  std::vector<std::string> judge_models;
  std::vector<judge::JudgeMethod> judge_methods{judge::JudgeMethod::Basic, judge::JudgeMethod::Fair,
                                                judge::JudgeMethod::RandomizedFair};
  prompts::Strategy judge_strategy = prompts::Strategy::OntologySentence;
  std::size_t judge_sample = 0;  // prompts per judge round; 0 = all
  std::uint64_t seed = 0;
  llm::Mode mode = llm::Mode::Replay;
  std::optional<fs::path> cassette;
  fs::path output_dir = "runs";
  std::string run_id = "run";
  corpus::ChunkingOptions chunking;
  int max_tokens = 1024;
  int judge_max_tokens = 2048;
  bool strict = true;
  std::size_t concurrency = 4;
  fs::path base_dir = ".";  // where relative input paths were resolved from
};

/// "key = value" lines; '#' starts a comment line; lists are comma separated.
/// Relative paths resolve against `base_dir`.
/// Errors: ConfigInvalid (unknown or repeated key, bad value).
RunConfig parse_config(std::string_view content, const fs::path& base_dir);
RunConfig load_config(const fs::path& path);

/// Errors: ConfigInvalid naming the offending key or path.
void validate(const RunConfig& config);

fs::path run_dir(const RunConfig& config);

struct Inputs {
  std::vector<corpus::Document> documents;
  std::vector<corpus::Chunk> chunks;
  corpus::CorpusStats stats;
  std::vector<ontology::Ontology> ontologies;
  std::vector<ontology::OntologyTemplate> templates;
  std::vector<prompts::Demonstration> pool;
};

/// Loads corpus, ontologies and demonstrations and writes chunks.jsonl,
/// corpus_stats.json and ontologies.json into the run directory.
Inputs run_ingest(const RunConfig& config);

/// Prompt sets per configured strategy, written to prompts/<CODE>.jsonl with
/// one audit text file per prompt under prompts/<CODE>/.
std::map<prompts::Strategy, std::vector<prompts::PromptSpec>> run_prompts(const RunConfig& config,
                                                                          const Inputs& inputs);

struct ExtractionSummary {
  std::size_t prompts = 0;  // per strategy
  std::size_t completions = 0;
  std::size_t provider_calls = 0;
};

/// Ingest, prompts, then one completion per (model, strategy, prompt).
/// Writes completions/ and triples/ and refreshes manifest.json.
ExtractionSummary run_extraction(const RunConfig& config, std::shared_ptr<llm::Provider> provider);

/// Scores every (model, strategy) of the run against the reference file
/// (`reference` overrides the configured one). Writes eval/.
/// Errors: MissingRun, MissingReference, EmptyReference.
eval::EvaluationReport run_reference_eval(const RunConfig& config,
                                          const std::optional<fs::path>& reference = std::nullopt);

struct JudgeSummary {
  std::vector<judge::JudgeVerdict> verdicts;
  std::vector<judge::CorrelationRow> correlations;  // empty without a reference report
  std::vector<std::string> warnings;
  std::size_t provider_calls = 0;
};

/// Judges the judge_strategy outputs of all extractor models with every
/// configured judge model and method. Writes judge/.
/// Errors: MissingRun; InvalidArgument with fewer than two extractor models;
/// AllVerdictsMalformed.
JudgeSummary run_judge_eval(const RunConfig& config, std::shared_ptr<llm::Provider> provider);

struct AnnotateOptions {
  std::string annotator = "annotator";
  std::size_t k = 100;  // prompts sampled for review
  prompts::Strategy strategy = prompts::Strategy::OntologySentence;
};

struct AnnotationSummary {
  std::size_t queued = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t pending = 0;
  fs::path session_log;
  fs::path reference;
};

/// Samples k prompts of the run (seeded by the run seed), queues every
/// distinct triple the extractor models produced for them, and runs the
/// terminal review. The session log lives at
/// annotation/<annotator>.session.jsonl and is resumed when present. After
/// the review the accepted triples are exported to
/// annotation/<annotator>.reference.jsonl.
/// Errors: MissingRun, KTooLarge, SessionCorrupt.
AnnotationSummary run_annotation(const RunConfig& config, const AnnotateOptions& options,
                                 std::istream& in, std::ostream& out);

/// Markdown summary of a run, also written to report.md.
/// Errors: MissingRun.
std::string export_report(const fs::path& run);

/// Rewrites manifest.json: SHA-256 of every file in the run directory.
void write_manifest(const fs::path& run, const RunConfig& config);

/// Reads a reference or annotation export: TripleSet rows grouped by prompt.
std::map<std::string, triples::TripleSet> load_triple_sets(const fs::path& path);

}  // namespace minekg::pipeline
