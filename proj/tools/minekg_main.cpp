// minekg command line: ingest, prompts, extract, eval-ref, judge, annotate,
// agree, report. Exit codes: 0 ok, 1 usage or config, 2 data, 3 provider.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "minekg/annotation.hpp"
#include "minekg/error.hpp"
#include "minekg/io.hpp"
#include "minekg/pipeline.hpp"

namespace {

using namespace minekg;
namespace fs = std::filesystem;

int exit_code(Errc code) {
  switch (code) {
    case Errc::InvalidArgument:
    case Errc::ConfigInvalid:
    case Errc::ConfigViolation:
    case Errc::KTooLarge:
      return 1;
    case Errc::MissingCredentials:
    case Errc::CassetteMiss:
    case Errc::ProviderError:
    case Errc::ProviderFailure:
      return 3;
    default:
      return 2;
  }
}

struct Overrides {
  std::string config;
  std::optional<std::string> mode;
  std::optional<std::string> cassette;
  std::optional<std::string> run_id;
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
};

void add_run_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "run config file (key = value)")->required();
  cmd->add_option("--mode", o.mode, "live, record or replay");
  cmd->add_option("--cassette", o.cassette, "cassette JSONL for record/replay");
  cmd->add_option("--run-id", o.run_id, "run directory name");
  cmd->add_option("--output-dir", o.output_dir, "directory holding runs");
  cmd->add_option("--seed", o.seed, "seed for sampling and shuffles");
}

pipeline::RunConfig load(const Overrides& o) {
  pipeline::RunConfig c = pipeline::load_config(o.config);
  if (o.mode) {
    try {
      c.mode = llm::parse_mode(*o.mode);
    } catch (const Error& e) {
      throw Error(Errc::ConfigInvalid, std::string("--mode: ") + e.what());
    }
  }
  if (o.cassette) c.cassette = fs::absolute(*o.cassette).lexically_normal();
  if (o.run_id) c.run_id = *o.run_id;
  if (o.output_dir) c.output_dir = fs::absolute(*o.output_dir).lexically_normal();
  if (o.seed) c.seed = *o.seed;
  pipeline::validate(c);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ontology-guided triple extraction and evaluation"};
  app.require_subcommand(1);
  Overrides o;

  auto* ingest = app.add_subcommand("ingest", "chunk the corpus and load ontologies");
  add_run_options(ingest, o);
  auto* prompts = app.add_subcommand("prompts", "render extraction prompts for every strategy");
  add_run_options(prompts, o);
  auto* extract = app.add_subcommand("extract", "ingest, render prompts and extract triples");
  add_run_options(extract, o);

  auto* eval_ref = app.add_subcommand("eval-ref", "score a run against reference triples");
  add_run_options(eval_ref, o);
  std::optional<std::string> reference;
  eval_ref->add_option("--reference", reference, "reference TripleSet JSONL");

  auto* judge = app.add_subcommand("judge", "rank extractor outputs with judge models");
  add_run_options(judge, o);

  auto* annotate = app.add_subcommand("annotate", "review sampled triples in the terminal");
  add_run_options(annotate, o);
  pipeline::AnnotateOptions ann;
  std::string ann_strategy = "OS";
  annotate->add_option("--annotator", ann.annotator, "annotator id (names the session)");
  annotate->add_option("-k,--sample", ann.k, "prompts to sample")->capture_default_str();
  annotate->add_option("--strategy", ann_strategy, "strategy whose outputs are reviewed")
      ->capture_default_str();

  auto* agree = app.add_subcommand("agree", "agreement between two annotation exports");
  std::string agree_a, agree_b;
  std::optional<std::string> agree_out;
  agree->add_option("first", agree_a, "TripleSet JSONL")->required();
  agree->add_option("second", agree_b, "TripleSet JSONL")->required();
  agree->add_option("-o,--output", agree_out, "write the CSV here instead of stdout");

  auto* report = app.add_subcommand("report", "write report.md for a run");
  add_run_options(report, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (ingest->parsed()) {
      const auto c = load(o);
      const auto in = pipeline::run_ingest(c);
      pipeline::write_manifest(pipeline::run_dir(c), c);
      std::printf("%zu documents, %zu chunks -> %s\n", in.documents.size(), in.chunks.size(),
                  pipeline::run_dir(c).string().c_str());
    } else if (prompts->parsed()) {
      const auto c = load(o);
      const auto sets = pipeline::run_prompts(c, pipeline::run_ingest(c));
      pipeline::write_manifest(pipeline::run_dir(c), c);
      for (const auto& [s, set] : sets)
        std::printf("%s: %zu prompts\n", std::string(prompts::short_code(s)).c_str(), set.size());
    } else if (extract->parsed()) {
      const auto c = load(o);
      const auto provider = c.mode == llm::Mode::Replay ? nullptr : llm::provider_from_environment();
      const auto s = pipeline::run_extraction(c, provider);
      std::printf("%zu completions (%zu prompts per strategy, %zu provider calls) -> %s\n",
                  s.completions, s.prompts, s.provider_calls, pipeline::run_dir(c).string().c_str());
    } else if (eval_ref->parsed()) {
      const auto c = load(o);
      std::optional<fs::path> ref;
      if (reference) ref = fs::absolute(*reference);
      const auto r = pipeline::run_reference_eval(c, ref);
      std::fputs(eval::report_csv(r).c_str(), stdout);
    } else if (judge->parsed()) {
      const auto c = load(o);
      const auto provider = c.mode == llm::Mode::Replay ? nullptr : llm::provider_from_environment();
      const auto s = pipeline::run_judge_eval(c, provider);
      std::printf("%zu verdicts, %zu warnings\n", s.verdicts.size(), s.warnings.size());
      if (!s.correlations.empty()) std::fputs(judge::correlation_csv(s.correlations).c_str(), stdout);
    } else if (annotate->parsed()) {
      const auto c = load(o);
      try {
        ann.strategy = prompts::parse_strategy(ann_strategy);
      } catch (const Error& e) {
        throw Error(Errc::ConfigInvalid, std::string("--strategy: ") + e.what());
      }
      const auto s = pipeline::run_annotation(c, ann, std::cin, std::cout);
      std::printf("%zu queued, %zu accepted, %zu rejected, %zu pending\nreference: %s\n", s.queued,
                  s.accepted, s.rejected, s.pending, s.reference.string().c_str());
    } else if (agree->parsed()) {
      const auto r = annotation::agreement_report(pipeline::load_triple_sets(agree_a),
                                                  pipeline::load_triple_sets(agree_b));
      const std::string csv = annotation::agreement_csv(r);
      if (agree_out)
        io::write_file(*agree_out, csv);
      else
        std::fputs(csv.c_str(), stdout);
    } else if (report->parsed()) {
      const auto c = load(o);
      std::fputs(pipeline::export_report(pipeline::run_dir(c)).c_str(), stdout);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "minekg: %s\n", e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "minekg: %s\n", e.what());
    return 2;
  }
  return 0;
}
