#include "minekg/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>

#include "minekg/annotation.hpp"
#include "minekg/error.hpp"
#include "minekg/io.hpp"
#include "minekg/rng.hpp"
#include "minekg/text.hpp"

namespace minekg::pipeline {
namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& what) { throw Error(Errc::ConfigInvalid, what); }

std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    std::size_t comma = value.find(',', start);
    if (comma == std::string_view::npos) comma = value.size();
    const std::string_view item = text::trim(value.substr(start, comma - start));
    if (!item.empty()) out.emplace_back(item);
    start = comma + 1;
  }
  return out;
}

template <typename Int>
Int parse_int(std::string_view key, std::string_view value) {
  Int out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size())
    config_error(std::string(key) + ": expected an integer, got '" + std::string(value) + "'");
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  const std::string v = text::to_lower_ascii(value);
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  config_error(std::string(key) + ": expected true or false, got '" + std::string(value) + "'");
}

fs::path resolve(const fs::path& base, std::string_view value) {
  fs::path p{std::string(value)};
  return (p.is_absolute() ? p : base / p).lexically_normal();
}

std::string code(prompts::Strategy s) { return std::string(prompts::short_code(s)); }

json read_json_file(const fs::path& path) {
  try {
    return json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedFile, path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& value) {
  io::write_file(path, value.dump(2, ' ', false, json::error_handler_t::replace) + "\n");
}

llm::Gateway make_gateway(const RunConfig& config, std::shared_ptr<llm::Provider> provider) {
  llm::GatewayOptions options;
  options.mode = config.mode;
  options.strict = config.strict;
  options.cassette = config.cassette;
  options.concurrency = config.concurrency;
  return llm::Gateway(options, std::move(provider));
}

// State of a run directory, loaded back for the evaluation stages.
struct RunState {
  fs::path dir;
  json meta;
  std::map<std::string, corpus::Chunk> chunks;
  std::vector<ontology::Ontology> ontologies;
  std::map<std::string, std::string> template_ontology;  // template_id -> ontology name
  std::vector<std::string> models;
  std::vector<prompts::Strategy> strategies;

  const ontology::Ontology* ontology_for(const std::string& template_id) const {
    auto it = template_ontology.find(template_id);
    if (it == template_ontology.end()) return nullptr;
    for (const auto& o : ontologies)
      if (o.name == it->second) return &o;
    return nullptr;
  }

  std::vector<prompts::PromptSpec> prompt_set(prompts::Strategy s) const {
    std::vector<prompts::PromptSpec> out;
    for (const json& row : io::read_jsonl(dir / "prompts" / (code(s) + ".jsonl")))
      out.push_back(prompts::prompt_from_json(row));
    return out;
  }

  fs::path completions_file(const std::string& model, prompts::Strategy s) const {
    return dir / "completions" / io::safe_file_name(model) / (code(s) + ".jsonl");
  }
  fs::path triples_file(const std::string& model, prompts::Strategy s) const {
    return dir / "triples" / io::safe_file_name(model) / (code(s) + ".jsonl");
  }

  // prompt_id -> (triples, raw completion)
  std::map<std::string, eval::CandidateOutput> outputs(const std::string& model,
                                                      prompts::Strategy s) const {
    const fs::path cf = completions_file(model, s);
    if (!fs::exists(cf))
      throw Error(Errc::MissingRun, "no completions for " + model + "/" + code(s) + " in " +
                                        dir.string());
    std::map<std::string, eval::CandidateOutput> out;
    for (const json& row : io::read_jsonl(cf)) {
      eval::CandidateOutput& o = out[row.at("prompt_id").get<std::string>()];
      o.raw = row.at("response_text").get<std::string>();
      o.triples.prompt_id = row.at("prompt_id").get<std::string>();
    }
    const fs::path tf = triples_file(model, s);
    if (fs::exists(tf))
      for (auto& [id, ts] : triples::group_rows(io::read_jsonl(tf))) {
        auto it = out.find(id);
        if (it != out.end()) it->second.triples = std::move(ts);
      }
    return out;
  }
};

RunState load_run(const fs::path& dir) {
  if (!fs::exists(dir / "run.json"))
    throw Error(Errc::MissingRun, "no run at " + dir.string());
  if (!fs::exists(dir / "completions"))
    throw Error(Errc::MissingRun, "run " + dir.string() + " has no extraction outputs");
  RunState st;
  st.dir = dir;
  st.meta = read_json_file(dir / "run.json");
  for (const json& row : io::read_jsonl(dir / "chunks.jsonl")) {
    corpus::Chunk c = corpus::chunk_from_json(row);
    st.chunks.emplace(c.chunk_id, std::move(c));
  }
  const json onto = read_json_file(dir / "ontologies.json");
  for (const json& o : onto.at("ontologies")) st.ontologies.push_back(ontology::ontology_from_json(o));
  for (const json& t : onto.at("templates"))
    st.template_ontology[t.at("template_id").get<std::string>()] =
        t.at("ontology_name").get<std::string>();
  st.models = st.meta.at("extractor_models").get<std::vector<std::string>>();
  for (const json& s : st.meta.at("strategies"))
    st.strategies.push_back(prompts::parse_strategy(s.get<std::string>()));
  return st;
}

std::vector<eval::EvalItem> eval_items(const RunState& st,
                                       const std::vector<prompts::PromptSpec>& prompt_set,
                                       const std::map<std::string, triples::TripleSet>& reference) {
  std::vector<eval::EvalItem> items;
  for (const prompts::PromptSpec& p : prompt_set) {
    auto ref = reference.find(p.prompt_id);
    if (ref == reference.end()) continue;
    const ontology::Ontology* onto = st.ontology_for(p.template_id);
    if (onto == nullptr)
      throw Error(Errc::MalformedFile, p.prompt_id + ": template " + p.template_id +
                                           " has no ontology in the run");
    items.push_back({p.prompt_id, st.chunks.at(p.chunk_id).text, onto, ref->second});
  }
  return items;
}

std::unique_ptr<eval::EmbeddingProvider> make_embeddings(const RunConfig& config) {
  if (!config.embeddings) return std::make_unique<eval::CharNgramEmbedding>();
  auto table = eval::TableEmbedding::load_text(*config.embeddings,
                                               std::make_shared<eval::CharNgramEmbedding>());
  struct Holder final : eval::EmbeddingProvider {
    std::shared_ptr<eval::TableEmbedding> table;
    std::size_t dimension() const override { return table->dimension(); }
    std::vector<double> embed(std::string_view t) const override { return table->embed(t); }
  };
  auto h = std::make_unique<Holder>();
  h->table = std::move(table);
  return h;
}

std::string lines_of(const std::vector<std::string>& lines) {
  std::string out;
  for (const std::string& l : lines) out += l + "\n";
  return out;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::vector<std::string> out;
  if (!fs::exists(path)) return out;
  std::istringstream in(io::read_file(path));
  std::string line;
  while (std::getline(in, line))
    if (!text::trim(line).empty()) out.push_back(line);
  return out;
}

}  // namespace

RunConfig parse_config(std::string_view content, const fs::path& base_dir) {
  RunConfig c;
  c.base_dir = base_dir;
  std::set<std::string> seen;
  std::istringstream in{std::string(content)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      config_error("line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key(text::trim(line.substr(0, eq)));
    const std::string_view value = text::trim(line.substr(eq + 1));
    if (!seen.insert(key).second) config_error("line " + std::to_string(line_no) + ": '" + key + "' set twice");

    try {
      if (key == "corpus_manifest") {
        c.corpus_manifest = resolve(base_dir, value);
      } else if (key == "ontologies") {
        c.ontologies.clear();
        for (const auto& p : split_list(value)) c.ontologies.push_back(resolve(base_dir, p));
      } else if (key == "demonstrations") {
        c.demonstrations = resolve(base_dir, value);
      } else if (key == "reference") {
        c.reference = resolve(base_dir, value);
      } else if (key == "embeddings") {
        c.embeddings = resolve(base_dir, value);
      } else if (key == "strategies") {
        c.strategies.clear();
        for (const auto& s : split_list(value)) c.strategies.push_back(prompts::parse_strategy(s));
      } else if (key == "extractor_models") {
        c.extractor_models = split_list(value);
      } else if (key == "judge_models") {
        c.judge_models = split_list(value);
      } else if (key == "judge_methods") {
        c.judge_methods.clear();
        for (const auto& m : split_list(value)) c.judge_methods.push_back(judge::parse_method(m));
      } else if (key == "judge_strategy") {
        c.judge_strategy = prompts::parse_strategy(value);
      } else if (key == "judge_sample") {
        c.judge_sample = parse_int<std::size_t>(key, value);
      } else if (key == "seed") {
        c.seed = parse_int<std::uint64_t>(key, value);
      } else if (key == "mode") {
        c.mode = llm::parse_mode(value);
      } else if (key == "cassette") {
        c.cassette = resolve(base_dir, value);
      } else if (key == "output_dir") {
        c.output_dir = resolve(base_dir, value);
      } else if (key == "run_id") {
        c.run_id = std::string(value);
      } else if (key == "max_words") {
        c.chunking.max_words = parse_int<std::size_t>(key, value);
      } else if (key == "min_words") {
        c.chunking.min_words = parse_int<std::size_t>(key, value);
      } else if (key == "max_tokens") {
        c.max_tokens = parse_int<int>(key, value);
      } else if (key == "judge_max_tokens") {
        c.judge_max_tokens = parse_int<int>(key, value);
      } else if (key == "strict") {
        c.strict = parse_bool(key, value);
      } else if (key == "concurrency") {
        c.concurrency = parse_int<std::size_t>(key, value);
      } else {
        config_error("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
      }
    } catch (const Error& e) {
      if (e.code() == Errc::ConfigInvalid) throw;
      config_error(key + ": " + e.what());
    }
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) config_error("config file not found: " + path.string());
  return parse_config(io::read_file(path), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

void validate(const RunConfig& c) {
  auto must_exist = [](std::string_view key, const fs::path& p) {
    if (p.empty()) config_error(std::string(key) + " is not set");
    if (!fs::exists(p)) config_error(std::string(key) + ": no such file: " + p.string());
  };
  must_exist("corpus_manifest", c.corpus_manifest);
  if (c.ontologies.empty()) config_error("ontologies is not set");
  for (const fs::path& p : c.ontologies) must_exist("ontologies", p);
  if (c.demonstrations) must_exist("demonstrations", *c.demonstrations);
  if (c.reference) must_exist("reference", *c.reference);
  if (c.embeddings) must_exist("embeddings", *c.embeddings);
  if (c.strategies.empty()) config_error("strategies is empty");
  if (c.chunking.min_words < 1 || c.chunking.min_words > c.chunking.max_words)
    config_error("chunking needs 1 <= min_words <= max_words");
  if (c.max_tokens < 1 || c.judge_max_tokens < 1) config_error("max_tokens must be positive");
  if (c.concurrency < 1) config_error("concurrency must be at least 1");
  if (c.run_id.empty() || c.run_id != io::safe_file_name(c.run_id) || c.run_id.front() == '.')
    config_error("run_id '" + c.run_id + "' must use only [A-Za-z0-9._-]");
  if (c.mode != llm::Mode::Live && !c.cassette)
    config_error(std::string(llm::to_string(c.mode)) + " mode requires a cassette path");
  if (c.mode == llm::Mode::Replay) must_exist("cassette", *c.cassette);
  std::set<std::string> models(c.extractor_models.begin(), c.extractor_models.end());
  if (models.size() != c.extractor_models.size()) config_error("extractor_models repeats a model");
}

fs::path run_dir(const RunConfig& config) { return config.output_dir / config.run_id; }

std::map<std::string, triples::TripleSet> load_triple_sets(const fs::path& path) {
  if (!fs::exists(path)) throw Error(Errc::MissingReference, "no such file: " + path.string());
  return triples::group_rows(io::read_jsonl(path));
}

Inputs run_ingest(const RunConfig& config) {
  validate(config);
  Inputs in;
  in.documents = corpus::load_corpus(config.corpus_manifest);
  for (const corpus::Document& d : in.documents)
    for (corpus::Chunk& c : corpus::chunk_document(d, config.chunking)) in.chunks.push_back(std::move(c));
  in.stats = corpus::corpus_stats(in.documents);

  std::set<std::string> names;
  for (const fs::path& p : config.ontologies) {
    ontology::Ontology o = ontology::load_ontology(p);
    if (!names.insert(o.name).second)
      throw Error(Errc::DuplicateName, "two ontologies are named '" + o.name + "'");
    in.templates.push_back(ontology::make_template(o));
    in.ontologies.push_back(std::move(o));
  }

  if (config.demonstrations) {
    for (const json& row : io::read_jsonl(*config.demonstrations))
      in.pool.push_back(prompts::demonstration_from_json(row));
  } else if (config.reference) {
    // paragraph and sentence demonstrations from the annotated prompts
    std::map<std::string, std::pair<const corpus::Chunk*, const ontology::OntologyTemplate*>> by_prompt;
    for (const corpus::Chunk& c : in.chunks)
      for (const ontology::OntologyTemplate& t : in.templates)
        by_prompt[prompts::make_prompt_id(c.chunk_id, t.template_id)] = {&c, &t};
    std::vector<prompts::AnnotatedExample> examples;
    for (auto& [id, ts] : load_triple_sets(*config.reference)) {
      auto it = by_prompt.find(id);
      if (it == by_prompt.end() || ts.triples.empty()) continue;
      examples.push_back({id, it->second.first->text, it->second.second->ontology_name, ts});
    }
    in.pool = prompts::derive_demonstrations(examples);
  }

  const fs::path dir = run_dir(config);
  std::vector<json> rows;
  for (const corpus::Chunk& c : in.chunks) rows.push_back(corpus::to_json(c));
  io::write_file(dir / "chunks.jsonl", io::to_jsonl(rows));

  json stats = corpus::to_json(in.stats);
  stats["documents"] = in.documents.size();
  stats["chunks"] = in.chunks.size();
  write_json_file(dir / "corpus_stats.json", stats);

  json onto = {{"ontologies", json::array()}, {"templates", json::array()}};
  for (const auto& o : in.ontologies) onto["ontologies"].push_back(ontology::to_json(o));
  for (const auto& t : in.templates)
    onto["templates"].push_back({{"template_id", t.template_id},
                                 {"ontology_name", t.ontology_name},
                                 {"instruction_text", t.instruction_text}});
  onto["merged"] = ontology::to_json(ontology::merge_ontologies(in.ontologies, "HMA"));
  write_json_file(dir / "ontologies.json", onto);

  std::vector<json> demos;
  for (const auto& d : in.pool) demos.push_back(prompts::to_json(d));
  io::write_file(dir / "demonstrations.jsonl", io::to_jsonl(demos));

  json strategies = json::array();
  for (prompts::Strategy s : config.strategies) strategies.push_back(code(s));
  write_json_file(dir / "run.json", {{"run_id", config.run_id},
                                     {"seed", config.seed},
                                     {"strategies", strategies},
                                     {"extractor_models", config.extractor_models},
                                     {"judge_strategy", code(config.judge_strategy)},
                                     {"max_words", config.chunking.max_words},
                                     {"min_words", config.chunking.min_words},
                                     {"max_tokens", config.max_tokens}});
  return in;
}

std::map<prompts::Strategy, std::vector<prompts::PromptSpec>> run_prompts(const RunConfig& config,
                                                                          const Inputs& inputs) {
  const fs::path dir = run_dir(config) / "prompts";
  std::map<prompts::Strategy, std::vector<prompts::PromptSpec>> out;
  for (prompts::Strategy s : config.strategies) {
    std::vector<prompts::PromptSpec> set = prompts::generate_prompt_set(
        inputs.chunks, inputs.templates, inputs.ontologies, s, inputs.pool, config.seed);
    std::vector<json> rows;
    for (const prompts::PromptSpec& p : set) {
      rows.push_back(prompts::to_json(p));
      io::write_file(dir / code(s) / (io::safe_file_name(p.prompt_id) + ".txt"), p.rendered_text);
    }
    io::write_file(dir / (code(s) + ".jsonl"), io::to_jsonl(rows));
    out.emplace(s, std::move(set));
  }
  return out;
}

ExtractionSummary run_extraction(const RunConfig& config, std::shared_ptr<llm::Provider> provider) {
  validate(config);
  if (config.extractor_models.empty()) config_error("extractor_models is empty");
  const Inputs inputs = run_ingest(config);
  const auto prompt_sets = run_prompts(config, inputs);
  llm::Gateway gateway = make_gateway(config, std::move(provider));

  const fs::path dir = run_dir(config);
  fs::remove_all(dir / "completions");
  fs::remove_all(dir / "triples");
  ExtractionSummary summary;
  for (const std::string& model : config.extractor_models) {
    for (const auto& [strategy, set] : prompt_sets) {
      summary.prompts = set.size();
      std::vector<std::pair<std::string, llm::CompletionRequest>> requests;
      for (const prompts::PromptSpec& p : set)
        requests.push_back({p.prompt_id, {model, p.rendered_text, 0.0, 1.0, config.max_tokens}});
      const std::map<std::string, std::string> replies = gateway.complete_all(requests);

      std::vector<json> completion_rows, triple_rows;
      for (const auto& [id, req] : requests) {
        const std::string& reply = replies.at(id);
        const triples::TripleSet ts = triples::parse_output(reply, id);
        completion_rows.push_back({{"prompt_id", id},
                                   {"model_id", model},
                                   {"strategy", code(strategy)},
                                   {"request_digest", llm::request_digest(req)},
                                   {"response_text", reply},
                                   {"triples", ts.triples.size()},
                                   {"duplicate_lines", ts.duplicate_lines},
                                   {"nonconforming_lines", ts.nonconforming_lines}});
        for (json& row : triples::to_rows(ts)) triple_rows.push_back(std::move(row));
        ++summary.completions;
      }
      const fs::path model_dir = io::safe_file_name(model);
      io::write_file(dir / "completions" / model_dir / (code(strategy) + ".jsonl"),
                     io::to_jsonl(completion_rows));
      io::write_file(dir / "triples" / model_dir / (code(strategy) + ".jsonl"),
                     io::to_jsonl(triple_rows));
    }
  }
  summary.provider_calls = gateway.provider_calls();
  write_manifest(dir, config);
  return summary;
}

eval::EvaluationReport run_reference_eval(const RunConfig& config,
                                          const std::optional<fs::path>& reference) {
  const RunState st = load_run(run_dir(config));
  const std::optional<fs::path> ref_path = reference ? reference : config.reference;
  if (!ref_path) throw Error(Errc::MissingReference, "no reference file configured");
  const auto ref = load_triple_sets(*ref_path);
  const auto embeddings = make_embeddings(config);

  std::vector<eval::ConfigurationScores> configs;
  std::vector<std::string> warnings;
  std::vector<json> flags;
  for (prompts::Strategy s : st.strategies) {
    const std::vector<eval::EvalItem> items = eval_items(st, st.prompt_set(s), ref);
    for (const std::string& model : st.models) {
      eval::ConfigurationScores scores =
          eval::evaluate_configuration(model, code(s), items, st.outputs(model, s), *embeddings);
      for (const std::string& w : scores.warnings) warnings.push_back(model + "/" + code(s) + ": " + w);
      for (json& f : scores.flags) flags.push_back(std::move(f));
      scores.flags.clear();
      configs.push_back(std::move(scores));
    }
  }
  eval::EvaluationReport report = eval::build_report(std::move(configs));

  const fs::path out = st.dir / "eval";
  io::write_file(out / "report.csv", eval::report_csv(report));
  io::write_file(out / "report.jsonl", io::to_jsonl(eval::report_rows(report)));
  io::write_file(out / "flags.jsonl", io::to_jsonl(flags));
  io::write_file(out / "warnings.txt", lines_of(warnings));
  write_manifest(st.dir, config);
  return report;
}

JudgeSummary run_judge_eval(const RunConfig& config, std::shared_ptr<llm::Provider> provider) {
  const RunState st = load_run(run_dir(config));
  if (st.models.size() < 2)
    throw Error(Errc::InvalidArgument, "judging needs at least two extractor models in the run");
  if (config.judge_models.empty()) config_error("judge_models is empty");
  if (std::find(st.strategies.begin(), st.strategies.end(), config.judge_strategy) == st.strategies.end())
    config_error("judge_strategy " + code(config.judge_strategy) + " was not extracted in this run");

  std::vector<prompts::PromptSpec> set = st.prompt_set(config.judge_strategy);
  if (config.judge_sample > 0 && config.judge_sample < set.size()) {
    std::vector<prompts::PromptSpec> picked;
    for (std::size_t i : annotation::sample_indices(set.size(), config.judge_sample,
                                                    derive_seed(config.seed, "judge-sample")))
      picked.push_back(set[i]);
    set = std::move(picked);
  }

  std::map<std::string, std::map<std::string, eval::CandidateOutput>> outputs;
  for (const std::string& model : st.models) outputs[model] = st.outputs(model, config.judge_strategy);

  std::vector<judge::JudgeItem> items;
  for (const prompts::PromptSpec& p : set) {
    judge::JudgeItem item{p.prompt_id, st.chunks.at(p.chunk_id).text, st.ontology_for(p.template_id), {}};
    item.candidates.prompt_id = p.prompt_id;
    for (const std::string& model : st.models) {
      auto it = outputs[model].find(p.prompt_id);
      if (it == outputs[model].end())
        throw Error(Errc::MissingRun, model + " has no output for " + p.prompt_id);
      item.candidates.answers.push_back({model, it->second.triples, it->second.raw});
    }
    items.push_back(std::move(item));
  }

  // reference ranking over the judged strategy, best combined score first
  std::optional<judge::Ranking> reference_ranking;
  if (fs::exists(st.dir / "eval" / "report.jsonl")) {
    std::vector<std::pair<double, std::string>> rows;
    for (const json& row : io::read_jsonl(st.dir / "eval" / "report.jsonl"))
      if (row.at("strategy").get<std::string>() == code(config.judge_strategy))
        rows.emplace_back(-row.at("combined_score").get<double>(), row.at("model_id").get<std::string>());
    std::sort(rows.begin(), rows.end());
    std::vector<std::string> order;
    for (auto& [score, model] : rows) order.push_back(model);
    if (order.size() == st.models.size()) reference_ranking = judge::ranking_from_order(order);
  }

  llm::Gateway gateway = make_gateway(config, std::move(provider));
  JudgeSummary summary;
  std::string expectation_csv = "judge_model,method,model_id,expectation,rank,verdicts\n";
  std::vector<json> verdict_rows;
  std::vector<eval::ConfigurationScores> aggregate_configs;
  const fs::path out = st.dir / "judge";
  fs::remove_all(out);

  std::optional<std::map<std::string, triples::TripleSet>> reference;
  if (config.reference && fs::exists(*config.reference)) reference = load_triple_sets(*config.reference);
  const auto embeddings = make_embeddings(config);

  for (const std::string& judge_model : config.judge_models) {
    for (judge::JudgeMethod method : config.judge_methods) {
      judge::JudgeOptions options{method, judge_model, config.seed, config.judge_max_tokens};
      judge::JudgeRoundResult round = judge::judge_round(items, options, gateway);
      for (std::string& w : round.warnings) summary.warnings.push_back(std::move(w));
      if (round.verdicts.empty()) continue;

      const auto scores = judge::expectation_score(round.histogram);
      const auto ranking = judge::expectation_ranking(scores);
      for (std::size_t r = 0; r < ranking.size(); ++r)
        expectation_csv += io::csv_field(judge_model) + "," + std::string(judge::to_string(method)) +
                           "," + io::csv_field(ranking[r]) + "," +
                           io::format_fixed(scores.at(ranking[r]), 6) + "," +
                           std::to_string(r + 1) + "," + std::to_string(round.verdicts.size()) + "\n";
      if (reference_ranking)
        summary.correlations.push_back(
            {judge_model, method,
             judge::rank_correlations(*reference_ranking, judge::ranking_from_order(ranking))});

      // best answer per judged prompt
      std::vector<judge::CandidateSet> judged;
      std::map<std::string, const judge::JudgeVerdict*> by_prompt;
      for (const auto& v : round.verdicts) by_prompt.emplace(v.prompt_id, &v);
      for (const auto& item : items)
        if (by_prompt.count(item.prompt_id)) judged.push_back(item.candidates);
      const judge::AggregatedAnswers agg = judge::aggregate_best_answers(round.verdicts, judged);
      std::vector<json> agg_rows;
      std::map<std::string, eval::CandidateOutput> agg_outputs;
      for (const auto& [id, ts] : agg.per_prompt) {
        for (json& row : triples::to_rows(ts)) agg_rows.push_back(std::move(row));
        const std::string best = judge::ranked_models(*by_prompt.at(id)).front();
        agg_outputs[id] = {ts, outputs.at(best).at(id).raw};
      }
      io::write_file(out / "aggregate" / io::safe_file_name(judge_model) /
                         (std::string(judge::to_string(method)) + ".jsonl"),
                     io::to_jsonl(agg_rows));

      if (reference) {
        std::vector<eval::EvalItem> agg_items;
        for (const auto& item : eval_items(st, set, *reference))
          if (by_prompt.count(item.prompt_id)) agg_items.push_back(item);
        if (!agg_items.empty()) {
          try {
            aggregate_configs.push_back(eval::evaluate_configuration(
                "aggregate:" + judge_model + ":" + std::string(judge::to_string(method)),
                code(config.judge_strategy), agg_items, agg_outputs, *embeddings));
            aggregate_configs.back().flags.clear();
          } catch (const Error& e) {
            if (e.code() != Errc::EmptyReference) throw;
            summary.warnings.push_back(std::string("aggregate not scored: ") + e.what());
          }
        }
      }
      for (judge::JudgeVerdict& v : round.verdicts) {
        verdict_rows.push_back(judge::to_json(v));
        summary.verdicts.push_back(std::move(v));
      }
    }
  }

  if (!aggregate_configs.empty()) {
    // judged prompts only, so extractors and aggregates are normalised on equal footing
    std::vector<eval::EvalItem> agg_items;
    std::set<std::string> judged_ids;
    for (const auto& v : summary.verdicts) judged_ids.insert(v.prompt_id);
    for (const auto& item : eval_items(st, set, *reference))
      if (judged_ids.count(item.prompt_id)) agg_items.push_back(item);
    for (const std::string& model : st.models) {
      aggregate_configs.push_back(eval::evaluate_configuration(
          model, code(config.judge_strategy), agg_items, st.outputs(model, config.judge_strategy),
          *embeddings));
      aggregate_configs.back().flags.clear();
    }
    io::write_file(out / "aggregate_report.csv",
                   eval::report_csv(eval::build_report(std::move(aggregate_configs))));
  }

  io::write_file(out / "verdicts.jsonl", io::to_jsonl(verdict_rows));
  io::write_file(out / "expectation.csv", expectation_csv);
  if (!summary.correlations.empty())
    io::write_file(out / "correlations.csv", judge::correlation_csv(summary.correlations));
  io::write_file(out / "warnings.txt", lines_of(summary.warnings));
  summary.provider_calls = gateway.provider_calls();
  write_manifest(st.dir, config);
  return summary;
}

AnnotationSummary run_annotation(const RunConfig& config, const AnnotateOptions& options,
                                 std::istream& in, std::ostream& out) {
  const RunState st = load_run(run_dir(config));
  if (options.annotator.empty() || options.annotator != io::safe_file_name(options.annotator))
    throw Error(Errc::InvalidArgument, "annotator name must use only [A-Za-z0-9._-]");
  const fs::path dir = st.dir / "annotation";
  AnnotationSummary summary;
  summary.session_log = dir / (options.annotator + ".session.jsonl");
  summary.reference = dir / (options.annotator + ".reference.jsonl");

  auto session = [&] {
    if (fs::exists(summary.session_log)) return annotation::ReviewSession::open(summary.session_log);
    const std::vector<prompts::PromptSpec> set = st.prompt_set(options.strategy);
    const std::vector<prompts::PromptSpec> sample = annotation::sample_annotation_prompts(
        set, options.k, derive_seed(config.seed, "annotation"));
    std::set<std::string> ids;
    std::map<std::string, std::string> contexts;
    for (const prompts::PromptSpec& p : sample) {
      ids.insert(p.prompt_id);
      contexts[p.prompt_id] = st.chunks.at(p.chunk_id).text;
    }
    annotation::ModelOutputs outputs;
    for (const std::string& model : st.models)
      for (auto& [id, o] : st.outputs(model, options.strategy))
        if (ids.count(id)) outputs[model][id] = std::move(o.triples);
    return annotation::ReviewSession::create(
        summary.session_log, config.run_id + "/" + options.annotator, options.annotator,
        annotation::build_review_queue(outputs), contexts);
  }();

  annotation::run_review(session, in, out);
  io::write_file(summary.reference, session.export_reference());
  io::write_file(dir / (options.annotator + ".rejections.jsonl"), io::to_jsonl(session.rejections()));
  summary.queued = session.queue().size();
  for (const auto& s : session.states()) {
    if (s.decision == annotation::Decision::Accept) ++summary.accepted;
    if (s.decision == annotation::Decision::Reject) ++summary.rejected;
  }
  summary.pending = session.pending();
  return summary;
}

namespace {

json file_digests(const fs::path& run) {
  std::vector<std::pair<std::string, fs::path>> named;
  for (const auto& entry : fs::recursive_directory_iterator(run)) {
    if (!entry.is_regular_file()) continue;
    std::string rel = entry.path().lexically_relative(run).generic_string();
    if (rel != "manifest.json") named.emplace_back(std::move(rel), entry.path());
  }
  std::sort(named.begin(), named.end());
  json files = json::object();
  for (const auto& [rel, p] : named) files[rel] = io::sha256_hex(io::read_file(p));
  return files;
}

}  // namespace

void write_manifest(const fs::path& run, const RunConfig& config) {
  json inputs = json::object();
  auto add_input = [&](const fs::path& p) {
    if (p.empty() || !fs::is_regular_file(p)) return;
    const fs::path rel = p.lexically_relative(config.base_dir);
    inputs[rel.empty() ? p.filename().generic_string() : rel.generic_string()] =
        io::sha256_hex(io::read_file(p));
  };
  add_input(config.corpus_manifest);
  for (const fs::path& p : config.ontologies) add_input(p);
  if (config.demonstrations) add_input(*config.demonstrations);
  if (config.reference) add_input(*config.reference);
  if (config.embeddings) add_input(*config.embeddings);
  if (config.cassette && config.mode == llm::Mode::Replay) add_input(*config.cassette);

  write_json_file(run / "manifest.json", {{"run_id", config.run_id},
                                          {"seed", config.seed},
                                          {"mode", llm::to_string(config.mode)},
                                          {"inputs", inputs},
                                          {"files", file_digests(run)}});
}

std::string export_report(const fs::path& run) {
  if (!fs::exists(run / "run.json")) throw Error(Errc::MissingRun, "no run at " + run.string());
  const json meta = read_json_file(run / "run.json");
  auto f = [](double v) { return io::format_fixed(v, 4); };

  std::string md = "# Run " + meta.at("run_id").get<std::string>() + "\n\n";
  md += "Seed " + std::to_string(meta.at("seed").get<std::uint64_t>()) + ". Extractors: " +
        text::join(std::span<const std::string>(meta.at("extractor_models").get<std::vector<std::string>>()), ", ") +
        ".\n\n";

  md += "## Corpus statistics\n\n";
  if (fs::exists(run / "corpus_stats.json")) {
    const json s = read_json_file(run / "corpus_stats.json");
    md += "| documents | chunks | pages | chars | words | sentences | numerics |\n";
    md += "|---|---|---|---|---|---|---|\n";
    md += "| " + std::to_string(s.value("documents", 0)) + " | " + std::to_string(s.value("chunks", 0)) +
          " | " + std::to_string(s.at("pages").get<std::size_t>()) + " | " +
          std::to_string(s.at("chars").get<std::size_t>()) + " | " +
          std::to_string(s.at("words").get<std::size_t>()) + " | " +
          std::to_string(s.at("sentences").get<std::size_t>()) + " | " +
          std::to_string(s.at("numerics").get<std::size_t>()) + " |\n\n";
  } else {
    md += "Absent: the run has not been ingested.\n\n";
  }

  std::vector<json> eval_rows;
  if (fs::exists(run / "eval" / "report.jsonl")) eval_rows = io::read_jsonl(run / "eval" / "report.jsonl");
  md += "## Reference-based metrics\n\n";
  if (eval_rows.empty()) {
    md += "Absent: reference evaluation was not run.\n\n";
  } else {
    md += "| strategy | model | prompts | BLEU | ROUGE-L | METEOR | EmbedSim | Hallucination | Format | Combined |\n";
    md += "|---|---|---|---|---|---|---|---|---|---|\n";
    std::vector<const json*> sorted;
    for (const json& r : eval_rows) sorted.push_back(&r);
    std::stable_sort(sorted.begin(), sorted.end(), [](const json* a, const json* b) {
      return a->at("strategy").get<std::string>() < b->at("strategy").get<std::string>();
    });
    for (const json* r : sorted) {
      const json& raw = r->at("raw");
      md += "| " + r->at("strategy").get<std::string>() + " | " + r->at("model_id").get<std::string>() +
            " | " + std::to_string(r->at("prompts").get<std::size_t>()) + " | " +
            f(raw.at("bleu")) + " | " + f(raw.at("rouge_l")) + " | " + f(raw.at("meteor")) + " | " +
            f(raw.at("embed_sim")) + " | " + f(raw.at("hallucination_rate")) + " | " +
            f(raw.at("format_conformance")) + " | " + io::format_fixed(r->at("combined_score"), 2) + " |\n";
    }
    md += "\n";
  }

  md += "## Hallucination by component\n\n";
  if (eval_rows.empty()) {
    md += "Absent: reference evaluation was not run.\n\n";
  } else {
    md += "| strategy | model | subject | relation | object | any |\n|---|---|---|---|---|---|\n";
    for (const json& r : eval_rows) {
      const json& c = r.at("hallucination_components");
      md += "| " + r.at("strategy").get<std::string>() + " | " + r.at("model_id").get<std::string>() +
            " | " + f(c.at("subject")) + " | " + f(c.at("relation")) + " | " + f(c.at("object")) +
            " | " + f(r.at("raw").at("hallucination_rate")) + " |\n";
    }
    md += "\n";
  }

  md += "## Judge correlations\n\n";
  const fs::path corr = run / "judge" / "correlations.csv";
  const fs::path expect = run / "judge" / "expectation.csv";
  if (fs::exists(corr)) {
    md += "| judge model | method | Spearman | Kendall |\n|---|---|---|---|\n";
    const std::vector<std::string> lines = read_lines(corr);
    for (std::size_t i = 1; i < lines.size(); ++i) {
      std::string row = lines[i];
      std::replace(row.begin(), row.end(), ',', '|');
      md += "| " + row + " |\n";
    }
    md += "\n";
  } else if (fs::exists(expect)) {
    md += "Absent: no reference report to correlate with; expectation scores are in "
          "judge/expectation.csv.\n\n";
  } else {
    md += "Absent: the judge phase was not run.\n\n";
  }

  md += "## Warnings\n\n| stage | count |\n|---|---|\n";
  md += "| reference evaluation | " + std::to_string(read_lines(run / "eval" / "warnings.txt").size()) + " |\n";
  md += "| judge | " + std::to_string(read_lines(run / "judge" / "warnings.txt").size()) + " |\n";

  io::write_file(run / "report.md", md);
  if (fs::exists(run / "manifest.json")) {
    json manifest = read_json_file(run / "manifest.json");
    manifest["files"] = file_digests(run);
    write_json_file(run / "manifest.json", manifest);
  }
  return md;
}

}  // namespace minekg::pipeline
