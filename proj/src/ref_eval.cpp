#include "minekg/ref_eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "minekg/error.hpp"
#include "minekg/io.hpp"
#include "minekg/rng.hpp"
#include "minekg/text.hpp"

namespace minekg::eval {
namespace {

using Tokens = std::vector<std::string_view>;

Tokens tokens_of(std::string_view s, std::string_view what) {
  Tokens t = text::split_words(s);
  (void)what;
  return t;
}

Tokens reference_tokens(std::string_view reference) {
  Tokens r = text::split_words(reference);
  if (r.empty()) throw Error(Errc::EmptyReference, "reference text has no tokens");
  return r;
}

std::map<Tokens, std::size_t> ngram_counts(const Tokens& tokens, std::size_t n) {
  std::map<Tokens, std::size_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    ++counts[Tokens(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                    tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return counts;
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double cosine(const std::vector<double>& u, const std::vector<double>& v) {
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double bleu_score(std::string_view candidate, std::string_view reference) {
  const Tokens ref = reference_tokens(reference);
  const Tokens cand = tokens_of(candidate, "candidate");
  if (cand.empty()) return 0.0;

  const std::size_t order = std::min<std::size_t>(4, cand.size());
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= order; ++n) {
    const auto cand_counts = ngram_counts(cand, n);
    const auto ref_counts = ngram_counts(ref, n);
    std::size_t matched = 0;
    for (const auto& [gram, count] : cand_counts) {
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) matched += std::min(count, it->second);
    }
    const double total = static_cast<double>(cand.size() - n + 1);
    log_sum += std::log((static_cast<double>(matched) + kBleuEpsilon) / (total + kBleuEpsilon));
  }
  const double c = static_cast<double>(cand.size());
  const double r = static_cast<double>(ref.size());
  const double brevity = c >= r ? 1.0 : std::exp(1.0 - r / c);
  return brevity * std::exp(log_sum / static_cast<double>(order));
}

double rouge_l_score(std::string_view candidate, std::string_view reference) {
  const Tokens ref = reference_tokens(reference);
  const Tokens cand = tokens_of(candidate, "candidate");
  if (cand.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(cand, ref));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(cand.size());
  const double r = lcs / static_cast<double>(ref.size());
  return 2.0 * p * r / (p + r);
}

double meteor_score(std::string_view candidate, std::string_view reference,
                    const MeteorParams& params) {
  const Tokens ref = reference_tokens(reference);
  const Tokens cand = tokens_of(candidate, "candidate");
  if (cand.empty()) return 0.0;

  constexpr std::ptrdiff_t kFree = -1;
  std::vector<std::ptrdiff_t> cand_to_ref(cand.size(), kFree);
  std::vector<bool> ref_used(ref.size(), false);
  std::vector<std::string> cand_stems, ref_stems;
  for (auto t : cand) cand_stems.push_back(text::stem(t));
  for (auto t : ref) ref_stems.push_back(text::stem(t));

  for (int stage = 0; stage < 2; ++stage) {
    auto matches = [&](std::size_t i, std::size_t j) {
      return stage == 0 ? cand[i] == ref[j] : cand_stems[i] == ref_stems[j];
    };
    for (std::size_t i = 0; i < cand.size(); ++i) {
      if (cand_to_ref[i] != kFree) continue;
      if (i > 0 && cand_to_ref[i - 1] != kFree) {
        const auto next = static_cast<std::size_t>(cand_to_ref[i - 1] + 1);
        if (next < ref.size() && !ref_used[next] && matches(i, next)) {
          cand_to_ref[i] = static_cast<std::ptrdiff_t>(next);
          ref_used[next] = true;
          continue;
        }
      }
      for (std::size_t j = 0; j < ref.size(); ++j) {
        if (!ref_used[j] && matches(i, j)) {
          cand_to_ref[i] = static_cast<std::ptrdiff_t>(j);
          ref_used[j] = true;
          break;
        }
      }
    }
  }

  std::size_t m = 0;
  std::size_t chunks = 0;
  std::ptrdiff_t prev_ref = kFree;
  bool prev_matched = false;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    if (cand_to_ref[i] == kFree) {
      prev_matched = false;
      continue;
    }
    ++m;
    if (!(prev_matched && cand_to_ref[i] == prev_ref + 1)) ++chunks;
    prev_ref = cand_to_ref[i];
    prev_matched = true;
  }
  if (m == 0) return 0.0;

  const double p = static_cast<double>(m) / static_cast<double>(cand.size());
  const double r = static_cast<double>(m) / static_cast<double>(ref.size());
  const double fmean = p * r / (params.alpha * p + (1.0 - params.alpha) * r);
  const double penalty =
      params.gamma * std::pow(static_cast<double>(chunks) / static_cast<double>(m), params.beta);
  return fmean * (1.0 - penalty);
}

std::vector<double> CharNgramEmbedding::embed(std::string_view token) const {
  std::vector<double> v(dimension_, 0.0);
  const std::string padded = "<" + std::string(token) + ">";
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    const std::uint64_t h = fnv1a64(std::string_view(padded).substr(i, 3));
    v[h % dimension_] += (h >> 63) != 0 ? -1.0 : 1.0;
  }
  return v;
}

TableEmbedding::TableEmbedding(std::size_t dimension,
                               std::shared_ptr<const EmbeddingProvider> fallback)
    : dimension_(dimension), fallback_(std::move(fallback)) {
  if (fallback_ && fallback_->dimension() != dimension_)
    throw Error(Errc::InvalidArgument, "fallback embedding dimension differs from table");
}

void TableEmbedding::add(std::string token, std::vector<double> vector) {
  if (vector.size() != dimension_)
    throw Error(Errc::InvalidArgument, "embedding for '" + token + "' has the wrong dimension");
  table_[std::move(token)] = std::move(vector);
}

std::vector<double> TableEmbedding::embed(std::string_view token) const {
  auto it = table_.find(std::string(token));
  if (it != table_.end()) return it->second;
  if (fallback_) return fallback_->embed(token);
  throw Error(Errc::ProviderFailure, "no embedding for token '" + std::string(token) + "'");
}

std::shared_ptr<TableEmbedding> TableEmbedding::load_text(
    const std::filesystem::path& path, std::shared_ptr<const EmbeddingProvider> fallback) {
  std::istringstream in(io::read_file(path));
  std::string line;
  std::shared_ptr<TableEmbedding> table;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> values;
    double x = 0.0;
    while (fields >> x) values.push_back(x);
    if (line_no == 1 && values.size() == 1) continue;  // "<count> <dim>" header
    if (values.empty())
      throw Error(Errc::MalformedFile, path.string() + ":" + std::to_string(line_no) +
                                           ": no vector values");
    if (!table) {
      if (fallback && fallback->dimension() != values.size())
        fallback = std::make_shared<CharNgramEmbedding>(values.size());
      table = std::make_shared<TableEmbedding>(values.size(), fallback);
    }
    if (values.size() != table->dimension())
      throw Error(Errc::MalformedFile,
                  path.string() + ":" + std::to_string(line_no) + ": dimension mismatch");
    table->add(token, std::move(values));
  }
  if (!table) throw Error(Errc::MalformedFile, path.string() + ": no vectors");
  return table;
}

double embedding_similarity_score(std::string_view candidate, std::string_view reference,
                                  const EmbeddingProvider& provider) {
  const Tokens ref = reference_tokens(reference);
  const Tokens cand = tokens_of(candidate, "candidate");
  if (cand.empty()) return 0.0;

  std::map<std::string_view, std::vector<double>> cache;
  auto vec = [&](std::string_view token) -> const std::vector<double>& {
    auto it = cache.find(token);
    if (it != cache.end()) return it->second;
    std::vector<double> v;
    try {
      v = provider.embed(token);
    } catch (const Error& e) {
      if (e.code() == Errc::ProviderFailure) throw;
      throw Error(Errc::ProviderFailure, e.what());
    } catch (const std::exception& e) {
      throw Error(Errc::ProviderFailure, e.what());
    }
    if (v.size() != provider.dimension())
      throw Error(Errc::ProviderFailure,
                  "embedding for '" + std::string(token) + "' has the wrong dimension");
    return cache.emplace(token, std::move(v)).first->second;
  };

  std::vector<std::vector<double>> sim(cand.size(), std::vector<double>(ref.size()));
  for (std::size_t i = 0; i < cand.size(); ++i)
    for (std::size_t j = 0; j < ref.size(); ++j) sim[i][j] = cosine(vec(cand[i]), vec(ref[j]));

  std::vector<double> best_for_cand(cand.size(), -1.0), best_for_ref(ref.size(), -1.0);
  for (std::size_t i = 0; i < cand.size(); ++i) {
    for (std::size_t j = 0; j < ref.size(); ++j) {
      best_for_cand[i] = std::max(best_for_cand[i], sim[i][j]);
      best_for_ref[j] = std::max(best_for_ref[j], sim[i][j]);
    }
  }
  const double p = mean(best_for_cand);
  const double r = mean(best_for_ref);
  if (p + r <= 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

HallucinationFlags hallucination_assess(const triples::Triple& t,
                                        std::span<const std::string> context_tokens,
                                        const ontology::Ontology& onto) {
  auto grounded = [&](std::string_view arg) {
    const std::vector<std::string> needle = triples::normalized_tokens(arg);
    return !needle.empty() && text::contains_run<std::string>(context_tokens, needle);
  };
  HallucinationFlags flags;
  flags.subject_flag = !grounded(t.subject);
  flags.object_flag = !grounded(t.object);
  flags.relation_flag = !onto.has_relation_ci(t.relation);
  flags.triple_flag = flags.subject_flag || flags.relation_flag || flags.object_flag;
  return flags;
}

HallucinationFlags hallucination_assess(const triples::Triple& t, std::string_view context,
                                        const ontology::Ontology& onto) {
  const std::vector<std::string> tokens = triples::normalized_tokens(context);
  return hallucination_assess(t, tokens, onto);
}

HallucinationRates hallucination_rates(const triples::TripleSet& ts, std::string_view context,
                                       const ontology::Ontology& onto) {
  HallucinationRates rates;
  if (ts.triples.empty()) return rates;
  const std::vector<std::string> tokens = triples::normalized_tokens(context);
  for (const triples::Triple& t : ts.triples) {
    const HallucinationFlags f = hallucination_assess(t, tokens, onto);
    rates.subject += f.subject_flag;
    rates.relation += f.relation_flag;
    rates.object += f.object_flag;
    rates.triple += f.triple_flag;
  }
  const double n = static_cast<double>(ts.triples.size());
  rates.subject /= n;
  rates.relation /= n;
  rates.object /= n;
  rates.triple /= n;
  return rates;
}

double format_conformance_rate(std::string_view raw) {
  const triples::TripleSet ts = triples::parse_output(raw);
  if (ts.candidate_lines() == 0) return 1.0;
  return static_cast<double>(ts.accepted_lines()) / static_cast<double>(ts.candidate_lines());
}

std::vector<double> min_max_normalize(std::span<const double> values) {
  if (values.empty()) throw Error(Errc::InvalidArgument, "min_max_normalize of an empty list");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double min = *lo;
  const double max = *hi;
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(max == min ? 0.5 : (v - min) / (max - min));
  return out;
}

std::vector<NormalizedMetrics> normalize_matrix(std::span<const MetricVector> matrix) {
  if (matrix.empty()) throw Error(Errc::InvalidArgument, "empty metric matrix");
  auto column = [&](double MetricVector::*field) {
    std::vector<double> values;
    for (const MetricVector& m : matrix) values.push_back(m.*field);
    return min_max_normalize(values);
  };
  const auto bleu = column(&MetricVector::bleu);
  const auto rouge = column(&MetricVector::rouge_l);
  const auto meteor = column(&MetricVector::meteor);
  const auto embed = column(&MetricVector::embed_sim);
  const auto hall = column(&MetricVector::hallucination_rate);
  std::vector<NormalizedMetrics> out(matrix.size());
  for (std::size_t i = 0; i < matrix.size(); ++i)
    out[i] = {bleu[i], rouge[i], meteor[i], embed[i], hall[i]};
  return out;
}

std::vector<double> combined_score(std::span<const MetricVector> matrix) {
  constexpr double kTerms = 5.0;
  std::vector<double> scores;
  for (const NormalizedMetrics& n : normalize_matrix(matrix)) {
    const double sum =
        n.bleu + n.rouge_l + n.meteor + n.embed_sim + (1.0 - n.hallucination_rate);
    scores.push_back(100.0 * sum / kTerms);
  }
  return scores;
}

ConfigurationScores evaluate_configuration(std::string model_id, std::string strategy,
                                           std::span<const EvalItem> items,
                                           const std::map<std::string, CandidateOutput>& outputs,
                                           const EmbeddingProvider& embeddings) {
  ConfigurationScores result;
  result.model_id = std::move(model_id);
  result.strategy = std::move(strategy);

  std::vector<const EvalItem*> ordered;
  for (const EvalItem& item : items) ordered.push_back(&item);
  std::sort(ordered.begin(), ordered.end(),
            [](const EvalItem* a, const EvalItem* b) { return a->prompt_id < b->prompt_id; });

  std::vector<double> bleu, rouge, meteor, embed, hall, fc, subj, rel, obj;
  for (const EvalItem* item : ordered) {
    if (item->reference.triples.empty()) {
      result.warnings.push_back(item->prompt_id + ": empty reference, skipped");
      continue;
    }
    if (item->ontology == nullptr)
      throw Error(Errc::InvalidArgument, item->prompt_id + ": no ontology for prompt");
    static const CandidateOutput kEmpty{};
    auto it = outputs.find(item->prompt_id);
    if (it == outputs.end())
      result.warnings.push_back(item->prompt_id + ": no output from " + result.model_id);
    const CandidateOutput& out = it == outputs.end() ? kEmpty : it->second;

    const std::string cand = triples::normalize_text(triples::canonical_serialize(out.triples));
    const std::string ref = triples::normalize_text(triples::canonical_serialize(item->reference));
    bleu.push_back(bleu_score(cand, ref));
    rouge.push_back(rouge_l_score(cand, ref));
    meteor.push_back(meteor_score(cand, ref));
    embed.push_back(std::clamp(embedding_similarity_score(cand, ref, embeddings), 0.0, 1.0));
    fc.push_back(format_conformance_rate(out.raw));

    const std::vector<std::string> ctx = triples::normalized_tokens(item->context);
    double flagged_s = 0, flagged_r = 0, flagged_o = 0, flagged_t = 0;
    for (const triples::Triple& t : out.triples.triples) {
      const HallucinationFlags f = hallucination_assess(t, ctx, *item->ontology);
      flagged_s += f.subject_flag;
      flagged_r += f.relation_flag;
      flagged_o += f.object_flag;
      flagged_t += f.triple_flag;
      result.flags.push_back({{"model_id", result.model_id},
                              {"strategy", result.strategy},
                              {"prompt_id", item->prompt_id},
                              {"relation", t.relation},
                              {"subject", t.subject},
                              {"object", t.object},
                              {"subject_flag", f.subject_flag},
                              {"relation_flag", f.relation_flag},
                              {"object_flag", f.object_flag},
                              {"triple_flag", f.triple_flag}});
    }
    const double n = static_cast<double>(out.triples.triples.size());
    hall.push_back(n > 0 ? flagged_t / n : 0.0);
    subj.push_back(n > 0 ? flagged_s / n : 0.0);
    rel.push_back(n > 0 ? flagged_r / n : 0.0);
    obj.push_back(n > 0 ? flagged_o / n : 0.0);
  }
  if (bleu.empty())
    throw Error(Errc::EmptyReference, "no prompt with a non-empty reference for " +
                                          result.model_id + "/" + result.strategy);

  result.prompts = bleu.size();
  result.raw = {mean(bleu), mean(rouge), mean(meteor), mean(embed), mean(hall), mean(fc)};
  result.components = {mean(subj), mean(rel), mean(obj), mean(hall)};
  return result;
}

EvaluationReport build_report(std::vector<ConfigurationScores> configurations) {
  EvaluationReport report;
  if (configurations.empty()) return report;
  std::sort(configurations.begin(), configurations.end(), [](const auto& a, const auto& b) {
    return std::tie(a.model_id, a.strategy) < std::tie(b.model_id, b.strategy);
  });
  std::vector<MetricVector> matrix;
  for (const auto& c : configurations) matrix.push_back(c.raw);
  const std::vector<NormalizedMetrics> normalized = normalize_matrix(matrix);
  const std::vector<double> combined = combined_score(matrix);
  for (std::size_t i = 0; i < configurations.size(); ++i)
    report.rows.push_back({std::move(configurations[i]), normalized[i], combined[i]});
  return report;
}

std::string report_csv(const EvaluationReport& report) {
  std::string out =
      "model_id,strategy,prompts,bleu,rouge_l,meteor,embed_sim,hallucination_rate,"
      "format_conformance,subject_hallucination,relation_hallucination,object_hallucination,"
      "norm_bleu,norm_rouge_l,norm_meteor,norm_embed_sim,norm_hallucination_rate,combined_score\n";
  auto f = [](double v) { return io::format_fixed(v, 6); };
  for (const EvaluationRow& row : report.rows) {
    const ConfigurationScores& s = row.scores;
    out += io::csv_field(s.model_id) + "," + io::csv_field(s.strategy) + "," +
           std::to_string(s.prompts) + "," + f(s.raw.bleu) + "," + f(s.raw.rouge_l) + "," +
           f(s.raw.meteor) + "," + f(s.raw.embed_sim) + "," + f(s.raw.hallucination_rate) + "," +
           f(s.raw.format_conformance) + "," + f(s.components.subject) + "," +
           f(s.components.relation) + "," + f(s.components.object) + "," +
           f(row.normalized.bleu) + "," + f(row.normalized.rouge_l) + "," +
           f(row.normalized.meteor) + "," + f(row.normalized.embed_sim) + "," +
           f(row.normalized.hallucination_rate) + "," + io::format_fixed(row.combined, 4) + "\n";
  }
  return out;
}

std::vector<nlohmann::json> report_rows(const EvaluationReport& report) {
  std::vector<nlohmann::json> rows;
  for (const EvaluationRow& row : report.rows) {
    const ConfigurationScores& s = row.scores;
    rows.push_back({{"model_id", s.model_id},
                    {"strategy", s.strategy},
                    {"prompts", s.prompts},
                    {"raw",
                     {{"bleu", s.raw.bleu},
                      {"rouge_l", s.raw.rouge_l},
                      {"meteor", s.raw.meteor},
                      {"embed_sim", s.raw.embed_sim},
                      {"hallucination_rate", s.raw.hallucination_rate},
                      {"format_conformance", s.raw.format_conformance}}},
                    {"hallucination_components",
                     {{"subject", s.components.subject},
                      {"relation", s.components.relation},
                      {"object", s.components.object}}},
                    {"normalized",
                     {{"bleu", row.normalized.bleu},
                      {"rouge_l", row.normalized.rouge_l},
                      {"meteor", row.normalized.meteor},
                      {"embed_sim", row.normalized.embed_sim},
                      {"hallucination_rate", row.normalized.hallucination_rate}}},
                    {"combined_score", row.combined},
                    {"warnings", s.warnings}});
  }
  return rows;
}

}  // namespace minekg::eval
