#include "minekg/annotation.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>

#include "minekg/error.hpp"
#include "minekg/io.hpp"
#include "minekg/rng.hpp"
#include "minekg/text.hpp"

namespace minekg::annotation {
namespace {

constexpr int kLogVersion = 1;

[[noreturn]] void corrupt(const std::filesystem::path& log, std::size_t line, const std::string& what) {
  throw Error(Errc::SessionCorrupt, log.string() + ":" + std::to_string(line) + ": " + what);
}

Decision parse_decision(std::string_view s) {
  if (s == "accept") return Decision::Accept;
  if (s == "reject") return Decision::Reject;
  if (s == "pending") return Decision::Pending;
  throw Error(Errc::InvalidArgument, "unknown decision '" + std::string(s) + "'");
}

nlohmann::json state_json(const ItemState& s) {
  nlohmann::json j = {{"decision", to_string(s.decision)}};
  if (s.reason) j["reason"] = to_string(*s.reason);
  if (!s.note.empty()) j["note"] = s.note;
  return j;
}

}  // namespace

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k > n)
    throw Error(Errc::KTooLarge, "cannot sample " + std::to_string(k) + " of " + std::to_string(n));
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  DeterministicRng rng(seed);
  // partial Fisher-Yates: the first k slots end up a uniform k-subset
  for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.index(n - i)]);
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::vector<prompts::PromptSpec> sample_annotation_prompts(
    std::span<const prompts::PromptSpec> prompts, std::size_t k, std::uint64_t seed) {
  std::vector<prompts::PromptSpec> out;
  for (std::size_t i : sample_indices(prompts.size(), k, seed)) out.push_back(prompts[i]);
  return out;
}

std::string_view to_string(Decision d) noexcept {
  switch (d) {
    case Decision::Pending: return "pending";
    case Decision::Accept: return "accept";
    case Decision::Reject: return "reject";
  }
  return "pending";
}

std::string_view to_string(RejectReason r) noexcept {
  switch (r) {
    case RejectReason::WrongFormat: return "wrong-format";
    case RejectReason::SwappedOrder: return "swapped-order";
    case RejectReason::Hallucinated: return "hallucinated";
    case RejectReason::Other: return "other";
  }
  return "other";
}

RejectReason parse_reason(std::string_view name) {
  std::string key = text::to_lower_ascii(text::trim(name));
  std::replace(key.begin(), key.end(), '_', '-');
  if (key == "wrong-format") return RejectReason::WrongFormat;
  if (key == "swapped-order") return RejectReason::SwappedOrder;
  if (key == "hallucinated") return RejectReason::Hallucinated;
  if (key == "other") return RejectReason::Other;
  throw Error(Errc::InvalidArgument, "unknown reject reason '" + std::string(name) + "'");
}

std::vector<QueueItem> build_review_queue(const ModelOutputs& outputs) {
  std::map<std::string, std::vector<QueueItem>> by_prompt;
  std::map<std::pair<std::string, triples::TripleKey>, std::size_t> seen;
  for (const auto& [model, sets] : outputs) {
    for (const auto& [prompt_id, ts] : sets) {
      auto& items = by_prompt[prompt_id];
      for (const triples::Triple& t : ts.triples) {
        const auto key = std::pair{prompt_id, triples::identity(t)};
        auto it = seen.find(key);
        if (it != seen.end()) {
          auto& sources = items[it->second].source_models;
          if (sources.back() != model) sources.push_back(model);
          continue;
        }
        seen.emplace(key, items.size());
        items.push_back({prompt_id, t, {model}});
      }
    }
  }
  std::vector<QueueItem> queue;
  for (auto& [prompt_id, items] : by_prompt)
    for (QueueItem& item : items) queue.push_back(std::move(item));
  return queue;
}

ReviewSession ReviewSession::create(const std::filesystem::path& log, std::string session_id,
                                    std::string annotator_id, std::vector<QueueItem> queue,
                                    const std::map<std::string, std::string>& contexts) {
  if (std::filesystem::exists(log))
    throw Error(Errc::InvalidArgument, log.string() + " already exists; open it to resume");
  ReviewSession s;
  s.log_ = log;
  s.session_id_ = std::move(session_id);
  s.annotator_id_ = std::move(annotator_id);
  s.queue_ = std::move(queue);
  s.states_.assign(s.queue_.size(), ItemState{});

  std::vector<nlohmann::json> rows;
  rows.push_back({{"type", "header"},
                  {"version", kLogVersion},
                  {"session_id", s.session_id_},
                  {"annotator_id", s.annotator_id_},
                  {"items", s.queue_.size()}});
  std::set<std::string> prompt_ids;
  for (std::size_t i = 0; i < s.queue_.size(); ++i) {
    const QueueItem& q = s.queue_[i];
    prompt_ids.insert(q.prompt_id);
    rows.push_back({{"type", "item"},
                    {"index", i},
                    {"prompt_id", q.prompt_id},
                    {"relation", q.triple.relation},
                    {"subject", q.triple.subject},
                    {"object", q.triple.object},
                    {"source_models", q.source_models}});
  }
  for (const std::string& id : prompt_ids) {
    auto it = contexts.find(id);
    if (it == contexts.end()) continue;
    s.contexts_[id] = it->second;
    rows.push_back({{"type", "context"}, {"prompt_id", id}, {"text", it->second}});
  }
  io::write_file(log, io::to_jsonl(rows));
  return s;
}

ReviewSession ReviewSession::open(const std::filesystem::path& log) {
  std::vector<nlohmann::json> rows;
  try {
    rows = io::read_jsonl(log);
  } catch (const Error& e) {
    throw Error(Errc::SessionCorrupt, e.what());
  }
  if (rows.empty()) corrupt(log, 1, "empty session log");

  ReviewSession s;
  s.log_ = log;
  std::size_t expected_items = 0;
  bool events_started = false;
  for (std::size_t n = 0; n < rows.size(); ++n) {
    const nlohmann::json& row = rows[n];
    const std::size_t line = n + 1;
    try {
      const std::string type = row.at("type").get<std::string>();
      if (n == 0) {
        if (type != "header") corrupt(log, line, "first record is not a header");
        if (row.at("version").get<int>() != kLogVersion) corrupt(log, line, "unsupported version");
        s.session_id_ = row.at("session_id").get<std::string>();
        s.annotator_id_ = row.at("annotator_id").get<std::string>();
        expected_items = row.at("items").get<std::size_t>();
        continue;
      }
      if (type == "item" || type == "context") {
        if (events_started) corrupt(log, line, "queue record after the first event");
        if (type == "context") {
          s.contexts_[row.at("prompt_id").get<std::string>()] = row.at("text").get<std::string>();
          continue;
        }
        if (row.at("index").get<std::size_t>() != s.queue_.size())
          corrupt(log, line, "item index out of sequence");
        triples::Triple t{row.at("relation").get<std::string>(), row.at("subject").get<std::string>(),
                          row.at("object").get<std::string>(), {}};
        t.raw_line = triples::render(t);
        s.queue_.push_back({row.at("prompt_id").get<std::string>(), std::move(t),
                            row.at("source_models").get<std::vector<std::string>>()});
        continue;
      }
      if (!events_started) {
        if (s.queue_.size() != expected_items) corrupt(log, line, "queue is incomplete");
        s.states_.assign(s.queue_.size(), ItemState{});
        events_started = true;
      }
      if (type == "decision") {
        const std::size_t index = row.at("index").get<std::size_t>();
        if (index >= s.queue_.size()) corrupt(log, line, "decision for an unknown item");
        ItemState st;
        st.decision = parse_decision(row.at("decision").get<std::string>());
        if (st.decision == Decision::Pending) corrupt(log, line, "pending is not a decision");
        if (st.decision == Decision::Reject)
          st.reason = parse_reason(row.at("reason").get<std::string>());
        st.note = row.value("note", std::string{});
        s.apply_decision(index, std::move(st));
      } else if (type == "undo") {
        if (!s.apply_undo()) corrupt(log, line, "undo with nothing to undo");
      } else {
        corrupt(log, line, "unknown record type '" + type + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      corrupt(log, line, e.what());
    } catch (const Error& e) {
      if (e.code() == Errc::SessionCorrupt) throw;
      corrupt(log, line, e.what());
    }
  }
  if (!events_started) {
    if (s.queue_.size() != expected_items) corrupt(log, rows.size(), "queue is incomplete");
    s.states_.assign(s.queue_.size(), ItemState{});
  }
  return s;
}

std::string_view ReviewSession::context(const std::string& prompt_id) const {
  auto it = contexts_.find(prompt_id);
  return it == contexts_.end() ? std::string_view{} : std::string_view(it->second);
}

std::size_t ReviewSession::pending() const {
  return static_cast<std::size_t>(std::count_if(states_.begin(), states_.end(), [](const auto& s) {
    return s.decision == Decision::Pending;
  }));
}

void ReviewSession::check_index(std::size_t index) const {
  if (index >= queue_.size())
    throw Error(Errc::InvalidArgument, "no review item " + std::to_string(index));
}

void ReviewSession::apply_decision(std::size_t index, ItemState state) {
  history_.emplace_back(index, states_[index]);
  states_[index] = std::move(state);
  cursor_ = index + 1;
}

bool ReviewSession::apply_undo() {
  if (history_.empty()) return false;
  auto [index, before] = std::move(history_.back());
  history_.pop_back();
  states_[index] = std::move(before);
  cursor_ = index;
  return true;
}

void ReviewSession::accept(std::size_t index) {
  check_index(index);
  ItemState st{Decision::Accept, std::nullopt, {}};
  nlohmann::json row = {{"type", "decision"}, {"index", index}};
  row.update(state_json(st));
  io::append_file(log_, io::dump(row) + "\n");
  apply_decision(index, std::move(st));
}

void ReviewSession::reject(std::size_t index, RejectReason reason, std::string note) {
  check_index(index);
  ItemState st{Decision::Reject, reason, std::move(note)};
  nlohmann::json row = {{"type", "decision"}, {"index", index}};
  row.update(state_json(st));
  io::append_file(log_, io::dump(row) + "\n");
  apply_decision(index, std::move(st));
}

bool ReviewSession::undo() {
  if (history_.empty()) return false;
  io::append_file(log_, io::dump(nlohmann::json{{"type", "undo"}}) + "\n");
  return apply_undo();
}

std::map<std::string, triples::TripleSet> ReviewSession::accepted() const {
  std::map<std::string, triples::TripleSet> out;
  for (std::size_t i = 0; i < queue_.size(); ++i) {
    if (states_[i].decision != Decision::Accept) continue;
    triples::TripleSet& ts = out[queue_[i].prompt_id];
    ts.prompt_id = queue_[i].prompt_id;
    ts.add(queue_[i].triple);
  }
  return out;
}

std::string ReviewSession::export_reference() const {
  std::vector<nlohmann::json> rows;
  for (auto& [prompt_id, ts] : accepted()) {
    triples::TripleSet sorted = ts;
    std::sort(sorted.triples.begin(), sorted.triples.end(), [](const auto& a, const auto& b) {
      return triples::render(a) < triples::render(b);
    });
    for (triples::Triple& t : sorted.triples) t.raw_line = triples::render(t);
    for (nlohmann::json& row : triples::to_rows(sorted)) rows.push_back(std::move(row));
  }
  return io::to_jsonl(rows);
}

std::vector<nlohmann::json> ReviewSession::rejections() const {
  std::vector<nlohmann::json> rows;
  for (std::size_t i = 0; i < queue_.size(); ++i) {
    const ItemState& st = states_[i];
    if (st.decision != Decision::Reject) continue;
    rows.push_back({{"prompt_id", queue_[i].prompt_id},
                    {"relation", queue_[i].triple.relation},
                    {"subject", queue_[i].triple.subject},
                    {"object", queue_[i].triple.object},
                    {"reason", to_string(st.reason.value_or(RejectReason::Other))},
                    {"note", st.note}});
  }
  return rows;
}

void run_review(ReviewSession& session, std::istream& in, std::ostream& out) {
  const auto& queue = session.queue();
  std::size_t at = std::min(session.cursor(), queue.size());
  // resume on the first undecided item from the cursor on
  while (at < queue.size() && session.states()[at].decision != Decision::Pending) ++at;
  std::string last_prompt;
  while (true) {
    if (at >= queue.size()) {
      if (session.pending() == 0) {
        out << "All " << queue.size() << " items decided.\n";
        return;
      }
      at = 0;
      while (session.states()[at].decision != Decision::Pending) ++at;
    }
    const QueueItem& item = queue[at];
    if (item.prompt_id != last_prompt) {
      out << "\n== " << item.prompt_id << " ==\n" << session.context(item.prompt_id) << "\n";
      last_prompt = item.prompt_id;
    }
    out << "[" << at + 1 << "/" << queue.size() << ", " << session.pending() << " pending] "
        << triples::render(item.triple) << "  (" << text::join(std::span<const std::string>(item.source_models), ", ")
        << ") " << to_string(session.states()[at].decision) << "\n"
        << "a=accept r=reject u=undo n=next p=prev q=quit > " << std::flush;

    std::string line;
    if (!std::getline(in, line)) return;
    const std::string_view key = text::trim(line);
    if (key.empty()) continue;
    switch (key.front()) {
      case 'a':
        session.accept(at);
        at = session.cursor();
        break;
      case 'r': {
        out << "reason: 1=wrong-format 2=swapped-order 3=hallucinated 4=other > " << std::flush;
        std::string r;
        if (!std::getline(in, r)) return;
        static constexpr RejectReason kReasons[] = {RejectReason::WrongFormat, RejectReason::SwappedOrder,
                                                    RejectReason::Hallucinated, RejectReason::Other};
        const std::string_view choice = text::trim(r);
        const int pick = choice.size() == 1 ? choice.front() - '1' : -1;
        if (pick < 0 || pick > 3) {
          out << "unknown reason\n";
          break;
        }
        session.reject(at, kReasons[pick]);
        at = session.cursor();
        break;
      }
      case 'u':
        if (session.undo())
          at = session.cursor();
        else
          out << "nothing to undo\n";
        break;
      case 'n':
        at = at + 1 < queue.size() ? at + 1 : at;
        break;
      case 'p':
        at = at > 0 ? at - 1 : 0;
        break;
      case 'q':
        out << "Saved. " << session.pending() << " items pending.\n";
        return;
      default:
        out << "unknown key\n";
    }
  }
}

AgreementResult agreement_metrics(const triples::TripleSet& a, const triples::TripleSet& b) {
  std::set<triples::TripleKey> sa, sb;
  for (const auto& t : a.triples) sa.insert(triples::identity(t));
  for (const auto& t : b.triples) sb.insert(triples::identity(t));
  if (sa.empty() && sb.empty()) return {1.0, 1.0, 1.0};
  if (sa.empty() || sb.empty()) return {0.0, 0.0, 0.0};
  std::size_t common = 0;
  for (const auto& k : sa) common += sb.count(k);
  const double inter = static_cast<double>(common);
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  return {inter / (na + nb - inter), 2.0 * inter / (na + nb), inter / std::min(na, nb)};
}

AgreementReport agreement_report(const std::map<std::string, triples::TripleSet>& a,
                                 const std::map<std::string, triples::TripleSet>& b) {
  std::set<std::string> ids;
  for (const auto& [id, ts] : a) ids.insert(id);
  for (const auto& [id, ts] : b) ids.insert(id);
  AgreementReport report;
  static const triples::TripleSet kEmpty;
  for (const std::string& id : ids) {
    auto ia = a.find(id);
    auto ib = b.find(id);
    report.per_prompt.emplace_back(id, agreement_metrics(ia == a.end() ? kEmpty : ia->second,
                                                         ib == b.end() ? kEmpty : ib->second));
  }
  if (!report.per_prompt.empty()) {
    for (const auto& [id, r] : report.per_prompt) {
      report.mean.jaccard += r.jaccard;
      report.mean.dice += r.dice;
      report.mean.overlap += r.overlap;
    }
    const double n = static_cast<double>(report.per_prompt.size());
    report.mean.jaccard /= n;
    report.mean.dice /= n;
    report.mean.overlap /= n;
  }
  return report;
}

std::string agreement_csv(const AgreementReport& report) {
  std::string out = "prompt_id,jaccard,dice,overlap\n";
  auto row = [&](std::string_view id, const AgreementResult& r) {
    out += io::csv_field(id) + "," + io::format_fixed(r.jaccard, 6) + "," +
           io::format_fixed(r.dice, 6) + "," + io::format_fixed(r.overlap, 6) + "\n";
  };
  for (const auto& [id, r] : report.per_prompt) row(id, r);
  row("mean", report.mean);
  return out;
}

}  // namespace minekg::annotation
