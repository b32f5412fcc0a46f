#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "minekg/prompt_forge.hpp"
#include "minekg/triple.hpp"

namespace minekg::annotation {

/// k distinct indices drawn uniformly from [0, n), returned ascending.
/// Errors: KTooLarge when k > n.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed);

/// Uniform sample without replacement, kept in input order.
std::vector<prompts::PromptSpec> sample_annotation_prompts(
    std::span<const prompts::PromptSpec> prompts, std::size_t k, std::uint64_t seed);

enum class Decision { Pending, Accept, Reject };
enum class RejectReason { WrongFormat, SwappedOrder, Hallucinated, Other };

std::string_view to_string(Decision d) noexcept;
std::string_view to_string(RejectReason r) noexcept;
/// wrong-format, swapped-order, hallucinated, other
RejectReason parse_reason(std::string_view name);

struct QueueItem {
  std::string prompt_id;
  triples::Triple triple;
  std::vector<std::string> source_models;  // every model that produced it
};

/// model_id -> prompt_id -> extracted set.
using ModelOutputs = std::map<std::string, std::map<std::string, triples::TripleSet>>;

/// One item per distinct triple identity per prompt, ordered by prompt id and
/// then by first appearance (models visited in id order).
std::vector<QueueItem> build_review_queue(const ModelOutputs& outputs);

struct ItemState {
  Decision decision = Decision::Pending;
  std::optional<RejectReason> reason;
  std::string note;

  friend bool operator==(const ItemState&, const ItemState&) = default;
};

/// A review backed by an append-only JSONL log: a header, the queue, the
/// prompt contexts, then one event per decision or undo. Every change is
/// written before the call returns, so reopening the log restores decisions
/// and cursor exactly.
class ReviewSession {
 public:
  /// Errors: InvalidArgument when the log already exists.
  static ReviewSession create(const std::filesystem::path& log, std::string session_id,
                              std::string annotator_id, std::vector<QueueItem> queue,
                              const std::map<std::string, std::string>& contexts);
  /// Errors: SessionCorrupt for anything the log cannot be replayed from.
  static ReviewSession open(const std::filesystem::path& log);

  const std::string& session_id() const noexcept { return session_id_; }
  const std::string& annotator_id() const noexcept { return annotator_id_; }
  const std::vector<QueueItem>& queue() const noexcept { return queue_; }
  const std::vector<ItemState>& states() const noexcept { return states_; }
  /// Empty when no context was stored for the prompt.
  std::string_view context(const std::string& prompt_id) const;

  /// Index of the item to show next. A decision moves it one past the
  /// decided item; undo moves it back to the undone item.
  std::size_t cursor() const noexcept { return cursor_; }
  std::size_t pending() const;

  void accept(std::size_t index);
  void reject(std::size_t index, RejectReason reason, std::string note = {});
  /// Reverts the latest decision still in effect. Returns false when there
  /// is nothing to undo.
  bool undo();

  /// Accepted triples per prompt (prompts without any are omitted).
  std::map<std::string, triples::TripleSet> accepted() const;
  /// Reference rows sorted by prompt id and rendered triple.
  std::string export_reference() const;
  /// prompt_id, relation, subject, object, reason, note
  std::vector<nlohmann::json> rejections() const;

 private:
  ReviewSession() = default;
  void apply_decision(std::size_t index, ItemState state);
  bool apply_undo();
  void check_index(std::size_t index) const;

  std::filesystem::path log_;
  std::string session_id_;
  std::string annotator_id_;
  std::vector<QueueItem> queue_;
  std::map<std::string, std::string> contexts_;
  std::vector<ItemState> states_;
  std::vector<std::pair<std::size_t, ItemState>> history_;  // (index, state before)
  std::size_t cursor_ = 0;
};

/// Line-oriented review loop. Keys: a accept, r reject (asks for a reason),
/// u undo, n next, p previous, q quit. Returns when the queue is exhausted
/// or on q / end of input.
void run_review(ReviewSession& session, std::istream& in, std::ostream& out);

struct AgreementResult {
  double jaccard = 0.0;
  double dice = 0.0;
  double overlap = 0.0;
};

/// Set similarity over triples::identity(). Both empty gives (1, 1, 1).
AgreementResult agreement_metrics(const triples::TripleSet& a, const triples::TripleSet& b);

struct AgreementReport {
  std::vector<std::pair<std::string, AgreementResult>> per_prompt;
  AgreementResult mean;
};

/// Compares two annotations prompt by prompt over the union of their prompt
/// ids; a prompt missing on one side counts as an empty set there.
AgreementReport agreement_report(const std::map<std::string, triples::TripleSet>& a,
                                 const std::map<std::string, triples::TripleSet>& b);

/// prompt_id,jaccard,dice,overlap with a final "mean" row.
std::string agreement_csv(const AgreementReport& report);

}  // namespace minekg::annotation
