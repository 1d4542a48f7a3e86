#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "classnet/data_model.hpp"
#include "classnet/error.hpp"

namespace classnet {

class Roster;

// Raised by backends for transport-level failures (connection refused,
// timeouts, 5xx). classify_one retries these with backoff.
class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
};

struct FewShot {
  std::string excerpt;
  std::string reasoning;
  FineLabel label = FineLabel::Uncorrelated;
};

// Prompt text lives in external files. The user template may reference
// {{context}}, {{speaker}}, {{utterance}} and {{examples}}; the system text
// may reference {{examples}}.
struct PromptTemplate {
  std::string system_text;
  std::string user_template;
  std::vector<FewShot> few_shots;
  bool declares_few_shots = false;

  // Reads system.txt, user.txt and (optionally) few_shots.json.
  static PromptTemplate load(const std::filesystem::path& dir);
};

struct ContextLine {
  std::string speaker;
  std::string text;
};

struct PromptBundle {
  std::string system_text;
  std::string user_text;
  std::vector<FewShot> few_shots;

  // Structured copy of what the rendered text was built from.
  std::string target_id;
  std::string target_speaker;
  std::string target_text;
  std::vector<ContextLine> context;
};

// `history` holds the utterances preceding the target in its block, oldest
// first; only the last `context_size` are rendered. Speaker display names
// come from `roster` when given, else the raw speaker id.
PromptBundle build_prompt(const Utterance& target, std::span<const Utterance> history,
                          const PromptTemplate& tmpl, int context_size,
                          const Roster* roster = nullptr);

enum class Tier { Commercial, OpenSource, Mock };
std::string_view to_string(Tier tier);
Tier parse_tier(std::string_view text);

struct BackendDescriptor {
  std::string model_id;
  Tier tier = Tier::Mock;
  int priority_rank = 1;
  std::map<std::string, std::string> endpoint;  // url, auth_env, timeout_s, adapter, seed, noise, ...
};

using LabelDistribution = std::map<FineLabel, double>;

struct Completion {
  std::string text;
  std::optional<LabelDistribution> label_probabilities;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual const BackendDescriptor& descriptor() const = 0;
  // `reformat_hint` is empty on the first attempt and carries a
  // formatting reminder on the single reformat retry.
  virtual Completion complete(const PromptBundle& bundle, const std::string& reformat_hint) = 0;
};

struct ModelResponse {
  std::string model_id;
  FineLabel label = FineLabel::Uncorrelated;
  std::string reasoning;
  std::optional<LabelDistribution> label_probabilities;
};

struct ParsedOutput {
  FineLabel label;
  std::string reasoning;
};

// Extracts the final-answer label from a two-step "Reasoning: ... / Label: ..."
// completion. Returns nullopt when no recognisable label line exists.
std::optional<ParsedOutput> parse_model_output(const std::string& text);

struct RetryPolicy {
  int max_transport_retries = 3;
  std::chrono::milliseconds initial_backoff{250};
  double backoff_factor = 2.0;
  std::chrono::milliseconds max_backoff{8000};
  // Injected so tests do not actually sleep.
  std::function<void(std::chrono::milliseconds)> sleep;
};

inline const std::string kReformatHint =
    "Your previous answer could not be parsed. Reply with two lines exactly: "
    "'Reasoning: <text>' then 'Label: <one of ExplainOwnIdea, EngageLow, "
    "EngageMedium, EngageHigh, Uncorrelated>'.";

// Throws ClassificationError when the output is unparseable after one
// reformat retry, BackendError when transport retries are exhausted.
ModelResponse classify_one(Backend& backend, const PromptBundle& bundle,
                           const RetryPolicy& policy = {});

enum class TieBreak { None, CommercialSubset, PriorityRank };
std::string_view to_string(TieBreak t);
TieBreak parse_tie_break(std::string_view text);

struct Fraction {
  long num = 0;
  long den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Fraction&) const = default;
};

struct VoteRecord {
  std::string utterance_id;
  std::map<std::string, FineLabel> responses;      // model_id -> label
  std::map<std::string, std::string> failures;     // model_id -> error text
  FineLabel final = FineLabel::Uncorrelated;
  TieBreak tie_break_used = TieBreak::None;

  long count(FineLabel l) const;
  long total() const { return static_cast<long>(responses.size()); }
  // Exact vote shares over labels that received at least one vote.
  std::map<FineLabel, Fraction> probabilities() const;
  // Shares for all five labels in enum order (zeros included).
  std::vector<double> probability_vector() const;

  bool operator==(const VoteRecord&) const = default;
};

struct VoteOutcome {
  FineLabel final;
  TieBreak tie_break_used;
};

// Plurality vote over the five fine labels. Ties fall back first to the
// plurality among Commercial backends, then to the tied label chosen by the
// backend with the lowest priority_rank. Throws EnsembleError on no votes.
VoteOutcome aggregate_votes(const std::map<std::string, FineLabel>& responses,
                            const std::vector<BackendDescriptor>& backends);

// Vote shares on the 5-way label space. Throws ArgumentError when empty.
std::map<FineLabel, Fraction> two_stage_fine_label(const std::vector<FineLabel>& responses);

// Fans out to every backend, drops failures into VoteRecord::failures and
// votes over the rest. Throws EnsembleError if no backend succeeded.
VoteRecord ensemble_classify(const Utterance& utterance, std::span<const Utterance> history,
                             const std::vector<std::shared_ptr<Backend>>& backends,
                             const PromptTemplate& tmpl, int context_size,
                             const RetryPolicy& policy = {}, const Roster* roster = nullptr);

struct TriageEntry {
  std::string utterance_id;
  std::string reason;
};

struct ClassificationRun {
  std::vector<VoteRecord> votes;        // in input order
  std::vector<TriageEntry> triage;      // utterances with no usable vote
  std::map<std::string, std::vector<ModelResponse>> responses;  // per utterance, model_id order
};

struct ClassifyOptions {
  int context_size = 5;
  int max_parallel_utterances = 1;
  RetryPolicy retry;
};

// Classifies every utterance (sorted transcript order assumed). Each
// utterance lands in exactly one of run.votes / run.triage.
ClassificationRun classify_transcript(const std::vector<Utterance>& utterances,
                                      const std::vector<std::shared_ptr<Backend>>& backends,
                                      const PromptTemplate& tmpl, const ClassifyOptions& options,
                                      const Roster* roster = nullptr);

std::vector<LabeledUtterance> ensemble_labels(const std::vector<VoteRecord>& votes);
// Per-model labels for every utterance a model answered, model_id -> labels.
std::map<std::string, std::vector<LabeledUtterance>> per_model_labels(const ClassificationRun& run);

void write_votes(const std::filesystem::path& path, const std::vector<VoteRecord>& votes);
std::vector<VoteRecord> load_votes(const std::filesystem::path& path);
std::string vote_to_json_line(const VoteRecord& v);
VoteRecord vote_from_json_line(const std::string& line);

}  // namespace classnet
