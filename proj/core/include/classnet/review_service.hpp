#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "classnet/classification.hpp"
#include "classnet/data_model.hpp"
#include "classnet/reliability.hpp"

namespace classnet::review {

enum class Status { Pending, Adjudicated };
std::string_view to_string(Status s);
Status parse_status(std::string_view text);

struct Adjudication {
  std::string utterance_id;
  FineLabel label = FineLabel::Uncorrelated;
  std::string annotator_id;
  std::string timestamp;

  bool operator==(const Adjudication&) const = default;
};

struct ReviewItem {
  std::string utterance_id;
  std::string speaker_id;
  std::string text;
  std::vector<ContextLine> context;
  std::map<std::string, FineLabel> votes;
  double entropy = 0.0;
  std::optional<FineLabel> current_label;
  Status status = Status::Pending;
  std::vector<std::string> reasons;  // "entropy", "backend-failure", "no-vote"
  std::vector<Adjudication> history;
};

struct Progress {
  std::size_t total = 0;
  std::size_t adjudicated = 0;
};

// Table-1 layout counts.
struct LabelCounts {
  long exp = 0;
  long eoi_total = 0;
  long high = 0;
  long medium = 0;
  long low = 0;
  long uncorrelated = 0;
  long total = 0;
};
LabelCounts count_labels(const std::vector<LabeledUtterance>& labels);
// Rows: EXP / EOI total / High / Medium / Low / Uncorrelated / Total.
std::string label_counts_table(const LabelCounts& counts);
std::string label_counts_csv(const LabelCounts& counts);

// HUMAN label for adjudicated utterances (latest adjudication wins),
// ENSEMBLE final otherwise. Output follows the vote order, then any
// adjudicated utterance that had no vote.
std::vector<LabeledUtterance> export_merged(const std::vector<VoteRecord>& votes,
                                            const std::vector<Adjudication>& adjudications,
                                            bool include_human = true);

std::string adjudication_to_json(const Adjudication& a);
Adjudication adjudication_from_json(const std::string& line);
std::vector<Adjudication> replay_log(const std::filesystem::path& path);

// Triage queue backed by an append-only JSON-lines adjudication log that is
// replayed on construction. Reads take a shared lock; submits are
// serialised and return only after the log line is flushed to disk.
class ReviewStore {
 public:
  ReviewStore(std::filesystem::path log_path, int context_size = 5);

  // Loads the flagging run. Items: every flagged id, every vote with a
  // backend failure, every triage entry without a vote.
  void load(const std::vector<Utterance>& utterances, const std::vector<VoteRecord>& votes,
            const EntropyReport& report, const std::vector<TriageEntry>& triage = {});
  bool loaded() const;

  // Ordered by descending entropy, then utterance id. Throws StateError
  // before load().
  std::vector<ReviewItem> queue(std::optional<Status> filter = std::nullopt) const;
  ReviewItem item(const std::string& utterance_id) const;  // NotFoundError
  ReviewItem submit(Adjudication adjudication);  // NotFoundError / ValidationError
  Progress progress() const;
  std::vector<LabeledUtterance> export_merged(bool include_human = true) const;
  std::vector<Adjudication> adjudications() const;
  const std::vector<VoteRecord>& votes() const { return votes_; }

  // Static annotator tokens; an empty set disables the check.
  void set_tokens(std::set<std::string> tokens);
  bool authorised(const std::string& token) const;

 private:
  ReviewItem make_item_locked(const std::string& id) const;

  std::filesystem::path log_path_;
  int context_size_;
  mutable std::shared_mutex mutex_;
  std::mutex write_mutex_;
  bool loaded_ = false;
  std::vector<Utterance> utterances_;
  std::map<std::string, std::size_t> utterance_index_;
  std::vector<VoteRecord> votes_;
  std::map<std::string, std::size_t> vote_index_;
  std::map<std::string, double> entropy_;
  std::map<std::string, std::vector<std::string>> reasons_;
  std::vector<Adjudication> log_;
  std::set<std::string> tokens_;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path static_dir;
};

// HTTP JSON API over a ReviewStore:
//   GET  /api/queue?status=Pending|Adjudicated
//   GET  /api/item/{id}
//   POST /api/adjudicate {utterance_id,label,annotator_id}
//   GET  /api/progress
//   GET  /api/export[?mode=merged|ensemble]
// and static review_ui assets at /.
class ReviewServer {
 public:
  ReviewServer(ReviewStore& store, ServerOptions options);
  ~ReviewServer();
  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  // Binds and returns the port actually used.
  int bind();
  void listen();  // blocks until stop()
  void start();   // listen on a background thread
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace classnet::review
