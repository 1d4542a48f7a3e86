#include "classnet/review_service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "classnet/csv.hpp"
#include "classnet/error.hpp"

namespace classnet::review {

namespace {

std::string now_iso8601() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

// Appends one line and fsyncs before returning.
void durable_append(const std::filesystem::path& path, const std::string& line) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw Error("cannot open adjudication log " + path.string() + ": " + std::strerror(errno));
  std::string data = line + "\n";
  const char* p = data.data();
  std::size_t left = data.size();
  while (left > 0) {
    ssize_t n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      int err = errno;
      ::close(fd);
      throw Error("write to adjudication log failed: " + std::string(std::strerror(err)));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    int err = errno;
    ::close(fd);
    throw Error("fsync of adjudication log failed: " + std::string(std::strerror(err)));
  }
  ::close(fd);
}

}  // namespace

std::string_view to_string(Status s) { return s == Status::Pending ? "Pending" : "Adjudicated"; }

Status parse_status(std::string_view text) {
  if (text == "Pending" || text == "pending") return Status::Pending;
  if (text == "Adjudicated" || text == "adjudicated") return Status::Adjudicated;
  throw ValidationError("unknown status '" + std::string(text) + "'");
}

LabelCounts count_labels(const std::vector<LabeledUtterance>& labels) {
  LabelCounts c;
  for (const auto& l : labels) {
    switch (l.label) {
      case FineLabel::ExplainOwnIdea: ++c.exp; break;
      case FineLabel::EngageHigh: ++c.high; break;
      case FineLabel::EngageMedium: ++c.medium; break;
      case FineLabel::EngageLow: ++c.low; break;
      case FineLabel::Uncorrelated: ++c.uncorrelated; break;
    }
  }
  c.eoi_total = c.high + c.medium + c.low;
  c.total = static_cast<long>(labels.size());
  return c;
}

namespace {

std::vector<std::pair<std::string, long>> count_rows(const LabelCounts& c) {
  return {{"EXP", c.exp},       {"EOI total", c.eoi_total}, {"High", c.high},   {"Medium", c.medium},
          {"Low", c.low},       {"Uncorrelated", c.uncorrelated}, {"Total", c.total}};
}

}  // namespace

std::string label_counts_table(const LabelCounts& counts) {
  std::ostringstream out;
  out << std::left << std::setw(16) << "Type" << std::right << std::setw(8) << "Count" << std::setw(10)
      << "Percent" << '\n';
  for (const auto& [name, n] : count_rows(counts)) {
    double pct = counts.total > 0 ? 100.0 * static_cast<double>(n) / static_cast<double>(counts.total) : 0.0;
    std::string label = (name == "High" || name == "Medium" || name == "Low") ? "  " + name : name;
    out << std::left << std::setw(16) << label << std::right << std::setw(8) << n << std::setw(9)
        << std::fixed << std::setprecision(1) << pct << "%\n";
  }
  return out.str();
}

std::string label_counts_csv(const LabelCounts& counts) {
  std::ostringstream out;
  csv::write_row(out, {"type", "count"});
  for (const auto& [name, n] : count_rows(counts)) csv::write_row(out, {name, std::to_string(n)});
  return out.str();
}

std::vector<LabeledUtterance> export_merged(const std::vector<VoteRecord>& votes,
                                            const std::vector<Adjudication>& adjudications,
                                            bool include_human) {
  std::map<std::string, const Adjudication*> latest;
  if (include_human) {
    for (const auto& a : adjudications) latest[a.utterance_id] = &a;
  }
  std::vector<LabeledUtterance> out;
  std::set<std::string> seen;
  auto human = [](const Adjudication& a) {
    LabeledUtterance l;
    l.utterance_id = a.utterance_id;
    l.label = a.label;
    l.source = std::string(kSourceHuman);
    l.annotator_id = a.annotator_id;
    l.timestamp = a.timestamp;
    return l;
  };
  for (const auto& v : votes) {
    seen.insert(v.utterance_id);
    auto it = latest.find(v.utterance_id);
    if (it != latest.end()) {
      out.push_back(human(*it->second));
    } else {
      LabeledUtterance l;
      l.utterance_id = v.utterance_id;
      l.label = v.final;
      l.source = std::string(kSourceEnsemble);
      out.push_back(std::move(l));
    }
  }
  for (const auto& [id, a] : latest) {
    if (!seen.count(id)) out.push_back(human(*a));
  }
  return out;
}

std::string adjudication_to_json(const Adjudication& a) {
  nlohmann::json j = {{"utterance_id", a.utterance_id},
                      {"label", std::string(to_string(a.label))},
                      {"annotator_id", a.annotator_id},
                      {"timestamp", a.timestamp}};
  return j.dump();
}

Adjudication adjudication_from_json(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("adjudication is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("adjudication must be a JSON object");
  auto field = [&](const char* name, bool required) -> std::string {
    auto it = j.find(name);
    if (it == j.end() || it->is_null()) {
      if (required) throw ValidationError(std::string("adjudication is missing '") + name + "'");
      return {};
    }
    if (!it->is_string()) throw ValidationError(std::string("'") + name + "' must be a string");
    return it->get<std::string>();
  };
  Adjudication a;
  a.utterance_id = field("utterance_id", true);
  auto label = try_parse_label(field("label", true));
  if (!label) throw ValidationError("unknown label '" + j["label"].get<std::string>() + "'");
  a.label = *label;
  a.annotator_id = field("annotator_id", true);
  a.timestamp = field("timestamp", false);
  if (a.utterance_id.empty()) throw ValidationError("utterance_id is empty");
  if (a.annotator_id.empty()) throw ValidationError("annotator_id is empty");
  return a;
}

std::vector<Adjudication> replay_log(const std::filesystem::path& path) {
  std::vector<Adjudication> out;
  if (!std::filesystem::exists(path)) return out;
  std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  const bool trailing_newline = !text.empty() && text.back() == '\n';
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(adjudication_from_json(line));
    } catch (const Error& e) {
      // A torn final write (no newline) is the only tolerated corruption.
      if (!trailing_newline && in.peek() == std::char_traits<char>::eof()) break;
      throw ParseError(path.string() + ": line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

ReviewStore::ReviewStore(std::filesystem::path log_path, int context_size)
    : log_path_(std::move(log_path)), context_size_(context_size) {
  if (context_size < 0) throw ArgumentError("context size must be non-negative");
  log_ = replay_log(log_path_);
}

void ReviewStore::load(const std::vector<Utterance>& utterances, const std::vector<VoteRecord>& votes,
                       const EntropyReport& report, const std::vector<TriageEntry>& triage) {
  std::unique_lock lock(mutex_);
  utterances_ = utterances;
  utterance_index_.clear();
  for (std::size_t i = 0; i < utterances_.size(); ++i) utterance_index_[utterances_[i].utterance_id] = i;
  votes_ = votes;
  vote_index_.clear();
  for (std::size_t i = 0; i < votes_.size(); ++i) vote_index_[votes_[i].utterance_id] = i;
  entropy_.clear();
  for (std::size_t i = 0; i < report.utterance_ids.size() && i < report.entropies.size(); ++i) {
    entropy_[report.utterance_ids[i]] = report.entropies[i];
  }
  reasons_.clear();
  for (const auto& id : report.flagged) reasons_[id].push_back("entropy");
  for (const auto& v : votes_) {
    if (!v.failures.empty()) reasons_[v.utterance_id].push_back("backend-failure");
  }
  for (const auto& t : triage) {
    if (!vote_index_.count(t.utterance_id)) reasons_[t.utterance_id].push_back("no-vote");
  }
  loaded_ = true;
}

bool ReviewStore::loaded() const {
  std::shared_lock lock(mutex_);
  return loaded_;
}

ReviewItem ReviewStore::make_item_locked(const std::string& id) const {
  ReviewItem item;
  item.utterance_id = id;
  if (auto it = utterance_index_.find(id); it != utterance_index_.end()) {
    const Utterance& u = utterances_[it->second];
    item.speaker_id = u.speaker_id;
    item.text = u.text;
    std::vector<ContextLine> ctx;
    for (std::size_t k = it->second; k-- > 0;) {
      const Utterance& p = utterances_[k];
      if (p.lesson_id != u.lesson_id || p.block_id != u.block_id) break;
      if (static_cast<int>(ctx.size()) >= context_size_) break;
      ctx.push_back({p.speaker_id, p.text});
    }
    item.context.assign(ctx.rbegin(), ctx.rend());
  }
  if (auto it = vote_index_.find(id); it != vote_index_.end()) {
    item.votes = votes_[it->second].responses;
    item.current_label = votes_[it->second].final;
  }
  if (auto it = entropy_.find(id); it != entropy_.end()) item.entropy = it->second;
  if (auto it = reasons_.find(id); it != reasons_.end()) item.reasons = it->second;
  for (const auto& a : log_) {
    if (a.utterance_id == id) item.history.push_back(a);
  }
  if (!item.history.empty()) {
    item.status = Status::Adjudicated;
    item.current_label = item.history.back().label;
  }
  return item;
}

std::vector<ReviewItem> ReviewStore::queue(std::optional<Status> filter) const {
  std::shared_lock lock(mutex_);
  if (!loaded_) throw StateError("no flagging run has been loaded");
  std::vector<ReviewItem> items;
  for (const auto& [id, _] : reasons_) {
    ReviewItem item = make_item_locked(id);
    if (!filter || item.status == *filter) items.push_back(std::move(item));
  }
  std::stable_sort(items.begin(), items.end(), [](const ReviewItem& a, const ReviewItem& b) {
    if (a.entropy != b.entropy) return a.entropy > b.entropy;
    return a.utterance_id < b.utterance_id;
  });
  return items;
}

ReviewItem ReviewStore::item(const std::string& utterance_id) const {
  std::shared_lock lock(mutex_);
  if (!loaded_) throw StateError("no flagging run has been loaded");
  if (!reasons_.count(utterance_id)) throw NotFoundError("utterance '" + utterance_id + "' is not in the review queue");
  return make_item_locked(utterance_id);
}

ReviewItem ReviewStore::submit(Adjudication a) {
  std::lock_guard writer(write_mutex_);
  {
    std::shared_lock lock(mutex_);
    if (!loaded_) throw StateError("no flagging run has been loaded");
    if (!reasons_.count(a.utterance_id)) {
      throw NotFoundError("utterance '" + a.utterance_id + "' is not in the review queue");
    }
  }
  if (a.annotator_id.empty()) throw ValidationError("annotator_id is required");
  if (a.timestamp.empty()) a.timestamp = now_iso8601();
  durable_append(log_path_, adjudication_to_json(a));
  std::unique_lock lock(mutex_);
  log_.push_back(a);
  return make_item_locked(a.utterance_id);
}

Progress ReviewStore::progress() const {
  std::shared_lock lock(mutex_);
  if (!loaded_) throw StateError("no flagging run has been loaded");
  Progress p;
  p.total = reasons_.size();
  std::set<std::string> done;
  for (const auto& a : log_) {
    if (reasons_.count(a.utterance_id)) done.insert(a.utterance_id);
  }
  p.adjudicated = done.size();
  return p;
}

std::vector<LabeledUtterance> ReviewStore::export_merged(bool include_human) const {
  std::shared_lock lock(mutex_);
  return review::export_merged(votes_, log_, include_human);
}

std::vector<Adjudication> ReviewStore::adjudications() const {
  std::shared_lock lock(mutex_);
  return log_;
}

void ReviewStore::set_tokens(std::set<std::string> tokens) {
  std::unique_lock lock(mutex_);
  tokens_ = std::move(tokens);
}

bool ReviewStore::authorised(const std::string& token) const {
  std::shared_lock lock(mutex_);
  return tokens_.empty() || tokens_.count(token) > 0;
}

}  // namespace classnet::review
