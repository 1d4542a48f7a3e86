#include "classnet/classification.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <condition_variable>
#include <future>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace classnet {

using nlohmann::json;

namespace {

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

std::string render_examples(const std::vector<FewShot>& shots) {
  std::ostringstream out;
  for (std::size_t i = 0; i < shots.size(); ++i) {
    out << "Example " << (i + 1) << ":\n"
        << shots[i].excerpt << "\nReasoning: " << shots[i].reasoning
        << "\nLabel: " << to_string(shots[i].label) << "\n";
    if (i + 1 < shots.size()) out << '\n';
  }
  return out.str();
}

std::string display_name(const std::string& speaker, const Roster* roster) {
  if (roster) {
    if (auto i = roster->index_of(speaker)) {
      const auto& name = (*roster)[*i].display_name;
      if (!name.empty()) return name;
    }
  }
  return speaker;
}

std::string normalise(std::string_view s) {
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c)) out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::optional<FineLabel> lenient_label(std::string_view value) {
  if (auto exact = try_parse_label(value)) return exact;
  std::string n = normalise(value);
  if (n.empty()) return std::nullopt;
  if (n.find("uncorrelated") != std::string::npos) return FineLabel::Uncorrelated;
  bool explain = n.find("explain") != std::string::npos || n == "exp";
  bool engage = n.find("engage") != std::string::npos || n.rfind("eoi", 0) == 0;
  if (explain && !engage) return FineLabel::ExplainOwnIdea;
  if (engage && !explain) {
    bool high = n.find("high") != std::string::npos;
    bool med = n.find("medium") != std::string::npos;
    bool low = n.find("low") != std::string::npos;
    if (high + med + low != 1) return std::nullopt;
    if (high) return FineLabel::EngageHigh;
    if (med) return FineLabel::EngageMedium;
    return FineLabel::EngageLow;
  }
  return std::nullopt;
}

std::string ltrim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r*");
  return b == std::string_view::npos ? std::string{} : std::string(s.substr(b));
}

std::string rtrim(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  return s;
}

// Completion with transport retries and exponential backoff.
Completion complete_with_retry(Backend& backend, const PromptBundle& bundle,
                               const std::string& hint, const RetryPolicy& policy) {
  auto delay = policy.initial_backoff;
  for (int attempt = 0;; ++attempt) {
    try {
      return backend.complete(bundle, hint);
    } catch (const TransportError& e) {
      if (attempt >= policy.max_transport_retries) {
        throw BackendError("backend '" + backend.descriptor().model_id + "' failed after " +
                           std::to_string(attempt + 1) + " attempts: " + e.what());
      }
      if (policy.sleep) policy.sleep(delay);
      else std::this_thread::sleep_for(delay);
      auto next = std::chrono::milliseconds(
          static_cast<long long>(static_cast<double>(delay.count()) * policy.backoff_factor));
      delay = std::min(next, policy.max_backoff);
    }
  }
}

bool valid_distribution(const LabelDistribution& p) {
  double total = 0.0;
  for (const auto& [label, v] : p) {
    if (!(v >= 0.0)) return false;
    total += v;
  }
  return std::abs(total - 1.0) <= 1e-9;
}

class Semaphore {
 public:
  explicit Semaphore(int n) : count_(std::max(1, n)) {}
  void acquire() {
    std::unique_lock lock(m_);
    cv_.wait(lock, [&] { return count_ > 0; });
    --count_;
  }
  void release() {
    {
      std::lock_guard lock(m_);
      ++count_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex m_;
  std::condition_variable cv_;
  int count_;
};

// Caps in-flight requests per backend across concurrently classified
// utterances.
class GatedBackend final : public Backend {
 public:
  GatedBackend(std::shared_ptr<Backend> inner, int limit)
      : inner_(std::move(inner)), gate_(limit) {}
  const BackendDescriptor& descriptor() const override { return inner_->descriptor(); }
  Completion complete(const PromptBundle& bundle, const std::string& hint) override {
    gate_.acquire();
    struct Release {
      Semaphore& s;
      ~Release() { s.release(); }
    } release{gate_};
    return inner_->complete(bundle, hint);
  }

 private:
  std::shared_ptr<Backend> inner_;
  Semaphore gate_;
};

struct EnsembleResult {
  VoteRecord record;
  std::vector<ModelResponse> responses;
};

EnsembleResult run_ensemble(const Utterance& utterance, std::span<const Utterance> history,
                            const std::vector<std::shared_ptr<Backend>>& backends,
                            const PromptTemplate& tmpl, int context_size,
                            const RetryPolicy& policy, const Roster* roster) {
  if (backends.empty()) throw EnsembleError("no backends configured");
  PromptBundle bundle = build_prompt(utterance, history, tmpl, context_size, roster);

  std::vector<std::future<ModelResponse>> futures;
  futures.reserve(backends.size());
  for (const auto& b : backends) {
    futures.push_back(std::async(backends.size() > 1 ? std::launch::async : std::launch::deferred,
                                 [&bundle, &policy, b] { return classify_one(*b, bundle, policy); }));
  }

  EnsembleResult result;
  result.record.utterance_id = utterance.utterance_id;
  std::vector<BackendDescriptor> descriptors;
  std::map<std::string, ModelResponse> by_model;
  for (std::size_t i = 0; i < backends.size(); ++i) {
    const auto& desc = backends[i]->descriptor();
    descriptors.push_back(desc);
    try {
      ModelResponse r = futures[i].get();
      result.record.responses[desc.model_id] = r.label;
      by_model.emplace(desc.model_id, std::move(r));
    } catch (const Error& e) {
      result.record.failures[desc.model_id] = e.what();
    }
  }
  if (result.record.responses.empty()) {
    throw EnsembleError("utterance '" + utterance.utterance_id + "': no backend produced a label");
  }
  auto outcome = aggregate_votes(result.record.responses, descriptors);
  result.record.final = outcome.final;
  result.record.tie_break_used = outcome.tie_break_used;
  for (auto& [id, r] : by_model) result.responses.push_back(std::move(r));
  return result;
}

}  // namespace

PromptTemplate PromptTemplate::load(const std::filesystem::path& dir) {
  PromptTemplate t;
  t.system_text = read_file(dir / "system.txt");
  t.user_template = read_file(dir / "user.txt");
  auto shots = dir / "few_shots.json";
  if (std::filesystem::exists(shots)) {
    t.declares_few_shots = true;
    try {
      json j = json::parse(read_file(shots));
      for (const auto& e : j) {
        t.few_shots.push_back({e.at("excerpt").get<std::string>(),
                               e.at("reasoning").get<std::string>(),
                               parse_label(e.at("label").get<std::string>())});
      }
    } catch (const json::exception& e) {
      throw ParseError(shots.string() + ": " + e.what());
    }
    if (t.few_shots.empty()) throw ParseError(shots.string() + ": declares no examples");
  }
  return t;
}

PromptBundle build_prompt(const Utterance& target, std::span<const Utterance> history,
                          const PromptTemplate& tmpl, int context_size, const Roster* roster) {
  if (context_size < 0) throw ArgumentError("context size must be non-negative");
  if (tmpl.declares_few_shots && tmpl.few_shots.empty()) {
    throw ArgumentError("template declares few-shot examples but none are loaded");
  }
  PromptBundle b;
  b.few_shots = tmpl.few_shots;
  b.target_id = target.utterance_id;
  b.target_speaker = display_name(target.speaker_id, roster);
  b.target_text = target.text;

  std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(context_size), history.size());
  std::ostringstream ctx;
  for (std::size_t i = history.size() - k; i < history.size(); ++i) {
    ContextLine line{display_name(history[i].speaker_id, roster), history[i].text};
    ctx << line.speaker << ": " << line.text << '\n';
    b.context.push_back(std::move(line));
  }

  std::string examples = render_examples(tmpl.few_shots);
  b.system_text = replace_all(tmpl.system_text, "{{examples}}", examples);
  std::string user = tmpl.user_template;
  user = replace_all(user, "{{examples}}", examples);
  user = replace_all(user, "{{context}}", ctx.str());
  user = replace_all(user, "{{speaker}}", b.target_speaker);
  // Substituted last so utterance text containing "{{" is left verbatim.
  user = replace_all(user, "{{utterance}}", target.text);
  b.user_text = std::move(user);
  return b;
}

std::string_view to_string(Tier tier) {
  switch (tier) {
    case Tier::Commercial: return "Commercial";
    case Tier::OpenSource: return "OpenSource";
    case Tier::Mock: return "Mock";
  }
  return "Mock";
}

Tier parse_tier(std::string_view text) {
  if (text == "Commercial" || text == "commercial") return Tier::Commercial;
  if (text == "OpenSource" || text == "open_source" || text == "opensource") return Tier::OpenSource;
  if (text == "Mock" || text == "mock") return Tier::Mock;
  throw ParseError("unknown backend tier '" + std::string(text) + "'");
}

std::optional<ParsedOutput> parse_model_output(const std::string& text) {
  std::vector<std::string> lines;
  {
    std::istringstream in(text);
    std::string l;
    while (std::getline(in, l)) lines.push_back(l);
  }
  // The final-answer step is the last "Label:" / "Answer:" line.
  for (std::size_t i = lines.size(); i-- > 0;) {
    std::string l = ltrim(lines[i]);
    std::string lower;
    for (unsigned char c : l) lower.push_back(static_cast<char>(std::tolower(c)));
    static const char* keys[] = {"final label:", "final answer:", "label:", "answer:",
                                 "classification:"};
    for (const char* key : keys) {
      std::string_view k(key);
      if (lower.rfind(k, 0) != 0) continue;
      std::string value = rtrim(ltrim(std::string_view(l).substr(k.size())));
      auto label = lenient_label(value);
      if (!label) return std::nullopt;
      std::ostringstream reasoning;
      for (std::size_t j = 0; j < i; ++j) {
        std::string r = lines[j];
        if (j == 0) {
          std::string t = ltrim(r);
          std::string tl;
          for (unsigned char c : t) tl.push_back(static_cast<char>(std::tolower(c)));
          if (tl.rfind("reasoning:", 0) == 0) r = ltrim(std::string_view(t).substr(10));
        }
        if (j) reasoning << '\n';
        reasoning << r;
      }
      return ParsedOutput{*label, rtrim(reasoning.str())};
    }
  }
  return std::nullopt;
}

ModelResponse classify_one(Backend& backend, const PromptBundle& bundle, const RetryPolicy& policy) {
  const auto& id = backend.descriptor().model_id;
  Completion c = complete_with_retry(backend, bundle, "", policy);
  auto parsed = parse_model_output(c.text);
  if (!parsed) {
    c = complete_with_retry(backend, bundle, kReformatHint, policy);
    parsed = parse_model_output(c.text);
  }
  if (!parsed) {
    throw ClassificationError("backend '" + id + "' returned no parseable label for '" +
                              bundle.target_id + "'");
  }
  ModelResponse r;
  r.model_id = id;
  r.label = parsed->label;
  r.reasoning = parsed->reasoning;
  if (c.label_probabilities && valid_distribution(*c.label_probabilities)) {
    r.label_probabilities = c.label_probabilities;
  }
  return r;
}

std::string_view to_string(TieBreak t) {
  switch (t) {
    case TieBreak::None: return "None";
    case TieBreak::CommercialSubset: return "CommercialSubset";
    case TieBreak::PriorityRank: return "PriorityRank";
  }
  return "None";
}

TieBreak parse_tie_break(std::string_view text) {
  if (text == "None") return TieBreak::None;
  if (text == "CommercialSubset") return TieBreak::CommercialSubset;
  if (text == "PriorityRank") return TieBreak::PriorityRank;
  throw ParseError("unknown tie-break '" + std::string(text) + "'");
}

long VoteRecord::count(FineLabel l) const {
  return std::count_if(responses.begin(), responses.end(),
                       [l](const auto& kv) { return kv.second == l; });
}

std::map<FineLabel, Fraction> VoteRecord::probabilities() const {
  std::map<FineLabel, Fraction> out;
  for (FineLabel l : kAllLabels) {
    long c = count(l);
    if (c > 0) out[l] = Fraction{c, total()};
  }
  return out;
}

std::vector<double> VoteRecord::probability_vector() const {
  std::vector<double> p(kNumLabels, 0.0);
  if (responses.empty()) return p;
  for (FineLabel l : kAllLabels) {
    p[static_cast<std::size_t>(l)] = static_cast<double>(count(l)) / static_cast<double>(total());
  }
  return p;
}

VoteOutcome aggregate_votes(const std::map<std::string, FineLabel>& responses,
                            const std::vector<BackendDescriptor>& backends) {
  if (responses.empty()) throw EnsembleError("no votes to aggregate");
  std::map<std::string, const BackendDescriptor*> lookup;
  for (const auto& b : backends) lookup[b.model_id] = &b;

  std::array<long, kNumLabels> counts{};
  for (const auto& [id, label] : responses) ++counts[static_cast<std::size_t>(label)];
  long best = *std::max_element(counts.begin(), counts.end());
  std::vector<FineLabel> tied;
  for (FineLabel l : kAllLabels) {
    if (counts[static_cast<std::size_t>(l)] == best) tied.push_back(l);
  }
  if (tied.size() == 1) return {tied.front(), TieBreak::None};

  // Commercial plurality restricted to the tied labels.
  std::array<long, kNumLabels> commercial{};
  for (const auto& [id, label] : responses) {
    auto it = lookup.find(id);
    if (it != lookup.end() && it->second->tier == Tier::Commercial) {
      ++commercial[static_cast<std::size_t>(label)];
    }
  }
  long cbest = 0;
  for (FineLabel l : tied) cbest = std::max(cbest, commercial[static_cast<std::size_t>(l)]);
  if (cbest > 0) {
    std::vector<FineLabel> ctied;
    for (FineLabel l : tied) {
      if (commercial[static_cast<std::size_t>(l)] == cbest) ctied.push_back(l);
    }
    if (ctied.size() == 1) return {ctied.front(), TieBreak::CommercialSubset};
    tied = std::move(ctied);
  }

  // Lowest priority_rank among backends that voted for a remaining label.
  const std::string* chosen = nullptr;
  int chosen_rank = 0;
  for (const auto& [id, label] : responses) {
    if (std::find(tied.begin(), tied.end(), label) == tied.end()) continue;
    auto it = lookup.find(id);
    int rank = it != lookup.end() ? it->second->priority_rank : std::numeric_limits<int>::max();
    if (!chosen || rank < chosen_rank || (rank == chosen_rank && id < *chosen)) {
      chosen = &id;
      chosen_rank = rank;
    }
  }
  return {responses.at(*chosen), TieBreak::PriorityRank};
}

std::map<FineLabel, Fraction> two_stage_fine_label(const std::vector<FineLabel>& responses) {
  if (responses.empty()) throw ArgumentError("no responses to tally");
  std::map<FineLabel, Fraction> out;
  const long n = static_cast<long>(responses.size());
  for (FineLabel l : kAllLabels) {
    long c = std::count(responses.begin(), responses.end(), l);
    if (c > 0) out[l] = Fraction{c, n};
  }
  return out;
}

VoteRecord ensemble_classify(const Utterance& utterance, std::span<const Utterance> history,
                             const std::vector<std::shared_ptr<Backend>>& backends,
                             const PromptTemplate& tmpl, int context_size,
                             const RetryPolicy& policy, const Roster* roster) {
  return run_ensemble(utterance, history, backends, tmpl, context_size, policy, roster).record;
}

ClassificationRun classify_transcript(const std::vector<Utterance>& utterances,
                                      const std::vector<std::shared_ptr<Backend>>& backends,
                                      const PromptTemplate& tmpl, const ClassifyOptions& options,
                                      const Roster* roster) {
  if (backends.empty()) throw EnsembleError("no backends configured");
  std::vector<std::shared_ptr<Backend>> gated;
  for (const auto& b : backends) {
    int limit = 4;
    auto it = b->descriptor().endpoint.find("max_parallel");
    if (it != b->descriptor().endpoint.end()) limit = std::stoi(it->second);
    gated.push_back(std::make_shared<GatedBackend>(b, limit));
  }

  // Start of each utterance's block, for history slicing.
  std::vector<std::size_t> block_start(utterances.size(), 0);
  for (std::size_t i = 1; i < utterances.size(); ++i) {
    const auto& a = utterances[i - 1];
    const auto& b = utterances[i];
    block_start[i] = (a.lesson_id == b.lesson_id && a.block_id == b.block_id) ? block_start[i - 1] : i;
  }

  struct Slot {
    std::optional<EnsembleResult> result;
    std::optional<std::string> error;
  };
  std::vector<Slot> slots(utterances.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < utterances.size(); i = next++) {
      std::span<const Utterance> history(utterances.data() + block_start[i], i - block_start[i]);
      try {
        slots[i].result = run_ensemble(utterances[i], history, gated, tmpl, options.context_size,
                                       options.retry, roster);
      } catch (const Error& e) {
        slots[i].error = e.what();
      }
    }
  };
  int workers = std::max(1, options.max_parallel_utterances);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ClassificationRun run;
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    if (slots[i].result) {
      run.responses[utterances[i].utterance_id] = std::move(slots[i].result->responses);
      run.votes.push_back(std::move(slots[i].result->record));
    } else {
      run.triage.push_back({utterances[i].utterance_id, slots[i].error.value_or("unknown error")});
    }
  }
  return run;
}

std::vector<LabeledUtterance> ensemble_labels(const std::vector<VoteRecord>& votes) {
  std::vector<LabeledUtterance> out;
  out.reserve(votes.size());
  for (const auto& v : votes) {
    LabeledUtterance l;
    l.utterance_id = v.utterance_id;
    l.label = v.final;
    l.source = std::string(kSourceEnsemble);
    out.push_back(std::move(l));
  }
  return out;
}

std::map<std::string, std::vector<LabeledUtterance>> per_model_labels(const ClassificationRun& run) {
  std::map<std::string, std::vector<LabeledUtterance>> out;
  for (const auto& v : run.votes) {
    auto it = run.responses.find(v.utterance_id);
    if (it == run.responses.end()) continue;
    for (const auto& r : it->second) {
      out[r.model_id].push_back({v.utterance_id, r.label, r.model_id, r.reasoning, {}, {}});
    }
  }
  return out;
}

std::string vote_to_json_line(const VoteRecord& v) {
  json j;
  j["utterance_id"] = v.utterance_id;
  json responses = json::object();
  for (const auto& [id, l] : v.responses) responses[id] = std::string(to_string(l));
  j["responses"] = responses;
  json failures = json::object();
  for (const auto& [id, e] : v.failures) failures[id] = e;
  j["failures"] = failures;
  j["final"] = std::string(to_string(v.final));
  j["tie_break_used"] = std::string(to_string(v.tie_break_used));
  json probs = json::object();
  for (const auto& [l, f] : v.probabilities()) {
    probs[std::string(to_string(l))] = std::to_string(f.num) + "/" + std::to_string(f.den);
  }
  j["probabilities"] = probs;
  return j.dump();
}

VoteRecord vote_from_json_line(const std::string& line) {
  try {
    json j = json::parse(line);
    VoteRecord v;
    v.utterance_id = j.at("utterance_id").get<std::string>();
    for (const auto& [id, l] : j.at("responses").items()) v.responses[id] = parse_label(l.get<std::string>());
    if (j.contains("failures")) {
      for (const auto& [id, e] : j["failures"].items()) v.failures[id] = e.get<std::string>();
    }
    v.final = parse_label(j.at("final").get<std::string>());
    v.tie_break_used = parse_tie_break(j.at("tie_break_used").get<std::string>());
    return v;
  } catch (const json::exception& e) {
    throw ParseError(std::string("vote record: ") + e.what());
  }
}

void write_votes(const std::filesystem::path& path, const std::vector<VoteRecord>& votes) {
  std::ostringstream out;
  for (const auto& v : votes) out << vote_to_json_line(v) << '\n';
  write_file(path, out.str());
}

std::vector<VoteRecord> load_votes(const std::filesystem::path& path) {
  std::vector<VoteRecord> out;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(vote_from_json_line(line));
    } catch (const Error& e) {
      throw ParseError(path.string() + ": line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace classnet
