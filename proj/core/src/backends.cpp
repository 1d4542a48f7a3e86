#include "classnet/backends.hpp"

#include <cstdlib>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace classnet {

using nlohmann::json;

std::uint64_t fnv1a(std::string_view data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void RateLimiter::acquire() {
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_);
    next_ = slot + min_interval_;
  }
  std::this_thread::sleep_until(slot);
}

MockRuleTable MockRuleTable::parse(const std::string& json_text) {
  MockRuleTable t;
  try {
    json j = json::parse(json_text);
    if (j.contains("fallback")) t.fallback = parse_label(j["fallback"].get<std::string>());
    for (const auto& r : j.at("rules")) {
      MockRule rule;
      rule.pattern = r.at("pattern").get<std::string>();
      rule.regex = std::regex(rule.pattern, std::regex::ECMAScript | std::regex::icase);
      rule.label = parse_label(r.at("label").get<std::string>());
      rule.context = r.value("context", std::string{});
      if (!rule.context.empty() && rule.context != "after_other_explanation") {
        throw ParseError("unknown rule context '" + rule.context + "'");
      }
      t.rules.push_back(std::move(rule));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("mock rule table: ") + e.what());
  } catch (const std::regex_error& e) {
    throw ParseError(std::string("mock rule table: bad pattern: ") + e.what());
  }
  return t;
}

MockRuleTable MockRuleTable::load(const std::filesystem::path& path) {
  try {
    return parse(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

FineLabel MockRuleTable::classify(const std::string& text, const ContextLine* previous,
                                  const std::string& speaker, std::size_t* matched_rule) const {
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const auto& rule = rules[i];
    if (!std::regex_search(text, rule.regex)) continue;
    if (rule.context == "after_other_explanation") {
      if (!previous || previous->speaker == speaker) continue;
      if (classify(previous->text, nullptr, previous->speaker) != FineLabel::ExplainOwnIdea) continue;
    }
    if (matched_rule) *matched_rule = i;
    return rule.label;
  }
  if (matched_rule) *matched_rule = rules.size();
  return fallback;
}

MockBackend::MockBackend(BackendDescriptor descriptor, std::shared_ptr<const MockRuleTable> rules,
                         std::uint64_t seed, double noise)
    : descriptor_(std::move(descriptor)), rules_(std::move(rules)), seed_(seed), noise_(noise) {
  if (!rules_) throw ArgumentError("mock backend needs a rule table");
  if (noise_ < 0.0 || noise_ > 1.0) throw ArgumentError("mock noise must lie in [0, 1]");
}

Completion MockBackend::complete(const PromptBundle& bundle, const std::string&) {
  const ContextLine* previous = bundle.context.empty() ? nullptr : &bundle.context.back();
  std::size_t rule = 0;
  FineLabel label = rules_->classify(bundle.target_text, previous, bundle.target_speaker, &rule);

  std::string key = bundle.target_id + '\x1f' + bundle.user_text;
  std::uint64_t h = fnv1a(key, 1469598103934665603ULL ^ (seed_ * 0x9E3779B97F4A7C15ULL));
  double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  bool flipped = u < noise_;
  if (flipped) {
    std::uint64_t h2 = fnv1a(key, h ^ 0xC2B2AE3D27D4EB4FULL);
    std::size_t shift = 1 + static_cast<std::size_t>(h2 % (kNumLabels - 1));
    label = kAllLabels[(static_cast<std::size_t>(label) + shift) % kNumLabels];
  }

  std::ostringstream text;
  text << "Reasoning: " << bundle.target_speaker << " said \"" << bundle.target_text << "\". ";
  if (rule < rules_->rules.size()) text << "Matched rule " << (rule + 1) << ".";
  else text << "No rule matched; using the fallback.";
  if (flipped) text << " Reconsidered.";
  text << "\nLabel: " << to_string(label) << '\n';

  Completion c;
  c.text = text.str();
  LabelDistribution p;
  for (FineLabel l : kAllLabels) p[l] = l == label ? 1.0 - noise_ : noise_ / (kNumLabels - 1);
  c.label_probabilities = p;
  return c;
}

namespace {

std::string endpoint_value(const BackendDescriptor& d, const std::string& key,
                           const std::string& fallback = {}) {
  auto it = d.endpoint.find(key);
  return it == d.endpoint.end() ? fallback : it->second;
}

struct ParsedUrl {
  std::string origin;  // scheme://host:port
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ArgumentError("endpoint url '" + url + "' lacks a scheme");
  auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

std::optional<LabelDistribution> read_probabilities(const json& j) {
  if (!j.contains("label_probabilities") || !j["label_probabilities"].is_object()) return std::nullopt;
  LabelDistribution p;
  for (const auto& [k, v] : j["label_probabilities"].items()) {
    auto l = try_parse_label(k);
    if (!l || !v.is_number()) return std::nullopt;
    p[*l] = v.get<double>();
  }
  return p;
}

}  // namespace

HttpBackend::HttpBackend(BackendDescriptor descriptor, std::shared_ptr<RateLimiter> limiter)
    : descriptor_(std::move(descriptor)), limiter_(std::move(limiter)) {
  if (endpoint_value(descriptor_, "url").empty()) {
    throw ArgumentError("backend '" + descriptor_.model_id + "' has no endpoint url");
  }
}

Completion HttpBackend::complete(const PromptBundle& bundle, const std::string& reformat_hint) {
  auto url = split_url(endpoint_value(descriptor_, "url"));
  std::string adapter = endpoint_value(descriptor_, "adapter", "chat");
  std::string model = endpoint_value(descriptor_, "model", descriptor_.model_id);
  double timeout = std::stod(endpoint_value(descriptor_, "timeout_s", "60"));

  std::string user = bundle.user_text;
  if (!reformat_hint.empty()) user += "\n\n" + reformat_hint;

  json body;
  if (adapter == "chat") {
    body = {{"model", model},
            {"temperature", 0},
            {"messages", json::array({{{"role", "system"}, {"content", bundle.system_text}},
                                      {{"role", "user"}, {"content", user}}})}};
  } else if (adapter == "simple") {
    body = {{"model", model}, {"temperature", 0}, {"system", bundle.system_text}, {"user", user}};
  } else {
    throw ArgumentError("backend '" + descriptor_.model_id + "': unknown adapter '" + adapter + "'");
  }

  httplib::Client client(url.origin);
  auto secs = static_cast<time_t>(timeout);
  auto usecs = static_cast<time_t>((timeout - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  auto auth_env = endpoint_value(descriptor_, "auth_env");
  if (!auth_env.empty()) {
    if (const char* token = std::getenv(auth_env.c_str())) {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }

  if (limiter_) limiter_->acquire();
  auto res = client.Post(url.path, headers, body.dump(), "application/json");
  if (!res) {
    throw TransportError("backend '" + descriptor_.model_id + "': " + httplib::to_string(res.error()));
  }
  if (res->status == 429 || res->status >= 500) {
    throw TransportError("backend '" + descriptor_.model_id + "': HTTP " + std::to_string(res->status));
  }
  if (res->status >= 400) {
    throw BackendError("backend '" + descriptor_.model_id + "': HTTP " + std::to_string(res->status));
  }

  Completion c;
  try {
    json j = json::parse(res->body);
    if (adapter == "chat") {
      c.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
    } else {
      c.text = j.at("text").get<std::string>();
    }
    c.label_probabilities = read_probabilities(j);
  } catch (const json::exception& e) {
    throw BackendError("backend '" + descriptor_.model_id + "': malformed response: " + e.what());
  }
  return c;
}

std::vector<BackendDescriptor> parse_backend_config(const std::string& json_text) {
  std::vector<BackendDescriptor> out;
  try {
    json j = json::parse(json_text);
    const json& list = j.is_object() && j.contains("backends") ? j["backends"] : j;
    for (const auto& e : list) {
      BackendDescriptor d;
      d.model_id = e.at("model_id").get<std::string>();
      d.tier = parse_tier(e.at("tier").get<std::string>());
      d.priority_rank = e.at("priority_rank").get<int>();
      for (const auto& [k, v] : e.items()) {
        if (k == "model_id" || k == "tier" || k == "priority_rank") continue;
        std::string key = k == "endpoint_url" ? "url" : k;
        d.endpoint[key] = v.is_string() ? v.get<std::string>() : v.dump();
      }
      out.push_back(std::move(d));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("backend config: ") + e.what());
  }
  std::set<std::string> ids;
  std::set<int> ranks;
  for (const auto& d : out) {
    if (d.model_id.empty()) throw ValidationError("backend config: empty model_id");
    if (!ids.insert(d.model_id).second) throw ValidationError("backend config: duplicate model_id '" + d.model_id + "'");
    if (d.priority_rank < 1) throw ValidationError("backend config: priority_rank must be positive");
    if (!ranks.insert(d.priority_rank).second) {
      throw ValidationError("backend config: duplicate priority_rank " + std::to_string(d.priority_rank));
    }
  }
  if (out.empty()) throw ValidationError("backend config lists no backends");
  return out;
}

std::vector<BackendDescriptor> load_backend_config(const std::filesystem::path& path) {
  try {
    return parse_backend_config(read_file(path));
  } catch (const Error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::vector<std::shared_ptr<Backend>> make_backends(const std::vector<BackendDescriptor>& descriptors,
                                                    std::shared_ptr<const MockRuleTable> rules,
                                                    std::shared_ptr<RateLimiter> limiter) {
  std::vector<std::shared_ptr<Backend>> out;
  for (const auto& d : descriptors) {
    if (d.tier == Tier::Mock || endpoint_value(d, "url").empty()) {
      auto seed_text = endpoint_value(d, "seed");
      std::uint64_t seed = seed_text.empty() ? fnv1a(d.model_id) : std::stoull(seed_text);
      double noise = std::stod(endpoint_value(d, "noise", "0"));
      out.push_back(std::make_shared<MockBackend>(d, rules, seed, noise));
    } else {
      out.push_back(std::make_shared<HttpBackend>(d, limiter));
    }
  }
  return out;
}

}  // namespace classnet
