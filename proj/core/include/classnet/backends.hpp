#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <regex>
#include <string>
#include <vector>

#include "classnet/classification.hpp"

namespace classnet {

// Keeps successive requests at least `min_interval` apart across all remote
// backends sharing the limiter.
class RateLimiter {
 public:
  explicit RateLimiter(std::chrono::milliseconds min_interval) : min_interval_(min_interval) {}
  void acquire();

 private:
  std::mutex mutex_;
  std::chrono::milliseconds min_interval_;
  std::chrono::steady_clock::time_point next_{};
};

struct MockRule {
  std::string pattern;
  std::regex regex;
  FineLabel label;
  // "" or "after_other_explanation": the previous context line is by a
  // different speaker and itself classifies as ExplainOwnIdea.
  std::string context;
};

struct MockRuleTable {
  std::vector<MockRule> rules;
  FineLabel fallback = FineLabel::Uncorrelated;

  static MockRuleTable load(const std::filesystem::path& path);
  static MockRuleTable parse(const std::string& json_text);

  // Rule-table label for `text` with the preceding context line (if any).
  FineLabel classify(const std::string& text, const ContextLine* previous,
                     const std::string& speaker, std::size_t* matched_rule = nullptr) const;
};

// Deterministic stand-in for an LLM. With probability `noise` (decided by
// a hash of the bundle and seed, not an RNG stream) it answers a different
// label, which gives ensembles realistic disagreement.
class MockBackend final : public Backend {
 public:
  MockBackend(BackendDescriptor descriptor, std::shared_ptr<const MockRuleTable> rules,
              std::uint64_t seed, double noise);

  const BackendDescriptor& descriptor() const override { return descriptor_; }
  Completion complete(const PromptBundle& bundle, const std::string& reformat_hint) override;

 private:
  BackendDescriptor descriptor_;
  std::shared_ptr<const MockRuleTable> rules_;
  std::uint64_t seed_;
  double noise_;
};

// HTTP POST JSON adapter. endpoint keys: url (http://host:port/path),
// adapter ("chat" for OpenAI-style chat completions, "simple" for
// {system,user} -> {text}), auth_env, timeout_s, model (remote model name).
// Temperature is always sent as 0.
class HttpBackend final : public Backend {
 public:
  HttpBackend(BackendDescriptor descriptor, std::shared_ptr<RateLimiter> limiter = nullptr);

  const BackendDescriptor& descriptor() const override { return descriptor_; }
  Completion complete(const PromptBundle& bundle, const std::string& reformat_hint) override;

 private:
  BackendDescriptor descriptor_;
  std::shared_ptr<RateLimiter> limiter_;
};

// Backend config file: JSON array of objects with model_id, tier,
// priority_rank, and endpoint fields (endpoint_url, auth_env, timeout_s,
// adapter, seed, noise). Validates unique ids and ranks.
std::vector<BackendDescriptor> load_backend_config(const std::filesystem::path& path);
std::vector<BackendDescriptor> parse_backend_config(const std::string& json_text);

std::vector<std::shared_ptr<Backend>> make_backends(const std::vector<BackendDescriptor>& descriptors,
                                                    std::shared_ptr<const MockRuleTable> rules,
                                                    std::shared_ptr<RateLimiter> limiter = nullptr);

// 64-bit FNV-1a; stable across platforms, used wherever a reproducible
// hash is needed.
std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 1469598103934665603ULL);

}  // namespace classnet
