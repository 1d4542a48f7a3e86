#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "classnet/amen.hpp"
#include "classnet/error.hpp"
#include "classnet/mediation.hpp"

namespace classnet::pipeline {

inline constexpr const char* kToolVersion = "0.3.0";

struct AmenSettings {
  int iterations = 3000;
  int burn_in = 1000;
  int thin = 2;
  int chains = 3;
  int exp_dim = 2;
  int eoi_dim = 3;
  std::vector<int> compare_dims = {2, 3, 4, 5};
  int compare_iterations = 1500;
  int compare_burn_in = 500;
};

struct MediationSettings {
  int chains = 10;
  int iterations = 3000;
  int burn_in = 500;
  double x = 1.0;
  double x_star = 0.0;
  std::optional<double> c;
};

struct PipelineConfig {
  std::filesystem::path base_dir;
  std::filesystem::path transcripts;
  std::filesystem::path roster;
  std::filesystem::path backends;
  std::filesystem::path mock_rules;
  std::filesystem::path prompts;
  std::optional<std::filesystem::path> adjudications;
  std::filesystem::path out_dir = "out";
  int context_size = 5;
  double entropy_percentile = 95.0;
  std::uint64_t seed = 1;
  AmenSettings amen;
  MediationSettings mediation;
  std::string raw_json;  // canonical dump, hashed into the manifest

  // Relative paths resolve against the config file's directory.
  static PipelineConfig load(const std::filesystem::path& path);
  static PipelineConfig parse(const std::string& json_text, const std::filesystem::path& base_dir);
};

struct StageRecord {
  std::string name;
  std::string key;
  std::map<std::string, std::string> outputs;  // relative path -> sha256
  bool skipped = false;
};

struct RunManifest {
  std::string config_hash;
  std::map<std::string, std::string> input_digests;
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  std::vector<StageRecord> stages;

  const StageRecord* stage(const std::string& name) const;
};

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);
std::optional<RunManifest> read_manifest(const std::filesystem::path& path);

class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& message)
      : Error("stage '" + stage + "' failed: " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Individual stages with explicit paths; the CLI subcommands and run()
// share these.
namespace steps {

namespace fs = std::filesystem;

// votes, triage and per-model labels into out_dir/classify/.
void classify(const fs::path& transcripts, const fs::path& roster, const fs::path& backends,
              const fs::path& mock_rules, const fs::path& prompts, int context_size, const fs::path& out_dir);
// Entropy report and agreement statistics into out_dir/reliability/.
void reliability(const fs::path& votes, double percentile, const fs::path& out_dir,
                 const std::optional<fs::path>& backends = std::nullopt);
// Merged (HUMAN over ENSEMBLE) labels and Table-1 counts into out_dir/labels/.
void merge_labels(const fs::path& votes, const std::optional<fs::path>& adjudications, const fs::path& out_dir);
// EXP and EOI adjacency + provenance into out_dir/network/.
void network(const fs::path& transcripts, const fs::path& roster, const fs::path& labels, const fs::path& out_dir);
void centrality(const fs::path& adjacency, const fs::path& out_csv);

// Writes <prefix>_samples.jsonl, _latents.csv, _summary.csv, _fit.json.
void amen_fit(const fs::path& adjacency, const amen::AmenConfig& config, const fs::path& dir, const std::string& net);
// Rows per candidate dimension for each named adjacency file.
void amen_ic(const std::vector<std::pair<std::string, fs::path>>& networks, const amen::AmenConfig& config,
             const std::vector<int>& dims, const fs::path& out_json, const fs::path& out_csv);
void mediate(const fs::path& latents, const fs::path& roster, const mediation::RunOptions& options,
             const std::string& title, const fs::path& out_csv, const fs::path& out_text, const fs::path& out_json);

}  // namespace steps

// Runs classify -> reliability/flag -> network -> centrality -> amen fit ->
// amen ic -> mediate -> report. Stages whose key and output digests match
// the previous manifest are skipped.
RunManifest run(const PipelineConfig& config);

}  // namespace classnet::pipeline
