#pragma once

#include <string>

// Relative paths of stage outputs inside a pipeline output directory.
namespace classnet::layout {

inline constexpr const char* kVotes = "classify/votes.jsonl";
inline constexpr const char* kTriage = "classify/triage.jsonl";
inline constexpr const char* kModelLabels = "classify/model_labels.jsonl";
inline constexpr const char* kEntropy = "reliability/entropy.json";
inline constexpr const char* kAgreement = "reliability/agreement.json";
inline constexpr const char* kMergedLabels = "labels/merged.jsonl";
inline constexpr const char* kLabelCounts = "labels/counts.csv";
inline constexpr const char* kNetworkSummary = "network/summary.json";
inline constexpr const char* kIcJson = "amen/ic.json";
inline constexpr const char* kIcCsv = "amen/ic.csv";
inline constexpr const char* kManifest = "manifest.json";

// `net` is "exp" or "eoi".
inline std::string adjacency(const std::string& net) { return "network/" + net + "_adjacency.csv"; }
inline std::string provenance(const std::string& net) { return "network/" + net + "_provenance.csv"; }
inline std::string centrality(const std::string& net) { return "centrality/" + net + ".csv"; }
inline std::string samples(const std::string& net) { return "amen/" + net + "_samples.jsonl"; }
inline std::string latents(const std::string& net) { return "amen/" + net + "_latents.csv"; }
inline std::string amen_summary(const std::string& net) { return "amen/" + net + "_summary.csv"; }
inline std::string amen_fit(const std::string& net) { return "amen/" + net + "_fit.json"; }
inline std::string mediation_csv(const std::string& net) { return "mediation/" + net + ".csv"; }
inline std::string mediation_text(const std::string& net) { return "mediation/" + net + ".txt"; }
inline std::string mediation_json(const std::string& net) { return "mediation/" + net + ".json"; }

}  // namespace classnet::layout
