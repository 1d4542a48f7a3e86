#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "classnet/data_model.hpp"

namespace classnet {

enum class NetworkKind { EXP, EOI };
std::string_view to_string(NetworkKind kind);
NetworkKind parse_network_kind(std::string_view text);

struct EdgeContribution {
  std::string utterance_id;
  std::string source;
  std::string target;
  double weight = 0.0;
};

struct WeightedDigraph {
  NetworkKind kind = NetworkKind::EXP;
  std::vector<std::string> node_ids;  // roster order
  Eigen::MatrixXd weights;            // weights(i, j): edge i -> j
  std::vector<EdgeContribution> provenance;

  std::size_t size() const { return node_ids.size(); }
  double total_weight() const { return weights.sum(); }
};

struct EdgeRule {
  std::map<FineLabel, double> weights = {
      {FineLabel::ExplainOwnIdea, 1.0},
      {FineLabel::EngageLow, 1.0},
      {FineLabel::EngageMedium, 2.0},
      {FineLabel::EngageHigh, 3.0},
  };

  double weight_for(FineLabel label) const;
  bool counts_for(NetworkKind kind, FineLabel label) const;
};

// Target of the utterance at block[position]:
//   addressee_id when present;
//   Engage*: latest earlier speaker labelled ExplainOwnIdea, else latest
//            earlier distinct speaker;
//   ExplainOwnIdea: latest earlier distinct speaker, else the next distinct
//            speaker who responds in the block.
// Returns nullopt when no counterpart exists or the label is Uncorrelated.
std::optional<std::string> resolve_target(std::span<const Utterance> block, std::size_t position,
                                          const std::unordered_map<std::string, FineLabel>& labels);

struct DroppedUtterance {
  std::string utterance_id;
  std::string reason;
};

struct NetworkBuild {
  WeightedDigraph graph;
  std::vector<DroppedUtterance> dropped;
};

// One edge contribution per resolvable utterance whose label belongs to
// `kind`, summed over all lessons. Throws IntegrityError when a labelled
// utterance's speaker or target is missing from the roster.
NetworkBuild build_network(const std::vector<Utterance>& utterances,
                           const std::vector<LabeledUtterance>& labels, const Roster& roster,
                           NetworkKind kind, const EdgeRule& rule = {});

struct Overdispersion {
  double mean = 0.0;
  double variance = 0.0;
  std::optional<double> ratio;  // absent when the mean is zero
};

// Sample mean/variance over off-diagonal entries. Requires N >= 2.
Overdispersion overdispersion_check(const Eigen::MatrixXd& weights);

void write_adjacency_csv(const std::filesystem::path& path, const std::vector<std::string>& ids,
                         const Eigen::MatrixXd& weights);
struct Adjacency {
  std::vector<std::string> node_ids;
  Eigen::MatrixXd weights;
};
// Throws ParseError naming the file on malformed input.
Adjacency read_adjacency_csv(const std::filesystem::path& path);

void write_provenance(const std::filesystem::path& path, const std::vector<EdgeContribution>& edges);

}  // namespace classnet
