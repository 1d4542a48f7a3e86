#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "classnet/classification.hpp"
#include "classnet/data_model.hpp"

namespace classnet {

// n_items x n_categories count table, every row summing to n_raters.
struct RatingMatrix {
  std::vector<std::vector<long>> counts;
  long n_raters = 0;

  std::size_t n_items() const { return counts.size(); }
  std::size_t n_categories() const { return counts.empty() ? 0 : counts.front().size(); }
};

// Chance-corrected agreement between two label sequences. Returns 1 when
// expected agreement is already 1 (both raters constant and equal).
double cohen_kappa(std::span<const FineLabel> a, std::span<const FineLabel> b);
double cohen_kappa(std::span<const int> a, std::span<const int> b);

// Landis-Koch style bands; upper edge of each printed range inclusive.
std::string interpret_kappa(double kappa);

double fleiss_kappa(const RatingMatrix& m);

// Builds a rating matrix over the five labels from per-item rater labels.
RatingMatrix rating_matrix(const std::vector<std::vector<FineLabel>>& item_labels);

// H = -sum p log2 p, in bits, with 0 log 0 = 0.
double shannon_entropy(std::span<const double> p);

struct EntropyReport {
  std::vector<std::string> utterance_ids;
  std::vector<double> entropies;
  double threshold = 0.0;
  double percentile = 95.0;
  std::set<std::string> flagged;
  std::size_t consensus_count = 0;
};

// Percentile threshold by nearest rank, flags items strictly above it.
// `ids` may be empty, in which case items are named by position.
EntropyReport flag_by_percentile(std::span<const double> entropies, double percentile,
                                 std::span<const std::string> ids = {});

double nearest_rank_percentile(std::span<const double> values, double percentile);

EntropyReport entropy_report(const std::vector<VoteRecord>& votes, double percentile);

struct KappaMatrix {
  std::vector<std::string> raters;
  std::vector<std::vector<double>> kappa;
  std::size_t n_common_items = 0;
};

// Pairwise Cohen's kappa across models over utterances every model labelled.
KappaMatrix pairwise_kappa(const std::vector<VoteRecord>& votes);

// Fleiss' kappa for the given subset of models (all models when empty),
// over utterances every selected model labelled.
double group_fleiss_kappa(const std::vector<VoteRecord>& votes,
                          const std::vector<std::string>& models = {});

void write_entropy_report(const std::filesystem::path& path, const EntropyReport& report);
EntropyReport load_entropy_report(const std::filesystem::path& path);

}  // namespace classnet
