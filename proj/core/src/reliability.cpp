#include "classnet/reliability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "classnet/error.hpp"

namespace classnet {

using nlohmann::json;

double cohen_kappa(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ArgumentError("cohen_kappa: sequences differ in length");
  if (a.empty()) throw ArgumentError("cohen_kappa: empty sequences");
  const double n = static_cast<double>(a.size());
  std::map<int, double> ca, cb;
  double agree = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca[a[i]] += 1.0;
    cb[b[i]] += 1.0;
    if (a[i] == b[i]) agree += 1.0;
  }
  double po = agree / n;
  double pe = 0.0;
  for (const auto& [k, v] : ca) {
    auto it = cb.find(k);
    if (it != cb.end()) pe += (v / n) * (it->second / n);
  }
  if (pe >= 1.0) return 1.0;
  return (po - pe) / (1.0 - pe);
}

double cohen_kappa(std::span<const FineLabel> a, std::span<const FineLabel> b) {
  std::vector<int> ia(a.size()), ib(b.size());
  std::transform(a.begin(), a.end(), ia.begin(), [](FineLabel l) { return static_cast<int>(l); });
  std::transform(b.begin(), b.end(), ib.begin(), [](FineLabel l) { return static_cast<int>(l); });
  return cohen_kappa(std::span<const int>(ia), std::span<const int>(ib));
}

std::string interpret_kappa(double kappa) {
  if (!(kappa >= -1.0 && kappa <= 1.0)) {
    throw ArgumentError("kappa " + std::to_string(kappa) + " lies outside [-1, 1]");
  }
  if (kappa < 0.0) return "Poor";
  if (kappa <= 0.20) return "Slight";
  if (kappa <= 0.40) return "Fair";
  if (kappa <= 0.60) return "Moderate";
  if (kappa <= 0.80) return "Substantial";
  return "Almost perfect";
}

double fleiss_kappa(const RatingMatrix& m) {
  if (m.n_raters < 2) throw ArgumentError("fleiss_kappa: need at least two raters");
  if (m.n_items() == 0) throw ArgumentError("fleiss_kappa: no items");
  const std::size_t k = m.n_categories();
  const double n = static_cast<double>(m.n_raters);
  std::vector<double> totals(k, 0.0);
  double p_bar = 0.0;
  for (std::size_t i = 0; i < m.n_items(); ++i) {
    const auto& row = m.counts[i];
    if (row.size() != k) throw IntegrityError("fleiss_kappa: ragged rating matrix");
    long sum = 0;
    double sq = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (row[j] < 0) throw IntegrityError("fleiss_kappa: negative count");
      sum += row[j];
      sq += static_cast<double>(row[j]) * static_cast<double>(row[j]);
      totals[j] += static_cast<double>(row[j]);
    }
    if (sum != m.n_raters) {
      throw IntegrityError("fleiss_kappa: item " + std::to_string(i) + " has " + std::to_string(sum) +
                           " ratings, expected " + std::to_string(m.n_raters));
    }
    p_bar += (sq - n) / (n * (n - 1.0));
  }
  const double items = static_cast<double>(m.n_items());
  p_bar /= items;
  double pe = 0.0;
  for (double t : totals) {
    double q = t / (items * n);
    pe += q * q;
  }
  if (1.0 - pe == 0.0) {
    if (p_bar == 1.0) return 1.0;
    throw UndefinedError("fleiss_kappa: expected agreement is 1 but observed is not");
  }
  return (p_bar - pe) / (1.0 - pe);
}

RatingMatrix rating_matrix(const std::vector<std::vector<FineLabel>>& item_labels) {
  RatingMatrix m;
  if (item_labels.empty()) return m;
  m.n_raters = static_cast<long>(item_labels.front().size());
  for (const auto& labels : item_labels) {
    std::vector<long> row(kNumLabels, 0);
    for (FineLabel l : labels) ++row[static_cast<std::size_t>(l)];
    m.counts.push_back(std::move(row));
  }
  return m;
}

double shannon_entropy(std::span<const double> p) {
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ArgumentError("shannon_entropy: negative or non-finite probability");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ArgumentError("shannon_entropy: probabilities do not sum to 1");
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log2(v);
  }
  return std::max(h, 0.0);
}

double nearest_rank_percentile(std::span<const double> values, double percentile) {
  if (values.empty()) throw ArgumentError("percentile of an empty list");
  if (!(percentile > 0.0 && percentile <= 100.0)) {
    throw ArgumentError("percentile must lie in (0, 100]");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  // Smallest value with strictly more than `percentile`% of the data at or
  // below it; flagged items are then at most the top (100 - p)%.
  const double n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::floor(percentile * n / 100.0 + 1e-9)) + 1;
  rank = std::min(rank, sorted.size());
  return sorted[rank - 1];
}

EntropyReport flag_by_percentile(std::span<const double> entropies, double percentile,
                                 std::span<const std::string> ids) {
  if (entropies.empty()) throw ArgumentError("flag_by_percentile: no entropies");
  if (!ids.empty() && ids.size() != entropies.size()) {
    throw ArgumentError("flag_by_percentile: ids and entropies differ in length");
  }
  EntropyReport r;
  r.percentile = percentile;
  r.threshold = nearest_rank_percentile(entropies, percentile);
  r.entropies.assign(entropies.begin(), entropies.end());
  for (std::size_t i = 0; i < entropies.size(); ++i) {
    r.utterance_ids.push_back(ids.empty() ? std::to_string(i) : ids[i]);
    if (entropies[i] == 0.0) ++r.consensus_count;
    if (entropies[i] > r.threshold) r.flagged.insert(r.utterance_ids.back());
  }
  return r;
}

EntropyReport entropy_report(const std::vector<VoteRecord>& votes, double percentile) {
  std::vector<double> h;
  std::vector<std::string> ids;
  for (const auto& v : votes) {
    auto p = v.probability_vector();
    h.push_back(shannon_entropy(p));
    ids.push_back(v.utterance_id);
  }
  return flag_by_percentile(h, percentile, ids);
}

namespace {

std::vector<std::string> model_ids(const std::vector<VoteRecord>& votes) {
  std::set<std::string> ids;
  for (const auto& v : votes) {
    for (const auto& [id, l] : v.responses) ids.insert(id);
  }
  return {ids.begin(), ids.end()};
}

}  // namespace

KappaMatrix pairwise_kappa(const std::vector<VoteRecord>& votes) {
  KappaMatrix km;
  km.raters = model_ids(votes);
  const std::size_t m = km.raters.size();
  km.kappa.assign(m, std::vector<double>(m, std::numeric_limits<double>::quiet_NaN()));
  for (const auto& v : votes) {
    if (v.responses.size() == m) ++km.n_common_items;
  }
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a; b < m; ++b) {
      std::vector<FineLabel> la, lb;
      for (const auto& v : votes) {
        auto ia = v.responses.find(km.raters[a]);
        auto ib = v.responses.find(km.raters[b]);
        if (ia == v.responses.end() || ib == v.responses.end()) continue;
        la.push_back(ia->second);
        lb.push_back(ib->second);
      }
      if (la.empty()) continue;
      double k = cohen_kappa(std::span<const FineLabel>(la), std::span<const FineLabel>(lb));
      km.kappa[a][b] = km.kappa[b][a] = k;
    }
  }
  return km;
}

double group_fleiss_kappa(const std::vector<VoteRecord>& votes, const std::vector<std::string>& models) {
  std::vector<std::string> selected = models.empty() ? model_ids(votes) : models;
  std::vector<std::vector<FineLabel>> items;
  for (const auto& v : votes) {
    std::vector<FineLabel> labels;
    for (const auto& id : selected) {
      auto it = v.responses.find(id);
      if (it == v.responses.end()) break;
      labels.push_back(it->second);
    }
    if (labels.size() == selected.size()) items.push_back(std::move(labels));
  }
  return fleiss_kappa(rating_matrix(items));
}

void write_entropy_report(const std::filesystem::path& path, const EntropyReport& report) {
  json j;
  j["percentile"] = report.percentile;
  j["threshold"] = report.threshold;
  j["consensus_count"] = report.consensus_count;
  j["n"] = report.entropies.size();
  json items = json::array();
  for (std::size_t i = 0; i < report.entropies.size(); ++i) {
    items.push_back({{"utterance_id", report.utterance_ids[i]},
                     {"entropy", report.entropies[i]},
                     {"flagged", report.flagged.count(report.utterance_ids[i]) > 0}});
  }
  j["items"] = items;
  write_file(path, j.dump(1) + "\n");
}

EntropyReport load_entropy_report(const std::filesystem::path& path) {
  try {
    json j = json::parse(read_file(path));
    EntropyReport r;
    r.percentile = j.at("percentile").get<double>();
    r.threshold = j.at("threshold").get<double>();
    r.consensus_count = j.at("consensus_count").get<std::size_t>();
    for (const auto& it : j.at("items")) {
      r.utterance_ids.push_back(it.at("utterance_id").get<std::string>());
      r.entropies.push_back(it.at("entropy").get<double>());
      if (it.at("flagged").get<bool>()) r.flagged.insert(r.utterance_ids.back());
    }
    return r;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace classnet
