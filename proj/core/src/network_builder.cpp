#include "classnet/network_builder.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "classnet/csv.hpp"
#include "classnet/error.hpp"

namespace classnet {

std::string_view to_string(NetworkKind kind) { return kind == NetworkKind::EXP ? "EXP" : "EOI"; }

NetworkKind parse_network_kind(std::string_view text) {
  if (text == "EXP" || text == "exp") return NetworkKind::EXP;
  if (text == "EOI" || text == "eoi") return NetworkKind::EOI;
  throw ParseError("unknown network kind '" + std::string(text) + "'");
}

double EdgeRule::weight_for(FineLabel label) const {
  auto it = weights.find(label);
  if (it == weights.end()) return 0.0;
  if (!(it->second > 0.0)) throw ArgumentError("edge weights must be positive");
  return it->second;
}

bool EdgeRule::counts_for(NetworkKind kind, FineLabel label) const {
  if (kind == NetworkKind::EXP) return label == FineLabel::ExplainOwnIdea;
  return is_engage(label);
}

std::optional<std::string> resolve_target(std::span<const Utterance> block, std::size_t position,
                                          const std::unordered_map<std::string, FineLabel>& labels) {
  const Utterance& u = block[position];
  auto it = labels.find(u.utterance_id);
  if (it == labels.end() || it->second == FineLabel::Uncorrelated) return std::nullopt;
  const FineLabel label = it->second;

  if (u.addressee_id) {
    if (*u.addressee_id == u.speaker_id) return std::nullopt;
    return u.addressee_id;
  }

  auto latest_distinct = [&]() -> std::optional<std::string> {
    for (std::size_t j = position; j-- > 0;) {
      if (block[j].speaker_id != u.speaker_id) return block[j].speaker_id;
    }
    return std::nullopt;
  };

  if (is_engage(label)) {
    for (std::size_t j = position; j-- > 0;) {
      if (block[j].speaker_id == u.speaker_id) continue;
      auto lj = labels.find(block[j].utterance_id);
      if (lj != labels.end() && lj->second == FineLabel::ExplainOwnIdea) return block[j].speaker_id;
    }
    return latest_distinct();
  }

  if (auto prior = latest_distinct()) return prior;
  for (std::size_t j = position + 1; j < block.size(); ++j) {
    if (block[j].speaker_id != u.speaker_id) return block[j].speaker_id;
  }
  return std::nullopt;
}

NetworkBuild build_network(const std::vector<Utterance>& utterances,
                           const std::vector<LabeledUtterance>& labels, const Roster& roster,
                           NetworkKind kind, const EdgeRule& rule) {
  std::unordered_map<std::string, FineLabel> label_of;
  std::unordered_map<std::string, std::size_t> position_of;
  for (std::size_t i = 0; i < utterances.size(); ++i) position_of[utterances[i].utterance_id] = i;
  for (const auto& l : labels) {
    if (!position_of.count(l.utterance_id)) {
      throw IntegrityError("label for unknown utterance '" + l.utterance_id + "'");
    }
    label_of[l.utterance_id] = l.label;
  }

  NetworkBuild out;
  const std::size_t n = roster.size();
  out.graph.kind = kind;
  out.graph.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (const auto& s : roster.students()) out.graph.node_ids.push_back(s.student_id);

  std::size_t start = 0;
  while (start < utterances.size()) {
    std::size_t end = start + 1;
    while (end < utterances.size() && utterances[end].lesson_id == utterances[start].lesson_id &&
           utterances[end].block_id == utterances[start].block_id) {
      ++end;
    }
    std::span<const Utterance> block(utterances.data() + start, end - start);
    for (std::size_t p = 0; p < block.size(); ++p) {
      const Utterance& u = block[p];
      auto it = label_of.find(u.utterance_id);
      if (it == label_of.end() || !rule.counts_for(kind, it->second)) continue;
      if (!roster.contains(u.speaker_id)) {
        throw IntegrityError("label for utterance '" + u.utterance_id + "' has unknown speaker '" +
                             u.speaker_id + "'");
      }
      auto target = resolve_target(block, p, label_of);
      if (!target) {
        out.dropped.push_back({u.utterance_id, "no counterpart speaker in block"});
        continue;
      }
      std::size_t src = roster.require_index(u.speaker_id);
      auto dst = roster.index_of(*target);
      if (!dst) {
        throw IntegrityError("utterance '" + u.utterance_id + "' targets unknown student '" + *target + "'");
      }
      double w = rule.weight_for(it->second);
      out.graph.weights(static_cast<Eigen::Index>(src), static_cast<Eigen::Index>(*dst)) += w;
      out.graph.provenance.push_back({u.utterance_id, u.speaker_id, *target, w});
    }
    start = end;
  }
  return out;
}

Overdispersion overdispersion_check(const Eigen::MatrixXd& weights) {
  const auto n = weights.rows();
  if (weights.cols() != n) throw ArgumentError("overdispersion_check: matrix is not square");
  if (n < 2) throw ArgumentError("overdispersion_check: need at least two nodes");
  const double count = static_cast<double>(n * (n - 1));
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) sum += weights(i, j);
  Overdispersion o;
  o.mean = sum / count;
  double ss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) ss += (weights(i, j) - o.mean) * (weights(i, j) - o.mean);
  o.variance = ss / (count - 1.0);
  if (o.mean > 0.0) o.ratio = o.variance / o.mean;
  return o;
}

namespace {
std::string format_weight(double w) {
  std::ostringstream s;
  s.precision(15);
  s << w;
  return s.str();
}
}  // namespace

void write_adjacency_csv(const std::filesystem::path& path, const std::vector<std::string>& ids,
                         const Eigen::MatrixXd& weights) {
  std::ostringstream out;
  std::vector<std::string> header{"student_id"};
  header.insert(header.end(), ids.begin(), ids.end());
  csv::write_row(out, header);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::vector<std::string> row{ids[i]};
    for (std::size_t j = 0; j < ids.size(); ++j) {
      row.push_back(format_weight(weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
    }
    csv::write_row(out, row);
  }
  write_file(path, out.str());
}

Adjacency read_adjacency_csv(const std::filesystem::path& path) {
  auto fail = [&](const std::string& why) -> ParseError {
    return ParseError("adjacency file '" + path.string() + "': " + why);
  };
  std::vector<csv::Record> records;
  try {
    records = csv::parse(read_file(path));
  } catch (const Error& e) {
    throw fail(e.what());
  }
  if (records.empty()) throw fail("empty file");
  Adjacency a;
  const auto& header = records.front().fields;
  a.node_ids.assign(header.begin() + 1, header.end());
  const auto n = static_cast<Eigen::Index>(a.node_ids.size());
  if (static_cast<Eigen::Index>(records.size()) - 1 != n) {
    throw fail("expected " + std::to_string(n) + " rows, found " + std::to_string(records.size() - 1));
  }
  a.weights.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& rec = records[static_cast<std::size_t>(i) + 1];
    if (static_cast<Eigen::Index>(rec.fields.size()) != n + 1) {
      throw fail("line " + std::to_string(rec.line) + ": wrong field count");
    }
    if (rec.fields[0] != a.node_ids[static_cast<std::size_t>(i)]) {
      throw fail("line " + std::to_string(rec.line) + ": row id '" + rec.fields[0] +
                 "' does not match header");
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& f = rec.fields[static_cast<std::size_t>(j) + 1];
      std::size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(f, &pos);
      } catch (const std::exception&) {
        throw fail("line " + std::to_string(rec.line) + ": '" + f + "' is not a number");
      }
      if (pos != f.size() || !std::isfinite(v) || v < 0.0) {
        throw fail("line " + std::to_string(rec.line) + ": '" + f + "' is not a non-negative number");
      }
      a.weights(i, j) = v;
    }
  }
  return a;
}

void write_provenance(const std::filesystem::path& path, const std::vector<EdgeContribution>& edges) {
  std::ostringstream out;
  for (const auto& e : edges) {
    nlohmann::json j = {{"utterance_id", e.utterance_id},
                        {"source", e.source},
                        {"target", e.target},
                        {"weight", e.weight}};
    out << j.dump() << '\n';
  }
  write_file(path, out.str());
}

}  // namespace classnet
