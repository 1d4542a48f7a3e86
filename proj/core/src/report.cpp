#include "classnet/report.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "classnet/csv.hpp"
#include "classnet/data_model.hpp"
#include "classnet/error.hpp"
#include "classnet/layout.hpp"
#include "classnet/network_builder.hpp"
#include "classnet/reliability.hpp"
#include "classnet/review_service.hpp"

namespace classnet::report {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fixed(double v, int digits) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(digits) << v;
  return o.str();
}

// Blue (low) to red (high).
std::string score_colour(double t) {
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
  auto mix = [t](int lo, int hi) { return static_cast<int>(std::lround(lo + t * (hi - lo))); };
  std::ostringstream o;
  o << "rgb(" << mix(49, 215) << ',' << mix(54, 48) << ',' << mix(149, 39) << ')';
  return o.str();
}

std::optional<json> read_json(const fs::path& p) {
  if (!fs::exists(p)) return std::nullopt;
  return json::parse(read_file(p));
}

// CSV file -> array of objects keyed by header.
std::optional<json> read_csv_rows(const fs::path& p) {
  if (!fs::exists(p)) return std::nullopt;
  auto records = csv::parse(read_file(p));
  json rows = json::array();
  if (records.empty()) return rows;
  const auto& header = records.front().fields;
  for (std::size_t r = 1; r < records.size(); ++r) {
    json row = json::object();
    for (std::size_t c = 0; c < header.size() && c < records[r].fields.size(); ++c) {
      row[header[c]] = records[r].fields[c];
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

double edge_width(double weight, double max_weight) {
  if (!(max_weight > 0.0) || !(weight > 0.0)) return 0.0;
  return 0.75 + 5.25 * std::min(weight, max_weight) / max_weight;
}

std::string network_svg(const std::vector<std::string>& ids, const Eigen::MatrixXd& weights,
                        const Eigen::VectorXd& scores, const std::string& title) {
  const std::size_t n = ids.size();
  if (weights.rows() != static_cast<Eigen::Index>(n) || weights.cols() != static_cast<Eigen::Index>(n)) {
    throw ArgumentError("network_svg: weight matrix does not match the node list");
  }
  const double size = 640, cx = 320, cy = 340, radius = 240, node_r = 16;
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(n, 1)) -
               std::numbers::pi / 2.0;
    x[i] = cx + radius * std::cos(a);
    y[i] = cy + radius * std::sin(a);
  }
  double lo = 0.0, hi = 0.0;
  if (scores.size() > 0) {
    lo = scores.minCoeff();
    hi = scores.maxCoeff();
  }
  double max_w = 0.0;
  for (Eigen::Index i = 0; i < weights.rows(); ++i)
    for (Eigen::Index j = 0; j < weights.cols(); ++j)
      if (i != j) max_w = std::max(max_w, weights(i, j));

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size + 40
      << "\" viewBox=\"0 0 " << size << ' ' << size + 40 << "\">\n";
  svg << "<defs><marker id=\"arrow\" viewBox=\"0 0 10 10\" refX=\"10\" refY=\"5\" markerWidth=\"4\" "
         "markerHeight=\"4\" orient=\"auto-start-reverse\"><path d=\"M0,0 L10,5 L0,10 z\" fill=\"#555\"/></marker></defs>\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << cx << "\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"18\">"
      << xml_escape(title) << "</text>\n";
  svg << "<g class=\"edges\" fill=\"none\" stroke=\"#555\" stroke-opacity=\"0.7\">\n";
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double w = weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (i == j || w <= 0.0) continue;
      // Bend each edge to its left so reciprocal edges stay apart.
      double dx = x[j] - x[i], dy = y[j] - y[i];
      double len = std::hypot(dx, dy);
      if (len == 0.0) continue;
      double ux = dx / len, uy = dy / len;
      double sx = x[i] + ux * node_r, sy = y[i] + uy * node_r;
      double ex = x[j] - ux * (node_r + 2), ey = y[j] - uy * (node_r + 2);
      double mx = (sx + ex) / 2 - uy * 0.12 * len, my = (sy + ey) / 2 + ux * 0.12 * len;
      svg << "<path d=\"M" << fixed(sx, 1) << ',' << fixed(sy, 1) << " Q" << fixed(mx, 1) << ',' << fixed(my, 1)
          << ' ' << fixed(ex, 1) << ',' << fixed(ey, 1) << "\" stroke-width=\"" << fixed(edge_width(w, max_w), 3)
          << "\" marker-end=\"url(#arrow)\" data-weight=\"" << w << "\" data-source=\"" << xml_escape(ids[i])
          << "\" data-target=\"" << xml_escape(ids[j]) << "\"/>\n";
    }
  svg << "</g>\n<g class=\"nodes\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t i = 0; i < n; ++i) {
    double s = i < static_cast<std::size_t>(scores.size()) ? scores(static_cast<Eigen::Index>(i)) : 0.0;
    double t = hi > lo ? (s - lo) / (hi - lo) : 0.5;
    svg << "<circle cx=\"" << fixed(x[i], 1) << "\" cy=\"" << fixed(y[i], 1) << "\" r=\"" << node_r << "\" fill=\""
        << score_colour(t) << "\" stroke=\"#222\" data-score=\"" << s << "\"/>\n";
    svg << "<text x=\"" << fixed(x[i], 1) << "\" y=\"" << fixed(y[i] + node_r + 12, 1)
        << "\" text-anchor=\"middle\">" << xml_escape(ids[i]) << "</text>\n";
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

ReportOutputs write_report(const fs::path& out_dir) {
  ReportOutputs outputs;
  const fs::path dir = out_dir / "report";
  json j = json::object();
  std::ostringstream text;
  text << "Classroom dialogue network analysis\n===================================\n\n";

  if (fs::exists(out_dir / layout::kMergedLabels)) {
    auto counts = review::count_labels(load_labels(out_dir / layout::kMergedLabels));
    j["label_counts"] = {{"EXP", counts.exp},       {"EOI total", counts.eoi_total},
                         {"High", counts.high},     {"Medium", counts.medium},
                         {"Low", counts.low},       {"Uncorrelated", counts.uncorrelated},
                         {"Total", counts.total}};
    text << "Classification results by utterance type\n" << review::label_counts_table(counts) << '\n';
  }

  if (auto agreement = read_json(out_dir / layout::kAgreement)) {
    j["agreement"] = *agreement;
    const auto& pw = (*agreement)["pairwise"];
    text << "Pairwise Cohen's kappa (" << pw.value("common_items", 0) << " common items)\n";
    const auto raters = pw["raters"].get<std::vector<std::string>>();
    std::size_t width = 8;
    for (const auto& r : raters) width = std::max(width, r.size() + 2);
    text << std::setw(static_cast<int>(width)) << "";
    for (const auto& r : raters) text << std::setw(static_cast<int>(width)) << r;
    text << '\n';
    for (std::size_t i = 0; i < raters.size(); ++i) {
      text << std::setw(static_cast<int>(width)) << raters[i];
      for (const auto& v : pw["kappa"][i]) {
        text << std::setw(static_cast<int>(width)) << (v.is_null() ? std::string("NA") : fixed(v.get<double>(), 3));
      }
      text << '\n';
    }
    for (const auto& [group, f] : (*agreement)["fleiss"].items()) {
      text << "Fleiss' kappa (" << group << "): "
           << (f["kappa"].is_null() ? std::string("undefined") : fixed(f["kappa"].get<double>(), 4) + " (" +
                                                                    f["interpretation"].get<std::string>() + ")")
           << '\n';
    }
    text << '\n';
  }

  if (auto entropy = read_json(out_dir / layout::kEntropy)) {
    const int bins = 10;
    const double top = std::log2(static_cast<double>(kAllLabels.size()));
    std::vector<long> hist(bins, 0);
    for (const auto& item : (*entropy)["items"]) {
      double h = item["entropy"].get<double>();
      int b = std::min(bins - 1, static_cast<int>(std::floor(h / top * bins)));
      ++hist[static_cast<std::size_t>(std::max(0, b))];
    }
    json edges = json::array();
    for (int b = 0; b <= bins; ++b) edges.push_back(top * b / bins);
    j["entropy"] = {{"threshold", (*entropy)["threshold"]},
                    {"percentile", (*entropy)["percentile"]},
                    {"histogram", {{"edges", edges}, {"counts", hist}}}};
    text << "Vote entropy: " << (*entropy)["percentile"].get<double>() << "th percentile threshold "
         << fixed((*entropy)["threshold"].get<double>(), 4) << " bits\n";
    for (int b = 0; b < bins; ++b) {
      text << "  [" << fixed(top * b / bins, 2) << ", " << fixed(top * (b + 1) / bins, 2) << ") "
           << std::setw(5) << hist[static_cast<std::size_t>(b)] << ' ' << std::string(static_cast<std::size_t>(std::min<long>(hist[static_cast<std::size_t>(b)], 60)), '#') << '\n';
    }
    text << '\n';
  }

  if (auto net = read_json(out_dir / layout::kNetworkSummary)) j["networks"] = *net;

  j["centrality"] = json::object();
  for (const std::string net : {"exp", "eoi"}) {
    auto rows = read_csv_rows(out_dir / layout::centrality(net));
    if (!rows) continue;
    j["centrality"][net] = *rows;
    std::string upper = net == "exp" ? "EXP" : "EOI";
    text << "Centrality measures, " << upper << " network\n";
    text << read_file(out_dir / layout::centrality(net)) << '\n';

    if (fs::exists(out_dir / layout::adjacency(net))) {
      Adjacency a = read_adjacency_csv(out_dir / layout::adjacency(net));
      Eigen::VectorXd scores = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(a.node_ids.size()));
      for (std::size_t i = 0; i < rows->size() && i < a.node_ids.size(); ++i) {
        scores(static_cast<Eigen::Index>(i)) = std::stod((*rows)[i].value("Pagerank", "0"));
      }
      fs::path svg = dir / (net + "_network.svg");
      write_file(svg, network_svg(a.node_ids, a.weights, scores, upper + " network (node colour: PageRank)"));
      outputs.svgs.push_back(svg);
    }
  }

  if (auto ic = read_json(out_dir / layout::kIcJson)) {
    j["information_criteria"] = *ic;
    text << "Model comparison by latent dimension\n";
    text << std::setw(6) << "net" << std::setw(4) << "d" << std::setw(14) << "BIC" << std::setw(14) << "DIC"
         << std::setw(14) << "WAIC" << '\n';
    for (const auto& [net, rows] : ic->items()) {
      for (const auto& r : rows) {
        text << std::setw(6) << net << std::setw(4) << r["d"].get<int>() << std::setw(14) << fixed(r["bic"].get<double>(), 2)
             << std::setw(14) << fixed(r["dic"].get<double>(), 2) << std::setw(14) << fixed(r["waic"].get<double>(), 2)
             << '\n';
      }
    }
    text << '\n';
  }

  j["mediation"] = json::object();
  for (const std::string net : {"exp", "eoi"}) {
    if (auto m = read_json(out_dir / layout::mediation_json(net))) {
      j["mediation"][net] = *m;
      text << read_file(out_dir / layout::mediation_text(net)) << '\n';
    }
  }

  outputs.json = dir / "report.json";
  outputs.text = dir / "report.txt";
  write_file(outputs.json, j.dump(2) + "\n");
  write_file(outputs.text, text.str());
  return outputs;
}

}  // namespace classnet::report
