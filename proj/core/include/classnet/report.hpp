#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace classnet::report {

// Static SVG drawing of a weighted digraph on a circle. Node fill runs
// blue (low score) to red (high score); edge stroke width grows with
// weight.
std::string network_svg(const std::vector<std::string>& ids, const Eigen::MatrixXd& weights,
                        const Eigen::VectorXd& node_scores, const std::string& title);

// Stroke width used for an edge of `weight` when the largest edge is
// `max_weight`.
double edge_width(double weight, double max_weight);

struct ReportInputs {
  std::filesystem::path out_dir;  // pipeline output directory
};

struct ReportOutputs {
  std::filesystem::path json;
  std::filesystem::path text;
  std::vector<std::filesystem::path> svgs;
};

// Gathers whatever stage outputs exist in out_dir into report.json,
// report.txt and one SVG per network.
ReportOutputs write_report(const std::filesystem::path& out_dir);

}  // namespace classnet::report
