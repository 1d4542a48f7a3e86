#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace classnet::centrality {

// All routines take a dense non-negative weight matrix W with W(i, j) the
// weight of edge i -> j. The diagonal is ignored.

// Damped weighted random walk; dangling mass spread uniformly. Stops when
// the L1 change drops below tol. Throws ArgumentError on non-finite weights.
Eigen::VectorXd pagerank(const Eigen::MatrixXd& w, double damping = 0.85, double tol = 1e-10,
                         int max_iter = 100000);

struct HubsAuthorities {
  Eigen::VectorXd hub;
  Eigen::VectorXd authority;
};
// Alternating power iteration for the principal singular pair, each
// vector max-normalised. Throws DegenerateError on an all-zero matrix.
HubsAuthorities hits(const Eigen::MatrixXd& w, double tol = 1e-10, int max_iter = 100000);

struct Degrees {
  Eigen::VectorXd in;
  Eigen::VectorXd out;
};
Degrees degrees(const Eigen::MatrixXd& w);

struct PathCentralities {
  Eigen::VectorXd betweenness;
  Eigen::VectorXd closeness;
};
// Shortest paths under distance 1/weight. Betweenness sums over ordered
// pairs (unnormalised). Closeness averages over reachable targets and is
// scaled by coverage: (r/(N-1)) * r / sum_t d(v,t); zero when r = 0.
PathCentralities path_centralities(const Eigen::MatrixXd& w);

// Dominant eigenvector of the incoming-influence iteration x <- W^T x
// (shifted by the identity so periodic graphs converge), max-normalised.
// Acyclic graphs have spectral radius zero; for them the limit of the
// shifted iteration is returned, which concentrates on the endpoints of
// the longest walks. Throws DegenerateError on the zero matrix and
// ConvergenceError after max_iter.
Eigen::VectorXd eigenvector(const Eigen::MatrixXd& w, double tol = 1e-10, int max_iter = 200000);

struct CentralityTable {
  std::vector<std::string> node_ids;
  Eigen::VectorXd pagerank;
  Eigen::VectorXd indegree;
  Eigen::VectorXd outdegree;
  Eigen::VectorXd betweenness;
  Eigen::VectorXd closeness;
  Eigen::VectorXd eigenvector;
  Eigen::VectorXd hub;
  Eigen::VectorXd authority;
  std::vector<std::string> warnings;  // degenerate measures are reported as zeros
};

CentralityTable compute_all(const std::vector<std::string>& ids, const Eigen::MatrixXd& w);

// Columns: student,Pagerank,Indegree,Outdegree,Betweenness,Closeness,Eigen,Hub,Authority
void write_table_csv(const std::filesystem::path& path, const CentralityTable& table);
std::string table_csv(const CentralityTable& table);

}  // namespace classnet::centrality
