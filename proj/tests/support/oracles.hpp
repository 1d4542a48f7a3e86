#pragma once
// Slow, dense reference implementations used only by the tests. None of
// these call into the library.
#include <Eigen/Dense>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace oracle {

Eigen::MatrixXd random_digraph(int n, double density, std::mt19937_64& rng);

// Linear solve of x = d P^T x + (1 - d)/N with dangling rows uniform.
Eigen::VectorXd pagerank(const Eigen::MatrixXd& w, double damping = 0.85);

// Exhaustive simple-path enumeration under distance 1/w.
struct Paths {
  Eigen::VectorXd betweenness;
  Eigen::VectorXd closeness;
};
Paths brute_force_paths(const Eigen::MatrixXd& w);

// Perron vector of W^T from a dense eigensolver; for nilpotent W the
// (W^T)^L 1 limit, L the longest path. Throws on the zero matrix.
Eigen::VectorXd eigenvector(const Eigen::MatrixXd& w);

struct Hits {
  Eigen::VectorXd hub;
  Eigen::VectorXd authority;
};
Hits hits_svd(const Eigen::MatrixXd& w);

// NB2 log posterior written from scratch with lgamma.
struct NbParams {
  Eigen::VectorXd alpha, beta;
  Eigen::MatrixXd Z, W;
  double log_r = 0.0;
  double sa = 1, sb = 1, sz = 1, sw = 1, mu_r = 0, sr = 1;
};
double nb_log_posterior(const Eigen::MatrixXd& y, const NbParams& p);

// Central differences of f at x, step h per coordinate.
template <class F>
Eigen::VectorXd finite_difference(F f, Eigen::VectorXd x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double xi = x(i);
    x(i) = xi + h;
    double fp = f(x);
    x(i) = xi - h;
    double fm = f(x);
    x(i) = xi;
    g(i) = (fp - fm) / (2 * h);
  }
  return g;
}

// Posterior mean of beta in y = X beta + e, e ~ N(0, s2), beta ~ N(0, I).
Eigen::VectorXd bayes_regression_mean(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                      double sigma2);

// Voting ladder restated: plurality; then commercial plurality among the
// tied labels; then the tied label of the best-ranked voter.
// labels are 0..4, tiers true for commercial, ranks lower = preferred.
struct Vote {
  int final;
  int stage;  // 0 plurality, 1 commercial, 2 rank
};
Vote vote(const std::vector<int>& labels, const std::vector<bool>& commercial,
          const std::vector<int>& ranks);

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace oracle
