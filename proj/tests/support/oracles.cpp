#include "oracles.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace oracle {

Eigen::MatrixXd random_digraph(int n, double density, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0), weight(0.5, 3.0);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && coin(rng) < density) w(i, j) = weight(rng);
  return w;
}

Eigen::VectorXd pagerank(const Eigen::MatrixXd& w_in, double d) {
  const int n = static_cast<int>(w_in.rows());
  Eigen::MatrixXd w = w_in;
  w.diagonal().setZero();
  Eigen::MatrixXd p(n, n);
  for (int i = 0; i < n; ++i) {
    double out = w.row(i).sum();
    if (out > 0)
      p.row(i) = w.row(i) / out;
    else
      p.row(i).setConstant(1.0 / n);
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - d * p.transpose();
  Eigen::VectorXd b = Eigen::VectorXd::Constant(n, (1.0 - d) / n);
  return a.fullPivLu().solve(b);
}

Paths brute_force_paths(const Eigen::MatrixXd& w) {
  const int n = static_cast<int>(w.rows());
  // every simple path s -> t with its length
  struct Path {
    std::vector<int> nodes;
    double len;
  };
  std::vector<std::vector<std::vector<Path>>> all(n, std::vector<std::vector<Path>>(n));
  std::vector<int> stack;
  std::vector<bool> on(n, false);
  std::function<void(int, int, double)> dfs = [&](int s, int v, double len) {
    for (int u = 0; u < n; ++u) {
      if (u == v || on[u] || !(w(v, u) > 0)) continue;
      stack.push_back(u);
      on[u] = true;
      double l = len + 1.0 / w(v, u);
      all[s][u].push_back({stack, l});
      dfs(s, u, l);
      on[u] = false;
      stack.pop_back();
    }
  };
  for (int s = 0; s < n; ++s) {
    stack = {s};
    std::fill(on.begin(), on.end(), false);
    on[s] = true;
    dfs(s, s, 0.0);
  }

  Paths out{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  for (int s = 0; s < n; ++s) {
    int reach = 0;
    double total = 0;
    for (int t = 0; t < n; ++t) {
      if (t == s || all[s][t].empty()) continue;
      double best = std::numeric_limits<double>::infinity();
      for (const auto& p : all[s][t]) best = std::min(best, p.len);
      std::vector<const Path*> shortest;
      for (const auto& p : all[s][t])
        if (std::abs(p.len - best) <= 1e-12 * std::max(1.0, best)) shortest.push_back(&p);
      for (int v = 0; v < n; ++v) {
        if (v == s || v == t) continue;
        int through = 0;
        for (const Path* p : shortest)
          if (std::find(p->nodes.begin() + 1, p->nodes.end() - 1, v) != p->nodes.end() - 1) ++through;
        out.betweenness(v) += static_cast<double>(through) / static_cast<double>(shortest.size());
      }
      ++reach;
      total += best;
    }
    if (reach > 0 && n > 1) out.closeness(s) = (reach / double(n - 1)) * (reach / total);
  }
  return out;
}

namespace {
void max_normalise(Eigen::VectorXd& v) {
  double m = v.cwiseAbs().maxCoeff();
  if (m > 0) v /= m;
}
}  // namespace

Eigen::VectorXd eigenvector(const Eigen::MatrixXd& w_in) {
  Eigen::MatrixXd w = w_in;
  w.diagonal().setZero();
  const int n = static_cast<int>(w.rows());
  if ((w.array() == 0).all()) throw std::runtime_error("zero matrix");
  // Non-negative entries: W^n is exactly zero iff the graph has no cycle.
  Eigen::MatrixXd wn = Eigen::MatrixXd::Identity(n, n);
  for (int l = 0; l < n; ++l) wn = wn * w;
  if (!(wn.array() == 0).all()) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(w.transpose());
    int best = 0;
    for (int i = 1; i < n; ++i)
      if (es.eigenvalues()(i).real() > es.eigenvalues()(best).real()) best = i;
    Eigen::VectorXd v = es.eigenvectors().col(best).real();
    v = v.cwiseAbs();
    max_normalise(v);
    return v;
  }
  // Nilpotent: the longest walk length L satisfies (W^T)^L != 0 = (W^T)^(L+1).
  Eigen::MatrixXd pw = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd last;
  for (int l = 0; l <= n; ++l) {
    Eigen::VectorXd v = pw * Eigen::VectorXd::Ones(n);
    if ((v.array() == 0).all()) break;
    last = v;
    pw = w.transpose() * pw;
  }
  max_normalise(last);
  return last;
}

Hits hits_svd(const Eigen::MatrixXd& w_in) {
  Eigen::MatrixXd w = w_in;
  w.diagonal().setZero();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(w, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Hits h{svd.matrixU().col(0).cwiseAbs(), svd.matrixV().col(0).cwiseAbs()};
  max_normalise(h.hub);
  max_normalise(h.authority);
  return h;
}

namespace {
double log_normal(double x, double m, double s) {
  return -0.5 * std::log(2 * std::numbers::pi * s * s) - 0.5 * (x - m) * (x - m) / (s * s);
}
}  // namespace

double nb_log_posterior(const Eigen::MatrixXd& y, const NbParams& p) {
  const int n = static_cast<int>(y.rows());
  const double r = std::exp(p.log_r);
  double lp = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      double mu = std::exp(p.alpha(i) + p.beta(j) + p.Z.row(i).dot(p.W.row(j)));
      double k = y(i, j);
      lp += std::lgamma(k + r) - std::lgamma(r) - std::lgamma(k + 1) + r * std::log(r / (r + mu)) +
            k * std::log(mu / (r + mu));
    }
  for (int i = 0; i < n; ++i) lp += log_normal(p.alpha(i), 0, p.sa) + log_normal(p.beta(i), 0, p.sb);
  for (Eigen::Index i = 0; i < p.Z.size(); ++i) lp += log_normal(p.Z.data()[i], 0, p.sz);
  for (Eigen::Index i = 0; i < p.W.size(); ++i) lp += log_normal(p.W.data()[i], 0, p.sw);
  lp += log_normal(p.log_r, p.mu_r, p.sr);
  return lp;
}

Eigen::VectorXd bayes_regression_mean(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                      double sigma2) {
  const auto p = x.cols();
  Eigen::MatrixXd prec = x.transpose() * x / sigma2 + Eigen::MatrixXd::Identity(p, p);
  return prec.ldlt().solve(x.transpose() * y / sigma2);
}

Vote vote(const std::vector<int>& labels, const std::vector<bool>& commercial,
          const std::vector<int>& ranks) {
  std::vector<int> count(5, 0), ccount(5, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++count[labels[i]];
    if (commercial[i]) ++ccount[labels[i]];
  }
  int top = *std::max_element(count.begin(), count.end());
  std::vector<int> tied;
  for (int l = 0; l < 5; ++l)
    if (count[l] == top) tied.push_back(l);
  if (tied.size() == 1) return {tied[0], 0};
  int ctop = 0;
  for (int l : tied) ctop = std::max(ctop, ccount[l]);
  if (ctop > 0) {
    std::vector<int> c;
    for (int l : tied)
      if (ccount[l] == ctop) c.push_back(l);
    if (c.size() == 1) return {c[0], 1};
    tied = c;
  }
  int best = -1;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (std::find(tied.begin(), tied.end(), labels[i]) == tied.end()) continue;
    if (best < 0 || ranks[i] < ranks[best]) best = static_cast<int>(i);
  }
  return {labels[best], 2};
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::VectorXd x = a.array() - a.mean();
  Eigen::VectorXd y = b.array() - b.mean();
  return x.dot(y) / std::sqrt(x.squaredNorm() * y.squaredNorm());
}

}  // namespace oracle
