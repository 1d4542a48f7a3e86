#include "classnet/centrality.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "classnet/csv.hpp"
#include "classnet/data_model.hpp"
#include "classnet/error.hpp"

namespace classnet::centrality {

namespace {

Eigen::MatrixXd off_diagonal(const Eigen::MatrixXd& w) {
  if (w.rows() != w.cols()) throw ArgumentError("weight matrix is not square");
  if (!w.allFinite()) throw ArgumentError("weight matrix has non-finite entries");
  if ((w.array() < 0.0).any()) throw ArgumentError("weight matrix has negative entries");
  Eigen::MatrixXd m = w;
  m.diagonal().setZero();
  return m;
}

bool has_cycle(const Eigen::MatrixXd& w) {
  const auto n = w.rows();
  std::vector<int> state(static_cast<std::size_t>(n), 0);  // 0 new, 1 on stack, 2 done
  std::vector<std::pair<Eigen::Index, Eigen::Index>> stack;
  for (Eigen::Index root = 0; root < n; ++root) {
    if (state[root]) continue;
    stack.push_back({root, 0});
    state[root] = 1;
    while (!stack.empty()) {
      auto& [v, next] = stack.back();
      if (next == n) {
        state[v] = 2;
        stack.pop_back();
        continue;
      }
      Eigen::Index u = next++;
      if (w(v, u) <= 0.0) continue;
      if (state[u] == 1) return true;
      if (state[u] == 0) {
        state[u] = 1;
        stack.push_back({u, 0});
      }
    }
  }
  return false;
}

// Longest path length (in edges) of an acyclic graph.
int longest_path(const Eigen::MatrixXd& w) {
  const auto n = w.rows();
  std::vector<int> len(static_cast<std::size_t>(n), 0);
  // Relaxation n times suffices for a DAG.
  for (Eigen::Index round = 0; round < n; ++round) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (w(i, j) > 0.0 && len[j] < len[i] + 1) {
          len[j] = len[i] + 1;
          changed = true;
        }
    if (!changed) break;
  }
  return *std::max_element(len.begin(), len.end());
}

void max_normalise(Eigen::VectorXd& v) {
  double m = v.maxCoeff();
  if (m > 0.0) v /= m;
}

}  // namespace

Eigen::VectorXd pagerank(const Eigen::MatrixXd& w_in, double damping, double tol, int max_iter) {
  Eigen::MatrixXd w = off_diagonal(w_in);
  const auto n = w.rows();
  if (n == 0) throw ArgumentError("pagerank: empty graph");
  if (!(damping >= 0.0 && damping < 1.0)) throw ArgumentError("pagerank: damping must lie in [0, 1)");
  const double nd = static_cast<double>(n);
  Eigen::VectorXd out = w.rowwise().sum();
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / nd);
  for (int it = 0; it < max_iter; ++it) {
    double dangling = 0.0;
    Eigen::VectorXd flow = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (out(i) > 0.0) flow += (x(i) / out(i)) * w.row(i).transpose();
      else dangling += x(i);
    }
    Eigen::VectorXd next = Eigen::VectorXd::Constant(n, (1.0 - damping) / nd + damping * dangling / nd) +
                           damping * flow;
    next /= next.sum();
    double change = (next - x).lpNorm<1>();
    x = std::move(next);
    if (change < tol) return x;
  }
  throw ConvergenceError("pagerank did not converge");
}

HubsAuthorities hits(const Eigen::MatrixXd& w_in, double tol, int max_iter) {
  Eigen::MatrixXd w = off_diagonal(w_in);
  if (w.size() == 0 || w.maxCoeff() <= 0.0) throw DegenerateError("hits: graph has no edges");
  Eigen::VectorXd hub = Eigen::VectorXd::Ones(w.rows());
  Eigen::VectorXd auth = Eigen::VectorXd::Zero(w.rows());
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd a = w.transpose() * hub;
    max_normalise(a);
    Eigen::VectorXd h = w * a;
    max_normalise(h);
    double change = std::max((a - auth).cwiseAbs().maxCoeff(), (h - hub).cwiseAbs().maxCoeff());
    auth = std::move(a);
    hub = std::move(h);
    if (change < tol) return {hub, auth};
  }
  throw ConvergenceError("hits did not converge");
}

Degrees degrees(const Eigen::MatrixXd& w_in) {
  Eigen::MatrixXd w = off_diagonal(w_in);
  return {w.colwise().sum().transpose(), w.rowwise().sum()};
}

PathCentralities path_centralities(const Eigen::MatrixXd& w_in) {
  Eigen::MatrixXd w = off_diagonal(w_in);
  const auto n = w.rows();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  PathCentralities pc;
  pc.betweenness = Eigen::VectorXd::Zero(n);
  pc.closeness = Eigen::VectorXd::Zero(n);

  std::vector<double> dist(static_cast<std::size_t>(n));
  std::vector<double> sigma(static_cast<std::size_t>(n));
  std::vector<double> delta(static_cast<std::size_t>(n));
  std::vector<bool> done(static_cast<std::size_t>(n));
  std::vector<std::vector<Eigen::Index>> preds(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> order;

  for (Eigen::Index s = 0; s < n; ++s) {
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(sigma.begin(), sigma.end(), 0.0);
    std::fill(delta.begin(), delta.end(), 0.0);
    std::fill(done.begin(), done.end(), false);
    for (auto& p : preds) p.clear();
    order.clear();
    dist[s] = 0.0;
    sigma[s] = 1.0;

    for (;;) {
      Eigen::Index u = -1;
      for (Eigen::Index v = 0; v < n; ++v) {
        if (!done[v] && dist[v] < kInf && (u < 0 || dist[v] < dist[u])) u = v;
      }
      if (u < 0) break;
      done[u] = true;
      order.push_back(u);
      for (Eigen::Index v = 0; v < n; ++v) {
        if (w(u, v) <= 0.0 || done[v]) continue;
        double alt = dist[u] + 1.0 / w(u, v);
        double eps = 1e-12 * std::max(1.0, alt);
        if (alt < dist[v] - eps) {
          dist[v] = alt;
          sigma[v] = sigma[u];
          preds[v].assign(1, u);
        } else if (std::abs(alt - dist[v]) <= eps) {
          sigma[v] += sigma[u];
          preds[v].push_back(u);
        }
      }
    }

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Eigen::Index v = *it;
      for (Eigen::Index p : preds[v]) delta[p] += sigma[p] / sigma[v] * (1.0 + delta[v]);
      if (v != s) pc.betweenness(v) += delta[v];
    }

    double total = 0.0;
    double reach = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (t != s && dist[t] < kInf) {
        total += dist[t];
        reach += 1.0;
      }
    }
    if (reach > 0.0 && total > 0.0) {
      pc.closeness(s) = (reach / static_cast<double>(n - 1)) * (reach / total);
    }
  }
  return pc;
}

Eigen::VectorXd eigenvector(const Eigen::MatrixXd& w_in, double tol, int max_iter) {
  Eigen::MatrixXd w = off_diagonal(w_in);
  if (w.size() == 0 || w.maxCoeff() <= 0.0) throw DegenerateError("eigenvector: graph has no edges");
  const auto n = w.rows();
  Eigen::MatrixXd wt = w.transpose();

  if (!has_cycle(w)) {
    int len = longest_path(w);
    Eigen::VectorXd x = Eigen::VectorXd::Ones(n);
    for (int k = 0; k < len; ++k) {
      x = wt * x;
      max_normalise(x);
    }
    return x;
  }

  Eigen::VectorXd x = Eigen::VectorXd::Ones(n);
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd next = x + wt * x;
    max_normalise(next);
    double change = (next - x).cwiseAbs().maxCoeff();
    x = std::move(next);
    if (change < tol) return x;
  }
  throw ConvergenceError("eigenvector centrality did not converge");
}

CentralityTable compute_all(const std::vector<std::string>& ids, const Eigen::MatrixXd& w) {
  CentralityTable t;
  t.node_ids = ids;
  const auto n = w.rows();
  t.pagerank = pagerank(w);
  auto d = degrees(w);
  t.indegree = d.in;
  t.outdegree = d.out;
  auto pc = path_centralities(w);
  t.betweenness = pc.betweenness;
  t.closeness = pc.closeness;
  try {
    t.eigenvector = eigenvector(w);
  } catch (const Error& e) {
    t.eigenvector = Eigen::VectorXd::Zero(n);
    t.warnings.push_back(std::string("eigenvector: ") + e.what());
  }
  try {
    auto ha = hits(w);
    t.hub = ha.hub;
    t.authority = ha.authority;
  } catch (const Error& e) {
    t.hub = t.authority = Eigen::VectorXd::Zero(n);
    t.warnings.push_back(std::string("hits: ") + e.what());
  }
  return t;
}

std::string table_csv(const CentralityTable& t) {
  std::ostringstream out;
  csv::write_row(out, {"student", "Pagerank", "Indegree", "Outdegree", "Betweenness", "Closeness",
                       "Eigen", "Hub", "Authority"});
  auto fmt = [](double v) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(4);
    s << v;
    return s.str();
  };
  // Whole numbers stay whole; split shortest-path credit keeps 4 decimals.
  auto fmt_count = [&fmt](double v) {
    if (v != std::floor(v)) return fmt(v);
    std::ostringstream s;
    s << static_cast<long long>(v);
    return s.str();
  };
  for (std::size_t i = 0; i < t.node_ids.size(); ++i) {
    auto k = static_cast<Eigen::Index>(i);
    csv::write_row(out, {t.node_ids[i], fmt(t.pagerank(k)), fmt_count(t.indegree(k)),
                         fmt_count(t.outdegree(k)), fmt_count(t.betweenness(k)), fmt(t.closeness(k)),
                         fmt(t.eigenvector(k)), fmt(t.hub(k)), fmt(t.authority(k))});
  }
  return out.str();
}

void write_table_csv(const std::filesystem::path& path, const CentralityTable& table) {
  write_file(path, table_csv(table));
}

}  // namespace classnet::centrality
