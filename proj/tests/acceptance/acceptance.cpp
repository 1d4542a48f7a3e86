// One PASS/FAIL line per acceptance criterion. Exit status is non-zero when
// any selected criterion fails.
#include <CLI11.hpp>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "classnet/amen.hpp"
#include "classnet/centrality.hpp"
#include "classnet/classification.hpp"
#include "classnet/data_model.hpp"
#include "classnet/error.hpp"
#include "classnet/mediation.hpp"
#include "classnet/network_builder.hpp"
#include "classnet/pipeline.hpp"
#include "classnet/reliability.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace classnet;
namespace fs = std::filesystem;
namespace am = classnet::amen;
namespace md = classnet::mediation;

namespace {

const fs::path kData = CLASSNET_DATA_DIR;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

struct Criterion {
  std::string name;
  std::function<void(Outcome&)> run;
};

std::string fmt(double v, int prec = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

// ---------------------------------------------------------------- entropy

void entropy_anchor(Outcome& o) {
  std::vector<double> p{4.0 / 7, 2.0 / 7, 1.0 / 7};
  double h = shannon_entropy(p);
  o.require(std::abs(h - 1.3788) <= 1e-3, "H(4/7,2/7,1/7) = 1.3788 +- 1e-3");
  o.detail << "H=" << fmt(h, 8);
}

// ---------------------------------------------------------------- kappa

void kappa_suite(Outcome& o) {
  using L = FineLabel;
  std::vector<L> a{L::EngageLow, L::EngageLow, L::EngageHigh, L::EngageHigh};
  std::vector<L> b{L::EngageLow, L::EngageHigh, L::EngageHigh, L::EngageHigh};
  std::vector<L> mixed{L::ExplainOwnIdea, L::EngageLow, L::EngageMedium, L::Uncorrelated, L::EngageLow};
  double perfect_c = cohen_kappa(mixed, mixed);
  double perfect_f = fleiss_kappa({{{3, 0}, {0, 3}}, 3});
  double cohen = cohen_kappa(a, b);
  double fleiss = fleiss_kappa({{{2, 1}, {1, 2}}, 3});
  o.require(perfect_c == 1.0 && perfect_f == 1.0, "perfect agreement gives 1");
  o.require(std::abs(cohen - 0.5) <= 1e-12, "Cohen example 0.5");
  o.require(std::abs(fleiss + 1.0 / 3.0) <= 1e-12, "Fleiss example -1/3");

  // one value inside each published band
  const std::pair<double, const char*> bands[] = {{-0.1, "Poor"},     {0.10, "Slight"},      {0.30, "Fair"},
                                                  {0.50, "Moderate"}, {0.70, "Substantial"}, {0.90, "Almost perfect"}};
  int ok = 0;
  for (auto [k, name] : bands) {
    bool hit = interpret_kappa(k) == name;
    o.require(hit, "band " + std::string(name));
    ok += hit;
  }
  o.detail << "cohen=" << fmt(cohen, 15) << " fleiss=" << fmt(fleiss, 15) << " bands=" << ok << "/6";
}

// ---------------------------------------------------------------- voting

std::vector<BackendDescriptor> seven_backends() {
  std::vector<BackendDescriptor> out;
  for (int i = 0; i < 7; ++i)
    out.push_back({"model" + std::to_string(i), i < 4 ? Tier::Commercial : Tier::OpenSource, i + 1, {}});
  return out;
}

void voting(Outcome& o) {
  auto be = seven_backends();
  std::vector<bool> commercial{true, true, true, true, false, false, false};
  std::vector<int> ranks{1, 2, 3, 4, 5, 6, 7};
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> pick(0, 4);
  int plurality = 0, agree = 0, perm_checks = 0, perm_ok = 0;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<int> labels(7);
    // Alternate full-range and two-label draws so ties are common.
    for (auto& l : labels) l = rep % 2 ? pick(rng) : pick(rng) % 2;
    std::map<std::string, FineLabel> resp;
    for (int i = 0; i < 7; ++i) resp[be[i].model_id] = static_cast<FineLabel>(labels[i]);
    auto got = aggregate_votes(resp, be);
    auto want = oracle::vote(labels, commercial, ranks);
    agree += static_cast<int>(got.final) == want.final && static_cast<int>(got.tie_break_used) == want.stage;

    std::vector<int> count(5, 0);
    for (int l : labels) ++count[l];
    int top = *std::max_element(count.begin(), count.end());
    if (std::count(count.begin(), count.end(), top) == 1) {
      ++plurality;
      o.require(count[static_cast<int>(got.final)] == top && got.tie_break_used == TieBreak::None,
                "unique plurality selected");
      auto shuffled = labels;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      std::map<std::string, FineLabel> p;
      for (int i = 0; i < 7; ++i) p[be[i].model_id] = static_cast<FineLabel>(shuffled[i]);
      ++perm_checks;
      perm_ok += aggregate_votes(p, be).final == got.final;
    }
  }
  o.require(agree == 200, "ladder agrees with oracle");
  o.require(perm_ok == perm_checks, "permutation invariance");

  // Constructed 3-3-1 ties where the commercial models lean one way.
  int constructed = 0, commercial_ok = 0;
  for (int rep = 0; rep < 50; ++rep) {
    int x = pick(rng), y = (x + 1 + pick(rng) % 4) % 5, z = (y + 1) % 5 == x ? (y + 2) % 5 : (y + 1) % 5;
    // commercial (models 0-3) vote x,x,y,z ; open models vote y,y,x
    std::vector<int> labels{x, x, y, z, y, y, x};
    std::shuffle(labels.begin(), labels.begin() + 4, rng);
    std::shuffle(labels.begin() + 4, labels.end(), rng);
    std::map<std::string, FineLabel> resp;
    for (int i = 0; i < 7; ++i) resp[be[i].model_id] = static_cast<FineLabel>(labels[i]);
    auto got = aggregate_votes(resp, be);
    ++constructed;
    commercial_ok += got.final == static_cast<FineLabel>(x) && got.tie_break_used == TieBreak::CommercialSubset;
  }
  o.require(commercial_ok == constructed, "commercial tie-break on constructed ties");
  o.detail << "oracle agreement " << agree << "/200, unique pluralities " << plurality << ", permutation "
           << perm_ok << "/" << perm_checks << ", commercial ties " << commercial_ok << "/" << constructed;
}

// ---------------------------------------------------------------- network

void network(Outcome& o) {
  auto roster = fixture::dialogue_roster();
  auto eoi = build_network(fixture::dialogue(), fixture::dialogue_labels(), roster, NetworkKind::EOI).graph;
  auto at = [&](const WeightedDigraph& g, const char* a, const char* b) {
    return g.weights(static_cast<Eigen::Index>(roster.require_index(a)),
                     static_cast<Eigen::Index>(roster.require_index(b)));
  };
  double nk = at(eoi, "Natalie", "Kimberly"), kn = at(eoi, "Kimberly", "Natalie");
  o.require(nk == 2.0, "Natalie->Kimberly = 2");
  o.require(kn == 1.0, "Kimberly->Natalie = 1");

  auto utterances = load_transcripts(kData / "toy" / "transcript.csv");
  auto toy_roster = load_roster(kData / "toy" / "roster.csv");
  std::set<std::string> lessons;
  for (const auto& u : utterances) lessons.insert(u.lesson_id);

  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> pick(0, 4);
  std::uniform_real_distribution<double> scale(0.1, 5.0);
  int linear_ok = 0, additive_ok = 0, diag_ok = 0;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<LabeledUtterance> labels;
    for (const auto& u : utterances)
      labels.push_back({u.utterance_id, static_cast<FineLabel>(pick(rng)), "ENSEMBLE", {}, {}, {}});
    for (NetworkKind kind : {NetworkKind::EXP, NetworkKind::EOI}) {
      auto base = build_network(utterances, labels, toy_roster, kind).graph.weights;

      EdgeRule scaled;
      double s = scale(rng);
      for (auto& [l, w] : scaled.weights) w *= s;
      auto sw = build_network(utterances, labels, toy_roster, kind, scaled).graph.weights;
      linear_ok += (sw - s * base).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + base.maxCoeff() * s);

      Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(base.rows(), base.cols());
      for (const auto& lesson : lessons) {
        std::vector<Utterance> part;
        std::vector<LabeledUtterance> part_labels;
        for (std::size_t i = 0; i < utterances.size(); ++i) {
          if (utterances[i].lesson_id != lesson) continue;
          part.push_back(utterances[i]);
          part_labels.push_back(labels[i]);
        }
        sum += build_network(part, part_labels, toy_roster, kind).graph.weights;
      }
      additive_ok += (sum - base).cwiseAbs().maxCoeff() == 0.0;
      diag_ok += base.diagonal().isZero(0.0) && sw.diagonal().isZero(0.0);
    }
  }
  o.require(linear_ok == 200, "weights scale linearly with the rule");
  o.require(additive_ok == 200, "weights add over lessons");
  o.require(diag_ok == 200, "zero diagonal");
  o.detail << "N->K=" << nk << " K->N=" << kn << "; linear " << linear_ok << "/200, additive " << additive_ok
           << "/200, zero diagonal " << diag_ok << "/200";
}

// ---------------------------------------------------------------- centrality

double rel_gap(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) return INFINITY;
  return ((a - b).array().abs() / (1.0 + b.array().abs())).maxCoeff();
}

void centrality_measures(Outcome& o) {
  namespace c = classnet::centrality;
  std::mt19937_64 rng(31337);
  std::uniform_int_distribution<int> size(2, 6);
  std::uniform_real_distribution<double> density(0.15, 0.9);
  const char* names[] = {"pagerank", "indegree", "outdegree", "betweenness", "closeness", "eigenvector", "hub", "authority"};
  double worst[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  double worst_sum = 0;
  int degenerate = 0;
  for (int rep = 0; rep < 100; ++rep) {
    auto w = oracle::random_digraph(size(rng), density(rng), rng);
    auto pr = c::pagerank(w);
    worst_sum = std::max(worst_sum, std::abs(pr.sum() - 1.0));
    worst[0] = std::max(worst[0], rel_gap(pr, oracle::pagerank(w)));
    auto deg = c::degrees(w);
    worst[1] = std::max(worst[1], rel_gap(deg.in, w.colwise().sum().transpose()));
    worst[2] = std::max(worst[2], rel_gap(deg.out, w.rowwise().sum()));
    auto pc = c::path_centralities(w);
    auto bf = oracle::brute_force_paths(w);
    worst[3] = std::max(worst[3], rel_gap(pc.betweenness, bf.betweenness));
    worst[4] = std::max(worst[4], rel_gap(pc.closeness, bf.closeness));
    if (w.isZero(0.0)) {
      ++degenerate;
      bool threw = false;
      try {
        c::eigenvector(w);
      } catch (const DegenerateError&) {
        threw = true;
      }
      o.require(threw, "zero graph is degenerate");
      continue;
    }
    worst[5] = std::max(worst[5], rel_gap(c::eigenvector(w), oracle::eigenvector(w)));
    auto h = c::hits(w);
    auto hs = oracle::hits_svd(w);
    worst[6] = std::max(worst[6], rel_gap(h.hub, hs.hub));
    worst[7] = std::max(worst[7], rel_gap(h.authority, hs.authority));
  }
  for (int k = 0; k < 8; ++k) {
    o.require(worst[k] <= 1e-6, std::string(names[k]) + " within 1e-6");
    o.detail << names[k] << "=" << fmt(worst[k], 2) << " ";
  }
  o.require(worst_sum <= 1e-9, "pagerank sums to 1");
  o.detail << "| max |sum pr - 1|=" << fmt(worst_sum, 2);
  if (degenerate) o.detail << " (" << degenerate << " empty graphs)";
}

// ---------------------------------------------------------------- amen

oracle::NbParams to_oracle(const am::AmenState& s, const am::Priors& p) {
  oracle::NbParams o;
  o.alpha = s.alpha;
  o.beta = s.beta;
  o.Z = s.Z;
  o.W = s.W;
  o.log_r = s.log_r;
  o.sa = p.sigma_alpha;
  o.sb = p.sigma_beta;
  o.sz = p.sigma_z;
  o.sw = p.sigma_w;
  o.mu_r = p.mu_r;
  o.sr = p.sigma_r;
  return o;
}

// State <-> flat vector [alpha, beta, Z, W, log_r].
Eigen::VectorXd flatten(const am::AmenState& s) {
  Eigen::VectorXd v(s.alpha.size() + s.beta.size() + s.Z.size() + s.W.size() + 1);
  v << s.alpha, s.beta, s.Z.reshaped(), s.W.reshaped(), s.log_r;
  return v;
}

am::AmenState unflatten(const Eigen::VectorXd& v, int n, int d) {
  am::AmenState s;
  s.alpha = v.segment(0, n);
  s.beta = v.segment(n, n);
  s.Z = v.segment(2 * n, n * d).reshaped(n, d);
  s.W = v.segment(2 * n + n * d, n * d).reshaped(n, d);
  s.log_r = v(v.size() - 1);
  return s;
}

void amen_gradients(Outcome& o) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> size(3, 8), dim(1, 3);
  std::uniform_real_distribution<double> unif(-0.5, 1.5), prior(0.5, 2.0);
  double worst = 0, worst_latent = 0;
  for (int rep = 0; rep < 20; ++rep) {
    int n = size(rng), d = dim(rng);
    auto truth = am::random_state(n, d, 0.5, 0.8, unif(rng), rng);
    truth.alpha.array() += 1.0;
    auto y = am::simulate(truth, rng);
    // Evaluate away from the generating point.
    auto at = am::random_state(n, d, 0.7, 0.6, unif(rng), rng);
    am::Priors priors;
    priors.sigma_alpha = prior(rng);
    priors.sigma_z = prior(rng);
    priors.sigma_w = prior(rng);
    priors.mu_r = unif(rng);
    priors.sigma_r = prior(rng);

    auto f = [&](const Eigen::VectorXd& v) { return oracle::nb_log_posterior(y, to_oracle(unflatten(v, n, d), priors)); };
    Eigen::VectorXd fd = oracle::finite_difference(f, flatten(at), 1e-5);
    Eigen::VectorXd g = flatten(am::grad_log_posterior(y, at, priors));
    worst = std::max(worst, (g - fd).norm() / fd.norm());

    // per-row latent gradients used by the sampler
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd gz = am::grad_latent(y, at, priors, am::Role::Sender, i);
      Eigen::VectorXd gw = am::grad_latent(y, at, priors, am::Role::Receiver, i);
      Eigen::VectorXd fz(d), fw(d);
      for (int k = 0; k < d; ++k) {
        fz(k) = fd(2 * n + k * n + i);
        fw(k) = fd(2 * n + n * d + k * n + i);
      }
      worst_latent = std::max(worst_latent, (gz - fz).norm() / std::max(fz.norm(), 1e-3));
      worst_latent = std::max(worst_latent, (gw - fw).norm() / std::max(fw.norm(), 1e-3));
    }
  }
  o.require(worst < 1e-5, "full gradient rel. err < 1e-5");
  o.require(worst_latent < 1e-5, "latent row gradients rel. err < 1e-5");
  o.detail << "max rel err full=" << fmt(worst, 3) << " rows=" << fmt(worst_latent, 3);
}

void amen_recovery(Outcome& o) {
  std::mt19937_64 rng(4242);
  const int n = 10, d = 2;
  auto truth = am::random_state(n, d, 0.5, 1.0, std::log(10.0), rng);
  truth.alpha.array() += 1.0;
  auto y = am::simulate(truth, rng);

  am::AmenConfig cfg;
  cfg.dim = d;
  cfg.iterations = 5000;
  cfg.burn_in = 1000;
  cfg.chains = 3;
  cfg.seed = 17;
  auto chains = am::fit(y, cfg);
  auto rate = am::posterior_mean_rate(chains);
  Eigen::MatrixXd mu = truth.log_mean().array().exp();
  std::vector<double> a, b;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) {
        a.push_back(rate(i, j));
        b.push_back(mu(i, j));
      }
  double r = oracle::pearson(Eigen::Map<Eigen::VectorXd>(a.data(), a.size()), Eigen::Map<Eigen::VectorXd>(b.data(), b.size()));
  o.require(r >= 0.9, "Pearson r >= 0.9");

  auto mc = am::multi_chain_reference(chains, y);
  double worst = 0;
  std::size_t draws = 0;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const auto& raw = chains[c];
    const auto& aligned = mc.aligned[c];
    for (std::size_t k = 0; k < raw.size(); ++k) {
      Eigen::MatrixXd before = raw.draws[k].Z * raw.draws[k].W.transpose();
      Eigen::MatrixXd after = aligned.draws[k].Z * aligned.draws[k].W.transpose();
      worst = std::max(worst, (before - after).cwiseAbs().maxCoeff());
      ++draws;
    }
  }
  o.require(worst <= 1e-10, "alignment preserves z_i'w_j");
  o.detail << "pearson=" << fmt(r, 4) << " max |dZW'|=" << fmt(worst, 3) << " over " << draws << " draws";
}

void dimension_selection(Outcome& o) {
  const int seeds = 20, true_dim = 3, n = 20;
  const std::vector<int> dims{2, 3, 4, 5};
  int dic_hits = 0, waic_hits = 0, bic_hits = 0;
  std::ostringstream picks;
  for (int s = 0; s < seeds; ++s) {
    std::mt19937_64 rng(1000 + s);
    // log r = 1 keeps the truth inside the default prior on log r.
    auto truth = am::random_state(n, true_dim, 0.4, 1.0, 1.0, rng);
    truth.alpha.array() += 0.5;
    auto y = am::simulate(truth, rng);
    am::AmenConfig cfg;
    cfg.iterations = 3000;
    cfg.burn_in = 1000;
    cfg.thin = 2;
    cfg.chains = 2;
    cfg.seed = 500 + s;
    auto rows = am::compare_dimensions(y, cfg, dims);
    auto argmin = [&](auto key) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < rows.size(); ++i)
        if (key(rows[i].criteria) < key(rows[best].criteria)) best = i;
      return rows[best].dim;
    };
    int by_dic = argmin([](const am::InformationCriteria& c) { return c.dic; });
    int by_waic = argmin([](const am::InformationCriteria& c) { return c.waic; });
    bic_hits += argmin([](const am::InformationCriteria& c) { return c.bic; }) == true_dim;
    dic_hits += by_dic == true_dim;
    waic_hits += by_waic == true_dim;
    picks << by_dic << "/" << by_waic << " ";
  }
  double best = std::max(dic_hits, waic_hits) / double(seeds);
  o.require(best >= 0.8, "true dimension IC-minimal in >= 80% of seeds");
  o.detail << "DIC " << dic_hits << "/" << seeds << ", WAIC " << waic_hits << "/" << seeds << ", BIC " << bic_hits << "/" << seeds << " (dic/waic picks: "
           << picks.str() << ")";
}

// ---------------------------------------------------------------- mediation

struct Truth {
  Eigen::Vector2d a0{0.5, -1.0}, a1{1.5, -2.0}, a2{1.0, 0.8};
  double b0 = 2.0, b1 = -1.5, b4 = 1.5;
  Eigen::Vector2d b2{2.0, 1.2}, b3{0.8, -1.0};
};

md::MediationDesign draw_design(int n, const Truth& t, bool null_x, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  std::bernoulli_distribution coin(0.5);
  md::MediationDesign d;
  d.x.resize(n);
  d.c.resize(n);
  d.m.resize(n, 2);
  d.y.resize(n);
  for (int i = 0; i < n; ++i) {
    d.ids.push_back("s" + std::to_string(i));
    d.x(i) = coin(rng);
    d.c(i) = coin(rng);
    double x = null_x ? 0.0 : d.x(i);
    for (int k = 0; k < 2; ++k) d.m(i, k) = t.a0(k) + t.a1(k) * x + t.a2(k) * d.c(i) + z(rng);
    d.y(i) = t.b0 + t.b1 * x + t.b4 * d.c(i) + 0.3 * z(rng);
    for (int k = 0; k < 2; ++k) d.y(i) += t.b2(k) * d.m(i, k) + t.b3(k) * x * d.m(i, k);
  }
  d.mediator_names = {"m1", "m2"};
  return d;
}

Eigen::VectorXd ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  return x.colPivHouseholderQr().solve(y);
}

void mediation_effects(Outcome& o) {
  md::Coefficients hand;
  hand.a0 = Eigen::VectorXd::Constant(1, 0.5);
  hand.a1 = Eigen::VectorXd::Constant(1, 1.0);
  hand.a2 = Eigen::VectorXd::Constant(1, 0.0);
  hand.b1 = -1.0;
  hand.b2 = Eigen::VectorXd::Constant(1, 2.0);
  hand.b3 = Eigen::VectorXd::Constant(1, 0.5);
  auto e = md::effects(hand, 1.0, 0.0, 0.0);
  o.require(e.nde == -0.75 && e.nie == 2.5 && e.te == 1.75, "hand example exact");

  Truth t;
  std::mt19937_64 rng(5150);
  auto d = draw_design(500, t, false, rng);
  auto post = md::fit_mediation(d, 3000, 500, 61);
  auto draws = md::effects(post);
  double identity = (draws.te - draws.nde - draws.nie).cwiseAbs().maxCoeff();
  o.require(identity <= 1e-12, "TE = NDE + NIE per draw");

  // Posterior means against the least-squares fit of each regression.
  const int n = d.n();
  Eigen::MatrixXd xm(n, 3);
  xm << Eigen::VectorXd::Ones(n), d.x, d.c;
  Eigen::MatrixXd xo(n, 7);
  xo << Eigen::VectorXd::Ones(n), d.x, d.m, d.m.array().colwise() * d.x.array(), d.c;
  double worst = 0;
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd b = ols(xm, d.m.col(k));
    Eigen::VectorXd mean = post.mediator_models[k].coef.colwise().mean();
    worst = std::max(worst, (mean - b).norm() / b.norm());
  }
  Eigen::VectorXd bo = ols(xo, d.y);
  Eigen::VectorXd mo = post.outcome_model.coef.colwise().mean();
  worst = std::max(worst, (mo - bo).norm() / bo.norm());
  o.require(worst < 0.05, "posterior means within 5% of least squares");

  // The generating coefficients, for the record.
  Eigen::VectorXd truth_o(7);
  truth_o << t.b0, t.b1, t.b2, t.b3, t.b4;
  double truth_gap = (mo - truth_o).norm() / truth_o.norm();

  int covered = 0;
  const int null_seeds = 50;
  for (int s = 0; s < null_seeds; ++s) {
    std::mt19937_64 r(9000 + s);
    auto nd = draw_design(100, t, true, r);
    auto np = md::fit_mediation(nd, 1500, 500, 300 + s);
    auto te = md::effects(np).te;
    covered += md::quantile(te, 0.025) <= 0.0 && 0.0 <= md::quantile(te, 0.975);
  }
  o.require(covered >= 45, "null TE interval covers 0 in >= 90% of seeds");
  o.detail << "identity=" << fmt(identity, 2) << " ls rel err=" << fmt(worst, 3) << " (truth " << fmt(truth_gap, 3)
           << ") null coverage " << covered << "/" << null_seeds;
}

// ---------------------------------------------------------------- end to end

void end_to_end(Outcome& o) {
  auto base = fs::temp_directory_path() / ("classnet_accept_" + std::to_string(::getpid()));
  fs::remove_all(base);
  auto cfg_a = pipeline::PipelineConfig::load(kData / "toy" / "pipeline.json");
  auto cfg_b = cfg_a;
  cfg_a.out_dir = base / "a";
  cfg_b.out_dir = base / "b";
  auto t0 = std::chrono::steady_clock::now();
  auto ma = pipeline::run(cfg_a);
  auto mb = pipeline::run(cfg_b);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::size_t files = 0, same = 0;
  for (const auto& sa : ma.stages) {
    const auto* sb = mb.stage(sa.name);
    for (const auto& [path, digest] : sa.outputs) {
      ++files;
      same += sb && sb->outputs.count(path) && sb->outputs.at(path) == digest;
    }
  }
  bool tables = fs::exists(cfg_a.out_dir / "mediation" / "exp.csv") && fs::exists(cfg_a.out_dir / "mediation" / "eoi.csv");
  o.require(tables, "mediation tables written");
  o.require(files > 0 && same == files, "identical outputs across runs");
  o.require(secs < 120.0, "two runs under 2 minutes");
  o.detail << same << "/" << files << " outputs identical, " << fmt(secs, 3) << " s for two runs";
  fs::remove_all(base);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"classnet acceptance suite"};
  std::vector<std::string> only, skip;
  app.add_option("--only", only, "run just these criteria");
  app.add_option("--skip", skip, "skip these criteria");
  std::vector<std::string> known_red;
  app.add_option("--known-red", known_red,
                 "criteria recorded as not attained; if only these fail, exit with the skip code");
  bool list = false;
  app.add_flag("--list", list, "print criterion names");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all = {
      {"entropy_anchor", entropy_anchor},       {"kappa_suite", kappa_suite},
      {"voting", voting},                       {"network_builder", network},
      {"centrality", centrality_measures},               {"amen_gradients", amen_gradients},
      {"amen_recovery", amen_recovery},         {"dimension_selection", dimension_selection},
      {"mediation", mediation_effects},                 {"end_to_end_smoke", end_to_end},
  };
  if (list) {
    for (const auto& c : all) std::cout << c.name << "\n";
    return 0;
  }
  auto selected = [&](const std::string& name) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) return false;
    return std::find(skip.begin(), skip.end(), name) == skip.end();
  };

  int failures = 0, known_failures = 0;
  for (const auto& c : all) {
    if (!selected(c.name)) continue;
    Outcome o;
    auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "[exception: " << e.what() << "]";
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) {
      bool known = std::find(known_red.begin(), known_red.end(), c.name) != known_red.end();
      (known ? known_failures : failures) += 1;
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << " (" << fmt(secs, 3) << " s): " << o.detail.str()
              << std::endl;
  }
  if (failures > 0) return 1;
  // 77: ctest reports the run as skipped, never as passed.
  return known_failures > 0 ? 77 : 0;
}
