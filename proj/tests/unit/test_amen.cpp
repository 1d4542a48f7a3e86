#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <random>

#include "classnet/amen.hpp"
#include "classnet/error.hpp"
#include "oracles.hpp"

using namespace classnet;
namespace am = classnet::amen;

namespace {

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

struct Problem {
  am::AmenState truth;
  Eigen::MatrixXd y;
};

Problem problem(int n, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Problem p;
  p.truth = am::random_state(n, d, 0.5, 0.7, std::log(3.0), rng);
  p.y = am::simulate(p.truth, rng);
  return p;
}

}  // namespace

TEST_CASE("nb pmf against lgamma") {
  for (double y : {0.0, 1.0, 7.0})
    for (double mu : {0.3, 4.0})
      for (double r : {0.5, 10.0}) {
        double want = std::lgamma(y + r) - std::lgamma(r) - std::lgamma(y + 1) + r * std::log(r / (r + mu)) +
                      y * std::log(mu / (r + mu));
        CHECK(am::nb_logpmf(y, mu, r) == doctest::Approx(want).epsilon(1e-12));
      }
}

TEST_CASE("log posterior matches the oracle") {
  auto pr = problem(5, 2, 1);
  am::Priors priors;
  priors.sigma_z = 0.8;
  priors.mu_r = 0.5;
  CHECK(am::log_posterior(pr.y, pr.truth, priors) ==
        doctest::Approx(oracle::nb_log_posterior(pr.y, to_oracle(pr.truth, priors))).epsilon(1e-10));
  CHECK(am::pointwise_loglik(pr.y, pr.truth).size() == 20);
  CHECK(am::pointwise_loglik(pr.y, pr.truth).sum() == doctest::Approx(am::nb_loglik(pr.y, pr.truth)));
}

TEST_CASE("latent gradients match finite differences") {
  auto pr = problem(6, 3, 2);
  am::Priors priors;
  for (am::Role role : {am::Role::Sender, am::Role::Receiver}) {
    for (int i = 0; i < 6; ++i) {
      auto g = am::grad_latent(pr.y, pr.truth, priors, role, i);
      auto f = [&](const Eigen::VectorXd& x) {
        auto s = pr.truth;
        (role == am::Role::Sender ? s.Z : s.W).row(i) = x;
        return oracle::nb_log_posterior(pr.y, to_oracle(s, priors));
      };
      Eigen::VectorXd x0 = role == am::Role::Sender ? Eigen::VectorXd(pr.truth.Z.row(i)) : Eigen::VectorXd(pr.truth.W.row(i));
      auto fd = oracle::finite_difference(f, x0);
      CHECK((g - fd).norm() <= 1e-5 * std::max(1.0, fd.norm()));
    }
  }
}

TEST_CASE("scalar gradients match finite differences") {
  auto pr = problem(5, 2, 3);
  am::Priors priors;
  auto g = am::grad_log_posterior(pr.y, pr.truth, priors);
  auto f_r = [&](const Eigen::VectorXd& x) {
    auto s = pr.truth;
    s.log_r = x(0);
    return oracle::nb_log_posterior(pr.y, to_oracle(s, priors));
  };
  auto fd = oracle::finite_difference(f_r, Eigen::VectorXd::Constant(1, pr.truth.log_r));
  CHECK(g.log_r == doctest::Approx(fd(0)).epsilon(1e-6));
  auto f_a = [&](const Eigen::VectorXd& x) {
    auto s = pr.truth;
    s.alpha = x;
    return oracle::nb_log_posterior(pr.y, to_oracle(s, priors));
  };
  CHECK((g.alpha - oracle::finite_difference(f_a, pr.truth.alpha)).norm() < 1e-5);
}

TEST_CASE("validate counts") {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(2, 2);
  y(0, 1) = 1.5;
  CHECK_THROWS_AS(am::validate_counts(y), ArgumentError);
  y(0, 1) = -1;
  CHECK_THROWS_AS(am::validate_counts(y), ArgumentError);
  CHECK_THROWS_AS(am::validate_counts(Eigen::MatrixXd::Zero(2, 3)), ArgumentError);
}

TEST_CASE("config validation") {
  am::AmenConfig c;
  c.burn_in = c.iterations;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  c = {};
  c.dim = 0;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
}

TEST_CASE("mala step reports a finite ratio") {
  auto pr = problem(4, 2, 4);
  std::mt19937_64 rng(9);
  auto s = pr.truth;
  auto res = am::mala_step(pr.y, s, {}, am::Role::Sender, 0, 0.05, rng);
  CHECK(std::isfinite(res.log_ratio));
  CHECK(std::isfinite(res.correction));
  CHECK(s.finite());
}

TEST_CASE("procrustes recovers a rotation and keeps inner products") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd z(6, 2), w(6, 2);
  for (int i = 0; i < 6; ++i)
    for (int k = 0; k < 2; ++k) {
      z(i, k) = n01(rng);
      w(i, k) = n01(rng);
    }
  double th = 0.7;
  Eigen::Matrix2d rot;
  rot << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  am::AmenState s;
  s.alpha = s.beta = Eigen::VectorXd::Zero(6);
  s.Z = z * rot;
  s.W = w * rot;
  Eigen::MatrixXd before = s.Z * s.W.transpose();
  auto r = am::align_state(s, z, w);
  CHECK((s.Z - z).norm() < 1e-10);
  CHECK((s.W - w).norm() < 1e-10);
  CHECK((s.Z * s.W.transpose() - before).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((r.transpose() * r - Eigen::Matrix2d::Identity()).norm() < 1e-12);
}

TEST_CASE("short fit, archive round trip, criteria") {
  auto pr = problem(6, 2, 7);
  am::AmenConfig cfg;
  cfg.iterations = 300;
  cfg.burn_in = 100;
  cfg.thin = 2;
  cfg.chains = 2;
  cfg.seed = 42;
  auto chains = am::fit(pr.y, cfg);
  REQUIRE(chains.size() == 2);
  CHECK(chains[0].size() == 100);
  CHECK(chains[1].seed == 43);

  auto again = am::fit(pr.y, cfg);
  CHECK(again[0].logpost == chains[0].logpost);

  auto ic = am::information_criteria(chains[0], pr.y);
  CHECK(std::isfinite(ic.dic));
  CHECK(std::isfinite(ic.waic));
  CHECK(ic.p_waic >= 0);

  auto path = std::filesystem::temp_directory_path() / "classnet_samples.jsonl";
  am::write_samples(path, chains);
  auto back = am::read_samples(path, pr.y);
  REQUIRE(back.size() == 2);
  CHECK(back[1].size() == chains[1].size());
  CHECK(back[1].draws[5].Z.isApprox(chains[1].draws[5].Z, 1e-12));
  CHECK(back[0].pointwise.isApprox(chains[0].pointwise, 1e-9));
  std::filesystem::remove(path);

  auto mc = am::multi_chain_reference(chains, pr.y);
  CHECK(mc.pooled.mediators().cols() == 4);
  auto rate = am::posterior_mean_rate(chains);
  CHECK(rate.diagonal().isZero());
}

TEST_CASE("parameter count") { CHECK(am::parameter_count(10, 2) == 2 * 10 + 2 * 10 * 2 + 1); }
