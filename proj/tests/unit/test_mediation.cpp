#include "doctest.h"

#include <random>

#include "classnet/error.hpp"
#include "classnet/mediation.hpp"
#include "oracles.hpp"

using namespace classnet;
namespace md = classnet::mediation;

namespace {

md::Coefficients hand_coefficients() {
  md::Coefficients c;
  c.a0 = Eigen::VectorXd::Constant(1, 0.5);
  c.a1 = Eigen::VectorXd::Constant(1, 1.0);
  c.a2 = Eigen::VectorXd::Constant(1, 0.0);
  c.b1 = -1.0;
  c.b2 = Eigen::VectorXd::Constant(1, 2.0);
  c.b3 = Eigen::VectorXd::Constant(1, 0.5);
  return c;
}

md::MediationDesign synthetic(int n, int k, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  std::bernoulli_distribution coin(0.5);
  md::MediationDesign d;
  d.x.resize(n);
  d.c.resize(n);
  d.m.resize(n, k);
  d.y.resize(n);
  for (int i = 0; i < n; ++i) {
    d.ids.push_back("s" + std::to_string(i));
    d.x(i) = coin(rng);
    d.c(i) = coin(rng);
    for (int j = 0; j < k; ++j) d.m(i, j) = 0.8 * d.x(i) + z(rng);
    d.y(i) = 1.0 + 0.5 * d.x(i) + d.m.row(i).sum() + z(rng);
  }
  for (int j = 0; j < k; ++j) d.mediator_names.push_back("m" + std::to_string(j + 1));
  return d;
}

}  // namespace

TEST_CASE("hand example") {
  auto e = md::effects(hand_coefficients(), 1.0, 0.0, 0.0);
  CHECK(e.nde == -0.75);
  CHECK(e.nie == 2.5);
  CHECK(e.te == 1.75);
}

TEST_CASE("reductions") {
  auto c = hand_coefficients();
  c.a1.setZero();
  CHECK(md::effects(c, 1, 0, 0).nie == 0.0);
  c = hand_coefficients();
  c.b3.setZero();
  auto e = md::effects(c, 1, 0, 0);
  CHECK(e.nde == c.b1);
  CHECK(e.nie == doctest::Approx(c.b2(0) * c.a1(0)));
  auto same = md::effects(hand_coefficients(), 1, 1, 0);
  CHECK(same.te == 0.0);
}

TEST_CASE("gibbs regression recovers a slope") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> z;
  const int n = 200;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = z(rng);
    y(i) = 2.0 * x(i, 1) + 0.1 * z(rng);
  }
  auto fit = md::gibbs_regression(x, y, 3000, 500, rng);
  double slope = fit.coef.col(1).mean();
  CHECK(slope == doctest::Approx(2.0).epsilon(0.05));
  auto want = oracle::bayes_regression_mean(x, y, fit.sigma2.mean());
  CHECK(slope == doctest::Approx(want(1)).epsilon(1e-3));
  CHECK(fit.sigma2.mean() == doctest::Approx(0.01).epsilon(0.3));
}

TEST_CASE("zero outcome") {
  std::mt19937_64 rng(2);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(50, 2);
  auto fit = md::gibbs_regression(x, Eigen::VectorXd::Zero(50), 1000, 200, rng);
  CHECK(fit.coef.colwise().mean().cwiseAbs().maxCoeff() < 0.01);
  CHECK(fit.sigma2.mean() < 0.01);
}

TEST_CASE("constant x is a fit error") {
  std::mt19937_64 rng(3);
  auto d = synthetic(40, 1, rng);
  d.x.setOnes();
  try {
    md::fit_mediation(d, 200, 50, 1);
    FAIL("expected a fit error");
  } catch (const FitError& e) {
    CHECK(std::string(e.what()).find("'x'") != std::string::npos);
  }
}

TEST_CASE("duplicate mediators warn but fit") {
  std::mt19937_64 rng(4);
  auto d = synthetic(60, 1, rng);
  Eigen::MatrixXd m2(d.n(), 2);
  m2 << d.m, d.m;
  d.m = m2;
  d.mediator_names = {"m1", "m1copy"};
  auto post = md::fit_mediation(d, 300, 100, 5);
  CHECK_FALSE(post.warnings.empty());
  CHECK(post.draws() == 200);
}

TEST_CASE("per-draw identity") {
  std::mt19937_64 rng(8);
  auto d = synthetic(80, 2, rng);
  auto post = md::fit_mediation(d, 400, 100, 9);
  auto e = md::effects(post);
  CHECK((e.te - e.nde - e.nie).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("quantiles and stars") {
  Eigen::VectorXd v(5);
  v << 5, 1, 4, 2, 3;
  CHECK(md::quantile(v, 0.0) == 1.0);
  CHECK(md::quantile(v, 0.5) == 3.0);
  CHECK(md::quantile(v, 0.1) == doctest::Approx(1.4));
  CHECK(md::interval_excludes_zero(-3.3055, -0.1052));
  CHECK_FALSE(md::interval_excludes_zero(-0.2966, 2.678));
}

TEST_CASE("report layout") {
  md::EffectDraws a{Eigen::VectorXd::LinSpaced(100, 1, 2), Eigen::VectorXd::LinSpaced(100, -1, 1),
                    Eigen::VectorXd::LinSpaced(100, 0, 3)};
  auto b = a;
  b.nde.array() += 0.1;
  auto rows = md::report({a, b});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].name == "NIE");
  CHECK(rows[1].name == "NDE");
  CHECK(rows[2].name == "TE");
  CHECK(rows[1].significant);
  CHECK_FALSE(rows[0].significant);
  CHECK(rows[1].mean == doctest::Approx(1.55));
  CHECK(rows[1].mean_sd > 0);
  auto csv = md::report_csv(rows, "title");
  CHECK(csv.find("Effect,Mean,SD,2.5%,97.5%,Sig") != std::string::npos);
  auto txt = md::report_text(rows, "EXP");
  CHECK(txt.find("NDE") != std::string::npos);
}
