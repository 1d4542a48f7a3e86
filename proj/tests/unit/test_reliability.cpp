#include "doctest.h"

#include <filesystem>
#include <vector>

#include "classnet/error.hpp"
#include "classnet/reliability.hpp"

using namespace classnet;
using L = FineLabel;

TEST_CASE("cohen kappa hand example") {
  std::vector<L> a{L::EngageLow, L::EngageLow, L::EngageHigh, L::EngageHigh};
  std::vector<L> b{L::EngageLow, L::EngageHigh, L::EngageHigh, L::EngageHigh};
  CHECK(cohen_kappa(a, b) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(cohen_kappa(a, a) == 1.0);
}

TEST_CASE("cohen kappa of constant equal raters is 1") {
  std::vector<int> a{2, 2, 2};
  CHECK(cohen_kappa(a, a) == 1.0);
}

TEST_CASE("cohen kappa rejects bad input") {
  std::vector<int> a{1, 2}, b{1};
  CHECK_THROWS_AS(cohen_kappa(a, b), Error);
  std::vector<int> e;
  CHECK_THROWS_AS(cohen_kappa(e, e), Error);
}

TEST_CASE("fleiss kappa") {
  RatingMatrix disagree{{{2, 1}, {1, 2}}, 3};
  CHECK(fleiss_kappa(disagree) == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
  RatingMatrix perfect{{{3, 0}, {0, 3}}, 3};
  CHECK(fleiss_kappa(perfect) == doctest::Approx(1.0));
  RatingMatrix ragged{{{3, 0}, {1, 1}}, 3};
  CHECK_THROWS_AS(fleiss_kappa(ragged), Error);
}

TEST_CASE("interpretation bands") {
  CHECK(interpret_kappa(-0.1) == "Poor");
  CHECK(interpret_kappa(0.0) == "Slight");
  CHECK(interpret_kappa(0.20) == "Slight");
  CHECK(interpret_kappa(0.3509) == "Fair");
  CHECK(interpret_kappa(0.55) == "Moderate");
  CHECK(interpret_kappa(0.6575) == "Substantial");
  CHECK(interpret_kappa(0.9) == "Almost perfect");
  CHECK(interpret_kappa(1.0) == "Almost perfect");
}

TEST_CASE("entropy") {
  std::vector<double> one{1.0}, half{0.5, 0.5}, seven{4.0 / 7, 2.0 / 7, 1.0 / 7};
  CHECK(shannon_entropy(one) == 0.0);
  CHECK(shannon_entropy(half) == doctest::Approx(1.0));
  CHECK(shannon_entropy(seven) == doctest::Approx(1.3788).epsilon(1e-4));
  std::vector<double> with_zero{0.0, 1.0};
  CHECK(shannon_entropy(with_zero) == 0.0);
}

TEST_CASE("percentile flagging") {
  std::vector<double> v;
  for (int i = 0; i < 100; ++i) v.push_back(i / 100.0);
  auto rep = flag_by_percentile(v, 95.0);
  CHECK(rep.threshold == doctest::Approx(0.95));
  CHECK(rep.flagged.size() == 4);

  std::vector<double> zeros(10, 0.0);
  auto z = flag_by_percentile(zeros, 95.0);
  CHECK(z.threshold == 0.0);
  CHECK(z.flagged.empty());
  CHECK(z.consensus_count == 10);
}

TEST_CASE("entropy report from votes") {
  VoteRecord v1;
  v1.utterance_id = "u1";
  v1.responses = {{"a", L::EngageLow}, {"b", L::EngageLow}};
  VoteRecord v2;
  v2.utterance_id = "u2";
  v2.responses = {{"a", L::EngageLow}, {"b", L::EngageHigh}};
  auto rep = entropy_report({v1, v2}, 50.0);
  REQUIRE(rep.entropies.size() == 2);
  CHECK(rep.entropies[0] == 0.0);
  CHECK(rep.entropies[1] == doctest::Approx(1.0));

  auto path = std::filesystem::temp_directory_path() / "classnet_entropy_test.json";
  write_entropy_report(path, rep);
  auto back = load_entropy_report(path);
  CHECK(back.flagged == rep.flagged);
  CHECK(back.threshold == rep.threshold);
  std::filesystem::remove(path);
}

TEST_CASE("pairwise and group kappa") {
  std::vector<VoteRecord> votes;
  std::vector<L> a{L::EngageLow, L::EngageLow, L::EngageHigh, L::EngageHigh};
  std::vector<L> b{L::EngageLow, L::EngageHigh, L::EngageHigh, L::EngageHigh};
  for (int i = 0; i < 4; ++i) {
    VoteRecord v;
    v.utterance_id = "u" + std::to_string(i);
    v.responses = {{"m1", a[i]}, {"m2", b[i]}};
    votes.push_back(v);
  }
  auto km = pairwise_kappa(votes);
  REQUIRE(km.raters.size() == 2);
  CHECK(km.kappa[0][1] == doctest::Approx(0.5));
  CHECK(km.n_common_items == 4);
}
