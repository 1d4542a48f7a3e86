#include "doctest.h"

#include <filesystem>

#include "classnet/data_model.hpp"
#include "classnet/error.hpp"
#include "classnet/network_builder.hpp"
#include "fixtures.hpp"

using namespace classnet;

namespace {
double edge(const WeightedDigraph& g, const Roster& r, const char* a, const char* b) {
  return g.weights(static_cast<Eigen::Index>(r.require_index(a)), static_cast<Eigen::Index>(r.require_index(b)));
}
}  // namespace

TEST_CASE("published dialogue gives the expected engagement edges") {
  auto roster = fixture::dialogue_roster();
  auto eoi = build_network(fixture::dialogue(), fixture::dialogue_labels(), roster, NetworkKind::EOI).graph;
  CHECK(edge(eoi, roster, "Natalie", "Kimberly") == 2.0);
  CHECK(edge(eoi, roster, "Kimberly", "Natalie") == 1.0);
  CHECK(eoi.total_weight() == 3.0);
  CHECK(eoi.provenance.size() == 2);
}

TEST_CASE("explanations point at the previous distinct speaker") {
  auto roster = fixture::dialogue_roster();
  auto exp = build_network(fixture::dialogue(), fixture::dialogue_labels(), roster, NetworkKind::EXP).graph;
  // turn 1 Natalie -> Kimberly, 3 Samantha -> Kimberly, 4 Kimberly -> Samantha,
  // 6 Kimberly -> Natalie, 8 Kimberly -> Natalie
  CHECK(edge(exp, roster, "Natalie", "Kimberly") == 1.0);
  CHECK(edge(exp, roster, "Samantha", "Kimberly") == 1.0);
  CHECK(edge(exp, roster, "Kimberly", "Samantha") == 1.0);
  CHECK(edge(exp, roster, "Kimberly", "Natalie") == 2.0);
  CHECK(exp.weights.diagonal().isZero());
}

TEST_CASE("target resolution") {
  std::vector<Utterance> block{{"a", "L", "B", 0, "X", "my idea", std::nullopt},
                               {"b", "L", "B", 1, "Y", "filler", std::nullopt},
                               {"c", "L", "B", 2, "Z", "why?", std::nullopt}};
  std::unordered_map<std::string, FineLabel> labels{
      {"a", FineLabel::ExplainOwnIdea}, {"b", FineLabel::Uncorrelated}, {"c", FineLabel::EngageMedium}};
  CHECK(resolve_target(block, 2, labels) == std::optional<std::string>("X"));
  CHECK_FALSE(resolve_target(block, 1, labels));
  // a lone explanation falls forward to the next speaker
  CHECK(resolve_target(block, 0, labels) == std::optional<std::string>("Y"));
  std::vector<Utterance> lone{{"a", "L", "B", 0, "X", "my idea", std::nullopt}};
  CHECK_FALSE(resolve_target(lone, 0, labels));
}

TEST_CASE("adjacency csv round trip and corruption") {
  Eigen::MatrixXd w(2, 2);
  w << 0, 3, 1.5, 0;
  auto p = std::filesystem::temp_directory_path() / "classnet_adj.csv";
  write_adjacency_csv(p, {"a", "b"}, w);
  auto back = read_adjacency_csv(p);
  CHECK(back.node_ids == std::vector<std::string>{"a", "b"});
  CHECK(back.weights == w);
  write_file(p, "student_id,a,b\na,0,oops\nb,1,0\n");
  try {
    read_adjacency_csv(p);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(p.string()) != std::string::npos);
  }
  std::filesystem::remove(p);
}

TEST_CASE("overdispersion") {
  Eigen::MatrixXd w(3, 3);
  w << 0, 1, 2, 3, 0, 4, 5, 6, 0;
  auto o = overdispersion_check(w);
  CHECK(o.mean == doctest::Approx(3.5));
  CHECK(o.variance == doctest::Approx(3.5));
  CHECK(*o.ratio == doctest::Approx(1.0));
  CHECK_FALSE(overdispersion_check(Eigen::MatrixXd::Zero(3, 3)).ratio);
}
