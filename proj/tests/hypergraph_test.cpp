#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "test_support.hpp"

using namespace rrhtpp;
using rrhtpp::testing::email;

namespace {

nlohmann::json meta(std::size_t nodes, std::size_t rels, int depth) {
  return {{"num_nodes", nodes}, {"num_relations", rels}, {"depth", depth}};
}

IngestResult ingest_text(const std::string& text, const nlohmann::json& m) {
  std::istringstream in(text);
  return ingest(in, m);
}

std::string error_of(const std::string& text, const nlohmann::json& m) {
  try {
    ingest_text(text, m);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Hyperedge, CanonicalFormIgnoresInputOrder) {
  const auto a = RecursiveHyperedge::flat({{1, {9, 5}}, {0, {3}}});
  const auto b = RecursiveHyperedge::flat({{0, {3}}, {1, {5, 9}}});
  EXPECT_EQ(a, b);
  EXPECT_EQ(edge_key(a), edge_key(b));
  EXPECT_EQ(a.child(0).groups[0].relation, 0u);
  EXPECT_EQ(a.child(0).groups[1].nodes, (std::vector<NodeId>{5, 9}));
}

TEST(Hyperedge, NestedCanonicalFormIgnoresMemberOrder) {
  const FlatHyperedge x({{0, {1}}, {1, {2}}});
  const FlatHyperedge y(std::vector<NodeGroup>{{0, {4}}});
  const auto a = RecursiveHyperedge::nested({{1, y}, {0, x}});
  const auto b = RecursiveHyperedge::nested({{0, x}, {1, y}});
  EXPECT_EQ(a, b);
  EXPECT_EQ(edge_key(a), edge_key(b));
  EXPECT_NE(edge_key(a), edge_key(RecursiveHyperedge::nested({{0, y}, {1, x}})));
}

TEST(Hyperedge, ExpandSingleGroup) {
  const auto e = RecursiveHyperedge::flat(std::vector<NodeGroup>{{0, {7}}});
  EXPECT_EQ(expand_depth0(e), (std::vector<NodeRelation>{{7, 0}}));
}

TEST(Hyperedge, ExpandEmail) {
  const auto e = email(3, {5, 9});
  EXPECT_EQ(expand_depth0(e), (std::vector<NodeRelation>{{3, 0}, {5, 1}, {9, 1}}));
}

TEST(Hyperedge, ExpandIsScopedToOneChild) {
  const FlatHyperedge first({{0, {1}}, {1, {2}}});
  const FlatHyperedge second({{0, {6}}, {2, {7, 8}}});
  const auto e = RecursiveHyperedge::nested({{0, first}, {1, second}});
  const auto pairs = expand_depth0(e, 1);
  EXPECT_EQ(pairs, (std::vector<NodeRelation>{{6, 0}, {7, 2}, {8, 2}}));
  EXPECT_THROW(expand_depth0(e, 2), std::out_of_range);
}

TEST(Hyperedge, NodesAreDistinctAndSorted) {
  const auto e = RecursiveHyperedge::flat({{0, {4}}, {1, {2, 4}}});
  EXPECT_EQ(e.nodes(), (std::vector<NodeId>{2, 4}));
}

TEST(Hyperedge, ValidationRejectsBadStructure) {
  EXPECT_THROW(email(3, {12}).validate(10, 3), DataError);
  EXPECT_THROW(RecursiveHyperedge::flat(std::vector<NodeGroup>{{5, {1}}}).validate(10, 3), DataError);
  EXPECT_THROW(RecursiveHyperedge::flat(std::vector<NodeGroup>{{0, {1, 1}}}).validate(10, 3), DataError);
  EXPECT_THROW(RecursiveHyperedge::flat({{0, {1}}, {0, {2}}}).validate(10, 3), DataError);
  EXPECT_THROW(RecursiveHyperedge::flat(std::vector<NodeGroup>{{0, {}}}).validate(10, 3), DataError);
  EXPECT_NO_THROW(email(3, {5, 9}, {1}).validate(10, 3));
}

TEST(Ingest, ParsesDepthOneLog) {
  const auto r = ingest_text(
      "{\"t\": 1.0, \"edge\": [[0, [0]], [1, [1, 2]]]}\n"
      "{\"t\": 3.0, \"edge\": [[0, [2]], [1, [0]]]}\n",
      meta(3, 2, 1));
  ASSERT_EQ(r.stream.size(), 2u);
  EXPECT_EQ(r.stream.events[0].edge, RecursiveHyperedge::flat({{0, {0}}, {1, {1, 2}}}));
  EXPECT_EQ(r.stats.num_events, 2u);
  EXPECT_EQ(r.stats.horizon, 3.0);
}

TEST(Ingest, MeanGapCountsFromTimeZero) {
  // Gaps 1.0 and 2.0.
  const auto r = ingest_text(
      "{\"t\": 1.0, \"edge\": [[0, [0]]]}\n"
      "{\"t\": 3.0, \"edge\": [[0, [1]]]}\n",
      meta(2, 1, 1));
  EXPECT_DOUBLE_EQ(r.stats.mean_gap, 1.5);
  EXPECT_DOUBLE_EQ(r.stats.max_gap, 2.0);
  EXPECT_DOUBLE_EQ(r.stats.min_gap, 1.0);
}

TEST(Ingest, ParsesDepthTwoLog) {
  const auto r = ingest_text("{\"t\": 0.5, \"edge\": [[0, [[0, [1]], [1, [2]]]], [1, [[0, [3]]]]]}\n", meta(4, 2, 2));
  const auto& e = r.stream.events[0].edge;
  EXPECT_EQ(e.depth(), 2);
  EXPECT_EQ(e.child_count(), 2u);
  EXPECT_EQ(e.child_relation(1), 1u);
}

TEST(Ingest, EmptyFileHasNoEvents) {
  EXPECT_NE(error_of("", meta(3, 2, 1)).find("no events"), std::string::npos);
  EXPECT_NE(error_of("\n\n", meta(3, 2, 1)).find("no events"), std::string::npos);
}

TEST(Ingest, MalformedLineIsNamed) {
  std::string text;
  for (int i = 1; i <= 6; ++i) text += "{\"t\": " + std::to_string(i) + ", \"edge\": [[0, [0]]]}\n";
  text += "{\"t\": 7, \"edge\": [[0, [0]]\n";
  const auto msg = error_of(text, meta(1, 1, 1));
  EXPECT_NE(msg.find("line 7"), std::string::npos) << msg;
}

TEST(Ingest, RejectsOutOfOrderAndBadRecords) {
  EXPECT_NE(error_of("{\"t\": 2, \"edge\": [[0, [0]]]}\n{\"t\": 1, \"edge\": [[0, [0]]]}\n", meta(1, 1, 1))
                .find("line 2"),
            std::string::npos);
  EXPECT_FALSE(error_of("{\"t\": -1, \"edge\": [[0, [0]]]}\n", meta(1, 1, 1)).empty());
  EXPECT_FALSE(error_of("{\"t\": 1, \"edge\": [[3, [0]]]}\n", meta(1, 1, 1)).empty());
  EXPECT_FALSE(error_of("{\"t\": 1, \"edge\": [[0, [0, 0]]]}\n", meta(2, 1, 1)).empty());
  EXPECT_FALSE(error_of("{\"t\": \"x\", \"edge\": [[0, [0]]]}\n", meta(1, 1, 1)).empty());
  EXPECT_FALSE(error_of("{\"edge\": [[0, [0]]]}\n", meta(1, 1, 1)).empty());
  EXPECT_FALSE(error_of("{\"t\": 1, \"edge\": [[0, [0]]]}\n", meta(1, 1, 3)).empty());
}

TEST(Ingest, TiesAreKeptInFileOrder) {
  const auto r = ingest_text(
      "{\"t\": 1, \"edge\": [[0, [1]]]}\n"
      "{\"t\": 1, \"edge\": [[0, [0]]]}\n",
      meta(2, 1, 1));
  EXPECT_EQ(r.stream.events[0].edge, RecursiveHyperedge::flat(std::vector<NodeGroup>{{0, {1}}}));
  EXPECT_EQ(r.stats.zero_gaps, 1u);
}

TEST(Ingest, SparseNodeIdsAreCompacted) {
  const auto r = ingest_text(
      "{\"t\": 1, \"edge\": [[0, [10]], [1, [40]]]}\n"
      "{\"t\": 2, \"edge\": [[0, [40]]]}\n",
      meta(100, 2, 1));
  EXPECT_EQ(r.stream.num_nodes, 2u);
  EXPECT_EQ(r.original_node_ids, (std::vector<NodeId>{10, 40}));
  EXPECT_EQ(r.stream.events[1].edge, RecursiveHyperedge::flat(std::vector<NodeGroup>{{0, {1}}}));
}

TEST(Ingest, RoundTripGivesIdenticalStats) {
  const auto s = rrhtpp::testing::tiny_stream(2, 50, 4);
  const auto dir = std::filesystem::temp_directory_path() / "rrhtpp_roundtrip";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "log.jsonl").string();
  serialize(path, s);
  const auto first = ingest(path);
  serialize(path, first.stream);
  const auto second = ingest(path);
  EXPECT_EQ(first.stats, second.stats);
  EXPECT_EQ(first.stream, second.stream);
}

TEST(Split, EightEvents) {
  const auto p = split(rrhtpp::testing::tiny_stream(1, 8, 1));
  EXPECT_EQ(p.train.size(), 4u);
  EXPECT_EQ(p.validation.size(), 2u);
  EXPECT_EQ(p.test.size(), 2u);
}

TEST(Split, EnronSizedStream) {
  EventStream s;
  s.num_nodes = 1;
  s.num_relations = 1;
  for (int i = 0; i < 10355; ++i) s.events.push_back({double(i), RecursiveHyperedge::flat(std::vector<NodeGroup>{{0, {0}}})});
  const auto p = split(s);
  EXPECT_EQ(p.train.size(), 5177u);
  EXPECT_EQ(p.validation.size(), 2588u);
  EXPECT_EQ(p.test.size(), 2590u);
}

TEST(Split, TooSmallStreamFails) {
  EXPECT_THROW(split(rrhtpp::testing::tiny_stream(1, 3, 1)), DataError);
}

TEST(Split, IsChronologicalAndContiguous) {
  const auto s = rrhtpp::testing::tiny_stream(1, 37, 9);
  const auto p = split(s);
  std::vector<Event> joined = p.train.events;
  joined.insert(joined.end(), p.validation.events.begin(), p.validation.events.end());
  joined.insert(joined.end(), p.test.events.begin(), p.test.events.end());
  EXPECT_EQ(joined, s.events);
  EXPECT_LE(p.train.events.back().time, p.validation.events.front().time);
  EXPECT_LE(p.validation.events.back().time, p.test.events.front().time);
}

TEST(Synth, PoissonMeanGapNearOne) {
  SyntheticSpec spec;
  spec.generator = Generator::HomogeneousPoisson;
  spec.events = 1000;
  spec.rate = 1.0;
  spec.seed = 17;
  const auto s = synthesize(spec);
  const double mean = s.events.back().time / 1000.0;
  EXPECT_NEAR(mean, 1.0, 3.0 / std::sqrt(1000.0));
}

TEST(Synth, DepthTwoSpecGivesDepthTwoEdges) {
  SyntheticSpec spec;
  spec.depth = 2;
  spec.events = 200;
  const auto s = synthesize(spec);
  for (const auto& e : s.events) {
    EXPECT_EQ(e.edge.depth(), 2);
    EXPECT_NO_THROW(e.edge.validate(s.num_nodes, s.num_relations));
  }
}

TEST(Synth, PlantedEdgesMostlyStayInOneCommunity) {
  SyntheticSpec spec;
  spec.events = 500;
  const auto s = synthesize(spec);
  std::size_t inside = 0;
  for (const auto& e : s.events) {
    const auto nodes = e.edge.nodes();
    const auto c = nodes.front() / 10;
    inside += std::all_of(nodes.begin(), nodes.end(), [&](NodeId v) { return v / 10 == c; });
  }
  EXPECT_GT(double(inside) / 500.0, 0.7);
}
