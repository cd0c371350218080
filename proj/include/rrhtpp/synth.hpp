#pragma once

// Desk-scale synthetic event streams.
//
// homogeneous-poisson: Exp(rate) gaps, edges with uniformly random nodes.
// planted-community: same clock, but each edge draws its nodes from one
// community, so true edges are separable from corruptions that pull in
// outsiders.

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "rrhtpp/error.hpp"
#include "rrhtpp/hypergraph.hpp"

namespace rrhtpp {

enum class Generator { HomogeneousPoisson, PlantedCommunity };

inline Generator parse_generator(const std::string& s) {
  if (s == "homogeneous-poisson" || s == "poisson") return Generator::HomogeneousPoisson;
  if (s == "planted-community" || s == "community") return Generator::PlantedCommunity;
  throw UsageError("unknown generator '" + s + "' (expected homogeneous-poisson or planted-community)");
}

inline std::string to_string(Generator g) {
  return g == Generator::HomogeneousPoisson ? "homogeneous-poisson" : "planted-community";
}

struct SyntheticSpec {
  Generator generator = Generator::PlantedCommunity;
  std::size_t num_nodes = 50;
  std::size_t num_relations = 3;
  int depth = 1;
  std::size_t events = 2000;
  double rate = 1.0;
  std::size_t communities = 5;
  double outsider_prob = 0.05;  // planted-community: chance a slot ignores the community
  std::uint64_t seed = 1;
};

namespace detail {

// One depth-1 child. Relation 0 always has one node (a sender); every other
// relation is present with probability 1/2 and holds 1-3 nodes. Nodes are
// distinct across the whole child.
template <class Draw>
FlatHyperedge synth_child(std::size_t num_relations, std::size_t max_nodes, std::mt19937_64& rng, Draw&& draw) {
  std::bernoulli_distribution present(0.5);
  std::uniform_int_distribution<std::size_t> size(1, 3);
  std::vector<NodeId> used;
  std::vector<NodeGroup> groups;
  for (RelationId r = 0; r < num_relations; ++r) {
    if (r > 0 && !present(rng)) continue;
    const std::size_t k = r == 0 ? 1 : size(rng);
    NodeGroup g{r, {}};
    for (std::size_t i = 0; i < k && used.size() < max_nodes; ++i) {
      NodeId v = draw();
      for (int attempt = 0; attempt < 100 && std::find(used.begin(), used.end(), v) != used.end(); ++attempt)
        v = draw();
      if (std::find(used.begin(), used.end(), v) != used.end()) break;
      used.push_back(v);
      g.nodes.push_back(v);
    }
    if (!g.nodes.empty()) groups.push_back(std::move(g));
  }
  return FlatHyperedge(std::move(groups));
}

}  // namespace detail

inline EventStream synthesize(const SyntheticSpec& spec) {
  if (spec.num_nodes < 4) throw UsageError("synthetic streams need at least 4 nodes");
  if (spec.num_relations == 0) throw UsageError("synthetic streams need at least one relation");
  if (spec.depth != 1 && spec.depth != 2) throw UsageError("synthetic depth must be 1 or 2");
  if (!(spec.rate > 0.0)) throw UsageError("synthetic event rate must be positive");
  if (spec.generator == Generator::PlantedCommunity &&
      (spec.communities == 0 || spec.num_nodes / spec.communities < 4))
    throw UsageError("each community needs at least 4 nodes");

  std::mt19937_64 rng(spec.seed);
  std::exponential_distribution<double> gap(spec.rate);
  std::uniform_int_distribution<NodeId> any(0, NodeId(spec.num_nodes - 1));
  std::bernoulli_distribution outsider(spec.outsider_prob);
  const std::size_t per = spec.generator == Generator::PlantedCommunity ? spec.num_nodes / spec.communities : 0;
  std::uniform_int_distribution<std::size_t> community(0, std::max<std::size_t>(spec.communities, 1) - 1);

  EventStream s;
  s.num_nodes = spec.num_nodes;
  s.num_relations = spec.num_relations;
  s.depth = spec.depth;
  for (std::size_t r = 0; r < spec.num_relations; ++r) s.relation_names.push_back("r" + std::to_string(r));
  double t = 0.0;
  for (std::size_t n = 0; n < spec.events; ++n) {
    t += gap(rng);
    const std::size_t c = per ? community(rng) : 0;
    std::uniform_int_distribution<NodeId> member(NodeId(c * per), NodeId(c * per + per - 1));
    auto draw = [&]() -> NodeId {
      if (per == 0 || outsider(rng)) return any(rng);
      return member(rng);
    };
    const std::size_t max_nodes = per ? per : spec.num_nodes;
    RecursiveHyperedge edge;
    if (spec.depth == 1) {
      edge = RecursiveHyperedge::flat(detail::synth_child(spec.num_relations, max_nodes, rng, draw));
    } else {
      std::vector<RecursiveHyperedge::Member> members;
      members.push_back({0, detail::synth_child(spec.num_relations, max_nodes, rng, draw)});
      members.push_back({RelationId(spec.num_relations > 1 ? 1 : 0),
                         detail::synth_child(spec.num_relations, max_nodes, rng, draw)});
      edge = RecursiveHyperedge::nested(std::move(members));
    }
    edge.validate(spec.num_nodes, spec.num_relations);
    s.events.push_back({t, std::move(edge)});
  }
  return s;
}

}  // namespace rrhtpp
