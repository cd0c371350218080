#pragma once

// Temporal multi-relational recursive hyperedges of depth one and two.
//
// A depth-1 hyperedge is a set of relation-tagged node groups, e.g. an email
// {sender: {3}, receivers: {5, 9}}. A depth-2 hyperedge is a set of
// relation-tagged depth-1 hyperedges. Construction always canonicalizes:
// nodes ascending within a group, groups ascending by (relation, nodes),
// depth-2 members ascending by (relation, child). Equality, hashing and
// attention input order all follow that canonical form.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rrhtpp/error.hpp"

namespace rrhtpp {

using NodeId = std::uint32_t;
using RelationId = std::uint32_t;

struct NodeGroup {
  RelationId relation = 0;
  std::vector<NodeId> nodes;

  auto operator<=>(const NodeGroup&) const = default;
  bool operator==(const NodeGroup&) const = default;
};

/// Depth-1 hyperedge: relation-tagged groups of nodes.
struct FlatHyperedge {
  std::vector<NodeGroup> groups;

  FlatHyperedge() = default;
  explicit FlatHyperedge(std::vector<NodeGroup> g) : groups(std::move(g)) { canonicalize(); }

  void canonicalize() {
    for (auto& g : groups) std::sort(g.nodes.begin(), g.nodes.end());
    std::sort(groups.begin(), groups.end());
  }
  std::size_t node_count() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.nodes.size();
    return n;
  }

  auto operator<=>(const FlatHyperedge&) const = default;
  bool operator==(const FlatHyperedge&) const = default;
};

/// (node, relation) pair of an expanded depth-0 group.
struct NodeRelation {
  NodeId node = 0;
  RelationId relation = 0;
  auto operator<=>(const NodeRelation&) const = default;
  bool operator==(const NodeRelation&) const = default;
};

class RecursiveHyperedge {
 public:
  struct Member {
    RelationId relation = 0;
    FlatHyperedge child;
    auto operator<=>(const Member&) const = default;
    bool operator==(const Member&) const = default;
  };

  RecursiveHyperedge() = default;

  static RecursiveHyperedge flat(std::vector<NodeGroup> groups) {
    RecursiveHyperedge e;
    e.depth_ = 1;
    e.members_.push_back({0, FlatHyperedge(std::move(groups))});
    return e;
  }
  static RecursiveHyperedge flat(FlatHyperedge edge) { return flat(std::move(edge.groups)); }

  static RecursiveHyperedge nested(std::vector<Member> members) {
    RecursiveHyperedge e;
    e.depth_ = 2;
    e.members_ = std::move(members);
    for (auto& m : e.members_) m.child.canonicalize();
    std::sort(e.members_.begin(), e.members_.end());
    return e;
  }

  int depth() const { return depth_; }
  /// Depth-1 children: the edge itself at depth 1, its members at depth 2.
  std::size_t child_count() const { return members_.size(); }
  const FlatHyperedge& child(std::size_t i) const { return members_.at(i).child; }
  /// Relation of child i within a depth-2 edge.
  RelationId child_relation(std::size_t i) const { return members_.at(i).relation; }
  const std::vector<Member>& members() const { return members_; }

  /// Distinct node ids, ascending.
  std::vector<NodeId> nodes() const {
    std::vector<NodeId> out;
    for (const auto& m : members_)
      for (const auto& g : m.child.groups) out.insert(out.end(), g.nodes.begin(), g.nodes.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  /// Throws DataError when ids are out of range or the structure is malformed.
  void validate(std::size_t num_nodes, std::size_t num_relations) const {
    if (depth_ != 1 && depth_ != 2) throw DataError("hyperedge depth must be 1 or 2");
    if (members_.empty()) throw DataError("hyperedge has no members");
    if (depth_ == 1 && members_.size() != 1) throw DataError("depth-1 hyperedge must have exactly one child");
    for (const auto& m : members_) {
      if (depth_ == 2 && m.relation >= num_relations)
        throw DataError("relation id " + std::to_string(m.relation) + " out of range");
      if (m.child.groups.empty()) throw DataError("hyperedge has an empty member list");
      for (std::size_t gi = 0; gi < m.child.groups.size(); ++gi) {
        const auto& g = m.child.groups[gi];
        if (g.relation >= num_relations)
          throw DataError("relation id " + std::to_string(g.relation) + " out of range");
        if (gi > 0 && m.child.groups[gi - 1].relation == g.relation)
          throw DataError("duplicate relation group " + std::to_string(g.relation));
        if (g.nodes.empty()) throw DataError("empty node group");
        for (std::size_t k = 0; k < g.nodes.size(); ++k) {
          if (g.nodes[k] >= num_nodes) throw DataError("node id " + std::to_string(g.nodes[k]) + " out of range");
          if (k > 0 && g.nodes[k - 1] == g.nodes[k])
            throw DataError("node " + std::to_string(g.nodes[k]) + " repeated within a group");
        }
      }
    }
  }

  auto operator<=>(const RecursiveHyperedge&) const = default;
  bool operator==(const RecursiveHyperedge&) const = default;

 private:
  int depth_ = 1;
  std::vector<Member> members_;
};

/// Structural hash of the canonical form (64-bit FNV-1a over the id sequence).
inline std::uint64_t edge_key(const RecursiveHyperedge& e) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffu;
      h *= 1099511628211ull;
    }
  };
  mix(static_cast<std::uint64_t>(e.depth()));
  for (const auto& m : e.members()) {
    mix(m.relation);
    mix(m.child.groups.size());
    for (const auto& g : m.child.groups) {
      mix(g.relation);
      mix(g.nodes.size());
      for (NodeId v : g.nodes) mix(v);
    }
  }
  return h;
}

struct EdgeKeyHash {
  std::size_t operator()(const RecursiveHyperedge& e) const { return static_cast<std::size_t>(edge_key(e)); }
};

/// Expands depth-1 child `child` into (node, relation) pairs, one per node,
/// ordered by (relation, node).
inline std::vector<NodeRelation> expand_depth0(const RecursiveHyperedge& edge, std::size_t child = 0) {
  if (child >= edge.child_count()) throw std::out_of_range("expand_depth0: no child " + std::to_string(child));
  std::vector<NodeRelation> out;
  for (const auto& g : edge.child(child).groups)
    for (NodeId v : g.nodes) out.push_back({v, g.relation});
  std::sort(out.begin(), out.end(), [](const NodeRelation& a, const NodeRelation& b) {
    return std::pair(a.relation, a.node) < std::pair(b.relation, b.node);
  });
  return out;
}

struct Event {
  double time = 0.0;
  RecursiveHyperedge edge;
  bool operator==(const Event&) const = default;
};

struct EventStream {
  std::size_t num_nodes = 0;
  std::size_t num_relations = 0;
  int depth = 1;
  std::vector<std::string> relation_names;
  std::vector<Event> events;

  std::size_t size() const { return events.size(); }
  bool empty() const { return events.empty(); }
  /// Same metadata, events [begin, end).
  EventStream segment(std::size_t begin, std::size_t end) const {
    EventStream s{num_nodes, num_relations, depth, relation_names, {}};
    s.events.assign(events.begin() + static_cast<std::ptrdiff_t>(begin),
                    events.begin() + static_cast<std::ptrdiff_t>(end));
    return s;
  }
  bool operator==(const EventStream&) const = default;
};

}  // namespace rrhtpp
