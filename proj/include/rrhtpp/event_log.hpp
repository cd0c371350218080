#pragma once

// Event-log file format, dataset statistics and the chronological split.
//
// Log: one JSON object per line,
//   {"t": 12.5, "edge": [[0, [3]], [1, [5, 9]]]}                       depth 1
//   {"t": 12.5, "edge": [[7, [[0, [3]], [1, [4]]]], [8, [[0, [5]]]]]}  depth 2
// Sidecar "<log>.meta.json":
//   {"num_nodes": 98, "num_relations": 3, "depth": 1, "relation_names": [...]}

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rrhtpp/error.hpp"
#include "rrhtpp/hypergraph.hpp"

namespace rrhtpp {

struct DatasetStats {
  std::size_t num_nodes = 0;
  std::size_t num_relations = 0;
  std::size_t num_events = 0;
  double horizon = 0.0;
  int depth = 1;
  // Inter-event gaps use t_0 = 0 as the first reference time.
  double mean_gap = 0.0;
  double max_gap = 0.0;
  double min_gap = 0.0;
  std::size_t zero_gaps = 0;

  bool operator==(const DatasetStats&) const = default;
};

inline DatasetStats compute_stats(const EventStream& stream) {
  if (stream.empty()) throw DataError("no events");
  DatasetStats s;
  s.num_nodes = stream.num_nodes;
  s.num_relations = stream.num_relations;
  s.num_events = stream.size();
  s.depth = stream.depth;
  s.horizon = stream.events.back().time;
  double prev = 0.0, total = 0.0;
  s.min_gap = std::numeric_limits<double>::infinity();
  for (const auto& e : stream.events) {
    const double gap = e.time - prev;
    total += gap;
    s.max_gap = std::max(s.max_gap, gap);
    s.min_gap = std::min(s.min_gap, gap);
    if (gap == 0.0) ++s.zero_gaps;
    prev = e.time;
  }
  s.mean_gap = total / static_cast<double>(stream.size());
  return s;
}

struct SplitStream {
  EventStream train;
  EventStream validation;
  EventStream test;
};

/// 50% / 25% / 25% by event count, chronological and contiguous.
inline SplitStream split(const EventStream& stream) {
  const std::size_t n = stream.size();
  if (n < 4) throw DataError("stream too small to split: " + std::to_string(n) + " events (need at least 4)");
  const std::size_t n_train = n / 2, n_val = n / 4;
  return {stream.segment(0, n_train), stream.segment(n_train, n_train + n_val), stream.segment(n_train + n_val, n)};
}

namespace detail {

inline std::vector<NodeId> parse_node_list(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw DataError("node list must be a non-empty array");
  std::vector<NodeId> out;
  for (const auto& v : j) {
    if (!v.is_number_integer() || v.get<long long>() < 0) throw DataError("node id must be a non-negative integer");
    out.push_back(static_cast<NodeId>(v.get<long long>()));
  }
  return out;
}

inline RelationId parse_relation(const nlohmann::json& j) {
  if (!j.is_number_integer() || j.get<long long>() < 0) throw DataError("relation id must be a non-negative integer");
  return static_cast<RelationId>(j.get<long long>());
}

inline std::vector<NodeGroup> parse_groups(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw DataError("group list must be a non-empty array");
  std::vector<NodeGroup> groups;
  for (const auto& g : j) {
    if (!g.is_array() || g.size() != 2) throw DataError("group must be [relation, [node ids]]");
    groups.push_back({parse_relation(g[0]), parse_node_list(g[1])});
  }
  return groups;
}

inline RecursiveHyperedge parse_edge(const nlohmann::json& j, int depth) {
  if (!j.is_array() || j.empty()) throw DataError("\"edge\" must be a non-empty array");
  if (depth == 1) return RecursiveHyperedge::flat(parse_groups(j));
  std::vector<RecursiveHyperedge::Member> members;
  for (const auto& m : j) {
    if (!m.is_array() || m.size() != 2) throw DataError("member must be [relation, payload]");
    const auto& payload = m[1];
    if (!payload.is_array() || payload.empty() || !payload[0].is_array())
      throw DataError("depth-2 member payload must be a list of [relation, [node ids]] groups");
    members.push_back({parse_relation(m[0]), FlatHyperedge(parse_groups(payload))});
  }
  return RecursiveHyperedge::nested(std::move(members));
}

inline nlohmann::json groups_json(const FlatHyperedge& f) {
  auto arr = nlohmann::json::array();
  for (const auto& g : f.groups) arr.push_back({g.relation, g.nodes});
  return arr;
}

inline nlohmann::json edge_json(const RecursiveHyperedge& e) {
  if (e.depth() == 1) return groups_json(e.child(0));
  auto arr = nlohmann::json::array();
  for (const auto& m : e.members()) arr.push_back({m.relation, groups_json(m.child)});
  return arr;
}

inline RecursiveHyperedge remap_nodes(const RecursiveHyperedge& e, const std::map<NodeId, NodeId>& map) {
  auto remap_flat = [&](const FlatHyperedge& f) {
    std::vector<NodeGroup> groups = f.groups;
    for (auto& g : groups)
      for (auto& v : g.nodes) v = map.at(v);
    return FlatHyperedge(std::move(groups));
  };
  if (e.depth() == 1) return RecursiveHyperedge::flat(remap_flat(e.child(0)));
  std::vector<RecursiveHyperedge::Member> members;
  for (const auto& m : e.members()) members.push_back({m.relation, remap_flat(m.child)});
  return RecursiveHyperedge::nested(std::move(members));
}

}  // namespace detail

inline std::string sidecar_path(const std::string& log_path) { return log_path + ".meta.json"; }

struct IngestResult {
  EventStream stream;
  DatasetStats stats;
  /// original_node_ids[dense id] = id as written in the file.
  std::vector<NodeId> original_node_ids;
};

/// Parses a log plus its metadata. Node ids are compacted to 0..|V|-1 in
/// ascending order of the original ids.
inline IngestResult ingest(std::istream& log, const nlohmann::json& meta) {
  EventStream stream;
  try {
    stream.num_nodes = meta.at("num_nodes").get<std::size_t>();
    stream.num_relations = meta.at("num_relations").get<std::size_t>();
    stream.depth = meta.at("depth").get<int>();
    if (meta.contains("relation_names")) stream.relation_names = meta["relation_names"].get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("metadata: ") + e.what());
  }
  if (stream.depth != 1 && stream.depth != 2) throw DataError("metadata: depth must be 1 or 2");
  if (stream.num_nodes == 0 || stream.num_relations == 0) throw DataError("metadata: counts must be positive");

  std::string line;
  std::size_t line_no = 0;
  double prev_time = 0.0;
  while (std::getline(log, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!j.is_object() || !j.contains("t") || !j.contains("edge")) throw DataError("record needs \"t\" and \"edge\"");
      if (!j["t"].is_number()) throw DataError("\"t\" must be a number");
      Event ev{j["t"].get<double>(), detail::parse_edge(j["edge"], stream.depth)};
      if (!std::isfinite(ev.time) || ev.time < 0.0) throw DataError("time must be finite and non-negative");
      if (ev.time < prev_time) throw DataError("out-of-order timestamp");
      ev.edge.validate(stream.num_nodes, stream.num_relations);
      prev_time = ev.time;
      stream.events.push_back(std::move(ev));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": malformed record: " + e.what());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (stream.empty()) throw DataError("no events");

  std::map<NodeId, NodeId> dense;
  for (const auto& ev : stream.events)
    for (NodeId v : ev.edge.nodes()) dense.emplace(v, 0);
  IngestResult result;
  for (auto& [orig, id] : dense) {
    id = static_cast<NodeId>(result.original_node_ids.size());
    result.original_node_ids.push_back(orig);
  }
  const bool identity = dense.size() == stream.num_nodes;
  if (!identity) {
    for (auto& ev : stream.events) ev.edge = detail::remap_nodes(ev.edge, dense);
    stream.num_nodes = dense.size();
  }
  result.stats = compute_stats(stream);
  result.stream = std::move(stream);
  return result;
}

inline IngestResult ingest(const std::string& path) {
  std::ifstream meta_in(sidecar_path(path));
  if (!meta_in) throw DataError("missing metadata sidecar: " + sidecar_path(path));
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("metadata: " + std::string(e.what()));
  }
  std::ifstream log(path);
  if (!log) throw DataError("cannot open event log: " + path);
  return ingest(log, meta);
}

inline nlohmann::json metadata_json(const EventStream& s) {
  nlohmann::json meta{{"num_nodes", s.num_nodes}, {"num_relations", s.num_relations}, {"depth", s.depth}};
  if (!s.relation_names.empty()) meta["relation_names"] = s.relation_names;
  return meta;
}

inline void write_event_log(std::ostream& out, const EventStream& s) {
  for (const auto& ev : s.events) {
    nlohmann::json j{{"t", ev.time}, {"edge", detail::edge_json(ev.edge)}};
    out << j.dump() << '\n';
  }
}

/// Writes the log and its sidecar.
inline void serialize(const std::string& path, const EventStream& s) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write event log: " + path);
    write_event_log(out, s);
  }
  std::ofstream meta(sidecar_path(path), std::ios::binary);
  if (!meta) throw DataError("cannot write metadata: " + sidecar_path(path));
  meta << metadata_json(s).dump(2) << '\n';
}

}  // namespace rrhtpp
