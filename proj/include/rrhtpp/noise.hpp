#pragma once

// Noise process Q: a KDE over observed event rates drives exponential noise
// gaps; noise marks are uniform over a candidate set of observed edges plus
// corrupted negatives.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <unordered_set>
#include <vector>

#include "rrhtpp/error.hpp"
#include "rrhtpp/hypergraph.hpp"

namespace rrhtpp {

inline constexpr double kMinNoiseRate = 1e-6;

/// Gaussian KDE over the reciprocal inter-event gaps 1/(t_i - t_{i-1}).
class RateKDE {
 public:
  RateKDE() = default;
  RateKDE(std::vector<double> support, double bandwidth) : support_(std::move(support)), bandwidth_(bandwidth) {
    if (support_.empty()) throw DataError("rate KDE needs at least one support point");
    for (double s : support_)
      if (!(s > 0.0) || !std::isfinite(s)) throw DataError("rate KDE support must be positive and finite");
    if (!(bandwidth_ > 0.0) || !std::isfinite(bandwidth_)) throw DataError("rate KDE bandwidth must be positive");
  }

  /// Silverman's rule unless `bandwidth` is given. Zero gaps are skipped.
  static RateKDE fit(const EventStream& train, std::optional<double> bandwidth = std::nullopt) {
    if (train.size() < 2) throw DataError("rate KDE needs at least 2 training events");
    std::vector<double> rates;
    double prev = 0.0;
    std::size_t zeros = 0;
    for (const auto& e : train.events) {
      const double gap = e.time - prev;
      prev = e.time;
      if (gap > 0.0) {
        rates.push_back(1.0 / gap);
      } else {
        ++zeros;
      }
    }
    if (rates.empty()) throw DataError("rate KDE: all inter-event gaps are zero");
    RateKDE kde(rates, bandwidth ? *bandwidth : silverman(rates));
    kde.zero_gaps_ = zeros;
    return kde;
  }

  static double silverman(std::vector<double> x) {
    const double n = double(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    const double sd = x.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    std::sort(x.begin(), x.end());
    auto quantile = [&x](double q) {
      const double pos = q * double(x.size() - 1);
      const std::size_t lo = std::size_t(pos);
      const std::size_t hi = std::min(lo + 1, x.size() - 1);
      return x[lo] + (pos - double(lo)) * (x[hi] - x[lo]);
    };
    const double iqr = (quantile(0.75) - quantile(0.25)) / 1.34;
    double spread = std::min(sd, iqr);
    if (!(spread > 0.0)) spread = std::max(sd, iqr);
    const double w = 0.9 * spread * std::pow(n, -0.2);
    // Degenerate support (one distinct rate): a narrow kernel around it.
    return w > 0.0 ? w : 1e-3 * mean;
  }

  const std::vector<double>& support() const { return support_; }
  double bandwidth() const { return bandwidth_; }
  std::size_t zero_gaps() const { return zero_gaps_; }

  double mean() const {
    double m = 0.0;
    for (double s : support_) m += s;
    return m / double(support_.size());
  }

  double density(double x) const {
    const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * bandwidth_ * double(support_.size()));
    double p = 0.0;
    for (double s : support_) {
      const double z = (x - s) / bandwidth_;
      p += std::exp(-0.5 * z * z);
    }
    return p * norm;
  }

  /// lambda^q: a uniform support point plus N(0, w^2), redrawn while <= 1e-6.
  double sample(std::mt19937_64& rng) const {
    std::uniform_int_distribution<std::size_t> pick(0, support_.size() - 1);
    std::normal_distribution<double> noise(0.0, bandwidth_);
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const double r = support_[pick(rng)] + noise(rng);
      if (r > kMinNoiseRate) return r;
    }
    // Only reachable when the whole support sits within a few w of zero.
    return std::max(support_[pick(rng)], kMinNoiseRate);
  }

 private:
  std::vector<double> support_;
  double bandwidth_ = 1.0;
  std::size_t zero_gaps_ = 0;
};

/// Categorical next-relation model over the sorted relation sequence of a
/// depth-1 group, with an explicit end state.
class RelationSequenceModel {
 public:
  static constexpr RelationId kEnd = std::numeric_limits<RelationId>::max();

  void observe(const FlatHyperedge& edge) {
    std::vector<RelationId> seq;
    for (const auto& g : edge.groups)
      for (std::size_t i = 0; i < g.nodes.size(); ++i) seq.push_back(g.relation);
    std::vector<RelationId> prefix;
    for (RelationId r : seq) {
      ++table_[prefix][r];
      prefix.push_back(r);
    }
    ++table_[prefix][kEnd];
  }

  void fit(const EventStream& train) {
    for (const auto& e : train.events)
      for (std::size_t c = 0; c < e.edge.child_count(); ++c) observe(e.edge.child(c));
  }

  bool empty() const { return table_.empty(); }

  /// Conditional distribution after `prefix`; empty if the prefix was never seen.
  std::map<RelationId, double> conditional(const std::vector<RelationId>& prefix) const {
    std::map<RelationId, double> out;
    auto it = table_.find(prefix);
    if (it == table_.end()) return out;
    double total = 0.0;
    for (const auto& [r, c] : it->second) total += double(c);
    for (const auto& [r, c] : it->second) out[r] = double(c) / total;
    return out;
  }

  const std::map<std::vector<RelationId>, std::map<RelationId, std::size_t>>& table() const { return table_; }

  std::vector<RelationId> sample(std::mt19937_64& rng) const {
    if (table_.empty()) throw std::logic_error("relation sequence model is not fitted");
    std::vector<RelationId> seq;
    while (true) {
      const auto& counts = table_.at(seq);
      std::size_t total = 0;
      for (const auto& [r, c] : counts) total += c;
      std::uniform_int_distribution<std::size_t> u(0, total - 1);
      std::size_t x = u(rng);
      RelationId next = kEnd;
      for (const auto& [r, c] : counts) {
        if (x < c) {
          next = r;
          break;
        }
        x -= c;
      }
      if (next == kEnd) return seq;
      seq.push_back(next);
    }
  }

 private:
  std::map<std::vector<RelationId>, std::map<RelationId, std::size_t>> table_;
};

/// Produces negatives from observed edges: at most half the nodes of a
/// corrupted group come from the source, and only into positions with the
/// same relation they had there.
class CorruptionModel {
 public:
  CorruptionModel() = default;
  CorruptionModel(RelationSequenceModel relations, std::size_t num_nodes)
      : relations_(std::move(relations)), num_nodes_(num_nodes) {}

  static CorruptionModel fit(const EventStream& train) {
    RelationSequenceModel rel;
    rel.fit(train);
    return CorruptionModel(std::move(rel), train.num_nodes);
  }

  const RelationSequenceModel& relations() const { return relations_; }
  std::size_t num_nodes() const { return num_nodes_; }

  FlatHyperedge corrupt_child(const FlatHyperedge& source, std::mt19937_64& rng) const {
    const std::vector<RelationId> seq = relations_.sample(rng);
    std::vector<NodeId> source_nodes;
    for (const auto& g : source.groups) source_nodes.insert(source_nodes.end(), g.nodes.begin(), g.nodes.end());
    std::sort(source_nodes.begin(), source_nodes.end());
    source_nodes.erase(std::unique(source_nodes.begin(), source_nodes.end()), source_nodes.end());

    const std::size_t max_true = seq.size() / 2;
    std::size_t used_true = 0;
    std::bernoulli_distribution coin(0.5);
    std::map<RelationId, std::vector<NodeId>> groups;
    for (RelationId r : seq) {
      auto& group = groups[r];
      bool placed = false;
      if (used_true < max_true && coin(rng)) {
        std::vector<NodeId> options;
        for (const auto& g : source.groups)
          if (g.relation == r)
            for (NodeId v : g.nodes)
              if (std::find(group.begin(), group.end(), v) == group.end()) options.push_back(v);
        if (!options.empty()) {
          std::uniform_int_distribution<std::size_t> u(0, options.size() - 1);
          group.push_back(options[u(rng)]);
          ++used_true;
          placed = true;
        }
      }
      if (!placed) group.push_back(random_filler(source_nodes, group, rng));
    }
    std::vector<NodeGroup> out;
    for (auto& [r, nodes] : groups) out.push_back({r, std::move(nodes)});
    return FlatHyperedge(std::move(out));
  }

  RecursiveHyperedge corrupt_one(const RecursiveHyperedge& edge, std::mt19937_64& rng) const {
    for (int attempt = 0; attempt < 100; ++attempt) {
      RecursiveHyperedge neg;
      if (edge.depth() == 1) {
        neg = RecursiveHyperedge::flat(corrupt_child(edge.child(0), rng));
      } else {
        std::uniform_int_distribution<std::size_t> pick(0, edge.child_count() - 1);
        const std::size_t c = pick(rng);
        auto members = edge.members();
        members[c].child = corrupt_child(members[c].child, rng);
        neg = RecursiveHyperedge::nested(std::move(members));
      }
      if (!(neg == edge)) return neg;
    }
    throw DataError("corruption keeps reproducing the source edge");
  }

  std::vector<RecursiveHyperedge> corrupt(const RecursiveHyperedge& edge, std::size_t n, std::mt19937_64& rng) const {
    std::vector<RecursiveHyperedge> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(corrupt_one(edge, rng));
    return out;
  }

 private:
  // Uniform over nodes outside the source edge and not already in the group.
  NodeId random_filler(const std::vector<NodeId>& source_nodes, const std::vector<NodeId>& group,
                       std::mt19937_64& rng) const {
    auto excluded = [&](NodeId v) {
      return std::binary_search(source_nodes.begin(), source_nodes.end(), v) ||
             std::find(group.begin(), group.end(), v) != group.end();
    };
    std::uniform_int_distribution<NodeId> u(0, NodeId(num_nodes_ - 1));
    for (int attempt = 0; attempt < 64; ++attempt) {
      const NodeId v = u(rng);
      if (!excluded(v)) return v;
    }
    std::vector<NodeId> pool;
    for (NodeId v = 0; v < num_nodes_; ++v)
      if (!excluded(v)) pool.push_back(v);
    if (pool.empty())
      throw DataError("node universe of " + std::to_string(num_nodes_) +
                      " nodes is too small to corrupt an edge without repeating nodes");
    std::uniform_int_distribution<std::size_t> p(0, pool.size() - 1);
    return pool[p(rng)];
  }

  RelationSequenceModel relations_;
  std::size_t num_nodes_ = 0;
};

/// H^c, deduplicated; each member carries noise mass 1/|H^c|.
class CandidateSet {
 public:
  bool add(const RecursiveHyperedge& edge) {
    if (!seen_.insert(edge).second) return false;
    edges_.push_back(edge);
    return true;
  }
  void clear() {
    edges_.clear();
    seen_.clear();
  }
  bool contains(const RecursiveHyperedge& edge) const { return seen_.count(edge) != 0; }
  std::size_t size() const { return edges_.size(); }
  bool empty() const { return edges_.empty(); }
  const std::vector<RecursiveHyperedge>& edges() const { return edges_; }
  const RecursiveHyperedge& operator[](std::size_t i) const { return edges_[i]; }

  double mass() const { return 1.0 / double(edges_.size()); }
  /// lambda^q_h = lambda^q / |H^c|.
  double per_edge_rate(double noise_rate) const { return noise_rate / double(edges_.size()); }

  std::size_t sample_index(std::mt19937_64& rng) const {
    if (edges_.empty()) throw DataError("candidate set is empty");
    std::uniform_int_distribution<std::size_t> u(0, edges_.size() - 1);
    return u(rng);
  }

 private:
  std::vector<RecursiveHyperedge> edges_;
  std::unordered_set<RecursiveHyperedge, EdgeKeyHash> seen_;
};

struct NoiseDraw {
  double rate = 0.0;   // lambda^q
  double gap = 0.0;    // delta t ~ Exp(N^q lambda^q)
  std::size_t edge = 0;
};

inline NoiseDraw simulate_noise_gap(const RateKDE& kde, int noise_streams, const CandidateSet& candidates,
                                    std::mt19937_64& rng) {
  if (noise_streams < 1) throw std::invalid_argument("noise gap needs at least one noise stream");
  if (candidates.empty()) throw DataError("candidate set is empty");
  NoiseDraw d;
  d.rate = kde.sample(rng);
  std::exponential_distribution<double> gap(double(noise_streams) * d.rate);
  d.gap = gap(rng);
  d.edge = candidates.sample_index(rng);
  return d;
}

}  // namespace rrhtpp
