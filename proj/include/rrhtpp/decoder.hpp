#pragma once

// Attention-based recursive hyperedge link predictor.
//
// Depth 0: each depth-1 child is expanded to (node, relation) pairs and
// attended over [v(t); r] rows; the child embedding h^1 is the mean of the
// per-pair outputs. Depth 2 repeats the pattern over [h^1_i; r_i] rows of
// the children. The intensity is
//   lambda = softplus( sum_i  W_o (lower_i - dyn_i)^2 + b_o )
// where lower_i is the member's own embedding one level down and dyn_i its
// attended, edge-contextual embedding at the top level.

#include <random>
#include <string>
#include <vector>

#include "rrhtpp/checkpoint.hpp"
#include "rrhtpp/hypergraph.hpp"
#include "rrhtpp/layers.hpp"
#include "rrhtpp/tensor.hpp"

namespace rrhtpp {

struct DecoderOutput {
  int depth = 1;
  ad::Var intensity;  // 1 x 1
  std::vector<std::vector<NodeRelation>> pairs;  // per depth-1 child
  std::vector<ad::Var> node_rows;                // per child, k x d drifted v(t)
  std::vector<ad::Var> pair_dynamic;             // per child, k x d
  std::vector<ad::Var> child_embedding;          // per child, 1 x d
  ad::Var member_dynamic;                        // depth 2 only, m x d
  ad::Var edge_embedding;                        // h^depth, 1 x d

  double lambda() const { return intensity.item(); }
};

/// One row per (child, pair) position with the features the node update needs.
struct PositionFeatures {
  std::vector<NodeId> nodes;
  ad::Var dynamic;   // P x (depth+1)d, the chain [pair dyn; (member dyn;) h^depth]
  ad::Var drifted;   // P x d, v(t^-) of the position's node
};

class HyperedgeDecoder {
 public:
  HyperedgeDecoder() = default;
  HyperedgeDecoder(ParameterStore& ps, std::size_t dim, int depth, std::size_t heads, std::mt19937_64& rng)
      : dim_(dim), depth_(depth) {
    level1_ = AttentionBlock(ps, "decoder.att1", 2 * dim, heads, dim, rng);
    if (depth == 2) level2_ = AttentionBlock(ps, "decoder.att2", 2 * dim, heads, dim, rng);
    w_out_ = ps.add("decoder.w_out", uniform_tensor(dim, 1, 1.0 / std::sqrt(double(dim)), rng));
    b_out_ = ps.add("decoder.b_out", Tensor(1, 1));
  }

  std::size_t dim() const { return dim_; }
  int depth() const { return depth_; }
  AttentionBlock& level1() { return level1_; }
  AttentionBlock& level2() { return level2_; }
  ad::Var& w_out() { return w_out_; }
  ad::Var& b_out() { return b_out_; }

  struct LevelOutput {
    ad::Var dynamic;    // k x d, one row per member
    ad::Var embedding;  // 1 x d, mean over members
  };

  /// Self-attention over [v_i(t); r_i] for one expanded depth-0 group.
  LevelOutput depth0_embed(const ad::Var& node_rows, const std::vector<RelationId>& relations,
                           const ad::Var& relation_table) const {
    return attend(level1_, node_rows, relations, relation_table);
  }

  /// Self-attention over [h^1_i; r_i] for the children of a depth-2 edge.
  LevelOutput higher_embed(const ad::Var& child_rows, const std::vector<RelationId>& relations,
                           const ad::Var& relation_table) const {
    if (depth_ != 2) throw std::logic_error("higher_embed on a depth-1 decoder");
    return attend(level2_, child_rows, relations, relation_table);
  }

  /// softplus(sum_i W_o (lower_i - dyn_i)^2 + b_o).
  ad::Var intensity_from(const ad::Var& lower, const ad::Var& dynamic) const {
    using namespace ad;
    const Var o = matmul(square(sub(lower, dynamic)), w_out_);  // k x 1
    return softplus(add(sum(o), scale(b_out_, double(lower.rows()))));
  }

  /// `drifted_rows(ids)` must return the |ids| x d matrix of v(t) rows.
  template <class RowsFn>
  DecoderOutput operator()(const RecursiveHyperedge& edge, const ad::Var& relation_table,
                           RowsFn&& drifted_rows) const {
    if (edge.depth() != depth_)
      throw DataError("hyperedge depth " + std::to_string(edge.depth()) + " does not match model depth " +
                      std::to_string(depth_));
    if (edge.child_count() == 0) throw DataError("malformed hyperedge: no members");
    DecoderOutput out;
    out.depth = depth_;
    for (std::size_t c = 0; c < edge.child_count(); ++c) {
      auto pairs = expand_depth0(edge, c);
      if (pairs.empty()) throw DataError("malformed hyperedge: empty group");
      std::vector<NodeId> ids;
      std::vector<RelationId> rels;
      for (const auto& p : pairs) {
        ids.push_back(p.node);
        rels.push_back(p.relation);
      }
      ad::Var rows = drifted_rows(ids);
      auto level = depth0_embed(rows, rels, relation_table);
      out.pairs.push_back(std::move(pairs));
      out.node_rows.push_back(std::move(rows));
      out.pair_dynamic.push_back(level.dynamic);
      out.child_embedding.push_back(level.embedding);
    }
    if (depth_ == 1) {
      out.edge_embedding = out.child_embedding.front();
      out.intensity = intensity_from(out.node_rows.front(), out.pair_dynamic.front());
    } else {
      std::vector<RelationId> rels;
      for (std::size_t c = 0; c < edge.child_count(); ++c) rels.push_back(edge.child_relation(c));
      const ad::Var children = ad::concat_rows(out.child_embedding);
      auto level = higher_embed(children, rels, relation_table);
      out.member_dynamic = level.dynamic;
      out.edge_embedding = level.embedding;
      out.intensity = intensity_from(children, level.dynamic);
    }
    return out;
  }

  /// d^h_v for every position at which node v appears (one row each).
  std::vector<ad::Var> per_node_feature(const DecoderOutput& out, NodeId v) const {
    std::vector<ad::Var> rows;
    for (std::size_t c = 0; c < out.pairs.size(); ++c)
      for (std::size_t i = 0; i < out.pairs[c].size(); ++i)
        if (out.pairs[c][i].node == v) rows.push_back(chain(out, c, i));
    if (rows.empty()) throw std::invalid_argument("node " + std::to_string(v) + " is not in the hyperedge");
    return rows;
  }

  PositionFeatures position_features(const DecoderOutput& out) const {
    PositionFeatures pf;
    std::vector<ad::Var> dyn, drifted;
    for (std::size_t c = 0; c < out.pairs.size(); ++c) {
      std::vector<ad::Var> parts{out.pair_dynamic[c]};
      const std::size_t k = out.pairs[c].size();
      if (out.depth == 2) parts.push_back(ad::gather_rows(ad::slice_rows(out.member_dynamic, c, 1), std::vector<std::size_t>(k, 0)));
      parts.push_back(ad::gather_rows(out.edge_embedding, std::vector<std::size_t>(k, 0)));
      dyn.push_back(ad::concat_cols(parts));
      drifted.push_back(out.node_rows[c]);
      for (const auto& p : out.pairs[c]) pf.nodes.push_back(p.node);
    }
    pf.dynamic = dyn.size() == 1 ? dyn.front() : ad::concat_rows(dyn);
    pf.drifted = drifted.size() == 1 ? drifted.front() : ad::concat_rows(drifted);
    return pf;
  }

 private:
  ad::Var chain(const DecoderOutput& out, std::size_t c, std::size_t i) const {
    std::vector<ad::Var> parts{ad::slice_rows(out.pair_dynamic[c], i, 1)};
    if (out.depth == 2) parts.push_back(ad::slice_rows(out.member_dynamic, c, 1));
    parts.push_back(out.edge_embedding);
    return ad::concat_cols(parts);
  }

  static LevelOutput attend(const AttentionBlock& block, const ad::Var& rows, const std::vector<RelationId>& relations,
                            const ad::Var& relation_table) {
    if (rows.rows() == 0) throw std::invalid_argument("attention over an empty group");
    std::vector<std::size_t> idx(relations.begin(), relations.end());
    const ad::Var x = ad::concat_cols({rows, ad::gather_rows(relation_table, std::move(idx))});
    const ad::Var dynamic = block(x);
    return {dynamic, ad::mean_rows(dynamic)};
  }

  std::size_t dim_ = 0;
  int depth_ = 1;
  AttentionBlock level1_, level2_;
  ad::Var w_out_, b_out_;
};

}  // namespace rrhtpp
