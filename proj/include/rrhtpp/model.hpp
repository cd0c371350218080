#pragma once

// The full intensity model lambda_h(t) = f(h; V(t), R) and the stateful
// runner that replays an event stream through it.

#include <map>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "rrhtpp/checkpoint.hpp"
#include "rrhtpp/decoder.hpp"
#include "rrhtpp/encoder.hpp"
#include "rrhtpp/hypergraph.hpp"
#include "rrhtpp/layers.hpp"

namespace rrhtpp {

struct ModelConfig {
  std::size_t num_nodes = 0;
  std::size_t num_relations = 0;
  int depth = 1;
  std::size_t dim = 64;
  std::size_t heads = 4;
  DriftVariant drift = DriftVariant::TimeEmbedding;
  std::size_t ode_steps = 8;
  std::uint64_t seed = 1;
};

/// Owns every learnable tensor. Components hold aliases of the store's
/// leaves, so the model is neither copyable nor movable.
class IntensityModel {
 public:
  explicit IntensityModel(const ModelConfig& cfg) : config_(cfg) {
    if (cfg.num_nodes == 0 || cfg.num_relations == 0) throw std::invalid_argument("model needs nodes and relations");
    if (cfg.depth != 1 && cfg.depth != 2) throw std::invalid_argument("model depth must be 1 or 2");
    if (cfg.dim == 0) throw std::invalid_argument("embedding dimension must be positive");
    std::mt19937_64 rng(cfg.seed);
    const std::size_t d = cfg.dim;
    const double bound = 1.0 / std::sqrt(double(d));
    base_ = params_.add("node.base", uniform_tensor(cfg.num_nodes, d, bound, rng));
    relations_ = params_.add("relation.embedding", uniform_tensor(cfg.num_relations, d, bound, rng));
    fourier_ = FourierFeatures(params_, "fourier", d);
    drift_ = DriftStage(params_, cfg.drift, d, cfg.ode_steps, &fourier_, rng);
    decoder_ = HyperedgeDecoder(params_, d, cfg.depth, cfg.heads, rng);
    const std::size_t in = d * (std::size_t(cfg.depth) + 3);
    interaction_ = InteractionMlp(params_, "update.mlp", in, std::max<std::size_t>(in / 2, 1), d, rng);
    rnn_ = GruCell(params_, "update.rnn", d, d, rng);
  }
  IntensityModel(const IntensityModel&) = delete;
  IntensityModel& operator=(const IntensityModel&) = delete;

  const ModelConfig& config() const { return config_; }
  ParameterStore& parameters() { return params_; }
  const ParameterStore& parameters() const { return params_; }

  const ad::Var& base_embeddings() const { return base_; }
  const ad::Var& relations() const { return relations_; }
  const FourierFeatures& fourier() const { return fourier_; }
  FourierFeatures& fourier() { return fourier_; }
  const DriftStage& drift() const { return drift_; }
  DriftStage& drift() { return drift_; }
  const HyperedgeDecoder& decoder() const { return decoder_; }
  HyperedgeDecoder& decoder() { return decoder_; }
  const InteractionMlp& interaction() const { return interaction_; }
  const GruCell& rnn() const { return rnn_; }

 private:
  ModelConfig config_;
  ParameterStore params_;
  ad::Var base_, relations_;
  FourierFeatures fourier_;
  DriftStage drift_;
  HyperedgeDecoder decoder_;
  InteractionMlp interaction_;
  GruCell rnn_;
};

/// Drifted node embeddings V(t) at one query time, computed lazily and
/// cached per node.
class Snapshot {
 public:
  Snapshot(const IntensityModel& model, const NodeState& state, double t) : model_(&model), state_(&state), t_(t) {}

  double time() const { return t_; }

  ad::Var rows(const std::vector<NodeId>& ids) {
    std::vector<NodeId> missing;
    for (NodeId v : ids)
      if (!cache_.count(v) && std::find(missing.begin(), missing.end(), v) == missing.end()) missing.push_back(v);
    if (!missing.empty()) {
      std::vector<ad::Var> stored;
      std::vector<double> deltas;
      for (NodeId v : missing) {
        stored.push_back(stored_row(v));
        const double dt = t_ - state_->last_time(v);
        if (dt < 0.0)
          throw std::invalid_argument("drift queried at t=" + std::to_string(t_) + " before node " +
                                      std::to_string(v) + "'s last update");
        deltas.push_back(dt);
      }
      const ad::Var drifted =
          model_->drift()(stored.size() == 1 ? stored.front() : ad::concat_rows(stored), deltas);
      if (missing.size() == 1) {
        cache_[missing.front()] = drifted;
      } else {
        for (std::size_t i = 0; i < missing.size(); ++i) cache_[missing[i]] = ad::slice_rows(drifted, i, 1);
      }
    }
    if (ids.size() == 1) return cache_.at(ids.front());
    std::vector<ad::Var> out;
    out.reserve(ids.size());
    for (NodeId v : ids) out.push_back(cache_.at(v));
    return ad::concat_rows(out);
  }

  ad::Var row(NodeId v) { return rows({v}); }

  /// v(t^p_v) = base row + dynamic state (zero until the node's first event).
  ad::Var stored_row(NodeId v) const {
    if (v >= state_->size()) throw std::out_of_range("node id " + std::to_string(v) + " out of range");
    const ad::Var base = ad::slice_rows(model_->base_embeddings(), v, 1);
    const auto& s = state_->stored(v);
    return s ? ad::add(base, *s) : base;
  }

  /// Recurrent hidden state of v; zero before its first event.
  ad::Var dynamic_row(NodeId v) const {
    const auto& s = state_->stored(v);
    return s ? *s : ad::constant(Tensor(1, model_->config().dim));
  }

 private:
  const IntensityModel* model_;
  const NodeState* state_;
  double t_;
  std::unordered_map<NodeId, ad::Var> cache_;
};

/// Chronological replay of a stream through the model.
class ModelRunner {
 public:
  explicit ModelRunner(const IntensityModel& model) : model_(&model), state_(model.config().num_nodes) {}

  const IntensityModel& model() const { return *model_; }
  const NodeState& state() const { return state_; }
  NodeState& state() { return state_; }

  void reset() { state_.reset(); }
  void detach() { state_.detach(); }

  Snapshot snapshot(double t) const { return Snapshot(*model_, state_, t); }

  DecoderOutput evaluate(const RecursiveHyperedge& edge, Snapshot& snap) const {
    return model_->decoder()(edge, model_->relations(), [&snap](const std::vector<NodeId>& ids) { return snap.rows(ids); });
  }

  /// lambda_h(t) on the current state, without recording a tape.
  double score(const RecursiveHyperedge& edge, double t) const {
    ad::NoGradGuard guard;
    auto snap = snapshot(t);
    return evaluate(edge, snap).lambda();
  }

  /// Node update for the event whose decoder output is `out`. Only nodes in
  /// the event change; a node at several positions uses the mean of its
  /// per-position interaction features.
  void update(const Event& ev, const DecoderOutput& out, Snapshot& snap) {
    using namespace ad;
    const auto pf = model_->decoder().position_features(out);
    std::vector<double> deltas;
    deltas.reserve(pf.nodes.size());
    for (NodeId v : pf.nodes) deltas.push_back(ev.time - state_.last_time(v));
    const Var features = model_->interaction()(concat_cols({pf.dynamic, pf.drifted, model_->fourier()(deltas)}));

    std::map<NodeId, std::vector<std::size_t>> positions;
    for (std::size_t i = 0; i < pf.nodes.size(); ++i) positions[pf.nodes[i]].push_back(i);
    std::vector<Var> inputs, hidden;
    std::vector<NodeId> nodes;
    for (const auto& [v, idx] : positions) {
      nodes.push_back(v);
      inputs.push_back(idx.size() == 1 ? slice_rows(features, idx.front(), 1) : mean_rows(gather_rows(features, idx)));
      hidden.push_back(snap.dynamic_row(v));
    }
    const Var next = model_->rnn()(concat_rows(hidden), concat_rows(inputs));
    for (std::size_t j = 0; j < nodes.size(); ++j)
      state_.set(nodes[j], nodes.size() == 1 ? next : slice_rows(next, j, 1), ev.time);
  }

  void observe(const Event& ev) {
    auto snap = snapshot(ev.time);
    const auto out = evaluate(ev.edge, snap);
    update(ev, out, snap);
  }

  /// Replays events without recording a tape.
  void replay(const std::vector<Event>& events) {
    ad::NoGradGuard guard;
    for (const auto& ev : events) observe(ev);
  }

  /// Latest last-event time among the edge's nodes.
  double edge_last_time(const RecursiveHyperedge& edge) const {
    double t = 0.0;
    for (NodeId v : edge.nodes()) t = std::max(t, state_.last_time(v));
    return t;
  }

  void save_state(Checkpoint& ck) const {
    const std::size_t n = state_.size(), d = model_->config().dim;
    Tensor stored(n, d), mask(1, n), times(1, n);
    for (std::size_t v = 0; v < n; ++v) {
      times[v] = state_.last_time(v);
      if (const auto& s = state_.stored(v)) {
        mask[v] = 1.0;
        std::copy_n(s->value().data(), d, stored.data() + v * d);
      }
    }
    ck.tensors.emplace_back("state.stored", std::move(stored));
    ck.tensors.emplace_back("state.updated", std::move(mask));
    ck.tensors.emplace_back("state.last_time", std::move(times));
  }

  void load_state(const Checkpoint& ck) {
    const Tensor& stored = ck.at("state.stored");
    const Tensor& mask = ck.at("state.updated");
    const Tensor& times = ck.at("state.last_time");
    const std::size_t n = state_.size(), d = model_->config().dim;
    if (stored.rows() != n || stored.cols() != d || mask.size() != n || times.size() != n)
      throw DataError("checkpoint node state does not match the model shape");
    state_.reset();
    for (std::size_t v = 0; v < n; ++v) {
      if (mask[v] != 0.0) {
        Tensor row(1, d);
        std::copy_n(stored.data() + v * d, d, row.data());
        state_.set(v, ad::constant(std::move(row)), times[v]);
      }
    }
  }

 private:
  const IntensityModel* model_;
  NodeState state_;
};

}  // namespace rrhtpp
