#pragma once

// Noise-contrastive training: per-event NCE terms, the supervised
// (classification) term, AdamW, the event-ordered training loop and a
// brute-force likelihood oracle for tiny vocabularies.

#include <chrono>
#include <cmath>
#include <concepts>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "rrhtpp/checkpoint.hpp"
#include "rrhtpp/error.hpp"
#include "rrhtpp/model.hpp"
#include "rrhtpp/noise.hpp"

namespace rrhtpp {

namespace detail {
inline void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw NumericError(std::string(what) + " must be positive and finite");
}
}  // namespace detail

/// -log(lambda / (lambda + N^q lambda^q_h)).
inline double nce_true_term(double lambda, double noise_rate_h, int noise_streams) {
  detail::require_positive(lambda, "intensity");
  if (noise_streams > 0) detail::require_positive(noise_rate_h, "noise intensity");
  return std::log(lambda + noise_streams * noise_rate_h) - std::log(lambda);
}

/// -log(lambda^q_h / (lambda + N^q lambda^q_h)).
inline double nce_noise_term(double lambda, double noise_rate_h, int noise_streams) {
  detail::require_positive(lambda, "intensity");
  detail::require_positive(noise_rate_h, "noise intensity");
  return std::log(lambda + noise_streams * noise_rate_h) - std::log(noise_rate_h);
}

/// -log(lambda_true / (lambda_true + sum of negative intensities)).
inline double supervised_term(double lambda_true, const std::vector<double>& negatives) {
  if (negatives.empty()) throw std::invalid_argument("supervised term needs at least one negative");
  detail::require_positive(lambda_true, "intensity");
  double total = lambda_true;
  for (double v : negatives) {
    detail::require_positive(v, "negative intensity");
    total += v;
  }
  return std::log(total) - std::log(lambda_true);
}

inline ad::Var nce_true_term(const ad::Var& lambda, double noise_rate_h, int noise_streams) {
  return ad::log(ad::add_scalar(lambda, noise_streams * noise_rate_h)) - ad::log(lambda);
}

inline ad::Var nce_noise_term(const ad::Var& lambda, double noise_rate_h, int noise_streams) {
  detail::require_positive(noise_rate_h, "noise intensity");
  return ad::add_scalar(ad::log(ad::add_scalar(lambda, noise_streams * noise_rate_h)), -std::log(noise_rate_h));
}

inline ad::Var supervised_term(const ad::Var& lambda_true, const std::vector<ad::Var>& negatives) {
  if (negatives.empty()) throw std::invalid_argument("supervised term needs at least one negative");
  ad::Var total = lambda_true;
  for (const auto& v : negatives) total = total + v;
  return ad::log(total) - ad::log(lambda_true);
}

/// Adam with decoupled weight decay and global-norm clipping.
class AdamW {
 public:
  struct Options {
    double lr = 5e-4;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 10.0;  // <= 0 disables clipping
  };

  AdamW() = default;
  AdamW(ParameterStore& params, Options opt) : params_(&params), opt_(opt) {
    for (const auto& [name, var] : params) {
      m_.emplace_back(var.rows(), var.cols());
      v_.emplace_back(var.rows(), var.cols());
    }
  }

  const Options& options() const { return opt_; }
  std::size_t steps() const { return step_; }

  double grad_norm() const {
    double sq = 0.0;
    for (const auto& [name, var] : *params_) {
      if (!var.node()->grad.size()) continue;
      for (double g : var.node()->grad.values()) sq += g * g;
    }
    return std::sqrt(sq);
  }

  /// Returns the gradient norm before clipping.
  double step() {
    const double norm = grad_norm();
    if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
    const double clip = opt_.clip_norm > 0.0 && norm > opt_.clip_norm ? opt_.clip_norm / norm : 1.0;
    ++step_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, double(step_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, double(step_));
    std::size_t i = 0;
    for (auto& [name, var] : *params_) {
      Tensor& p = var.mutable_value();
      const Tensor& g = var.node()->grad;
      Tensor& m = m_[i];
      Tensor& v = v_[i];
      ++i;
      for (std::size_t k = 0; k < p.size(); ++k) {
        const double gk = g.size() ? g[k] * clip : 0.0;
        m[k] = opt_.beta1 * m[k] + (1.0 - opt_.beta1) * gk;
        v[k] = opt_.beta2 * v[k] + (1.0 - opt_.beta2) * gk * gk;
        const double update = (m[k] / bc1) / (std::sqrt(v[k] / bc2) + opt_.eps);
        p[k] -= opt_.lr * (update + opt_.weight_decay * p[k]);
      }
    }
    return norm;
  }

  void save(Checkpoint& ck) const {
    std::size_t i = 0;
    for (const auto& [name, var] : *params_) {
      ck.tensors.emplace_back("adam.m." + name, m_[i]);
      ck.tensors.emplace_back("adam.v." + name, v_[i]);
      ++i;
    }
    ck.meta["adam.step"] = std::to_string(step_);
  }

  void load(const Checkpoint& ck) {
    std::size_t i = 0;
    for (const auto& [name, var] : *params_) {
      const Tensor& m = ck.at("adam.m." + name);
      const Tensor& v = ck.at("adam.v." + name);
      if (!m.same_shape(var.value()) || !v.same_shape(var.value()))
        throw DataError("checkpoint optimizer state for '" + name + "' has the wrong shape");
      m_[i] = m;
      v_[i] = v;
      ++i;
    }
    auto it = ck.meta.find("adam.step");
    step_ = it == ck.meta.end() ? 0 : std::stoull(it->second);
  }

 private:
  ParameterStore* params_ = nullptr;
  Options opt_;
  std::vector<Tensor> m_, v_;
  std::size_t step_ = 0;
};

struct TrainConfig {
  std::size_t batch = 128;
  int noise_streams = 20;     // N^q
  std::size_t negatives = 20; // N^e
  double alpha = 1.0;
  AdamW::Options optimizer;
  std::uint64_t seed = 1;
  std::optional<double> bandwidth;
};

struct EpochResult {
  double loss = 0.0;  // combined loss per observed event
  double true_terms = 0.0;
  double noise_terms = 0.0;
  double supervised_terms = 0.0;
  std::size_t events = 0;
  std::size_t noise_events = 0;
  std::size_t steps = 0;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double wall_seconds = 0.0;
};

/// Event-ordered NCE training. Node states carry across batches but the
/// tape is cut after every optimizer step.
class Trainer {
 public:
  Trainer(IntensityModel& model, const EventStream& train, TrainConfig cfg)
      : model_(&model),
        train_(train),
        cfg_(cfg),
        kde_(train.empty() ? RateKDE() : RateKDE::fit(train, cfg.bandwidth)),
        corruption_(CorruptionModel::fit(train)),
        optimizer_(model.parameters(), cfg.optimizer),
        runner_(model) {
    if (cfg_.batch == 0) throw std::invalid_argument("batch size must be positive");
    if (cfg_.noise_streams < 0) throw std::invalid_argument("noise stream count must be non-negative");
    if (cfg_.negatives == 0) throw std::invalid_argument("negative count must be positive");
    if (cfg_.alpha < 0.0) throw std::invalid_argument("alpha must be non-negative");
    for (const auto& e : train_.events) distinct_.add(e.edge);
  }

  const TrainConfig& config() const { return cfg_; }
  const RateKDE& kde() const { return kde_; }
  const CorruptionModel& corruption() const { return corruption_; }
  const CandidateSet& candidates() const { return candidates_; }
  AdamW& optimizer() { return optimizer_; }
  ModelRunner& runner() { return runner_; }
  std::size_t epoch() const { return epoch_; }

  /// Fresh negatives for every distinct training edge; H^c is the union.
  void prepare_epoch(std::mt19937_64& rng) {
    candidates_.clear();
    negatives_.clear();
    for (const auto& e : distinct_.edges()) candidates_.add(e);
    for (const auto& e : distinct_.edges()) {
      auto negs = corruption_.corrupt(e, cfg_.negatives, rng);
      for (const auto& n : negs) candidates_.add(n);
      negatives_.emplace(e, std::move(negs));
    }
  }

  /// One pass over the training stream from a reset state.
  EpochResult train_epoch() {
    auto rng = epoch_rng(epoch_, 0);
    prepare_epoch(rng);
    runner_.reset();
    EpochResult r = pass(train_.events, 0.0, rng, true);
    ++epoch_;
    return r;
  }

  /// Combined loss with no parameter change. Replays `train` first so the
  /// node states match the end of training, then scores `stream`.
  double validation_loss(const EventStream& stream) {
    auto rng = epoch_rng(epoch_, 1);
    if (candidates_.empty()) prepare_epoch(rng);
    runner_.reset();
    runner_.replay(train_.events);
    const double start = train_.empty() ? 0.0 : train_.events.back().time;
    if (stream.empty()) return 0.0;
    ad::NoGradGuard guard;
    return pass(stream.events, start, rng, false).loss;
  }

  /// Loss of the training stream under the current parameters, no updates.
  EpochResult frozen_loss(std::size_t epoch_tag) {
    auto rng = epoch_rng(epoch_tag, 0);
    prepare_epoch(rng);
    runner_.reset();
    ad::NoGradGuard guard;
    return pass(train_.events, 0.0, rng, false);
  }

  /// Summed combined loss of `events` from a reset state as one tape (no
  /// truncation, no update). Negatives and noise come from `seed`.
  ad::Var loss_graph(const std::vector<Event>& events, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    prepare_epoch(rng);
    runner_.reset();
    std::optional<ad::Var> total;
    pass(events, 0.0, rng, false, &total);
    runner_.reset();
    if (!total) throw std::invalid_argument("loss graph of an empty stream");
    return *total;
  }

  /// Runs epochs, keeping the parameters with the lowest validation loss.
  std::vector<EpochMetrics> fit(const EventStream& validation, std::size_t epochs,
                                const std::function<void(const EpochMetrics&)>& on_epoch = {}) {
    std::vector<EpochMetrics> log;
    for (std::size_t i = 0; i < epochs; ++i) {
      const auto start = std::chrono::steady_clock::now();
      EpochMetrics m;
      m.epoch = epoch_;
      m.train_loss = train_epoch().loss;
      m.val_loss = validation.empty() ? m.train_loss : validation_loss(validation);
      m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (!best_ || m.val_loss < best_loss_) {
        best_loss_ = m.val_loss;
        best_ = model_->parameters().values();
        best_epoch_ = m.epoch;
      }
      log.push_back(m);
      if (on_epoch) on_epoch(m);
    }
    return log;
  }

  bool has_best() const { return best_.has_value(); }
  double best_loss() const { return best_loss_; }
  std::size_t best_epoch() const { return best_epoch_; }
  void restore_best() {
    if (best_) model_->parameters().assign(*best_);
  }

  void save(Checkpoint& ck) const {
    ck.meta["epoch"] = std::to_string(epoch_);
    if (best_) {
      std::ostringstream os;
      os.precision(17);
      os << best_loss_;
      ck.meta["best_val_loss"] = os.str();
      ck.meta["best_epoch"] = std::to_string(best_epoch_);
      std::size_t i = 0;
      for (const auto& [name, var] : model_->parameters()) ck.tensors.emplace_back("best." + name, (*best_)[i++]);
    }
    optimizer_.save(ck);
  }

  void load(const Checkpoint& ck) {
    optimizer_.load(ck);
    auto it = ck.meta.find("epoch");
    epoch_ = it == ck.meta.end() ? 0 : std::stoull(it->second);
    if (auto b = ck.meta.find("best_val_loss"); b != ck.meta.end()) {
      best_loss_ = std::stod(b->second);
      best_ = model_->parameters().values();
      std::size_t i = 0;
      for (const auto& [name, var] : model_->parameters()) {
        const Tensor& t = ck.at("best." + name);
        if (!t.same_shape(var.value())) throw DataError("checkpoint tensor 'best." + name + "' has the wrong shape");
        (*best_)[i++] = t;
      }
      best_epoch_ = std::stoull(ck.meta.at("best_epoch"));
    }
  }

 private:
  std::mt19937_64 epoch_rng(std::size_t epoch, std::uint64_t stream) const {
    std::seed_seq seq{std::uint64_t(cfg_.seed & 0xffffffffu), std::uint64_t(cfg_.seed >> 32), std::uint64_t(epoch),
                      stream};
    return std::mt19937_64(seq);
  }

  const std::vector<RecursiveHyperedge>& negatives_for(const RecursiveHyperedge& edge, std::mt19937_64& rng) {
    auto it = negatives_.find(edge);
    if (it != negatives_.end()) return it->second;
    return negatives_.emplace(edge, corruption_.corrupt(edge, cfg_.negatives, rng)).first->second;
  }

  static void check_finite(double v, std::size_t event, const char* what, std::size_t epoch) {
    if (!std::isfinite(v))
      throw NumericError("non-finite " + std::string(what) + " at epoch " + std::to_string(epoch) + ", event " +
                         std::to_string(event));
  }

  EpochResult pass(const std::vector<Event>& events, double start, std::mt19937_64& rng, bool learn,
                   std::optional<ad::Var>* graph = nullptr) {
    EpochResult r;
    if (events.empty()) return r;
    const int nq = cfg_.noise_streams;
    double t = start;
    double noise_rate = kde_.sample(rng);
    std::optional<ad::Var> batch_loss;
    std::size_t in_batch = 0;
    auto accumulate = [&](const ad::Var& term) { batch_loss = batch_loss ? *batch_loss + term : term; };

    for (std::size_t n = 0; n < events.size(); ++n) {
      const Event& ev = events[n];
      // Noise events strictly between the previous observed event and this one.
      if (nq > 0) {
        while (true) {
          const NoiseDraw d = simulate_noise_gap(kde_, nq, candidates_, rng);
          noise_rate = d.rate;
          if (t + d.gap >= ev.time) break;
          t += d.gap;
          auto snap = runner_.snapshot(t);
          const ad::Var lam = runner_.evaluate(candidates_[d.edge], snap).intensity;
          const ad::Var term = nce_noise_term(lam, candidates_.per_edge_rate(noise_rate), nq);
          check_finite(term.item(), n, "noise term", epoch_);
          r.noise_terms += term.item();
          ++r.noise_events;
          accumulate(term);
        }
      }
      t = ev.time;

      auto snap = runner_.snapshot(ev.time);
      const DecoderOutput out = runner_.evaluate(ev.edge, snap);
      const ad::Var true_term = nce_true_term(out.intensity, candidates_.per_edge_rate(noise_rate), nq);
      check_finite(true_term.item(), n, "true-event term", epoch_);
      r.true_terms += true_term.item();
      accumulate(true_term);
      if (cfg_.alpha > 0.0) {
        std::vector<ad::Var> neg;
        for (const auto& h : negatives_for(ev.edge, rng)) neg.push_back(runner_.evaluate(h, snap).intensity);
        const ad::Var sup = supervised_term(out.intensity, neg);
        check_finite(sup.item(), n, "supervised term", epoch_);
        r.supervised_terms += sup.item();
        accumulate(ad::scale(sup, cfg_.alpha));
      }
      runner_.update(ev, out, snap);
      ++r.events;
      ++in_batch;

      if (graph) continue;
      if (in_batch == cfg_.batch || n + 1 == events.size()) {
        if (learn && batch_loss) {
          const ad::Var mean_loss = ad::scale(*batch_loss, 1.0 / double(in_batch));
          model_->parameters().zero_grad();
          ad::backward(mean_loss);
          optimizer_.step();
          ++r.steps;
        }
        runner_.detach();
        batch_loss.reset();
        in_batch = 0;
      }
    }
    r.loss = (r.true_terms + r.noise_terms + cfg_.alpha * r.supervised_terms) / double(r.events);
    if (graph) *graph = batch_loss;
    return r;
  }

  IntensityModel* model_;
  EventStream train_;
  TrainConfig cfg_;
  RateKDE kde_;
  CorruptionModel corruption_;
  AdamW optimizer_;
  ModelRunner runner_;
  CandidateSet distinct_, candidates_;
  std::unordered_map<RecursiveHyperedge, std::vector<RecursiveHyperedge>, EdgeKeyHash> negatives_;
  std::size_t epoch_ = 0;
  std::optional<std::vector<Tensor>> best_;
  double best_loss_ = std::numeric_limits<double>::infinity();
  std::size_t best_epoch_ = 0;
};

/// Anything that exposes a history-conditioned intensity.
template <class M>
concept IntensitySource = requires(M& m, const RecursiveHyperedge& h, double t, const Event& e) {
  { m.intensity(h, t) } -> std::convertible_to<double>;
  m.observe(e);
  m.reset();
};

/// Adapts a ModelRunner to IntensitySource (no tape is recorded).
class RunnerSource {
 public:
  explicit RunnerSource(ModelRunner& runner) : runner_(&runner) {}
  double intensity(const RecursiveHyperedge& h, double t) const { return runner_->score(h, t); }
  void observe(const Event& e) {
    ad::NoGradGuard guard;
    runner_->observe(e);
  }
  void reset() { runner_->reset(); }
  double last_time(const RecursiveHyperedge& h) const { return runner_->edge_last_time(h); }

 private:
  ModelRunner* runner_;
};

inline constexpr std::size_t kMaxOracleVocabulary = 32;

/// -sum_n log lambda_{h_n}(t_n) + sum_h int_0^T lambda_h, with the integral
/// taken by the trapezoid rule on `steps` sub-intervals between events.
template <IntensitySource M>
double nll_oracle(M& model, const std::vector<Event>& events, const std::vector<RecursiveHyperedge>& vocabulary,
                  double horizon, std::size_t steps) {
  if (vocabulary.empty()) throw DataError("nll oracle needs a non-empty vocabulary");
  if (vocabulary.size() > kMaxOracleVocabulary)
    throw DataError("nll oracle vocabulary of " + std::to_string(vocabulary.size()) + " edges exceeds " +
                    std::to_string(kMaxOracleVocabulary));
  if (steps == 0) throw std::invalid_argument("nll oracle needs at least one quadrature step");
  if (!events.empty() && events.back().time > horizon) throw DataError("horizon precedes the last event");
  model.reset();
  auto integrate = [&](double a, double b) {
    if (b <= a) return 0.0;
    const double h = (b - a) / double(steps);
    double total = 0.0;
    for (const auto& e : vocabulary) {
      double s = 0.5 * (model.intensity(e, a) + model.intensity(e, b));
      for (std::size_t k = 1; k < steps; ++k) s += model.intensity(e, a + double(k) * h);
      total += s * h;
    }
    return total;
  };
  double nll = 0.0, prev = 0.0;
  for (const auto& ev : events) {
    if (std::find(vocabulary.begin(), vocabulary.end(), ev.edge) == vocabulary.end())
      throw DataError("event edge is outside the oracle vocabulary");
    nll += integrate(prev, ev.time);
    const double lam = model.intensity(ev.edge, ev.time);
    if (!(lam > 0.0)) throw NumericError("zero intensity at an observed event");
    nll -= std::log(lam);
    model.observe(ev);
    prev = ev.time;
  }
  nll += integrate(prev, horizon);
  return nll;
}

}  // namespace rrhtpp
