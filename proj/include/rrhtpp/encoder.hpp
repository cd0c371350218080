#pragma once

// Dynamic node representation: Fourier time features, the three drift
// stages and per-node stored state.

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rrhtpp/checkpoint.hpp"
#include "rrhtpp/error.hpp"
#include "rrhtpp/layers.hpp"
#include "rrhtpp/tensor.hpp"

namespace rrhtpp {

/// Psi(dt)_i = cos(omega_i * dt + phi_i).
struct FourierFeatures {
  ad::Var omega, phase;  // 1 x d

  FourierFeatures() = default;
  FourierFeatures(ParameterStore& ps, const std::string& prefix, std::size_t dim) {
    // Geometric frequency ladder from 1 down to 1e-4 covers sub-unit to
    // thousands-of-units gaps once time is scaled to a mean gap near one.
    Tensor w(1, dim);
    for (std::size_t i = 0; i < dim; ++i)
      w[i] = dim > 1 ? std::pow(10.0, -4.0 * double(i) / double(dim - 1)) : 1.0;
    omega = ps.add(prefix + ".omega", std::move(w));
    phase = ps.add(prefix + ".phase", Tensor(1, dim));
  }

  std::size_t dim() const { return omega.cols(); }

  /// One row per delta.
  ad::Var operator()(const std::vector<double>& deltas) const {
    for (double dt : deltas) {
      if (!std::isfinite(dt)) throw NumericError("fourier: non-finite time delta");
      if (dt < 0.0) throw std::invalid_argument("fourier: negative time delta " + std::to_string(dt));
    }
    return ad::cos(ad::add(ad::matmul(ad::constant(Tensor::column(deltas)), omega), phase));
  }
  ad::Var at(double dt) const { return (*this)(std::vector<double>{dt}); }
};

enum class DriftVariant { TimeProjection, TimeEmbedding, NeuralOde };

inline std::string to_string(DriftVariant v) {
  switch (v) {
    case DriftVariant::TimeProjection: return "time-projection";
    case DriftVariant::TimeEmbedding: return "time-embedding";
    case DriftVariant::NeuralOde: return "neural-ode";
  }
  return "?";
}

inline DriftVariant parse_drift_variant(const std::string& s) {
  if (s == "time-projection" || s == "j") return DriftVariant::TimeProjection;
  if (s == "time-embedding" || s == "f") return DriftVariant::TimeEmbedding;
  if (s == "neural-ode" || s == "o") return DriftVariant::NeuralOde;
  throw UsageError("unknown drift variant '" + s + "' (expected time-projection, time-embedding or neural-ode)");
}

/// Evolves stored node states over the elapsed time since each node's last
/// event. Inputs are batched: row r of `stored` drifts by deltas[r].
class DriftStage {
 public:
  DriftStage() = default;
  DriftStage(ParameterStore& ps, DriftVariant variant, std::size_t dim, std::size_t ode_steps,
             const FourierFeatures* fourier, std::mt19937_64& rng)
      : variant_(variant), dim_(dim), ode_steps_(ode_steps), fourier_(fourier) {
    const double bound = 1.0 / std::sqrt(double(dim));
    switch (variant) {
      case DriftVariant::TimeProjection:
        w_t_ = ps.add("drift.w_t", uniform_tensor(1, dim, bound, rng));
        break;
      case DriftVariant::TimeEmbedding:
        w_s_ = ps.add("drift.w_s", uniform_tensor(dim, dim, bound, rng));
        w_t_ = ps.add("drift.w_t", uniform_tensor(dim, dim, bound, rng));
        break;
      case DriftVariant::NeuralOde:
        if (ode_steps == 0) throw UsageError("neural-ode drift needs at least one step");
        ode_w0_ = ps.add("drift.ode.w0", uniform_tensor(2 * dim, dim, 1.0 / std::sqrt(2.0 * dim), rng));
        ode_b0_ = ps.add("drift.ode.b0", Tensor(1, dim));
        ode_w1_ = ps.add("drift.ode.w1", uniform_tensor(dim, dim, bound, rng));
        ode_b1_ = ps.add("drift.ode.b1", Tensor(1, dim));
        break;
    }
  }

  DriftVariant variant() const { return variant_; }
  std::size_t ode_steps() const { return ode_steps_; }

  ad::Var operator()(const ad::Var& stored, const std::vector<double>& deltas) const {
    if (stored.rows() != deltas.size()) throw std::invalid_argument("drift: one delta per row required");
    for (double dt : deltas)
      if (!(dt >= 0.0)) throw std::invalid_argument("drift: query time precedes last update");
    using namespace ad;
    switch (variant_) {
      case DriftVariant::TimeProjection: {
        const Var factor = add_scalar(matmul(constant(Tensor::column(deltas)), w_t_), 1.0);
        return mul(stored, factor);
      }
      case DriftVariant::TimeEmbedding:
        return tanh(add(matmul(stored, w_s_), matmul((*fourier_)(deltas), w_t_)));
      case DriftVariant::NeuralOde:
        return integrate(stored, deltas);
    }
    throw std::logic_error("unreachable");
  }

  /// The ODE right-hand side f(v, Psi(tau)) = W1 tanh(W0 [v; Psi(tau)] + b0) + b1.
  ad::Var ode_gradient(const ad::Var& v, const std::vector<double>& offsets) const {
    using namespace ad;
    const Var in = concat_cols({v, (*fourier_)(offsets)});
    return add(matmul(tanh(add(matmul(in, ode_w0_), ode_b0_)), ode_w1_), ode_b1_);
  }

  ad::Var& w_t() { return w_t_; }
  ad::Var& w_s() { return w_s_; }
  ad::Var& ode_w0() { return ode_w0_; }
  ad::Var& ode_b0() { return ode_b0_; }
  ad::Var& ode_w1() { return ode_w1_; }
  ad::Var& ode_b1() { return ode_b1_; }

 private:
  // Classic fixed-step RK4; each row uses its own step dt / ode_steps.
  ad::Var integrate(const ad::Var& v0, const std::vector<double>& deltas) const {
    using namespace ad;
    bool any = false;
    for (double dt : deltas) any = any || dt > 0.0;
    if (!any) return v0;
    const std::size_t rows = deltas.size();
    std::vector<double> h(rows), half(rows), sixth(rows), tau(rows, 0.0), tau_mid(rows), tau_end(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      h[r] = deltas[r] / double(ode_steps_);
      half[r] = 0.5 * h[r];
      sixth[r] = h[r] / 6.0;
    }
    Var v = v0;
    for (std::size_t s = 0; s < ode_steps_; ++s) {
      for (std::size_t r = 0; r < rows; ++r) {
        tau[r] = double(s) * h[r];
        tau_mid[r] = tau[r] + half[r];
        tau_end[r] = tau[r] + h[r];
      }
      const Var k1 = ode_gradient(v, tau);
      const Var k2 = ode_gradient(add(v, scale_rows(k1, half)), tau_mid);
      const Var k3 = ode_gradient(add(v, scale_rows(k2, half)), tau_mid);
      const Var k4 = ode_gradient(add(v, scale_rows(k3, h)), tau_end);
      const Var incr = add(add(k1, scale(add(k2, k3), 2.0)), k4);
      v = add(v, scale_rows(incr, sixth));
    }
    return v;
  }

  DriftVariant variant_ = DriftVariant::TimeEmbedding;
  std::size_t dim_ = 0;
  std::size_t ode_steps_ = 8;
  const FourierFeatures* fourier_ = nullptr;
  ad::Var w_t_, w_s_;
  ad::Var ode_w0_, ode_b0_, ode_w1_, ode_b1_;
};

/// Per-node stored embedding v(t^p_v) and last-event time t^p_v. Nodes
/// that never had an event fall back to their base embedding row at t = 0.
class NodeState {
 public:
  NodeState() = default;
  explicit NodeState(std::size_t num_nodes) : stored_(num_nodes), last_time_(num_nodes, 0.0) {}

  std::size_t size() const { return last_time_.size(); }
  double last_time(std::size_t v) const { return last_time_.at(v); }
  bool updated(std::size_t v) const { return stored_.at(v).has_value(); }
  const std::optional<ad::Var>& stored(std::size_t v) const { return stored_.at(v); }

  void set(std::size_t v, ad::Var state, double time) {
    if (time < last_time_.at(v)) throw std::invalid_argument("node update goes back in time");
    stored_[v] = std::move(state);
    last_time_[v] = time;
  }

  void reset() {
    for (auto& s : stored_) s.reset();
    std::fill(last_time_.begin(), last_time_.end(), 0.0);
  }

  /// Cuts every stored state from the tape (truncated backprop boundary).
  void detach() {
    for (auto& s : stored_)
      if (s) s = s->detach();
  }

 private:
  std::vector<std::optional<ad::Var>> stored_;
  std::vector<double> last_time_;
};

}  // namespace rrhtpp
