#pragma once

// Interaction-type prediction (ROC AUC of each true edge against corrupted
// candidates at the same instant) and duration prediction (expected next
// event time under the frozen-history intensity).

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "rrhtpp/error.hpp"
#include "rrhtpp/nce.hpp"
#include "rrhtpp/noise.hpp"

namespace rrhtpp {

/// Mann-Whitney estimate of P(positive > negative), ties count one half.
inline double auc(const std::vector<double>& positives, const std::vector<double>& negatives) {
  if (positives.empty()) throw std::invalid_argument("auc: no positive scores");
  if (negatives.empty()) throw std::invalid_argument("auc: no negative scores");
  std::vector<std::pair<double, bool>> all;
  all.reserve(positives.size() + negatives.size());
  for (double s : positives) all.emplace_back(s, true);
  for (double s : negatives) all.emplace_back(s, false);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  // Sum of positive mid-ranks.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::size_t pos = 0;
    while (j < all.size() && all[j].first == all[i].first) {
      pos += all[j].second;
      ++j;
    }
    const double mid = 0.5 * double(i + 1 + j);
    rank_sum += mid * double(pos);
    i = j;
  }
  const double np = double(positives.size()), nn = double(negatives.size());
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

struct RankedTrial {
  std::size_t index = 0;
  double time = 0.0;
  double positive = 0.0;
  std::vector<double> negatives;
};

inline double auc(const std::vector<RankedTrial>& trials) {
  std::vector<double> pos, neg;
  for (const auto& t : trials) {
    pos.push_back(t.positive);
    neg.insert(neg.end(), t.negatives.begin(), t.negatives.end());
  }
  return auc(pos, neg);
}

struct DurationOptions {
  double step_scale = 0.01;       // target lambda * dt per step
  double initial_step = 1e-3;     // relative to the time scale
  double survival_tol = 1e-4;
  double horizon = 1e6;           // maximum t - t^p_h
  double time_scale = 1.0;        // typical gap; scales initial_step
};

struct DurationEstimate {
  double t_prev = 0.0;
  double predicted = 0.0;
  double truncation = 0.0;  // t_max
  double survival = 1.0;    // S(t_max)
  std::size_t steps = 0;
  bool converged = false;
};

/// int_{t0}^inf t lambda(t) S(t) dt with S(t) = exp(-int_{t0}^t lambda).
/// Adaptive trapezoid: each step covers about `step_scale` expected events
/// and at most doubles the previous step. Mass beyond t_max is put at t_max.
inline DurationEstimate expected_time(const std::function<double(double)>& intensity, double t0,
                                      const DurationOptions& opt = {}) {
  DurationEstimate est;
  est.t_prev = t0;
  // Integrate in u = t - t0 so a large t0 does not swamp the quadrature.
  double u = 0.0;
  double lam = intensity(t0);
  if (!(lam >= 0.0) || !std::isfinite(lam)) throw NumericError("non-finite intensity in duration integral");
  double cum = 0.0;  // integrated intensity
  double f = 0.0;
  double mean = 0.0;
  double h = opt.initial_step * opt.time_scale;
  const double h_cap = opt.horizon / 16.0;
  while (u < opt.horizon) {
    const double target = lam > 0.0 ? opt.step_scale / lam : h_cap;
    const double step = std::min({target, 2.0 * h, h_cap, opt.horizon - u});
    const double u1 = step < opt.horizon - u ? u + step : opt.horizon;
    const double lam1 = intensity(t0 + u1);
    if (!(lam1 >= 0.0) || !std::isfinite(lam1)) throw NumericError("non-finite intensity in duration integral");
    // Reject a step that overshoots a sharp rise in intensity and retry
    // with half of it.
    if (lam1 * step > 4.0 * opt.step_scale && step > 1e-9 * opt.time_scale) {
      h = 0.25 * step;
      continue;
    }
    const double cum1 = cum + 0.5 * (u1 - u) * (lam + lam1);
    const double f1 = u1 * lam1 * std::exp(-cum1);
    mean += 0.5 * (u1 - u) * (f + f1);
    u = u1, lam = lam1, cum = cum1, f = f1, h = step;
    ++est.steps;
    if (std::exp(-cum) < opt.survival_tol) break;
  }
  const double t = t0 + u;
  est.truncation = t;
  est.survival = std::exp(-cum);
  est.converged = est.survival < opt.survival_tol;
  // Remaining survival mass is placed at t_max.
  est.predicted = t0 + mean + (t - t0) * est.survival;
  return est;
}

/// Evaluation-side model interface: intensity, history update and t^p_h.
template <class M>
concept EvaluableModel = IntensitySource<M> && requires(const M& m, const RecursiveHyperedge& h) {
  { m.last_time(h) } -> std::convertible_to<double>;
};

struct TrialRecord {
  RankedTrial trial;
  DurationEstimate duration;
  double true_time = 0.0;
};

struct EvaluationResult {
  double auc = 0.5;
  double mae = 0.0;
  std::size_t events = 0;
  std::size_t negatives = 0;
  std::size_t unconverged = 0;
  std::vector<TrialRecord> records;
};

struct EvaluationOptions {
  std::size_t negatives = 20;
  bool predict_duration = true;
  DurationOptions duration;
};

/// Walks the test events in order. Each event is scored against its
/// negatives before the model sees it.
template <EvaluableModel M>
EvaluationResult evaluate(M& model, const std::vector<Event>& test, const CorruptionModel& corruption,
                          const EvaluationOptions& opt, std::mt19937_64& rng) {
  if (test.empty()) throw DataError("empty test segment");
  EvaluationResult res;
  std::vector<RankedTrial> trials;
  double abs_err = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const Event& ev = test[i];
    TrialRecord rec;
    rec.true_time = ev.time;
    rec.trial.index = i;
    rec.trial.time = ev.time;
    rec.trial.positive = model.intensity(ev.edge, ev.time);
    for (const auto& neg : corruption.corrupt(ev.edge, opt.negatives, rng))
      rec.trial.negatives.push_back(model.intensity(neg, ev.time));
    if (opt.predict_duration) {
      const double t_prev = model.last_time(ev.edge);
      rec.duration = expected_time([&](double t) { return model.intensity(ev.edge, t); }, t_prev, opt.duration);
      if (!rec.duration.converged) ++res.unconverged;
      abs_err += std::abs(rec.duration.predicted - ev.time);
    }
    res.negatives += rec.trial.negatives.size();
    trials.push_back(rec.trial);
    res.records.push_back(std::move(rec));
    model.observe(ev);
  }
  res.events = test.size();
  res.auc = auc(trials);
  res.mae = opt.predict_duration ? abs_err / double(test.size()) : 0.0;
  return res;
}

inline void write_metrics_csv(const std::string& path, const EvaluationResult& r) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out.precision(10);
  out << "auc,mae,events,negatives,unconverged\n";
  out << r.auc << ',' << r.mae << ',' << r.events << ',' << r.negatives << ',' << r.unconverged << '\n';
}

inline void write_trials_csv(const std::string& path, const EvaluationResult& r) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out.precision(10);
  out << "event,time,t_prev,predicted,converged,positive,negatives\n";
  for (const auto& rec : r.records) {
    out << rec.trial.index << ',' << rec.trial.time << ',' << rec.duration.t_prev << ',' << rec.duration.predicted << ','
        << (rec.duration.converged ? 1 : 0) << ',' << rec.trial.positive << ',';
    for (std::size_t k = 0; k < rec.trial.negatives.size(); ++k)
      out << (k ? ";" : "") << rec.trial.negatives[k];
    out << '\n';
  }
}

}  // namespace rrhtpp
