#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "negobelief/domain.hpp"
#include "negobelief/error.hpp"
#include "negobelief/posterior.hpp"

namespace negobelief {

// Raw per-ordering compatibility scores from a likelihood provider, indexed
// by canonical ordering index.
struct LikelihoodScores {
  std::array<double, kOrderingCount> raw{};
  std::optional<int> sample_id;

  void validate() const {
    for (double v : raw) {
      if (!std::isfinite(v)) throw ValidationError("likelihood scores must be finite");
    }
  }

  friend bool operator==(const LikelihoodScores&, const LikelihoodScores&) = default;
};

using Weights = std::array<double, kOrderingCount>;

enum class TransformKind {
  exponential,  // exp(clip(s) / T)
  linear,       // 1 + clip(s) / T, must stay positive
};

enum class AggregationOrder {
  mean_then_anneal,
  anneal_then_mean,
};

struct BeliefConfig {
  double likelihood_temperature = 25.0;
  // nullopt means no clipping.
  std::optional<double> clip_bound = 3.0;
  double posterior_temperature = 0.7;
  int sample_count = 16;
  Posterior prior = Posterior::uniform();
  TransformKind transform = TransformKind::exponential;
  AggregationOrder aggregation = AggregationOrder::mean_then_anneal;

  void validate() const {
    if (!(likelihood_temperature > 0.0) || !std::isfinite(likelihood_temperature)) {
      throw ValidationError("likelihood_temperature must be a positive finite number");
    }
    if (!(posterior_temperature > 0.0) || !std::isfinite(posterior_temperature)) {
      throw ValidationError("posterior_temperature must be a positive finite number");
    }
    if (clip_bound && !(*clip_bound > 0.0)) throw ValidationError("clip_bound must be positive");
    if (sample_count < 1) throw ValidationError("sample_count must be >= 1");
  }
};

inline double clip_score(double raw, const std::optional<double>& bound) {
  if (!bound || std::isinf(*bound)) return raw;
  return std::clamp(raw, -*bound, *bound);
}

// Clipped, temperature-scaled evidence weights, one per ordering.
inline Weights transform_scores(const LikelihoodScores& scores, const BeliefConfig& config) {
  scores.validate();
  config.validate();
  Weights w{};
  for (std::size_t i = 0; i < kOrderingCount; ++i) {
    const double scaled = clip_score(scores.raw[i], config.clip_bound) / config.likelihood_temperature;
    w[i] = config.transform == TransformKind::exponential ? std::exp(scaled) : 1.0 + scaled;
    if (!(w[i] > 0.0) || !std::isfinite(w[i])) {
      throw ValidationError("transformed likelihood weight is not positive; raise the temperature "
                            "or tighten the clip bound");
    }
  }
  return w;
}

// One step of p_t(theta) proportional to w(theta) * p_{t-1}(theta).
inline Posterior bayes_update(const Posterior& prior, const Weights& weights) {
  Posterior::Array mass{};
  double total = 0.0;
  for (std::size_t i = 0; i < kOrderingCount; ++i) {
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i])) {
      throw ValidationError("update weights must be strictly positive and finite");
    }
    mass[i] = weights[i] * prior[i];
    total += mass[i];
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw DegenerateUpdateError("bayes update has zero or non-finite total mass");
  }
  return Posterior::normalize(mass);
}

// p^(1/tau), renormalized.
inline Posterior anneal(const Posterior& p, double temperature) {
  if (!(temperature > 0.0)) throw ValidationError("annealing temperature must be positive");
  if (temperature == 1.0) return p;
  const double exponent = 1.0 / temperature;
  Posterior::Array mass{};
  for (std::size_t i = 0; i < kOrderingCount; ++i) {
    mass[i] = p[i] > 0.0 ? std::pow(p[i], exponent) : 0.0;
  }
  return Posterior::normalize(mass);
}

inline Posterior mean_posterior(std::span<const Posterior> posteriors) {
  if (posteriors.empty()) throw ValidationError("cannot average an empty list of posteriors");
  Posterior::Array mass{};
  for (const auto& p : posteriors) {
    for (std::size_t i = 0; i < kOrderingCount; ++i) mass[i] += p[i];
  }
  for (double& m : mass) m /= static_cast<double>(posteriors.size());
  return Posterior::normalize(mass);
}

// Combines per-sample posteriors into one, annealed by posterior_temperature.
inline Posterior aggregate_samples(std::span<const Posterior> posteriors, const BeliefConfig& config) {
  if (posteriors.empty()) throw ValidationError("aggregate_samples needs at least one sample");
  config.validate();
  if (config.aggregation == AggregationOrder::mean_then_anneal) {
    return anneal(mean_posterior(posteriors), config.posterior_temperature);
  }
  std::vector<Posterior> annealed;
  annealed.reserve(posteriors.size());
  for (const auto& p : posteriors) annealed.push_back(anneal(p, config.posterior_temperature));
  return mean_posterior(annealed);
}

// Full pipeline for one context: each sample updates the prior
// independently, then samples are aggregated.
inline Posterior posterior_from_samples(const Posterior& prior, std::span<const LikelihoodScores> samples,
                                        const BeliefConfig& config) {
  std::vector<Posterior> per_sample;
  per_sample.reserve(samples.size());
  for (const auto& s : samples) per_sample.push_back(bayes_update(prior, transform_scores(s, config)));
  return aggregate_samples(per_sample, config);
}

// ---------------------------------------------------------------------------
// Posterior metrics

// Class-mean Brier: (1/6) sum (p - y)^2. Uniform gives 5/36.
inline double brier_class_mean(const Posterior& p, const Ordering& truth) {
  const std::size_t t = truth.index();
  double s = 0.0;
  for (std::size_t i = 0; i < kOrderingCount; ++i) {
    const double d = p[i] - (i == t ? 1.0 : 0.0);
    s += d * d;
  }
  return s / static_cast<double>(kOrderingCount);
}

// Sum-normalized multiclass Brier: sum (p - y)^2 / (K - 1). Uniform gives 1/6.
inline double brier_sum_norm(const Posterior& p, const Ordering& truth) {
  return brier_class_mean(p, truth) * static_cast<double>(kOrderingCount) /
         static_cast<double>(kOrderingCount - 1);
}

struct MapResult {
  Ordering ordering;
  bool tie = false;
  // Every index sharing the maximal probability (ascending).
  std::vector<std::size_t> tied_indices;
};

inline MapResult map_ordering(const Posterior& p) {
  const double best = *std::max_element(p.probs().begin(), p.probs().end());
  MapResult r;
  for (std::size_t i = 0; i < kOrderingCount; ++i) {
    if (p[i] == best) r.tied_indices.push_back(i);
  }
  r.ordering = Ordering::from_index(r.tied_indices.front());
  r.tie = r.tied_indices.size() > 1;
  return r;
}

// Expected MAP accuracy when ties are broken uniformly at random.
inline double expected_map_credit(const Posterior& p, const Ordering& truth) {
  const auto m = map_ordering(p);
  const auto t = truth.index();
  const bool hit = std::find(m.tied_indices.begin(), m.tied_indices.end(), t) != m.tied_indices.end();
  return hit ? 1.0 / static_cast<double>(m.tied_indices.size()) : 0.0;
}

inline double entropy_bits(const Posterior& p) {
  double h = 0.0;
  for (double v : p.probs()) {
    if (v > 0.0) h -= v * std::log2(v);
  }
  return h;
}

}  // namespace negobelief
