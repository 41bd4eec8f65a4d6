#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "negobelief/error.hpp"
#include "negobelief/metrics.hpp"
#include "negobelief/synth.hpp"

namespace negobelief {

struct BootstrapOptions {
  std::size_t resamples = 2000;
  double level = 0.95;
  std::uint64_t seed = 0;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t valid_resamples = 0;
};

// Linear-interpolation quantile of sorted data (q in [0,1]).
inline double sorted_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw ValidationError("quantile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

// Percentile bootstrap that resamples whole clusters (dialogues), not
// individual rows. `statistic` sees the concatenated rows of one resample;
// NaN results are dropped.
template <typename Row>
Interval bootstrap_ci(const std::vector<Row>& rows, const std::function<std::string(const Row&)>& cluster_of,
                      const std::function<double(const std::vector<const Row*>&)>& statistic,
                      const BootstrapOptions& options = {}) {
  if (options.resamples == 0) throw ValidationError("bootstrap needs at least one resample");
  if (!(options.level > 0.0 && options.level < 1.0)) throw ValidationError("confidence level must lie in (0,1)");
  std::vector<std::vector<const Row*>> clusters;
  std::map<std::string, std::size_t> index;
  for (const auto& r : rows) {
    auto [it, inserted] = index.emplace(cluster_of(r), clusters.size());
    if (inserted) clusters.emplace_back();
    clusters[it->second].push_back(&r);
  }
  if (clusters.empty()) throw ValidationError("bootstrap needs at least one dialogue");

  SplitRng rng(options.seed);
  std::vector<double> stats;
  stats.reserve(options.resamples);
  std::vector<const Row*> sample;
  for (std::size_t b = 0; b < options.resamples; ++b) {
    sample.clear();
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      const auto& c = clusters[rng.below(clusters.size())];
      sample.insert(sample.end(), c.begin(), c.end());
    }
    const double s = statistic(sample);
    if (!std::isnan(s)) stats.push_back(s);
  }
  if (stats.empty()) throw ValidationError("bootstrap statistic was undefined on every resample");
  std::sort(stats.begin(), stats.end());
  const double alpha = (1.0 - options.level) / 2.0;
  return {sorted_quantile(stats, alpha), sorted_quantile(stats, 1.0 - alpha), stats.size()};
}

// Mean class-mean Brier over rows with a posterior; NaN if none.
inline double mean_brier(const std::vector<const TurnRecord*>& rows) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto* r : rows) {
    if (!r->posterior) continue;
    s += brier_class_mean(*r->posterior, r->truth);
    ++n;
  }
  return n ? s / static_cast<double>(n) : std::nan("");
}

inline Interval bootstrap_records(const std::vector<TurnRecord>& records,
                                  const std::function<double(const std::vector<const TurnRecord*>&)>& statistic,
                                  const BootstrapOptions& options = {}) {
  return bootstrap_ci<TurnRecord>(records, [](const TurnRecord& r) { return r.dialogue_id; }, statistic, options);
}

// Adds dialogue-level bootstrap CIs to every row of a turn table.
inline void attach_turn_cis(BrierByTurn& table, const std::vector<TurnRecord>& records,
                            const BootstrapOptions& options = {}) {
  for (auto* rows : {&table.rows, &table.excluded}) {
    for (auto& row : *rows) {
      const std::size_t t = row.turn_index;
      auto ci = bootstrap_records(
          records,
          [t](const std::vector<const TurnRecord*>& sample) {
            std::vector<const TurnRecord*> at;
            for (const auto* r : sample) {
              if (r->turn_index == t) at.push_back(r);
            }
            return mean_brier(at);
          },
          options);
      row.ci = std::make_pair(ci.lo, ci.hi);
    }
  }
}

}  // namespace negobelief
