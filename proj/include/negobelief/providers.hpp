#pragma once

#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "negobelief/belief.hpp"
#include "negobelief/context.hpp"
#include "negobelief/domain.hpp"
#include "negobelief/error.hpp"
#include "negobelief/lexicon.hpp"

namespace negobelief {

enum class ProviderMode { full_context, incremental };

struct ProviderContract {
  ProviderMode mode = ProviderMode::full_context;
  bool samples_supported = false;
};

// Source of per-ordering compatibility scores. Implementations must be
// callable concurrently from several evaluation workers.
class LikelihoodProvider {
 public:
  virtual ~LikelihoodProvider() = default;
  virtual ProviderContract contract() const = 0;
  // Up to `samples` score vectors; providers without sampling return one.
  virtual std::vector<LikelihoodScores> score(const DialogueContext& ctx, int samples) const = 0;
  virtual std::string tag() const = 0;
};

// +1 when the cue agrees with the issue's placement in the ordering, -1 when
// it is the opposite extreme, 0 for the middle rank.
inline double rank_agreement(CuePolarity polarity, std::size_t rank) {
  const double top_sign = polarity == CuePolarity::need ? 1.0 : -1.0;
  if (rank == 0) return top_sign;
  if (rank == kIssueCount - 1) return -top_sign;
  return 0.0;
}

struct CueMatch {
  IssueId issue;
  CuePolarity polarity;
  double weight;
};

// Finds cue matches in one utterance. Cues are tried in lexicon order and a
// match may not overlap text consumed by an earlier match.
inline std::vector<CueMatch> match_cues(const std::string& utterance,
                                        const std::vector<CueLexicon::Compiled>& cues) {
  std::vector<CueMatch> out;
  std::vector<bool> used(utterance.size(), false);
  for (const auto& cue : cues) {
    for (auto it = std::sregex_iterator(utterance.begin(), utterance.end(), cue.re); it != std::sregex_iterator();
         ++it) {
      const auto pos = static_cast<std::size_t>(it->position(0));
      const auto len = static_cast<std::size_t>(it->length(0));
      bool overlap = false;
      for (std::size_t i = pos; i < pos + len; ++i) overlap = overlap || used[i];
      if (overlap) continue;
      for (std::size_t i = pos; i < pos + len; ++i) used[i] = true;
      out.push_back(CueMatch{cue.issue, cue.polarity, cue.weight});
    }
  }
  return out;
}

inline LikelihoodScores rule_score(const DialogueContext& ctx, const std::vector<CueLexicon::Compiled>& cues) {
  LikelihoodScores s;
  std::array<Ordering, kOrderingCount> orderings;
  for (std::size_t k = 0; k < kOrderingCount; ++k) orderings[k] = Ordering::from_index(k);
  for (const auto& turn : ctx.turns) {
    if (turn.speaker != Speaker::opponent) continue;
    for (const auto& m : match_cues(turn.utterance, cues)) {
      for (std::size_t k = 0; k < kOrderingCount; ++k) {
        s.raw[k] += m.weight * rank_agreement(m.polarity, orderings[k].rank_of(m.issue));
      }
    }
  }
  return s;
}

// Lexicon scorer over opponent utterances.
inline LikelihoodScores rule_score(const DialogueContext& ctx, const CueLexicon& lexicon,
                                   const IssueDomain& domain) {
  if (lexicon.empty()) throw ValidationError("rule_score needs a nonempty lexicon");
  return rule_score(ctx, lexicon.compile(domain));
}

class RuleProvider final : public LikelihoodProvider {
 public:
  RuleProvider(CueLexicon lexicon, IssueDomain domain, ProviderMode mode = ProviderMode::full_context)
      : domain_(std::move(domain)), mode_(mode) {
    if (lexicon.empty()) throw ValidationError("rule provider needs a nonempty lexicon");
    compiled_ = lexicon.compile(domain_);
  }

  ProviderContract contract() const override { return {mode_, false}; }

  std::vector<LikelihoodScores> score(const DialogueContext& ctx, int /*samples*/) const override {
    return {rule_score(ctx, compiled_)};
  }

  std::string tag() const override { return "rule"; }

 private:
  IssueDomain domain_;
  ProviderMode mode_;
  std::vector<CueLexicon::Compiled> compiled_;
};

// ---------------------------------------------------------------------------
// Score cache: JSON lines {"key": "dialogue:turn:perspective", "scores": [[6 floats], ...]}

class ScoreCache {
 public:
  void put(const std::string& key, std::vector<LikelihoodScores> scores) {
    std::unique_lock lock(mutex_);
    store_[key] = std::move(scores);
  }

  std::vector<LikelihoodScores> get(const std::string& key) const {
    std::shared_lock lock(mutex_);
    auto it = store_.find(key);
    if (it == store_.end()) throw CacheMissError(key);
    return it->second;
  }

  bool contains(const std::string& key) const {
    std::shared_lock lock(mutex_);
    return store_.count(key) > 0;
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return store_.size();
  }

  static ScoreCache parse(std::istream& in) {
    ScoreCache cache;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        std::vector<LikelihoodScores> scores;
        for (const auto& row : j.at("scores")) {
          if (row.size() != kOrderingCount) throw ValidationError("score vector must have 6 entries");
          LikelihoodScores s;
          for (std::size_t i = 0; i < kOrderingCount; ++i) s.raw[i] = row.at(i).get<double>();
          s.sample_id = static_cast<int>(scores.size());
          s.validate();
          scores.push_back(s);
        }
        cache.put(j.at("key").get<std::string>(), std::move(scores));
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError("score cache line " + std::to_string(lineno) + ": " + e.what());
      }
    }
    return cache;
  }

  static ScoreCache load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open score cache " + path);
    return parse(in);
  }

  void write(std::ostream& out) const {
    std::shared_lock lock(mutex_);
    for (const auto& [key, scores] : store_) {
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& s : scores) rows.push_back(s.raw);
      out << nlohmann::json{{"key", key}, {"scores", rows}}.dump() << '\n';
    }
  }

  ScoreCache() = default;
  ScoreCache(const ScoreCache& other) : store_(other.snapshot()) {}
  ScoreCache& operator=(const ScoreCache& other) {
    if (this != &other) {
      auto copy = other.snapshot();
      std::unique_lock lock(mutex_);
      store_ = std::move(copy);
    }
    return *this;
  }

 private:
  std::map<std::string, std::vector<LikelihoodScores>> snapshot() const {
    std::shared_lock lock(mutex_);
    return store_;
  }

  mutable std::shared_mutex mutex_;
  std::map<std::string, std::vector<LikelihoodScores>> store_;
};

// Returns the stored vectors for a context key, bit-identical to the file.
inline std::vector<LikelihoodScores> replay_score(const std::string& key, const ScoreCache& cache) {
  return cache.get(key);
}

class CacheProvider final : public LikelihoodProvider {
 public:
  explicit CacheProvider(std::shared_ptr<const ScoreCache> cache, ProviderMode mode = ProviderMode::full_context)
      : cache_(std::move(cache)), mode_(mode) {}

  ProviderContract contract() const override { return {mode_, true}; }

  std::vector<LikelihoodScores> score(const DialogueContext& ctx, int samples) const override {
    auto all = replay_score(ctx.cache_key(), *cache_);
    if (samples > 0 && static_cast<std::size_t>(samples) < all.size()) all.resize(static_cast<std::size_t>(samples));
    return all;
  }

  std::string tag() const override { return "cache"; }

 private:
  std::shared_ptr<const ScoreCache> cache_;
  ProviderMode mode_;
};

// ---------------------------------------------------------------------------
// Incremental Bayes

// Mixes the prior toward uniform by (1 - retention), then applies one update
// with the transformed newest-utterance scores.
inline Posterior incremental_update(const Posterior& prior, const LikelihoodScores& newest, double retention,
                                    const BeliefConfig& config) {
  if (!(retention >= 0.0 && retention <= 1.0)) throw ValidationError("retention must lie in [0, 1]");
  Posterior temporal = prior;
  if (retention < 1.0) {
    Posterior::Array mix{};
    for (std::size_t i = 0; i < kOrderingCount; ++i) {
      mix[i] = retention * prior[i] + (1.0 - retention) / static_cast<double>(kOrderingCount);
    }
    temporal = Posterior::normalize(mix);
  }
  return bayes_update(temporal, transform_scores(newest, config));
}

// Computes the belief for a context from a provider.
//
// Full-context providers score the whole history h_t, so every turn
// restarts from the configured prior; sample posteriors are then aggregated.
// Incremental providers see one opponent utterance at a time and the belief
// is chained through incremental_update. Samples at a step are combined by
// their plain mean and posterior annealing is applied once, to the reported
// belief only, so a single-sample chain with retention 1 is exactly batch
// Bayes.
class BeliefTracker {
 public:
  BeliefTracker(std::shared_ptr<const LikelihoodProvider> provider, BeliefConfig config, double retention = 1.0)
      : provider_(std::move(provider)), config_(std::move(config)), retention_(retention) {
    config_.validate();
    if (!(retention_ >= 0.0 && retention_ <= 1.0)) throw ValidationError("retention must lie in [0, 1]");
  }

  Posterior posterior(const DialogueContext& ctx) const {
    if (provider_->contract().mode == ProviderMode::full_context) {
      const auto samples = provider_->score(ctx, config_.sample_count);
      if (samples.empty()) throw ValidationError("provider returned no score samples");
      return posterior_from_samples(config_.prior, samples, config_);
    }
    return anneal(chain(ctx), config_.posterior_temperature);
  }

  // Unannealed incremental chain over the opponent turns of ctx.
  Posterior chain(const DialogueContext& ctx) const {
    Posterior p = config_.prior;
    for (std::size_t t = 0; t < ctx.turns.size(); ++t) {
      if (ctx.turns[t].speaker != Speaker::opponent) continue;
      DialogueContext single{ctx.dialogue_id, ctx.perspective, t, {ctx.turns[t]}};
      const auto samples = provider_->score(single, config_.sample_count);
      if (samples.empty()) throw ValidationError("provider returned no score samples");
      std::vector<Posterior> per_sample;
      per_sample.reserve(samples.size());
      for (const auto& s : samples) per_sample.push_back(incremental_update(p, s, retention_, config_));
      p = mean_posterior(per_sample);
    }
    return p;
  }

  const BeliefConfig& config() const noexcept { return config_; }
  const LikelihoodProvider& provider() const noexcept { return *provider_; }
  double retention() const noexcept { return retention_; }

 private:
  std::shared_ptr<const LikelihoodProvider> provider_;
  BeliefConfig config_;
  double retention_;
};

}  // namespace negobelief
