#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "negobelief/belief.hpp"
#include "negobelief/domain.hpp"
#include "negobelief/replay.hpp"

namespace negobelief {

// ---------------------------------------------------------------------------
// Bid similarity

struct CosineResult {
  double value = 0.0;
  // Set when either vector is all zeros; value is then 0 by definition.
  bool degenerate = false;
};

inline CosineResult bid_cosine(const Allocation& pred, const Allocation& gold) {
  double dot = 0.0, np = 0.0, ng = 0.0;
  for (std::size_t i = 0; i < kIssueCount; ++i) {
    dot += pred.self_counts[i] * gold.self_counts[i];
    np += pred.self_counts[i] * pred.self_counts[i];
    ng += gold.self_counts[i] * gold.self_counts[i];
  }
  if (np == 0.0 || ng == 0.0) return {0.0, true};
  return {dot / (std::sqrt(np) * std::sqrt(ng)), false};
}

// ---------------------------------------------------------------------------
// Binary accept prediction

struct BinaryMetrics {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  std::size_t n() const { return tp + fp + fn + tn; }
};

// Precision or recall with an empty denominator is reported as 0.
inline BinaryMetrics binary_metrics(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  BinaryMetrics m{tp, fp, fn, tn};
  m.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  m.accuracy = m.n() ? static_cast<double>(tp + tn) / static_cast<double>(m.n()) : 0.0;
  return m;
}

// Accept is the positive class. Absent when no turn is accept-eligible.
inline std::optional<BinaryMetrics> accept_metrics(const std::vector<TurnRecord>& records) {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  bool any = false;
  for (const auto& r : records) {
    if (!r.accept_eligible || !r.human_decision) continue;
    any = true;
    const bool pred = r.action.intent == Intent::accept;
    const bool gold = *r.human_decision == Decision::accept;
    if (pred && gold) ++tp;
    else if (pred) ++fp;
    else if (gold) ++fn;
    else ++tn;
  }
  if (!any) return std::nullopt;
  return binary_metrics(tp, fp, fn, tn);
}

// ---------------------------------------------------------------------------
// Opponent-priority ranking metrics

// DCG over the three predicted positions, relevance = the item's true point
// value, discount 1/log2(position + 1), normalized by the ideal DCG.
inline double ndcg3(const Ordering& predicted, const Ordering& truth, const IssueDomain& domain) {
  double dcg = 0.0, ideal = 0.0;
  for (std::size_t pos = 0; pos < kIssueCount; ++pos) {
    const double discount = 1.0 / std::log2(static_cast<double>(pos) + 2.0);
    dcg += truth.points(predicted.at_rank(pos), domain) * discount;
    ideal += domain.point_scale[pos] * discount;
  }
  return dcg / ideal;
}

struct RankingScores {
  double ema = 0.0;   // exact match of the full ordering
  double top1 = 0.0;  // highest-priority issue matches
  double ndcg3 = 0.0;

  friend bool operator==(const RankingScores&, const RankingScores&) = default;
};

inline RankingScores ranking_scores(const Ordering& predicted, const Ordering& truth, const IssueDomain& domain) {
  return {predicted == truth ? 1.0 : 0.0, predicted.at_rank(0) == truth.at_rank(0) ? 1.0 : 0.0,
          ndcg3(predicted, truth, domain)};
}

// Normalized linearly decaying weights (K, K-1, ..., 1) / sum for k = 1..K.
inline std::vector<double> linear_k_weights(int max_k) {
  if (max_k < 1) throw ValidationError("k range must be >= 1");
  std::vector<double> w;
  const double total = max_k * (max_k + 1) / 2.0;
  for (int k = 1; k <= max_k; ++k) w.push_back((max_k - k + 1) / total);
  return w;
}

// Weighted aggregate over k = 1..K (K = weights.size(), default linear
// weights over the keys present). Every k in range must be supplied.
inline RankingScores kpenalty_metrics(const std::map<int, RankingScores>& per_k, std::vector<double> weights = {}) {
  if (weights.empty()) {
    if (per_k.empty()) throw ValidationError("kpenalty_metrics needs at least one k");
    weights = linear_k_weights(per_k.rbegin()->first);
  }
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (std::abs(wsum - 1.0) > 1e-12) throw ValidationError("k-penalty weights must sum to 1");
  RankingScores agg;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const int k = static_cast<int>(i) + 1;
    auto it = per_k.find(k);
    if (it == per_k.end()) throw ValidationError("missing k-penalty entry for k=" + std::to_string(k));
    agg.ema += weights[i] * it->second.ema;
    agg.top1 += weights[i] * it->second.top1;
    agg.ndcg3 += weights[i] * it->second.ndcg3;
  }
  return agg;
}

// Majority-vote shares of n sampled orderings.
inline Posterior self_consistency_elicit(const std::vector<Ordering>& samples, std::size_t n) {
  if (samples.empty() || n == 0) throw ValidationError("self-consistency elicitation needs at least one sample");
  if (samples.size() != n) throw ValidationError("sample list length does not match n");
  Posterior::Array counts{};
  for (const auto& o : samples) counts[o.index()] += 1.0;
  for (double& c : counts) c /= static_cast<double>(n);
  return Posterior::normalize(counts);
}

// ---------------------------------------------------------------------------
// Strategy labels

inline const std::vector<std::string>& casino_strategy_labels() {
  static const std::vector<std::string> labels = {"small-talk",  "self-need",          "other-need", "no-need",
                                                  "elicit-pref", "promote-coordination", "vouch-fair", "showing-empathy",
                                                  "uv-part",     "non-strategic"};
  return labels;
}

// Unweighted mean of per-label F1 over `labels`, using turns that carry
// both predicted and gold label sets. Absent when no turn has both.
inline std::optional<double> strategy_macro_f1(const std::vector<TurnRecord>& records,
                                               const std::vector<std::string>& labels = casino_strategy_labels()) {
  std::map<std::string, std::array<std::size_t, 3>> counts;  // tp, fp, fn
  bool any = false;
  for (const auto& r : records) {
    if (!r.strategy_labels_pred || !r.strategy_labels_gold) continue;
    any = true;
    const std::set<std::string> pred(r.strategy_labels_pred->begin(), r.strategy_labels_pred->end());
    const std::set<std::string> gold(r.strategy_labels_gold->begin(), r.strategy_labels_gold->end());
    for (const auto& l : labels) {
      const bool p = pred.count(l) > 0, g = gold.count(l) > 0;
      if (p && g) ++counts[l][0];
      else if (p) ++counts[l][1];
      else if (g) ++counts[l][2];
    }
  }
  if (!any) return std::nullopt;
  double total = 0.0;
  for (const auto& l : labels) {
    const auto& c = counts[l];
    const auto m = binary_metrics(c[0], c[1], c[2], 0);
    total += m.f1;
  }
  return total / static_cast<double>(labels.size());
}

// ---------------------------------------------------------------------------
// Turn-indexed Brier

struct TurnBrierRow {
  std::size_t turn_index = 0;
  double mean = 0.0;
  std::size_t n = 0;
  std::optional<std::pair<double, double>> ci;
};

struct BrierByTurn {
  std::vector<TurnBrierRow> rows;      // support >= min_support
  std::vector<TurnBrierRow> excluded;  // support below the threshold
};

inline BrierByTurn brier_by_turn(const std::vector<TurnRecord>& records, std::size_t min_support = 10) {
  std::map<std::size_t, std::pair<double, std::size_t>> acc;
  for (const auto& r : records) {
    if (!r.posterior) continue;
    auto& a = acc[r.turn_index];
    a.first += brier_class_mean(*r.posterior, r.truth);
    ++a.second;
  }
  BrierByTurn out;
  for (const auto& [t, a] : acc) {
    TurnBrierRow row{t, a.first / static_cast<double>(a.second), a.second, std::nullopt};
    (a.second >= min_support ? out.rows : out.excluded).push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregate report

template <typename T>
struct Supported {
  T value{};
  std::size_t n = 0;
};

struct MetricReport {
  std::optional<Supported<double>> brier_mean;
  std::optional<Supported<double>> brier_sum_norm_mean;
  std::optional<Supported<double>> map_accuracy;           // lowest-index tie-break
  std::optional<Supported<double>> map_accuracy_expected;  // 1/|ties| credit
  std::optional<Supported<double>> entropy_mean;
  std::optional<BinaryMetrics> accept;
  std::optional<Supported<double>> bid_cosine;
  std::optional<double> strategy_macro_f1;
  BrierByTurn brier_by_turn;
  std::size_t records = 0;
  std::size_t records_with_errors = 0;
};

inline MetricReport compute_report(const std::vector<TurnRecord>& records, std::size_t min_support = 10) {
  MetricReport rep;
  rep.records = records.size();
  double brier = 0, brier_sn = 0, map = 0, emap = 0, ent = 0, cos = 0;
  std::size_t np = 0, nc = 0;
  for (const auto& r : records) {
    if (!r.errors.empty()) ++rep.records_with_errors;
    if (r.posterior) {
      ++np;
      brier += brier_class_mean(*r.posterior, r.truth);
      brier_sn += brier_sum_norm(*r.posterior, r.truth);
      map += map_ordering(*r.posterior).ordering == r.truth ? 1.0 : 0.0;
      emap += expected_map_credit(*r.posterior, r.truth);
      ent += entropy_bits(*r.posterior);
    }
    if (r.native_bid && r.action.content && r.human_bid) {
      ++nc;
      cos += negobelief::bid_cosine(*r.action.content, *r.human_bid).value;
    }
  }
  if (np) {
    const double n = static_cast<double>(np);
    rep.brier_mean = Supported<double>{brier / n, np};
    rep.brier_sum_norm_mean = Supported<double>{brier_sn / n, np};
    rep.map_accuracy = Supported<double>{map / n, np};
    rep.map_accuracy_expected = Supported<double>{emap / n, np};
    rep.entropy_mean = Supported<double>{ent / n, np};
  }
  if (nc) rep.bid_cosine = Supported<double>{cos / static_cast<double>(nc), nc};
  rep.accept = accept_metrics(records);
  rep.strategy_macro_f1 = negobelief::strategy_macro_f1(records);
  rep.brier_by_turn = negobelief::brier_by_turn(records, min_support);
  return rep;
}

inline nlohmann::json report_json(const MetricReport& rep) {
  using nlohmann::json;
  auto sup = [](const std::optional<Supported<double>>& v) {
    return v ? json{{"value", v->value}, {"n", v->n}} : json(nullptr);
  };
  json j;
  j["records"] = rep.records;
  j["records_with_errors"] = rep.records_with_errors;
  j["brier"] = sup(rep.brier_mean);
  j["brier_sum_norm"] = sup(rep.brier_sum_norm_mean);
  j["map_accuracy"] = sup(rep.map_accuracy);
  j["map_accuracy_expected"] = sup(rep.map_accuracy_expected);
  j["entropy_bits"] = sup(rep.entropy_mean);
  j["bid_cosine"] = sup(rep.bid_cosine);
  j["strategy_macro_f1"] = rep.strategy_macro_f1 ? json(*rep.strategy_macro_f1) : json(nullptr);
  if (rep.accept) {
    const auto& a = *rep.accept;
    j["accept"] = {{"tp", a.tp}, {"fp", a.fp}, {"fn", a.fn}, {"tn", a.tn},
                   {"precision", a.precision}, {"recall", a.recall}, {"f1", a.f1}, {"accuracy", a.accuracy}};
  } else {
    j["accept"] = nullptr;
  }
  auto rows = [](const std::vector<TurnBrierRow>& v) {
    json arr = json::array();
    for (const auto& r : v) {
      json row{{"turn_index", r.turn_index}, {"mean", r.mean}, {"n", r.n}};
      row["ci"] = r.ci ? json{r.ci->first, r.ci->second} : json(nullptr);
      arr.push_back(row);
    }
    return arr;
  };
  j["brier_by_turn"] = rows(rep.brier_by_turn.rows);
  j["brier_by_turn_excluded"] = rows(rep.brier_by_turn.excluded);
  return j;
}

// Tab-separated turn table; rows below the support threshold are marked.
inline void write_brier_by_turn(std::ostream& out, const BrierByTurn& table) {
  out << "turn_index\tmean_brier\tn\tci_lo\tci_hi\tsupported\n";
  out << std::setprecision(17);
  auto emit = [&](const TurnBrierRow& r, bool supported) {
    out << r.turn_index << '\t' << r.mean << '\t' << r.n << '\t';
    if (r.ci) out << r.ci->first << '\t' << r.ci->second;
    else out << "nan\tnan";
    out << '\t' << (supported ? "yes" : "no") << '\n';
  };
  for (const auto& r : table.rows) emit(r, true);
  for (const auto& r : table.excluded) emit(r, false);
}

}  // namespace negobelief
