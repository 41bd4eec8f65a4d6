#pragma once

#include <cmath>
#include <iomanip>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "negobelief/agent.hpp"
#include "negobelief/metrics.hpp"
#include "negobelief/replay.hpp"

namespace negobelief {

struct SweepGrid {
  std::vector<double> temperatures;
  // nullopt = no clipping
  std::vector<std::optional<double>> clips;

  // T in {1,5,10,25,50,100} x c in {1,3,5,10,none}
  static SweepGrid standard() {
    return {{1, 5, 10, 25, 50, 100}, {1.0, 3.0, 5.0, 10.0, std::nullopt}};
  }
};

struct SweepRow {
  double temperature = 0.0;
  std::optional<double> clip;
  double brier = std::nan("");
  double map = std::nan("");  // expected-MAP accuracy
  double entropy = std::nan("");
  std::optional<double> accept_f1;
  std::optional<std::string> error;
};

struct SweepSettings {
  BeliefConfig base;  // temperature and clip are overwritten per cell
  PlannerConfig planner;
  double retention = 1.0;
  std::string perspective = "mturk_agent_1";
  ReplayConfig replay;
};

// One replay per grid cell over the same corpus. A failing cell records its
// error and the sweep continues.
inline std::vector<SweepRow> sensitivity_sweep(std::shared_ptr<const LikelihoodProvider> provider, const SweepGrid& grid,
                                               const std::vector<DialogueRecord>& corpus,
                                               const SweepSettings& settings = {}) {
  if (grid.temperatures.empty() || grid.clips.empty()) throw ValidationError("sweep grid must be nonempty");
  std::vector<SweepRow> rows;
  for (double t : grid.temperatures) {
    for (const auto& c : grid.clips) {
      SweepRow row;
      row.temperature = t;
      row.clip = c;
      try {
        BeliefConfig cfg = settings.base;
        cfg.likelihood_temperature = t;
        cfg.clip_bound = c;
        EngineAgent agent(BeliefTracker(provider, cfg, settings.retention), settings.planner);
        const auto records = replay_protocol3(corpus, agent, settings.perspective, settings.replay);
        for (const auto& r : records) {
          if (!r.errors.empty()) throw Error(r.errors.front());
        }
        const auto rep = compute_report(records);
        if (rep.brier_mean) {
          row.brier = rep.brier_mean->value;
          row.map = rep.map_accuracy_expected->value;
          row.entropy = rep.entropy_mean->value;
        }
        if (rep.accept) row.accept_f1 = rep.accept->f1;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      rows.push_back(row);
    }
  }
  return rows;
}

inline std::string clip_label(const std::optional<double>& c) {
  if (!c || std::isinf(*c)) return "none";
  std::ostringstream os;
  os << *c;
  return os.str();
}

// Tab-separated heatmap data: temperature, clip, brier, map, entropy, accept_f1.
inline void write_sweep_table(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "temperature\tclip\tbrier\tmap\tentropy\taccept_f1\terror\n";
  out << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.temperature << '\t' << clip_label(r.clip) << '\t' << r.brier << '\t' << r.map << '\t' << r.entropy << '\t';
    if (r.accept_f1) out << *r.accept_f1;
    else out << "nan";
    out << '\t' << r.error.value_or("") << '\n';
  }
}

}  // namespace negobelief
