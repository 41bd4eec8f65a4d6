#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "negobelief/negobelief.hpp"

namespace fs = std::filesystem;
using namespace negobelief;
using nlohmann::json;

namespace {

// Input problems exit with 1, anything unexpected with 2.
constexpr int kExitInput = 1;
constexpr int kExitInternal = 2;

// Writes through a sibling temp file and renames, so readers never observe
// a half-written file.
void write_atomic(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + tmp.string());
    body(out);
    out.flush();
    if (!out) throw ValidationError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::optional<double> parse_clip(const std::string& s) {
  if (s == "none" || s == "inf") return std::nullopt;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size()) throw ValidationError("clip must be a number or 'none': " + s);
  return v;
}

struct EngineFlags {
  double lambda = 1.0;
  double margin = 5.0;
  double floor = 0.5;
  double temperature = 25.0;
  std::string clip = "3";
  double posterior_temperature = 0.7;
  int samples = 16;
  double retention = 1.0;
  std::string lexicon;
  bool anneal_first = false;
  bool linear = false;

  void add(CLI::App& app) {
    app.add_option("--lambda", lambda, "Weight on expected opponent utility")->capture_default_str();
    app.add_option("--accept-margin", margin, "Accept when within this many points of the top menu score")
        ->capture_default_str();
    app.add_option("--accept-floor", floor, "Minimum fraction of max self points for accepting")->capture_default_str();
    app.add_option("--temperature", temperature, "Likelihood temperature T")->capture_default_str();
    app.add_option("--clip", clip, "Score clip bound c, or 'none'")->capture_default_str();
    app.add_option("--posterior-temperature", posterior_temperature, "Posterior annealing temperature")
        ->capture_default_str();
    app.add_option("--samples", samples, "Score samples per turn")->capture_default_str();
    app.add_option("--retention", retention, "Retention for incremental providers, in [0,1]")->capture_default_str();
    app.add_option("--lexicon", lexicon, "Cue lexicon TSV for the rule provider");
    app.add_flag("--anneal-then-mean", anneal_first, "Anneal each sample before averaging");
    app.add_flag("--linear-transform", linear, "Use raw scores as weights instead of exp(s/T)");
  }

  AgentSpecOptions options() const {
    AgentSpecOptions o;
    o.planner.lambda = lambda;
    o.planner.accept_margin = margin;
    o.planner.accept_floor = floor;
    o.planner.validate();
    o.belief.likelihood_temperature = temperature;
    o.belief.clip_bound = parse_clip(clip);
    o.belief.posterior_temperature = posterior_temperature;
    o.belief.sample_count = samples;
    if (anneal_first) o.belief.aggregation = AggregationOrder::anneal_then_mean;
    if (linear) o.belief.transform = TransformKind::linear;
    o.belief.validate();
    o.retention = retention;
    o.lexicon_path = lexicon;
    return o;
  }
};

std::string diag_where(const ImportDiagnostic& d) {
  return (d.dialogue_id.empty() ? std::string("?") : d.dialogue_id) + " (line " + std::to_string(d.line) + ")";
}

std::vector<DialogueRecord> load_corpus(const std::string& path, const std::string& format, bool quiet) {
  if (!fs::exists(path)) throw ValidationError("corpus not found: " + path);
  ImportResult r = import_corpus(path, format);
  if (!quiet) {
    std::cerr << "imported " << r.kept << " of " << r.total << " records (" << r.rejected << " rejected, "
              << r.filtered << " filtered)\n";
    for (const auto& d : r.diagnostics) std::cerr << "  " << diag_where(d) << ": " << d.reason << "\n";
  }
  if (r.records.empty()) throw ValidationError("corpus has no usable records: " + path);
  return std::move(r.records);
}

void print_headline(const MetricReport& rep, bool as_json) {
  if (as_json) {
    std::cout << report_json(rep).dump(2) << "\n";
    return;
  }
  std::cout << std::fixed << std::setprecision(3);
  std::cout << "records      " << rep.records << "\n";
  if (rep.brier_mean) {
    std::cout << "brier        " << rep.brier_mean->value << "  (n=" << rep.brier_mean->n << ")\n";
    std::cout << "brier_sumnrm " << rep.brier_sum_norm_mean->value << "\n";
    std::cout << "map          " << rep.map_accuracy->value << "  expected " << rep.map_accuracy_expected->value
              << "\n";
    std::cout << "entropy      " << rep.entropy_mean->value << " bits\n";
  } else {
    std::cout << "brier        n/a (no posteriors)\n";
  }
  if (rep.accept) std::cout << "accept_f1    " << rep.accept->f1 << "  (n=" << rep.accept->n() << ")\n";
  if (rep.bid_cosine) std::cout << "bid_cosine   " << rep.bid_cosine->value << "\n";
  if (rep.records_with_errors) std::cout << "errors       " << rep.records_with_errors << " records\n";
}

// ---------------------------------------------------------------------------

struct ReplayCmd {
  std::string corpus, format = "jsonl", agent = "provider:rule", perspective = kAgentOne, out;
  unsigned threads = 1;
  std::size_t min_support = 10;
  std::size_t bootstrap = 0;
  EngineFlags engine;
};

int run_replay(const ReplayCmd& c, std::uint64_t seed, bool as_json) {
  const auto opts = c.engine.options();
  const auto corpus = load_corpus(c.corpus, c.format, as_json);
  const auto agent = make_agent(c.agent, opts);
  ReplayConfig rc;
  rc.threads = c.threads;
  const auto records = replay_protocol3(corpus, *agent, c.perspective, rc);
  auto rep = compute_report(records, c.min_support);
  if (c.bootstrap > 0) attach_turn_cis(rep.brier_by_turn, records, {c.bootstrap, 0.95, seed});

  const fs::path dir(c.out);
  write_atomic(dir / "records.jsonl", [&](std::ostream& o) { write_records(o, records); });
  write_atomic(dir / "report.json", [&](std::ostream& o) { o << report_json(rep).dump(2) << "\n"; });
  write_atomic(dir / "brier_by_turn.tsv", [&](std::ostream& o) { write_brier_by_turn(o, rep.brier_by_turn); });
  print_headline(rep, as_json);
  return 0;
}

struct SweepCmd {
  std::string corpus, format = "jsonl", provider = "rule:incremental", perspective = kAgentOne, out;
  std::size_t synth = 0;
  double cue_strength = 0.75;
  std::vector<double> temperatures = {1, 5, 10, 25, 50, 100};
  std::vector<std::string> clips = {"1", "3", "5", "10", "none"};
  unsigned threads = 1;
  EngineFlags engine;
};

int run_sweep(const SweepCmd& c, std::uint64_t seed, bool as_json) {
  const auto opts = c.engine.options();
  std::vector<DialogueRecord> corpus;
  if (!c.corpus.empty()) corpus = load_corpus(c.corpus, c.format, as_json);
  else if (c.synth > 0) corpus = synthesize_corpus(c.synth, c.cue_strength, seed);
  else throw ValidationError("sweep needs --corpus or --synth");
  SweepGrid grid;
  grid.temperatures = c.temperatures;
  for (const auto& s : c.clips) grid.clips.push_back(parse_clip(s));
  SweepSettings settings;
  settings.base = opts.belief;
  settings.planner = opts.planner;
  settings.retention = opts.retention;
  settings.perspective = c.perspective;
  settings.replay.threads = c.threads;
  const auto rows = sensitivity_sweep(make_provider(c.provider, opts), grid, corpus, settings);
  if (!c.out.empty()) write_atomic(c.out, [&](std::ostream& o) { write_sweep_table(o, rows); });
  if (as_json) {
    json arr = json::array();
    for (const auto& r : rows) {
      arr.push_back({{"temperature", r.temperature},
                     {"clip", clip_label(r.clip)},
                     {"brier", r.brier},
                     {"map", r.map},
                     {"entropy", r.entropy},
                     {"accept_f1", r.accept_f1 ? json(*r.accept_f1) : json(nullptr)},
                     {"error", r.error ? json(*r.error) : json(nullptr)}});
    }
    std::cout << arr.dump(2) << "\n";
  } else {
    write_sweep_table(std::cout, rows);
  }
  return 0;
}

struct AuditCmd {
  std::string records, out, corpus, format = "jsonl", agent, perspective = kAgentOne;
  unsigned threads = 1;
  EngineFlags engine;
};

int run_audit(const AuditCmd& c, bool as_json) {
  const auto opts = c.engine.options();
  const auto records = load_records(c.records);
  auto table = decompose(records, opts.planner, opts.domain);
  std::optional<CouplingReport> coupling;
  json prefix = nullptr;
  if (!c.agent.empty()) {
    if (c.corpus.empty()) throw ValidationError("interventions need --corpus together with --agent");
    const auto corpus = load_corpus(c.corpus, c.format, as_json);
    const auto agent = make_agent(c.agent, opts);
    ReplayConfig rc;
    rc.threads = c.threads;
    const auto base = replay_protocol3(corpus, *agent, c.perspective, rc);
    const auto good = replay_with_prefix(corpus, *agent, c.perspective, PrefixMode::correct, rc);
    const auto bad = replay_with_prefix(corpus, *agent, c.perspective, PrefixMode::adversarial, rc);
    coupling = coupling_report(interventions_from_records(base, good, PrefixMode::correct),
                               interventions_from_records(base, bad, PrefixMode::adversarial));
    prefix = {{"correct", report_json(compute_report(good))}, {"adversarial", report_json(compute_report(bad))}};
  }
  json rep = audit_report_json(table, coupling);
  rep["prefix_runs"] = prefix;
  if (!c.out.empty()) write_atomic(c.out, [&](std::ostream& o) { o << rep.dump(2) << "\n"; });
  if (as_json) {
    std::cout << rep.dump(2) << "\n";
  } else {
    std::cout << "audit turns      " << table.supported << " (" << table.excluded.size()
              << " without posterior)\n";
    std::cout << "                 aligned  misaligned\n";
    std::cout << "MAP correct      " << std::setw(7) << table.cell(true, true) << "  " << std::setw(10)
              << table.cell(true, false) << "\n";
    std::cout << "MAP wrong        " << std::setw(7) << table.cell(false, true) << "  " << std::setw(10)
              << table.cell(false, false) << "\n";
    if (!rep["alignment_rate"].is_null())
      std::cout << "alignment rate   " << std::fixed << std::setprecision(3) << rep["alignment_rate"].get<double>()
                << "\n";
    if (coupling) {
      std::cout << "change rate      correct " << coupling->change_rate_correct << "  adversarial "
                << coupling->change_rate_adversarial << "\n";
    }
  }
  return 0;
}

struct ServeCmd {
  std::string host = "127.0.0.1", agent_priorities = "Food>Water>Firewood", log_dir;
  int port = 8080;
  EngineFlags engine;
};

int run_serve(const ServeCmd& c, std::uint64_t seed) {
  const auto opts = c.engine.options();
  SessionConfig defaults;
  defaults.planner = opts.planner;
  defaults.belief = opts.belief;
  defaults.retention = opts.retention;
  defaults.seed = seed;
  const auto pri = Ordering::parse_label(c.agent_priorities, defaults.domain);
  if (!pri) throw ValidationError("bad --agent-priorities: " + c.agent_priorities);
  defaults.agent_priorities = *pri;
  std::optional<fs::path> log_dir;
  if (!c.log_dir.empty()) {
    fs::create_directories(c.log_dir);
    log_dir = c.log_dir;
  }
  auto manager = std::make_shared<SessionManager>(defaults, log_dir);
  SessionService service(manager);
  std::cerr << "serving on http://" << c.host << ":" << c.port << kApiPrefix << "\n";
  if (!service.listen(c.host, c.port)) throw ValidationError("cannot listen on " + c.host + ":" + std::to_string(c.port));
  return 0;
}

struct SynthCmd {
  std::size_t n = 150;
  double cue_strength = 1.0;
  std::size_t min_length = 6, max_length = 12;
  std::string out;
};

int run_synth(const SynthCmd& c, std::uint64_t seed, bool as_json) {
  SynthOptions so;
  so.min_length = c.min_length;
  so.max_length = c.max_length;
  const auto corpus = synthesize_corpus(c.n, c.cue_strength, seed, so);
  if (c.out.empty() || c.out == "-") {
    export_jsonl(std::cout, corpus);
  } else {
    write_atomic(c.out, [&](std::ostream& o) { export_jsonl(o, corpus); });
    if (as_json) std::cout << json{{"dialogues", corpus.size()}, {"out", c.out}}.dump() << "\n";
    else std::cout << "wrote " << corpus.size() << " dialogues to " << c.out << "\n";
  }
  return 0;
}

struct ConvertCmd {
  std::string in, format = "casino", out;
};

int run_convert(const ConvertCmd& c, bool as_json) {
  if (!fs::exists(c.in)) throw ValidationError("input not found: " + c.in);
  const auto r = import_corpus(c.in, c.format);
  write_atomic(c.out, [&](std::ostream& o) { export_jsonl(o, r.records); });
  if (as_json) {
    json diags = json::array();
    for (const auto& d : r.diagnostics) diags.push_back({{"dialogue_id", d.dialogue_id}, {"line", d.line}, {"reason", d.reason}});
    std::cout << json{{"total", r.total},
                      {"kept", r.kept},
                      {"rejected", r.rejected},
                      {"filtered", r.filtered},
                      {"unmapped_fields", r.unmapped_fields},
                      {"diagnostics", diags}}
                     .dump(2)
              << "\n";
  } else {
    std::cout << "kept " << r.kept << " of " << r.total << " (" << r.rejected << " rejected)\n";
    for (const auto& d : r.diagnostics) std::cout << "  " << diag_where(d) << ": " << d.reason << "\n";
  }
  return 0;
}

struct TrajectoryCmd {
  std::string records, out;
  std::vector<std::string> ids;
};

int run_trajectories(const TrajectoryCmd& c, bool as_json) {
  const auto records = load_records(c.records);
  const auto t = export_trajectories(records, c.ids);
  const auto domain = IssueDomain::casino();
  if (!c.out.empty()) write_atomic(c.out, [&](std::ostream& o) { write_trajectories(o, t, domain); });
  if (as_json) {
    json j = json::object();
    for (const auto& [id, rows] : t) {
      json arr = json::array();
      for (const auto& r : rows) {
        arr.push_back({{"turn_index", r.turn_index},
                       {"posterior", r.posterior.probs()},
                       {"map", r.map_index},
                       {"truth", r.truth_index}});
      }
      j[id] = arr;
    }
    std::cout << j.dump(2) << "\n";
  } else if (c.out.empty()) {
    write_trajectories(std::cout, t, domain);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Opponent-belief negotiation engine: replay, sweeps, audits and live sessions"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 0;
  bool as_json = false;
  app.add_option("--seed", seed, "Seed for every randomized step")->capture_default_str();
  app.add_flag("--json", as_json, "Machine-readable output on stdout");

  ReplayCmd replay;
  auto* rp = app.add_subcommand("replay", "Turn-level replay of a corpus through an agent");
  rp->add_option("--corpus", replay.corpus, "Corpus file")->required();
  rp->add_option("--format", replay.format, "Corpus format: jsonl or casino")->capture_default_str();
  rp->add_option("--agent", replay.agent, "Agent spec: uniform | provider:<p> | log:<path>")->capture_default_str();
  rp->add_option("--perspective", replay.perspective, "Participant the agent plays")->capture_default_str();
  rp->add_option("--out", replay.out, "Output directory")->required();
  rp->add_option("--threads", replay.threads, "Worker threads")->capture_default_str();
  rp->add_option("--min-support", replay.min_support, "Minimum records per turn row")->capture_default_str();
  rp->add_option("--bootstrap", replay.bootstrap, "Bootstrap resamples for turn CIs (0 = off)")->capture_default_str();
  replay.engine.add(*rp);

  SweepCmd sweep;
  auto* sw = app.add_subcommand("sweep", "Temperature x clip sensitivity sweep");
  sw->add_option("--corpus", sweep.corpus, "Corpus file");
  sw->add_option("--format", sweep.format, "Corpus format: jsonl or casino")->capture_default_str();
  sw->add_option("--synth", sweep.synth, "Use a synthetic corpus of this many dialogues instead");
  sw->add_option("--cue-strength", sweep.cue_strength, "Cue strength for --synth")->capture_default_str();
  sw->add_option("--provider", sweep.provider, "Provider spec (rule, cache@path, remote@addr, optional :incremental)")
      ->capture_default_str();
  sw->add_option("--perspective", sweep.perspective, "Participant the agent plays")->capture_default_str();
  sw->add_option("--temperatures", sweep.temperatures, "Likelihood temperatures")->capture_default_str();
  sw->add_option("--clips", sweep.clips, "Clip bounds ('none' for no clipping)")->capture_default_str();
  sw->add_option("--out", sweep.out, "Heatmap table (TSV)");
  sw->add_option("--threads", sweep.threads, "Worker threads")->capture_default_str();
  sweep.engine.add(*sw);

  AuditCmd audit;
  auto* au = app.add_subcommand("audit", "Belief-policy decomposition and posterior interventions");
  au->add_option("--records", audit.records, "TurnRecord log from replay")->required();
  au->add_option("--out", audit.out, "Audit report (JSON)");
  au->add_option("--corpus", audit.corpus, "Corpus for intervention runs");
  au->add_option("--format", audit.format, "Corpus format: jsonl or casino")->capture_default_str();
  au->add_option("--agent", audit.agent, "Agent spec for intervention runs");
  au->add_option("--perspective", audit.perspective, "Participant the agent plays")->capture_default_str();
  au->add_option("--threads", audit.threads, "Worker threads")->capture_default_str();
  audit.engine.add(*au);

  ServeCmd serve;
  auto* sv = app.add_subcommand("serve", "Run the live session service");
  sv->add_option("--host", serve.host, "Bind address")->capture_default_str();
  sv->add_option("--port", serve.port, "Port")->capture_default_str();
  sv->add_option("--agent-priorities", serve.agent_priorities, "Agent's own ordering label")->capture_default_str();
  sv->add_option("--log-dir", serve.log_dir, "Directory for per-session event logs");
  serve.engine.add(*sv);

  SynthCmd synth;
  auto* sy = app.add_subcommand("synth", "Generate a synthetic corpus");
  sy->add_option("-n,--count", synth.n, "Number of dialogues")->capture_default_str();
  sy->add_option("--cue-strength", synth.cue_strength, "Probability each cue is consistent with the truth")
      ->capture_default_str();
  sy->add_option("--min-length", synth.min_length, "Minimum turns per dialogue")->capture_default_str();
  sy->add_option("--max-length", synth.max_length, "Maximum turns per dialogue")->capture_default_str();
  sy->add_option("--out", synth.out, "Output JSONL (stdout when omitted)");

  ConvertCmd convert;
  auto* cv = app.add_subcommand("convert", "Import a corpus and write canonical JSONL");
  cv->add_option("--in", convert.in, "Input file")->required();
  cv->add_option("--format", convert.format, "Input format: casino or jsonl")->capture_default_str();
  cv->add_option("--out", convert.out, "Output JSONL")->required();

  TrajectoryCmd traj;
  auto* tr = app.add_subcommand("trajectories", "Per-dialogue belief trajectories as plot data");
  tr->add_option("--records", traj.records, "TurnRecord log from replay")->required();
  tr->add_option("--ids", traj.ids, "Dialogue ids")->required();
  tr->add_option("--out", traj.out, "Output table (TSV)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*rp) return run_replay(replay, seed, as_json);
    if (*sw) return run_sweep(sweep, seed, as_json);
    if (*au) return run_audit(audit, as_json);
    if (*sv) return run_serve(serve, seed);
    if (*sy) return run_synth(synth, seed, as_json);
    if (*cv) return run_convert(convert, as_json);
    if (*tr) return run_trajectories(traj, as_json);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed input: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
