#pragma once

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "negobelief/context.hpp"
#include "negobelief/domain.hpp"
#include "negobelief/error.hpp"
#include "negobelief/planner.hpp"

namespace negobelief {

enum class Decision { accept, reject, walkaway };

inline std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::accept: return "accept";
    case Decision::reject: return "reject";
    case Decision::walkaway: return "walkaway";
  }
  return "reject";
}

inline std::optional<Decision> parse_decision(std::string_view s) {
  for (Decision d : {Decision::accept, Decision::reject, Decision::walkaway}) {
    if (detail::iequals(s, to_string(d))) return d;
  }
  return std::nullopt;
}

enum class IntegrativePotential { low, mid, high };

inline std::string_view to_string(IntegrativePotential p) {
  switch (p) {
    case IntegrativePotential::low: return "low";
    case IntegrativePotential::mid: return "mid";
    case IntegrativePotential::high: return "high";
  }
  return "mid";
}

inline std::string_view to_string(SvoLabel s) { return s == SvoLabel::proself ? "proself" : "prosocial"; }

struct Participant {
  std::string id;
  Ordering priorities;
  std::optional<std::string> reasons;
  std::optional<SvoLabel> svo;

  friend bool operator==(const Participant&, const Participant&) = default;
};

struct DialogueTurn {
  std::string speaker;  // participant id
  std::string utterance;
  std::vector<std::string> strategy_labels;
  // Share the speaker proposes to take.
  std::optional<Allocation> offer;
  std::optional<Decision> decision;

  friend bool operator==(const DialogueTurn&, const DialogueTurn&) = default;
};

struct Outcome {
  // Share of participants[0].
  Allocation allocation;
  std::array<int, 2> points{};

  friend bool operator==(const Outcome&, const Outcome&) = default;
};

struct DialogueRecord {
  std::string dialogue_id;
  std::array<Participant, 2> participants;
  std::vector<DialogueTurn> turns;
  std::optional<Outcome> outcome;
  std::optional<IntegrativePotential> integrative_potential;
  std::optional<std::string> split;

  // Index of the participant with this id, or nullopt.
  std::optional<std::size_t> participant_index(std::string_view id) const {
    for (std::size_t i = 0; i < 2; ++i) {
      if (participants[i].id == id) return i;
    }
    return std::nullopt;
  }

  // History before `turn_index` as seen by `perspective`.
  DialogueContext context(std::size_t turn_index, const std::string& perspective) const {
    DialogueContext ctx{dialogue_id, perspective, turn_index, {}};
    for (std::size_t t = 0; t < turn_index && t < turns.size(); ++t) {
      ctx.turns.push_back(ContextTurn{turns[t].speaker == perspective ? Speaker::self : Speaker::opponent,
                                      turns[t].utterance, turns[t].offer});
    }
    return ctx;
  }

  friend bool operator==(const DialogueRecord&, const DialogueRecord&) = default;
};

// ---------------------------------------------------------------------------
// JSON mapping of the neutral import schema

namespace corpus_json {

using nlohmann::json;

inline json allocation_to_json(const Allocation& a, const IssueDomain& domain) {
  json j = json::object();
  for (IssueId i = 0; i < kIssueCount; ++i) j[domain.name(i)] = a.self_counts[i];
  return j;
}

inline Allocation allocation_from_json(const json& j, const IssueDomain& domain) {
  Allocation a;
  if (j.is_array()) {
    if (j.size() != kIssueCount) throw ValidationError("allocation array must have 3 entries");
    for (std::size_t i = 0; i < kIssueCount; ++i) a.self_counts[i] = j.at(i).get<int>();
  } else if (j.is_object()) {
    std::array<bool, kIssueCount> seen{};
    for (const auto& [key, value] : j.items()) {
      auto id = domain.find(key);
      if (!id) throw ValidationError("allocation names unknown issue '" + key + "'");
      if (value.is_string()) {
        a.self_counts[*id] = std::stoi(value.get<std::string>());
      } else {
        a.self_counts[*id] = value.get<int>();
      }
      seen[*id] = true;
    }
    if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
      throw ValidationError("allocation must name every issue");
    }
  } else {
    throw ValidationError("allocation must be an object or array");
  }
  a.validate(domain);
  return a;
}

// Priorities as ["High", "Medium", "Low"] issue names, or per-issue point
// values (ties rejected).
inline Ordering priorities_from_json(const json& j, const IssueDomain& domain);

inline json record_to_json(const DialogueRecord& r, const IssueDomain& domain) {
  json j = json::object();
  j["dialogue_id"] = r.dialogue_id;
  json parts = json::array();
  for (const auto& p : r.participants) {
    json jp{{"id", p.id}};
    json pri = json::array();
    for (IssueId id : p.priorities.ranks()) pri.push_back(domain.name(id));
    jp["priorities"] = pri;
    if (p.reasons) jp["reasons"] = *p.reasons;
    if (p.svo) jp["svo"] = std::string(to_string(*p.svo));
    parts.push_back(jp);
  }
  j["participants"] = parts;
  json turns = json::array();
  for (const auto& t : r.turns) {
    json jt{{"speaker", t.speaker}, {"text", t.utterance}};
    if (!t.strategy_labels.empty()) jt["strategies"] = t.strategy_labels;
    if (t.offer) jt["offer"] = allocation_to_json(*t.offer, domain);
    if (t.decision) jt["decision"] = std::string(to_string(*t.decision));
    turns.push_back(jt);
  }
  j["turns"] = turns;
  if (r.outcome) {
    j["outcome"] = json{{"allocation", allocation_to_json(r.outcome->allocation, domain)},
                        {"points", r.outcome->points}};
  }
  if (r.integrative_potential) j["integrative_potential"] = std::string(to_string(*r.integrative_potential));
  if (r.split) j["split"] = *r.split;
  return j;
}

}  // namespace corpus_json

// Ordering by decreasing value; nullopt when any two values tie.
inline std::optional<Ordering> extract_strict_ordering(const std::array<int, kIssueCount>& values) {
  if (values[0] == values[1] || values[1] == values[2] || values[0] == values[2]) return std::nullopt;
  Ordering::Ranks r{0, 1, 2};
  std::stable_sort(r.begin(), r.end(), [&](IssueId a, IssueId b) { return values[a] > values[b]; });
  return Ordering::from_ranks(r);
}

inline Ordering corpus_json::priorities_from_json(const json& j, const IssueDomain& domain) {
  if (j.is_array()) {
    if (j.size() != kIssueCount) throw ValidationError("priorities must list exactly 3 issues");
    Ordering::Ranks r{};
    for (std::size_t k = 0; k < kIssueCount; ++k) {
      auto id = domain.find(j.at(k).get<std::string>());
      if (!id) throw ValidationError("priorities name unknown issue '" + j.at(k).get<std::string>() + "'");
      r[k] = *id;
    }
    try {
      return Ordering::from_ranks(r);
    } catch (const ValidationError&) {
      throw ValidationError("priorities contain a duplicate issue");
    }
  }
  if (j.is_object()) {
    std::array<int, kIssueCount> values{};
    std::array<bool, kIssueCount> seen{};
    for (const auto& [key, value] : j.items()) {
      auto id = domain.find(key);
      if (!id) throw ValidationError("values name unknown issue '" + key + "'");
      values[*id] = value.get<int>();
      seen[*id] = true;
    }
    if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
      throw ValidationError("values must cover every issue");
    }
    auto o = extract_strict_ordering(values);
    if (!o) throw ValidationError("values contain a tie; only strict orderings are admitted");
    return *o;
  }
  throw ValidationError("priorities must be a list of issue names or a value map");
}

// ---------------------------------------------------------------------------
// Import

struct ImportDiagnostic {
  std::string dialogue_id;
  std::size_t line = 0;
  std::string reason;
};

struct ImportResult {
  std::vector<DialogueRecord> records;
  std::size_t total = 0;
  std::size_t kept = 0;
  std::size_t rejected = 0;
  std::size_t filtered = 0;
  std::vector<ImportDiagnostic> diagnostics;
  // Source fields the converter did not map, with occurrence counts.
  std::map<std::string, std::size_t> unmapped_fields;
};

using RecordFilter = std::function<bool(const DialogueRecord&)>;

struct ImportOptions {
  IssueDomain domain = IssueDomain::casino();
  RecordFilter filter;  // keep when it returns true; empty keeps all
};

// Parses and validates one record of the neutral schema.
inline DialogueRecord record_from_json(const nlohmann::json& j, const IssueDomain& domain) {
  using corpus_json::allocation_from_json;
  DialogueRecord r;
  r.dialogue_id = j.at("dialogue_id").is_string() ? j.at("dialogue_id").get<std::string>()
                                                   : j.at("dialogue_id").dump();
  const auto& parts = j.at("participants");
  if (!parts.is_array() || parts.size() != 2) throw ValidationError("a dialogue needs exactly 2 participants");
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& jp = parts[i];
    Participant p;
    p.id = jp.at("id").get<std::string>();
    if (jp.contains("priorities")) {
      p.priorities = corpus_json::priorities_from_json(jp["priorities"], domain);
    } else if (jp.contains("values")) {
      p.priorities = corpus_json::priorities_from_json(jp["values"], domain);
    } else {
      throw ValidationError("participant " + p.id + " has no priorities");
    }
    if (jp.contains("reasons")) p.reasons = jp["reasons"].get<std::string>();
    if (jp.contains("svo")) {
      const auto svo = jp["svo"].get<std::string>();
      if (svo == "proself") {
        p.svo = SvoLabel::proself;
      } else if (svo == "prosocial") {
        p.svo = SvoLabel::prosocial;
      } else if (svo != "unclassified") {
        throw ValidationError("unknown svo label '" + svo + "'");
      }
    }
    r.participants[i] = std::move(p);
  }
  if (r.participants[0].id == r.participants[1].id) throw ValidationError("participant ids must differ");
  for (const auto& jt : j.at("turns")) {
    DialogueTurn t;
    t.speaker = jt.at("speaker").get<std::string>();
    if (!r.participant_index(t.speaker)) throw ValidationError("turn speaker '" + t.speaker + "' is not a participant");
    t.utterance = jt.value("text", std::string{});
    if (jt.contains("strategies")) t.strategy_labels = jt["strategies"].get<std::vector<std::string>>();
    if (jt.contains("offer") && !jt["offer"].is_null()) t.offer = allocation_from_json(jt["offer"], domain);
    if (jt.contains("decision") && !jt["decision"].is_null()) {
      auto d = parse_decision(jt["decision"].get<std::string>());
      if (!d) throw ValidationError("unknown decision '" + jt["decision"].get<std::string>() + "'");
      t.decision = d;
    }
    r.turns.push_back(std::move(t));
  }
  if (j.contains("outcome") && !j["outcome"].is_null()) {
    Outcome o;
    o.allocation = allocation_from_json(j["outcome"].at("allocation"), domain);
    if (j["outcome"].contains("points")) o.points = j["outcome"]["points"].get<std::array<int, 2>>();
    r.outcome = o;
  }
  if (j.contains("integrative_potential")) {
    const auto ip = j["integrative_potential"].get<std::string>();
    if (ip == "low") {
      r.integrative_potential = IntegrativePotential::low;
    } else if (ip == "mid") {
      r.integrative_potential = IntegrativePotential::mid;
    } else if (ip == "high") {
      r.integrative_potential = IntegrativePotential::high;
    } else {
      throw ValidationError("unknown integrative_potential '" + ip + "'");
    }
  }
  if (j.contains("split")) r.split = j["split"].get<std::string>();
  return r;
}

inline ImportResult import_jsonl(std::istream& in, const ImportOptions& options = {}) {
  ImportResult result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++result.total;
    std::string id = "?";
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.contains("dialogue_id")) id = j["dialogue_id"].is_string() ? j["dialogue_id"].get<std::string>() : j["dialogue_id"].dump();
      auto rec = record_from_json(j, options.domain);
      if (options.filter && !options.filter(rec)) {
        ++result.filtered;
        continue;
      }
      result.records.push_back(std::move(rec));
      ++result.kept;
    } catch (const std::exception& e) {
      ++result.rejected;
      result.diagnostics.push_back({id, lineno, e.what()});
    }
  }
  return result;
}

// CaSiNo release format: a JSON array of dialogues with chat_logs,
// participant_info (value2issue, value2reason, personality.svo) and
// annotations. Submit-Deal carries issue2youget from the submitter's view.
inline ImportResult import_casino_json(std::istream& in, const ImportOptions& options = {}) {
  ImportResult result;
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    result.diagnostics.push_back({"", 0, std::string("not valid JSON: ") + e.what()});
    return result;
  }
  if (!root.is_array()) {
    result.diagnostics.push_back({"", 0, "CaSiNo file must be a JSON array of dialogues"});
    return result;
  }
  static const std::set<std::string> mapped = {"chat_logs", "participant_info", "annotations", "dialogue_id"};
  std::size_t index = 0;
  for (const auto& d : root) {
    ++index;
    ++result.total;
    std::string id = d.contains("dialogue_id") ? d["dialogue_id"].dump() : std::to_string(index - 1);
    if (!id.empty() && id.front() == '"') id = d["dialogue_id"].get<std::string>();
    try {
      for (const auto& [key, _] : d.items()) {
        if (!mapped.count(key)) ++result.unmapped_fields[key];
      }
      nlohmann::json out = nlohmann::json::object();
      out["dialogue_id"] = id;
      nlohmann::json parts = nlohmann::json::array();
      for (const auto& [pid, info] : d.at("participant_info").items()) {
        nlohmann::json jp{{"id", pid}};
        const auto& v2i = info.at("value2issue");
        jp["priorities"] = {v2i.at("High"), v2i.at("Medium"), v2i.at("Low")};
        if (info.contains("value2reason")) {
          const auto& v2r = info["value2reason"];
          std::string reasons;
          for (const char* level : {"High", "Medium", "Low"}) {
            if (v2r.contains(level)) reasons += (reasons.empty() ? "" : " | ") + v2r[level].get<std::string>();
          }
          jp["reasons"] = reasons;
        }
        if (info.contains("personality") && info["personality"].contains("svo")) {
          jp["svo"] = info["personality"]["svo"];
        }
        parts.push_back(jp);
      }
      out["participants"] = parts;

      std::vector<std::pair<std::string, std::string>> annotations;
      if (d.contains("annotations")) {
        for (const auto& a : d["annotations"]) annotations.emplace_back(a.at(0).get<std::string>(), a.at(1).get<std::string>());
      }
      std::size_t next_annotation = 0;
      nlohmann::json turns = nlohmann::json::array();
      for (const auto& log : d.at("chat_logs")) {
        nlohmann::json t{{"speaker", log.at("id")}};
        const auto text = log.at("text").get<std::string>();
        if (text == "Submit-Deal") {
          t["text"] = "";
          t["offer"] = log.at("task_data").at("issue2youget");
        } else if (text == "Accept-Deal") {
          t["text"] = "";
          t["decision"] = "accept";
        } else if (text == "Reject-Deal") {
          t["text"] = "";
          t["decision"] = "reject";
        } else if (text == "Walk-Away") {
          t["text"] = "";
          t["decision"] = "walkaway";
        } else {
          t["text"] = text;
          if (next_annotation < annotations.size() && annotations[next_annotation].first == text) {
            std::vector<std::string> labels;
            std::stringstream ss(annotations[next_annotation].second);
            for (std::string l; std::getline(ss, l, ',');) {
              if (!l.empty()) labels.push_back(l);
            }
            t["strategies"] = labels;
            ++next_annotation;
          }
        }
        turns.push_back(t);
      }
      out["turns"] = turns;
      auto rec = record_from_json(out, options.domain);
      if (options.filter && !options.filter(rec)) {
        ++result.filtered;
        continue;
      }
      result.records.push_back(std::move(rec));
      ++result.kept;
    } catch (const std::exception& e) {
      ++result.rejected;
      result.diagnostics.push_back({id, index, e.what()});
    }
  }
  return result;
}

// format_tag: "jsonl" (neutral schema) or "casino" (CaSiNo release JSON).
inline ImportResult import_corpus(const std::string& path, const std::string& format_tag,
                                  const ImportOptions& options = {}) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open corpus file " + path);
  if (format_tag == "jsonl") return import_jsonl(in, options);
  if (format_tag == "casino") return import_casino_json(in, options);
  throw ValidationError("unknown corpus format '" + format_tag + "' (expected jsonl or casino)");
}

inline void export_jsonl(std::ostream& out, const std::vector<DialogueRecord>& records,
                         const IssueDomain& domain = IssueDomain::casino()) {
  for (const auto& r : records) out << corpus_json::record_to_json(r, domain).dump() << '\n';
}

struct CorpusSplit {
  std::vector<DialogueRecord> train;
  std::vector<DialogueRecord> heldout;
};

// Partitions by a supplied held-out id list; records keep their input order.
inline CorpusSplit split_corpus(const std::vector<DialogueRecord>& records, const std::set<std::string>& heldout_ids) {
  CorpusSplit s;
  for (const auto& r : records) (heldout_ids.count(r.dialogue_id) ? s.heldout : s.train).push_back(r);
  return s;
}

}  // namespace negobelief
