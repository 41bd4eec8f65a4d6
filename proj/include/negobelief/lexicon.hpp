#pragma once

#include <fstream>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "negobelief/domain.hpp"
#include "negobelief/error.hpp"

namespace negobelief {

enum class CuePolarity { need, no_need };

inline std::string_view to_string(CuePolarity p) { return p == CuePolarity::need ? "need" : "no_need"; }

// One preference cue. `pattern` is an ECMAScript regex matched
// case-insensitively; the token {issue} expands to the issue's word form.
struct Cue {
  std::string pattern;
  std::string issue;
  CuePolarity polarity = CuePolarity::need;
  double weight = 1.0;
};

namespace detail {

inline std::string regex_escape(std::string_view s) {
  static const std::string special = R"(\^$.|?*+()[]{}-)";
  std::string out;
  for (char c : s) {
    if (special.find(c) != std::string::npos) out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

// "Food" -> "foods?"; CaSiNo's firewood is also called wood.
inline std::string issue_word_regex(std::string_view name) {
  std::string base = regex_escape(lower(name));
  std::string alt = "(?:" + base + "s?";
  if (lower(name) == "firewood") alt += "|wood";
  return alt + ")";
}

}  // namespace detail

class CueLexicon {
 public:
  struct Compiled {
    std::regex re;
    IssueId issue;
    CuePolarity polarity;
    double weight;
  };

  CueLexicon() = default;
  explicit CueLexicon(std::vector<Cue> entries) : entries_(std::move(entries)) { validate(); }

  const std::vector<Cue>& entries() const noexcept { return entries_; }
  bool empty() const noexcept { return entries_.empty(); }

  void validate() const {
    for (const auto& c : entries_) {
      if (!std::isfinite(c.weight)) throw ValidationError("cue weight must be finite: " + c.pattern);
      if (c.pattern.empty()) throw ValidationError("cue pattern must be nonempty");
    }
  }

  // Resolves issue names and expands {issue}; entries naming issues absent
  // from the domain are an error.
  std::vector<Compiled> compile(const IssueDomain& domain) const {
    std::vector<Compiled> out;
    out.reserve(entries_.size());
    for (const auto& c : entries_) {
      auto id = domain.find(c.issue);
      if (!id) throw ValidationError("lexicon cue names unknown issue '" + c.issue + "'");
      std::string pat = c.pattern;
      const std::string word = detail::issue_word_regex(domain.name(*id));
      for (std::size_t pos; (pos = pat.find("{issue}")) != std::string::npos;) pat.replace(pos, 7, word);
      try {
        out.push_back(Compiled{std::regex(pat, std::regex::ECMAScript | std::regex::icase), *id, c.polarity,
                               c.weight});
      } catch (const std::regex_error& e) {
        throw ValidationError("invalid cue pattern '" + c.pattern + "': " + e.what());
      }
    }
    return out;
  }

  // Built-in cue templates instantiated for every issue of the domain.
  // No-need cues come first so that "don't need water" is consumed before
  // the bare "need water" cue can match inside it.
  static CueLexicon generic(const IssueDomain& domain) {
    std::vector<Cue> cues;
    for (const auto& issue : domain.issues) {
      for (const auto& [pat, w] : no_need_templates()) cues.push_back({pat, issue.display_name, CuePolarity::no_need, w});
    }
    for (const auto& issue : domain.issues) {
      for (const auto& [pat, w] : need_templates()) cues.push_back({pat, issue.display_name, CuePolarity::need, w});
    }
    return CueLexicon(std::move(cues));
  }

  static CueLexicon casino_default() { return generic(IssueDomain::casino()); }

  // Tab-separated: pattern, issue, polarity (need|no_need), weight.
  // Blank lines and lines starting with '#' are skipped.
  static CueLexicon parse(std::istream& in) {
    std::vector<Cue> cues;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line.front() == '#') continue;
      std::vector<std::string> fields;
      std::stringstream ss(line);
      for (std::string f; std::getline(ss, f, '\t');) fields.push_back(f);
      if (fields.size() != 4) {
        throw ValidationError("lexicon line " + std::to_string(lineno) + ": expected 4 tab-separated fields");
      }
      Cue c;
      c.pattern = fields[0];
      c.issue = fields[1];
      if (fields[2] == "need") {
        c.polarity = CuePolarity::need;
      } else if (fields[2] == "no_need") {
        c.polarity = CuePolarity::no_need;
      } else {
        throw ValidationError("lexicon line " + std::to_string(lineno) + ": bad polarity '" + fields[2] + "'");
      }
      try {
        std::size_t used = 0;
        c.weight = std::stod(fields[3], &used);
        if (used != fields[3].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ValidationError("lexicon line " + std::to_string(lineno) + ": bad weight '" + fields[3] + "'");
      }
      cues.push_back(std::move(c));
    }
    return CueLexicon(std::move(cues));
  }

  static CueLexicon load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open lexicon file " + path);
    return parse(in);
  }

  void write(std::ostream& out) const {
    out << "# pattern\tissue\tpolarity\tweight\n";
    for (const auto& c : entries_) {
      out << c.pattern << '\t' << c.issue << '\t' << to_string(c.polarity) << '\t' << c.weight << '\n';
    }
  }

 private:
  using Template = std::pair<std::string, double>;

  static const std::vector<Template>& no_need_templates() {
    static const std::vector<Template> t = {
        {R"(\b(?:don'?t|do not|won'?t|will not|doesn'?t|does not) (?:really |even )?need (?:much |any |more |extra |the )?{issue}\b)", 1.0},
        {R"(\b(?:have|got|brought|packed) (?:plenty of|enough|lots of|a lot of|extra) {issue}\b)", 1.0},
        {R"(\b{issue} (?:isn'?t|is not|aren'?t|are not) (?:that |very |really )?(?:important|a priority|needed)\b)", 1.0},
        {R"(\byou can (?:have|take) (?:all )?(?:of )?(?:the )?{issue}\b)", 0.5},
    };
    return t;
  }

  static const std::vector<Template>& need_templates() {
    static const std::vector<Template> t = {
        {R"(\bneed (?:some |more |extra |the |a lot of |lots of )?{issue}\b)", 1.0},
        {R"(\b{issue} (?:is|are) (?:very |really |most |the most |super |extremely )?(?:important|a priority|essential)\b)", 1.0},
        {R"(\b(?:low on|short on|run out of|ran out of|running low on) {issue}\b)", 1.0},
        {R"(\b(?:want|could use|would like) (?:some |more |extra |the )?{issue}\b)", 0.5},
    };
    return t;
  }

  std::vector<Cue> entries_;
};

}  // namespace negobelief
