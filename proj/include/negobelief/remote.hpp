#pragma once

#include <chrono>
#include <memory>
#include <semaphore>
#include <string>
#include <utility>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "negobelief/belief.hpp"
#include "negobelief/context.hpp"
#include "negobelief/providers.hpp"

namespace negobelief {

inline constexpr const char* kScorePath = "/v1/score";

struct RemoteScorerOptions {
  std::string endpoint;  // "host:port" or "http://host:port"
  std::chrono::milliseconds timeout{5000};
  int max_attempts = 3;
  int max_in_flight = 4;
  ProviderMode mode = ProviderMode::full_context;
};

inline nlohmann::json context_to_json(const DialogueContext& ctx) {
  nlohmann::json turns = nlohmann::json::array();
  for (const auto& t : ctx.turns) {
    nlohmann::json jt{{"speaker", std::string(to_string(t.speaker))}, {"utterance", t.utterance}};
    jt["offer"] = t.offer ? nlohmann::json(t.offer->self_counts) : nlohmann::json(nullptr);
    turns.push_back(std::move(jt));
  }
  return turns;
}

// Request body for one context; `orderings` lists the six canonical labels.
inline nlohmann::json make_score_request(const DialogueContext& ctx, const IssueDomain& domain, int samples) {
  return nlohmann::json{{"version", 1},
                        {"dialogue_id", ctx.dialogue_id},
                        {"turn_index", ctx.turn_index},
                        {"perspective", ctx.perspective},
                        {"turns", context_to_json(ctx)},
                        {"orderings", ordering_labels(domain)},
                        {"sample_count", samples}};
}

// Validates a response body; throws ValidationError on any shape problem.
inline std::vector<LikelihoodScores> parse_score_response(const std::string& body, int samples) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed scorer response: ") + e.what());
  }
  if (!j.is_object() || !j.contains("scores") || !j["scores"].is_array()) {
    throw ValidationError("malformed scorer response: missing scores array");
  }
  const auto& rows = j["scores"];
  if (static_cast<int>(rows.size()) != samples) {
    throw ValidationError("malformed scorer response: expected " + std::to_string(samples) + " score vectors, got " +
                          std::to_string(rows.size()));
  }
  std::vector<LikelihoodScores> out;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& row = rows[k];
    if (!row.is_array() || row.size() != kOrderingCount) {
      throw ValidationError("malformed scorer response: score vector " + std::to_string(k) + " does not have 6 entries");
    }
    LikelihoodScores s;
    for (std::size_t i = 0; i < kOrderingCount; ++i) {
      if (!row[i].is_number()) throw ValidationError("malformed scorer response: non-numeric score");
      s.raw[i] = row[i].get<double>();
    }
    s.validate();
    s.sample_id = static_cast<int>(k);
    out.push_back(s);
  }
  return out;
}

// Client for an external scorer service. One batched POST per context;
// transport failures are retried and then surfaced as TransportError, never
// replaced by made-up scores.
class RemoteProvider final : public LikelihoodProvider {
 public:
  RemoteProvider(RemoteScorerOptions options, IssueDomain domain)
      : options_(std::move(options)),
        domain_(std::move(domain)),
        slots_(std::make_unique<std::counting_semaphore<64>>(std::clamp(options_.max_in_flight, 1, 64))) {
    if (options_.max_attempts < 1) throw ValidationError("max_attempts must be >= 1");
  }

  ProviderContract contract() const override { return {options_.mode, true}; }

  std::vector<LikelihoodScores> score(const DialogueContext& ctx, int samples) const override {
    return remote_score(ctx, samples);
  }

  std::vector<LikelihoodScores> remote_score(const DialogueContext& ctx, int samples) const {
    if (samples < 1) throw ValidationError("sample count must be >= 1");
    const std::string body = make_score_request(ctx, domain_, samples).dump();
    slots_->acquire();
    struct Release {
      std::counting_semaphore<64>* s;
      ~Release() { s->release(); }
    } release{slots_.get()};

    std::string last_error = "no attempt made";
    for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
      httplib::Client client(base_url());
      const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
      const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
      client.set_connection_timeout(secs.count(), usecs.count());
      client.set_read_timeout(secs.count(), usecs.count());
      client.set_write_timeout(secs.count(), usecs.count());
      auto res = client.Post(kScorePath, body, "application/json");
      if (!res) {
        last_error = "scorer request failed: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status != 200) {
        last_error = "scorer returned HTTP " + std::to_string(res->status);
        continue;
      }
      // A malformed body is not transient; it propagates without retry.
      return parse_score_response(res->body, samples);
    }
    throw TransportError(last_error, options_.max_attempts);
  }

  std::string tag() const override { return "remote@" + options_.endpoint; }

 private:
  std::string base_url() const {
    if (options_.endpoint.rfind("http://", 0) == 0 || options_.endpoint.rfind("https://", 0) == 0) {
      return options_.endpoint;
    }
    return "http://" + options_.endpoint;
  }

  RemoteScorerOptions options_;
  IssueDomain domain_;
  std::unique_ptr<std::counting_semaphore<64>> slots_;
};

}  // namespace negobelief
