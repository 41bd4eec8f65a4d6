#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "negobelief/domain.hpp"

namespace negobelief {

enum class Speaker { self, opponent };

inline std::string_view to_string(Speaker s) { return s == Speaker::self ? "self" : "opponent"; }

struct ContextTurn {
  Speaker speaker = Speaker::opponent;
  std::string utterance;
  // Share the speaker proposes to take, when the turn carries a structured offer.
  std::optional<Allocation> offer;

  friend bool operator==(const ContextTurn&, const ContextTurn&) = default;
};

// Dialogue history h_t as seen by one participant, up to (not including)
// turn `turn_index`.
struct DialogueContext {
  std::string dialogue_id;
  std::string perspective;
  std::size_t turn_index = 0;
  std::vector<ContextTurn> turns;

  std::string cache_key() const {
    return dialogue_id + ":" + std::to_string(turn_index) + ":" + perspective;
  }

  // Context holding only the latest opponent turn, or nullopt when the
  // opponent has not spoken yet.
  std::optional<DialogueContext> newest_opponent_only() const {
    for (auto it = turns.rbegin(); it != turns.rend(); ++it) {
      if (it->speaker == Speaker::opponent) {
        DialogueContext c{dialogue_id, perspective, turn_index, {*it}};
        return c;
      }
    }
    return std::nullopt;
  }

  friend bool operator==(const DialogueContext&, const DialogueContext&) = default;
};

}  // namespace negobelief
