// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "todgen/graph.hpp"

namespace todgen {

/// Per-turn output state of the simulated system: the user's intent, the
/// slot values projected from the conversation variables, and the grounding
/// documents (non-empty only around search turns).
struct SystemState {
  IntentLabel intent;
  std::map<std::string, std::string> slots;
  std::vector<std::string> documents;  // doc_ids

  bool operator==(const SystemState&) const = default;
};

enum class TurnRole { System, User, Suggestions, Retriever, ItemInformation };

const char* to_string(TurnRole role);

struct DialogueTurn {
  TurnRole role = TurnRole::System;
  std::string text;
  /// Present on system and user turns, absent on auxiliary roles.
  std::optional<SystemState> state;

  bool operator==(const DialogueTurn&) const = default;
};

/// One generated conversation: the dialogue history plus the per-user-turn
/// state sequence, grounded in a single target document.
struct TrainingExample {
  std::string example_id;
  std::uint64_t walk_id = 0;
  std::string target_doc;
  std::vector<DialogueTurn> turns;
  std::vector<SystemState> states;  // aligned 1:1 with user turns

  bool operator==(const TrainingExample&) const = default;
};

}  // namespace todgen
