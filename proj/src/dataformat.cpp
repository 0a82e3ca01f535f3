// SPDX-License-Identifier: Apache-2.0
#include "todgen/dataformat.hpp"

#include <algorithm>
#include <sstream>

#include "todgen/errors.hpp"
#include "todgen/io.hpp"

namespace todgen {

const char* to_string(TurnRole role) {
  switch (role) {
    case TurnRole::System: return "system";
    case TurnRole::User: return "user";
    case TurnRole::Suggestions: return "suggestions";
    case TurnRole::Retriever: return "retriever";
    case TurnRole::ItemInformation: return "item_information";
  }
  return "system";
}

namespace {

constexpr std::string_view kMetaHeader = "<|meta|>\n";
constexpr std::string_view kStateMarker = "\n<|state|>\n";
constexpr std::string_view kEndMarker = "\n<|end|>\n";

bool role_from_string(std::string_view name, TurnRole& role) {
  if (name == "system") role = TurnRole::System;
  else if (name == "user") role = TurnRole::User;
  else if (name == "suggestions") role = TurnRole::Suggestions;
  else if (name == "retriever") role = TurnRole::Retriever;
  else if (name == "item_information") role = TurnRole::ItemInformation;
  else return false;
  return true;
}

bool carries_state(TurnRole role) {
  return role == TurnRole::System || role == TurnRole::User;
}

[[noreturn]] void format_error(std::size_t offset, const std::string& message) {
  raise(ErrorCode::FormatError, "offset " + std::to_string(offset) + ": " + message);
}

void check_text(const std::string& text, const std::string& where) {
  if (text.find(kDelimiterPrefix) != std::string::npos) {
    raise(ErrorCode::InvalidExample,
          where + ": text contains the delimiter prefix '<|'");
  }
}

}  // namespace

std::string sanitize_turn_text(std::string_view text) {
  std::string out(text);
  std::size_t pos = 0;
  while ((pos = out.find(kDelimiterPrefix, pos)) != std::string::npos) {
    out.replace(pos, kDelimiterPrefix.size(), "< |");
    pos += 3;
  }
  return out;
}

nlohmann::json state_to_json(const SystemState& state) {
  nlohmann::json j;
  j["intent"] = state.intent;
  j["slots"] = nlohmann::json::object();
  for (const auto& [name, value] : state.slots) j["slots"][name] = value;
  if (!state.documents.empty()) j["documents"] = state.documents;
  return j;
}

SystemState state_from_json(const nlohmann::json& j, const std::string& origin) {
  if (!j.is_object() || !j.contains("intent") || !j.at("intent").is_string() ||
      !j.contains("slots") || !j.at("slots").is_object()) {
    raise(ErrorCode::StateJsonError, origin + ": state needs 'intent' and 'slots'");
  }
  SystemState state;
  state.intent = j.at("intent").get<std::string>();
  for (const auto& [name, value] : j.at("slots").items()) {
    if (!value.is_string()) {
      raise(ErrorCode::StateJsonError, origin + ": slot '" + name + "' is not a string");
    }
    state.slots[name] = value.get<std::string>();
  }
  if (j.contains("documents")) {
    if (!j.at("documents").is_array()) {
      raise(ErrorCode::StateJsonError, origin + ": 'documents' is not an array");
    }
    for (const auto& doc : j.at("documents")) {
      if (!doc.is_string()) {
        raise(ErrorCode::StateJsonError, origin + ": document ids must be strings");
      }
      state.documents.push_back(doc.get<std::string>());
    }
  }
  return state;
}

std::string serialize(const TrainingExample& example) {
  // Structural invariants first: alternation (ignoring auxiliary roles),
  // system opener, and state alignment with user turns.
  std::size_t user_turns = 0;
  bool expect_system = true;
  for (std::size_t i = 0; i < example.turns.size(); ++i) {
    const DialogueTurn& turn = example.turns[i];
    if (carries_state(turn.role)) {
      if (!turn.state.has_value()) {
        raise(ErrorCode::InvalidExample,
              "turn " + std::to_string(i) + ": system/user turns must carry a state");
      }
      const bool is_system = turn.role == TurnRole::System;
      if (is_system != expect_system) {
        raise(ErrorCode::InvalidExample,
              "turn " + std::to_string(i) + ": system/user turns must alternate");
      }
      expect_system = !expect_system;
      if (turn.role == TurnRole::User) {
        if (user_turns >= example.states.size() ||
            !(example.states[user_turns] == *turn.state)) {
          raise(ErrorCode::InvalidExample,
                "turn " + std::to_string(i) + ": state list out of sync with user turns");
        }
        ++user_turns;
      }
    } else if (turn.state.has_value()) {
      raise(ErrorCode::InvalidExample,
            "turn " + std::to_string(i) + ": auxiliary turns must not carry a state");
    }
  }
  if (user_turns != example.states.size()) {
    raise(ErrorCode::InvalidExample, "state count does not match user turn count");
  }
  if (!example.turns.empty() && example.turns.front().role != TurnRole::System) {
    raise(ErrorCode::InvalidExample, "conversations must open with a system turn");
  }

  std::ostringstream out;
  nlohmann::json meta;
  meta["example_id"] = example.example_id;
  meta["target_doc"] = example.target_doc;
  meta["walk_id"] = example.walk_id;
  out << kMetaHeader << meta.dump() << kEndMarker;

  for (std::size_t i = 0; i < example.turns.size(); ++i) {
    const DialogueTurn& turn = example.turns[i];
    check_text(turn.text, "turn " + std::to_string(i));
    out << "<|" << to_string(turn.role) << "|>\n" << turn.text;
    if (carries_state(turn.role)) {
      out << kStateMarker << state_to_json(*turn.state).dump();
    }
    out << kEndMarker;
  }
  return out.str();
}

TrainingExample parse(const std::string& text) {
  if (text.empty()) format_error(0, "empty input");
  if (!text.starts_with(kMetaHeader)) format_error(0, "missing <|meta|> header");

  std::size_t pos = kMetaHeader.size();
  std::size_t end = text.find(kEndMarker, pos);
  if (end == std::string::npos) format_error(pos, "unterminated meta block");

  TrainingExample example;
  {
    nlohmann::json meta;
    try {
      meta = nlohmann::json::parse(text.substr(pos, end - pos));
    } catch (const nlohmann::json::parse_error& e) {
      raise(ErrorCode::StateJsonError,
            "offset " + std::to_string(pos) + ": bad meta JSON: " + e.what());
    }
    if (!meta.is_object() || !meta.contains("example_id") ||
        !meta.contains("target_doc") || !meta.contains("walk_id")) {
      raise(ErrorCode::StateJsonError,
            "offset " + std::to_string(pos) +
                ": meta needs example_id, target_doc, walk_id");
    }
    example.example_id = meta.at("example_id").get<std::string>();
    example.target_doc = meta.at("target_doc").get<std::string>();
    example.walk_id = meta.at("walk_id").get<std::uint64_t>();
  }
  pos = end + kEndMarker.size();

  std::size_t turn_index = 0;
  bool expect_system = true;
  while (pos < text.size()) {
    if (text.compare(pos, 2, "<|") != 0) {
      format_error(pos, "expected a <|role|> header");
    }
    std::size_t name_end = text.find("|>\n", pos + 2);
    if (name_end == std::string::npos) {
      format_error(pos, "unterminated role header");
    }
    const std::string role_name = text.substr(pos + 2, name_end - pos - 2);
    TurnRole role;
    if (!role_from_string(role_name, role)) {
      format_error(pos, "unknown role '" + role_name + "'");
    }
    std::size_t body_start = name_end + 3;

    std::size_t state_pos = text.find(kStateMarker, body_start);
    std::size_t end_pos = text.find(kEndMarker, body_start);
    if (end_pos == std::string::npos) {
      format_error(body_start, "turn " + std::to_string(turn_index) +
                                   ": unterminated turn");
    }

    DialogueTurn turn;
    turn.role = role;
    if (carries_state(role)) {
      if (state_pos == std::string::npos || state_pos > end_pos) {
        format_error(body_start, "turn " + std::to_string(turn_index) + " (" +
                                     role_name + "): missing state segment");
      }
      turn.text = text.substr(body_start, state_pos - body_start);
      std::size_t json_start = state_pos + kStateMarker.size();
      end_pos = text.find(kEndMarker, json_start);
      if (end_pos == std::string::npos) {
        format_error(json_start, "turn " + std::to_string(turn_index) +
                                     ": unterminated state segment");
      }
      nlohmann::json state_json;
      try {
        state_json = nlohmann::json::parse(text.substr(json_start, end_pos - json_start));
      } catch (const nlohmann::json::parse_error& e) {
        raise(ErrorCode::StateJsonError, "offset " + std::to_string(json_start) +
                                             ": bad state JSON: " + e.what());
      }
      turn.state = state_from_json(state_json, "turn " + std::to_string(turn_index));

      const bool is_system = role == TurnRole::System;
      if (is_system != expect_system) {
        format_error(pos, "turn " + std::to_string(turn_index) +
                              ": system/user turns must alternate starting with system");
      }
      expect_system = !expect_system;
      if (role == TurnRole::User) example.states.push_back(*turn.state);
    } else {
      if (state_pos != std::string::npos && state_pos < end_pos) {
        format_error(state_pos, "turn " + std::to_string(turn_index) + " (" + role_name +
                                    "): auxiliary turns cannot carry a state segment");
      }
      turn.text = text.substr(body_start, end_pos - body_start);
    }
    example.turns.push_back(std::move(turn));
    ++turn_index;
    pos = end_pos + kEndMarker.size();
  }
  if (!example.turns.empty() && example.turns.front().role != TurnRole::System) {
    format_error(kMetaHeader.size(), "conversations must open with a system turn");
  }
  return example;
}

nlohmann::json ExportManifest::to_json() const {
  nlohmann::json j;
  j["counts"] = nlohmann::json::object();
  for (const auto& [split, count] : counts) j["counts"][split] = count;
  j["master_seed"] = meta.master_seed;
  j["graph_hash"] = meta.graph_hash;
  j["files"] = nlohmann::json::object();
  for (const auto& [split, file] : dataset_files) {
    j["files"][split] = {{"dataset", file}, {"sidecar", sidecar_files.at(split)}};
  }
  return j;
}

ExportManifest export_dataset(std::span<const TrainingExample> examples,
                              const std::filesystem::path& dir,
                              const std::string& split_name, const DatasetMeta& meta) {
  if (examples.empty()) {
    raise(ErrorCode::EmptyInput, "no examples to export");
  }
  std::filesystem::create_directories(dir);

  std::ostringstream dataset;
  std::ostringstream sidecar;
  for (const TrainingExample& example : examples) {
    nlohmann::json line;
    line["example_id"] = example.example_id;
    line["text"] = serialize(example);
    dataset << line.dump() << '\n';

    nlohmann::json side;
    side["example_id"] = example.example_id;
    side["target_doc"] = example.target_doc;
    side["states"] = nlohmann::json::array();
    for (const SystemState& state : example.states) {
      side["states"].push_back(state_to_json(state));
    }
    sidecar << side.dump() << '\n';
  }

  const std::string dataset_name = split_name + ".jsonl";
  const std::string sidecar_name = split_name + ".sidecar.jsonl";
  write_file(dir / dataset_name, dataset.str());
  write_file(dir / sidecar_name, sidecar.str());

  // Merge with an existing manifest so multi-split exports accumulate.
  ExportManifest manifest;
  manifest.meta = meta;
  const std::filesystem::path manifest_path = dir / "manifest.json";
  if (std::filesystem::exists(manifest_path)) {
    nlohmann::json existing = read_json(manifest_path);
    if (existing.contains("counts")) {
      for (const auto& [split, count] : existing.at("counts").items()) {
        manifest.counts[split] = count.get<int>();
      }
    }
    if (existing.contains("files")) {
      for (const auto& [split, files] : existing.at("files").items()) {
        manifest.dataset_files[split] = files.at("dataset").get<std::string>();
        manifest.sidecar_files[split] = files.at("sidecar").get<std::string>();
      }
    }
  }
  manifest.counts[split_name] = static_cast<int>(examples.size());
  manifest.dataset_files[split_name] = dataset_name;
  manifest.sidecar_files[split_name] = sidecar_name;
  write_file(manifest_path, manifest.to_json().dump(2) + "\n");
  return manifest;
}

std::vector<TrainingExample> load_dataset(const std::filesystem::path& path) {
  std::vector<TrainingExample> examples;
  const std::string content = read_file(path);
  for_each_line(content, [&](std::size_t line_number, const std::string& line) {
    nlohmann::json j = parse_json(line, path.string() + ":" + std::to_string(line_number));
    if (!j.contains("text") || !j.at("text").is_string()) {
      raise(ErrorCode::FormatError, path.string() + ":" + std::to_string(line_number) +
                                        ": dataset line has no 'text'");
    }
    examples.push_back(parse(j.at("text").get<std::string>()));
  });
  return examples;
}

}  // namespace todgen
