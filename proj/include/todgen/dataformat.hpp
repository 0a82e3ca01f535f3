// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>

#include "json.hpp"
#include "todgen/dialogue.hpp"

namespace todgen {

/// Delimiters of the role-tagged text format. Turn text must not contain
/// the delimiter prefix; serialize rejects it, the simulator sanitizes
/// model output accordingly.
inline constexpr std::string_view kDelimiterPrefix = "<|";

/// Replaces "<|" with "< |" so arbitrary model output is always
/// serializable.
std::string sanitize_turn_text(std::string_view text);

/// Renders an example as role-tagged text:
///
///   <|meta|>\n{canonical json}\n<|end|>\n
///   <|system|>\ntext\n<|state|>\n{"intent":...,"slots":{...}}\n<|end|>\n
///   <|user|>\n...\n<|state|>\n{...}\n<|end|>\n
///   <|retriever|>\npayload\n<|end|>\n            (auxiliary roles)
///
/// State segments are canonical JSON (sorted keys, no insignificant
/// whitespace); a "documents" key appears only when non-empty. Throws
/// InvalidExample when the example violates structural invariants or a
/// text contains the delimiter prefix.
std::string serialize(const TrainingExample& example);

/// Inverse of serialize: full structural recovery, so
/// parse(serialize(x)) == x. Throws FormatError (with byte offset) on
/// grammar violations and StateJsonError on malformed state segments.
TrainingExample parse(const std::string& text);

struct DatasetMeta {
  std::uint64_t master_seed = 0;
  std::uint64_t graph_hash = 0;
};

struct ExportManifest {
  std::map<std::string, int> counts;  // split name -> example count
  DatasetMeta meta;
  std::map<std::string, std::string> dataset_files;
  std::map<std::string, std::string> sidecar_files;

  nlohmann::json to_json() const;
};

/// Writes <dir>/<split>.jsonl (one {"example_id","text"} object per line),
/// <dir>/<split>.sidecar.jsonl ({"example_id","target_doc","states"}), and
/// merges counts into <dir>/manifest.json. Re-exporting identical inputs
/// produces identical files.
ExportManifest export_dataset(std::span<const TrainingExample> examples,
                              const std::filesystem::path& dir,
                              const std::string& split_name,
                              const DatasetMeta& meta = {});

/// Reads a dataset JSONL written by export_dataset and parses every line.
std::vector<TrainingExample> load_dataset(const std::filesystem::path& path);

nlohmann::json state_to_json(const SystemState& state);
SystemState state_from_json(const nlohmann::json& j, const std::string& origin);

}  // namespace todgen
