// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "todgen/backend.hpp"
#include "todgen/dialogue.hpp"
#include "todgen/prompts.hpp"
#include "todgen/retrieval.hpp"
#include "todgen/sampler.hpp"

namespace todgen {

/// Conversation memory maintained while simulating a walk.
struct StateVariables {
  std::string query;                                        // current search query
  std::map<std::string, int> counters;                      // e.g. step number
  std::map<std::string, std::vector<std::string>> lists;    // e.g. cart, comparison
  std::map<std::string, std::string> scalars;
};

struct SimulationOptions {
  int k = 3;                 // retrieval depth per search turn
  int history_window = 6;    // turns of context handed to each LLM call
  int suggestion_count = 3;  // candidate queries generated for generic searches
  double temperature = 0.7;
  int max_tokens = 512;
  std::string model_id;
};

/// Generates a realistic search query for the target document. Specific
/// queries are bound to the target title; generic queries see only category
/// and metadata, never the title. Empty generations are retried twice, then
/// the target title is used as a fallback so the result is never empty.
std::string generate_query(ChatBackend& backend, const PromptTemplate& query_prompt,
                           const SeedDocument& target, QueryType query_type,
                           const SimulationOptions& options = {});

/// Simulates one conversation along `walk`: alternating system/user turns
/// generated by the backend, state variables updated by node effects,
/// search turns grounded through the index with the target document always
/// included in the retrieved set. All randomness (literal slots, extra list
/// items) comes from a PRNG seeded with `seed`.
TrainingExample simulate_conversation(const TransitionGraph& graph,
                                      const RandomWalk& walk,
                                      const SearchIndex& index,
                                      ChatBackend& backend,
                                      const PromptRegistry& prompts,
                                      const SeedDocument& target,
                                      std::uint64_t seed,
                                      const SimulationOptions& options = {});

struct GenerationConfig {
  std::filesystem::path graph_path;
  std::filesystem::path corpus_path;
  std::filesystem::path prompts_dir;
  std::filesystem::path output_dir;
  BackendConfig backend;
  int n = 100;
  std::uint64_t master_seed = 0;
  int max_len = 60;
  double failure_threshold = 0.05;
  std::string split_name = "train";
  int workers = 0;  // 0 = hardware concurrency
  SimulationOptions sim;

  static GenerationConfig from_json(const nlohmann::json& j);
  static GenerationConfig load(const std::filesystem::path& path);
};

struct GenerationFailure {
  std::uint64_t walk_id;
  std::string error;
};

struct GenerationReport {
  int requested = 0;
  int completed = 0;
  std::vector<GenerationFailure> failures;
  std::map<IntentLabel, double> intent_frequencies;
  nlohmann::json stats;  // dataset_stats output (Table-2-shaped)
  std::uint64_t master_seed = 0;
  std::uint64_t graph_hash = 0;

  nlohmann::json to_json() const;
};

struct GenerationResult {
  std::vector<TrainingExample> examples;
  GenerationReport report;
};

/// Samples n walks, pairs each with a uniformly sampled target document and
/// simulates them (in parallel across `workers`, output independent of the
/// worker count). Per-walk failures are isolated; the run fails only when
/// the failure rate exceeds the threshold.
GenerationResult run_generation(const TransitionGraph& graph, const SearchIndex& index,
                                const PromptRegistry& prompts, ChatBackend& backend,
                                const GenerationConfig& config);

/// Convenience entry point that loads every input named in the config.
GenerationResult run_generation(const GenerationConfig& config);

}  // namespace todgen
