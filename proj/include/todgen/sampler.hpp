// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "todgen/graph.hpp"

namespace todgen {

struct WalkStep {
  NodeId node;
  const EdgeSpec* edge;  // points into the graph; graphs outlive walks

  const IntentLabel& intent() const { return edge->intent; }
};

/// A conversation skeleton: the ordered (node, edge) path of one random walk.
struct RandomWalk {
  std::uint64_t walk_id = 0;
  std::uint64_t seed = 0;
  std::vector<WalkStep> steps;
  bool truncated = false;
};

/// Precomputed per-node cumulative distributions so repeated sampling does
/// not rebuild the mixed distribution. Graphs are immutable after
/// validation, so tables can be shared across threads.
class SamplerTables {
 public:
  explicit SamplerTables(const TransitionGraph& graph);

  const TransitionGraph& graph() const { return *graph_; }

  /// Mixed distribution (locals rescaled + globals).
  const std::vector<WeightedEdge>& mixed(const NodeId& node) const;

  /// Locals only, renormalized; used while a resume detour is pending.
  const std::vector<WeightedEdge>& locals(const NodeId& node) const;

 private:
  const TransitionGraph* graph_;
  std::map<NodeId, std::vector<WeightedEdge>> mixed_;
  std::map<NodeId, std::vector<WeightedEdge>> locals_;
};

/// Samples one walk with a deterministic PRNG. Identical (graph, seed,
/// max_len) always produce the identical walk. The walk ends at a terminal
/// node or is flagged truncated at max_len edges. Throws InvalidGraph if
/// validation fails.
RandomWalk sample_walk(const TransitionGraph& graph, std::uint64_t seed, int max_len);

/// Fast path used by sample_walks and the simulation oracle; assumes the
/// graph has already been validated.
RandomWalk sample_walk_with_tables(const SamplerTables& tables, std::uint64_t seed,
                                   int max_len);

/// Walk i is seeded with derive_seed(master_seed, i), so the output is
/// identical no matter how the work is split across threads.
std::vector<RandomWalk> sample_walks(const TransitionGraph& graph, int n,
                                     std::uint64_t master_seed, int max_len);

/// Relative frequency of each intent over all steps of all walks; sums to 1.
std::map<IntentLabel, double> intent_frequencies(std::span<const RandomWalk> walks);

/// One JSONL line per walk: {walk_id, seed, steps:[{node,intent}], truncated}.
std::string walk_to_json_line(const RandomWalk& walk);
void export_walks(std::span<const RandomWalk> walks, const std::filesystem::path& path);

}  // namespace todgen
