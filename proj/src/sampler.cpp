// SPDX-License-Identifier: Apache-2.0
#include "todgen/sampler.hpp"

#include <sstream>

#include "todgen/errors.hpp"
#include "todgen/io.hpp"
#include "todgen/rng.hpp"

namespace todgen {

SamplerTables::SamplerTables(const TransitionGraph& graph) : graph_(&graph) {
  for (const NodeSpec& node : graph.nodes) {
    if (graph.is_terminal(node.id)) continue;
    mixed_[node.id] = outgoing_distribution(graph, node.id);
    std::vector<WeightedEdge> locals;
    double sum = 0.0;
    for (const EdgeSpec* edge : graph.local_edges_of(node.id)) {
      locals.push_back({edge, edge->probability});
      sum += edge->probability;
    }
    if (sum > 0.0) {
      for (WeightedEdge& weighted : locals) weighted.probability /= sum;
    }
    locals_[node.id] = std::move(locals);
  }
}

const std::vector<WeightedEdge>& SamplerTables::mixed(const NodeId& node) const {
  auto it = mixed_.find(node);
  if (it == mixed_.end()) {
    raise(ErrorCode::InvalidGraph, "no distribution for node '" + node + "'");
  }
  return it->second;
}

const std::vector<WeightedEdge>& SamplerTables::locals(const NodeId& node) const {
  auto it = locals_.find(node);
  if (it == locals_.end()) {
    raise(ErrorCode::InvalidGraph, "no local edges table for node '" + node + "'");
  }
  return it->second;
}

namespace {

const EdgeSpec* pick_edge(const std::vector<WeightedEdge>& choices, double roll) {
  double cumulative = 0.0;
  for (const WeightedEdge& weighted : choices) {
    cumulative += weighted.probability;
    if (roll < cumulative) return weighted.edge;
  }
  return choices.back().edge;  // absorb floating-point remainder
}

}  // namespace

RandomWalk sample_walk_with_tables(const SamplerTables& tables, std::uint64_t seed,
                                   int max_len) {
  if (max_len < 1) {
    raise(ErrorCode::InvalidGraph, "max_len must be >= 1");
  }
  const TransitionGraph& graph = tables.graph();
  RandomWalk walk;
  walk.seed = seed;
  SplitMix64 rng(seed);

  NodeId current = graph.start_node;
  bool resume_pending = false;
  while (!graph.is_terminal(current) &&
         walk.steps.size() < static_cast<std::size_t>(max_len)) {
    const std::vector<WeightedEdge>* choices = &tables.mixed(current);
    if (resume_pending && !tables.locals(current).empty()) {
      // No global chaining while a detour answer is pending.
      choices = &tables.locals(current);
    }
    if (choices->empty()) break;  // defensive; validation forbids dead ends
    const EdgeSpec* edge = pick_edge(*choices, rng.next_double());
    walk.steps.push_back({current, edge});
    if (edge->is_global() && edge->is_resume()) {
      resume_pending = true;  // stay at the pre-detour node
    } else {
      current = edge->to;
      resume_pending = false;
    }
  }
  walk.truncated = !graph.is_terminal(current);
  return walk;
}

RandomWalk sample_walk(const TransitionGraph& graph, std::uint64_t seed, int max_len) {
  ValidationReport report = validate(graph);
  if (!report.ok()) {
    raise(ErrorCode::InvalidGraph,
          "graph failed validation: " + report.errors.front().code + " at " +
              report.errors.front().location);
  }
  SamplerTables tables(graph);
  return sample_walk_with_tables(tables, seed, max_len);
}

std::vector<RandomWalk> sample_walks(const TransitionGraph& graph, int n,
                                     std::uint64_t master_seed, int max_len) {
  if (n < 1) {
    raise(ErrorCode::EmptyInput, "walk count must be >= 1");
  }
  ValidationReport report = validate(graph);
  if (!report.ok()) {
    raise(ErrorCode::InvalidGraph,
          "graph failed validation: " + report.errors.front().code + " at " +
              report.errors.front().location);
  }
  SamplerTables tables(graph);
  std::vector<RandomWalk> walks;
  walks.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    RandomWalk walk = sample_walk_with_tables(
        tables, derive_seed(master_seed, static_cast<std::uint64_t>(i)), max_len);
    walk.walk_id = static_cast<std::uint64_t>(i);
    walks.push_back(std::move(walk));
  }
  return walks;
}

std::map<IntentLabel, double> intent_frequencies(std::span<const RandomWalk> walks) {
  if (walks.empty()) {
    raise(ErrorCode::EmptyInput, "no walks given");
  }
  std::map<IntentLabel, std::size_t> counts;
  std::size_t total = 0;
  for (const RandomWalk& walk : walks) {
    for (const WalkStep& step : walk.steps) {
      ++counts[step.intent()];
      ++total;
    }
  }
  std::map<IntentLabel, double> frequencies;
  if (total == 0) return frequencies;
  for (const auto& [intent, count] : counts) {
    frequencies[intent] = static_cast<double>(count) / static_cast<double>(total);
  }
  return frequencies;
}

std::string walk_to_json_line(const RandomWalk& walk) {
  nlohmann::json j;
  j["walk_id"] = walk.walk_id;
  j["seed"] = walk.seed;
  j["steps"] = nlohmann::json::array();
  for (const WalkStep& step : walk.steps) {
    j["steps"].push_back({{"node", step.node}, {"intent", step.intent()}});
  }
  j["truncated"] = walk.truncated;
  return j.dump();
}

void export_walks(std::span<const RandomWalk> walks, const std::filesystem::path& path) {
  std::ostringstream out;
  for (const RandomWalk& walk : walks) {
    out << walk_to_json_line(walk) << '\n';
  }
  write_file(path, out.str());
}

}  // namespace todgen
