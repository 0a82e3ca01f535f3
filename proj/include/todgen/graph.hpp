// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

namespace todgen {

class PromptRegistry;

using NodeId = std::string;
using IntentLabel = std::string;

/// Conversation-memory update attached to a node; fires when a walk arrives
/// at the node (the start node's effects fire at conversation start).
enum class EffectKind {
  IncrementCounter,    // counters[target] += 1
  ResetCounter,        // counters[target] = 0
  AppendSelected,      // append the target document to lists[target]
  AppendExtra,         // append a pre-sampled extra document to lists[target]
  RemoveRandom,        // remove a seeded-random element from lists[target]
  ClearList,           // lists[target].clear()
  SetCounterFromSlot,  // counters[target] = int(last state's slot `arg`)
};

struct StateEffect {
  EffectKind kind = EffectKind::IncrementCounter;
  std::string target;
  /// AppendExtra: "any" | "same_category"; SetCounterFromSlot: slot name.
  std::string arg;

  bool operator==(const StateEffect&) const = default;
};

/// Where a slot value comes from when the simulator fills an edge's slots.
enum class SlotSource {
  QueryVariable,     // the current search query V(query)
  DocumentField,     // a field of the target document (arg = field name)
  ListIndex,         // 1-based position of the target in the last result list
  LiteralGenerator,  // seeded generator (arg = generator id)
};

struct SlotSpec {
  std::string name;
  SlotSource source = SlotSource::QueryVariable;
  std::string arg;

  bool operator==(const SlotSpec&) const = default;
};

enum class QueryType { Specific, Generic };

/// Behavior of a global edge: resume bounces back to the pre-detour node
/// after one exchange, redirect moves to the declared target.
enum class ReturnSemantics { None, Resume, Redirect };

struct NodeSpec {
  NodeId id;
  std::string system_prompt_id;
  std::vector<StateEffect> state_effects;

  bool operator==(const NodeSpec&) const = default;
};

struct EdgeSpec {
  NodeId from;  // empty for global edges
  NodeId to;    // may be empty for resume globals (ignored by the sampler)
  IntentLabel intent;
  double probability = 0.0;
  std::string user_prompt_id;
  std::vector<SlotSpec> slot_schema;
  bool is_search = false;
  QueryType query_type = QueryType::Specific;
  ReturnSemantics return_semantics = ReturnSemantics::None;

  bool is_global() const { return from.empty(); }
  bool is_resume() const { return return_semantics == ReturnSemantics::Resume; }

  bool operator==(const EdgeSpec&) const = default;
};

struct ValidationIssue {
  std::string code;      // stable identifier, e.g. "PROB_SUM"
  std::string location;  // e.g. "node 'greeting'", "edges[3]"
  std::string message;

  bool operator==(const ValidationIssue&) const = default;
};

struct ValidationReport {
  std::vector<ValidationIssue> errors;
  std::vector<ValidationIssue> warnings;

  bool ok() const { return errors.empty(); }
  bool has_error(const std::string& code) const;
  nlohmann::json to_json() const;
};

struct TransitionGraph {
  std::vector<NodeSpec> nodes;         // declaration order
  std::vector<EdgeSpec> edges;         // local edges, declaration order
  std::vector<EdgeSpec> global_edges;  // legal from any non-terminal node
  NodeId start_node;
  std::set<NodeId> terminal_nodes;

  const NodeSpec* find_node(const NodeId& id) const;
  const NodeSpec& node_at(const NodeId& id) const;  // throws InvalidGraph
  bool is_terminal(const NodeId& id) const { return terminal_nodes.contains(id); }

  /// Local edges leaving `id`, in declaration order.
  std::vector<const EdgeSpec*> local_edges_of(const NodeId& id) const;

  /// All distinct intent labels (local + global).
  std::set<IntentLabel> intent_labels() const;

  bool operator==(const TransitionGraph&) const = default;
};

TransitionGraph load_graph(const std::filesystem::path& path);
TransitionGraph graph_from_json(const nlohmann::json& j, const std::string& origin);

nlohmann::json graph_to_json(const TransitionGraph& graph);
std::string serialize_graph(const TransitionGraph& graph);

/// Stable fingerprint of the serialized graph; used in dataset manifests.
std::uint64_t graph_fingerprint(const TransitionGraph& graph);

/// Checks every TransitionGraph invariant; never throws — violations are
/// collected in the report. When `prompts` is given, prompt ids are also
/// resolved against it.
ValidationReport validate(const TransitionGraph& graph,
                          const PromptRegistry* prompts = nullptr);

struct WeightedEdge {
  const EdgeSpec* edge;
  double probability;
};

/// Mixed outgoing distribution at a non-terminal node: global edges keep
/// their declared absolute mass, local edges are rescaled by (1 - sum of
/// global mass). Order: locals in declaration order, then globals.
std::vector<WeightedEdge> outgoing_distribution(const TransitionGraph& graph,
                                                const NodeId& node);

}  // namespace todgen
