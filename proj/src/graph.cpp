// SPDX-License-Identifier: Apache-2.0
#include "todgen/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <unordered_map>
#include <unordered_set>

#include "todgen/errors.hpp"
#include "todgen/io.hpp"
#include "todgen/prompts.hpp"
#include "todgen/rng.hpp"

namespace todgen {

namespace {

constexpr double kProbabilityTolerance = 1e-9;

const nlohmann::json& require_field(const nlohmann::json& j, const char* key,
                                    const std::string& where) {
  if (!j.contains(key)) {
    raise(ErrorCode::SchemaError, where + ": missing required field '" + key + "'");
  }
  return j.at(key);
}

std::string require_string(const nlohmann::json& j, const char* key,
                           const std::string& where) {
  const nlohmann::json& value = require_field(j, key, where);
  if (!value.is_string()) {
    raise(ErrorCode::SchemaError, where + ": field '" + key + "' must be a string");
  }
  return value.get<std::string>();
}

EffectKind effect_kind_from_string(const std::string& kind, const std::string& where) {
  if (kind == "increment_counter") return EffectKind::IncrementCounter;
  if (kind == "reset_counter") return EffectKind::ResetCounter;
  if (kind == "append_selected") return EffectKind::AppendSelected;
  if (kind == "append_extra") return EffectKind::AppendExtra;
  if (kind == "remove_random") return EffectKind::RemoveRandom;
  if (kind == "clear_list") return EffectKind::ClearList;
  if (kind == "set_counter_from_slot") return EffectKind::SetCounterFromSlot;
  raise(ErrorCode::SchemaError, where + ": unknown effect kind '" + kind + "'");
}

std::string effect_kind_to_string(EffectKind kind) {
  switch (kind) {
    case EffectKind::IncrementCounter: return "increment_counter";
    case EffectKind::ResetCounter: return "reset_counter";
    case EffectKind::AppendSelected: return "append_selected";
    case EffectKind::AppendExtra: return "append_extra";
    case EffectKind::RemoveRandom: return "remove_random";
    case EffectKind::ClearList: return "clear_list";
    case EffectKind::SetCounterFromSlot: return "set_counter_from_slot";
  }
  return "increment_counter";
}

SlotSource slot_source_from_string(const std::string& source, const std::string& where) {
  if (source == "query-variable") return SlotSource::QueryVariable;
  if (source == "document-field") return SlotSource::DocumentField;
  if (source == "list-index") return SlotSource::ListIndex;
  if (source == "literal-generator") return SlotSource::LiteralGenerator;
  raise(ErrorCode::SchemaError, where + ": unknown slot source '" + source + "'");
}

std::string slot_source_to_string(SlotSource source) {
  switch (source) {
    case SlotSource::QueryVariable: return "query-variable";
    case SlotSource::DocumentField: return "document-field";
    case SlotSource::ListIndex: return "list-index";
    case SlotSource::LiteralGenerator: return "literal-generator";
  }
  return "query-variable";
}

StateEffect effect_from_json(const nlohmann::json& j, const std::string& where) {
  StateEffect effect;
  effect.kind = effect_kind_from_string(require_string(j, "kind", where), where);
  effect.target = require_string(j, "target", where);
  if (effect.kind == EffectKind::AppendExtra) {
    effect.arg = j.value("pool", std::string("any"));
    if (effect.arg != "any" && effect.arg != "same_category") {
      raise(ErrorCode::SchemaError, where + ": append_extra pool must be 'any' or 'same_category'");
    }
  } else if (effect.kind == EffectKind::SetCounterFromSlot) {
    effect.arg = require_string(j, "slot", where);
  }
  return effect;
}

nlohmann::json effect_to_json(const StateEffect& effect) {
  nlohmann::json j;
  j["kind"] = effect_kind_to_string(effect.kind);
  j["target"] = effect.target;
  if (effect.kind == EffectKind::AppendExtra) j["pool"] = effect.arg;
  if (effect.kind == EffectKind::SetCounterFromSlot) j["slot"] = effect.arg;
  return j;
}

SlotSpec slot_from_json(const nlohmann::json& j, const std::string& where) {
  SlotSpec slot;
  slot.name = require_string(j, "name", where);
  slot.source = slot_source_from_string(require_string(j, "source", where), where);
  if (slot.source == SlotSource::DocumentField) {
    slot.arg = require_string(j, "field", where);
  } else if (slot.source == SlotSource::LiteralGenerator) {
    slot.arg = require_string(j, "generator", where);
  }
  return slot;
}

nlohmann::json slot_to_json(const SlotSpec& slot) {
  nlohmann::json j;
  j["name"] = slot.name;
  j["source"] = slot_source_to_string(slot.source);
  if (slot.source == SlotSource::DocumentField) j["field"] = slot.arg;
  if (slot.source == SlotSource::LiteralGenerator) j["generator"] = slot.arg;
  return j;
}

struct ParsedEdge {
  EdgeSpec edge;
  std::optional<double> declared_p;
  std::string where;
};

ParsedEdge edge_from_json(const nlohmann::json& j, bool global, const std::string& where) {
  ParsedEdge parsed;
  parsed.where = where;
  EdgeSpec& edge = parsed.edge;
  if (global) {
    if (j.contains("from")) {
      raise(ErrorCode::SchemaError, where + ": global edges must not declare 'from'");
    }
    const std::string semantics = require_string(j, "return", where);
    if (semantics == "resume") {
      edge.return_semantics = ReturnSemantics::Resume;
    } else if (semantics == "redirect") {
      edge.return_semantics = ReturnSemantics::Redirect;
    } else {
      raise(ErrorCode::SchemaError, where + ": 'return' must be 'resume' or 'redirect'");
    }
    if (j.contains("to")) edge.to = require_string(j, "to", where);
    if (edge.return_semantics == ReturnSemantics::Redirect && edge.to.empty()) {
      raise(ErrorCode::SchemaError, where + ": redirect edges require 'to'");
    }
  } else {
    if (j.contains("return")) {
      raise(ErrorCode::SchemaError, where + ": 'return' is only valid on global edges");
    }
    edge.from = require_string(j, "from", where);
    edge.to = require_string(j, "to", where);
  }
  edge.intent = require_string(j, "intent", where);
  edge.user_prompt_id = require_string(j, "user_prompt", where);
  if (j.contains("p")) {
    if (!j.at("p").is_number()) {
      raise(ErrorCode::SchemaError, where + ": field 'p' must be a number");
    }
    parsed.declared_p = j.at("p").get<double>();
    edge.probability = *parsed.declared_p;
  }
  if (j.contains("slots")) {
    const nlohmann::json& slots = j.at("slots");
    if (!slots.is_array()) {
      raise(ErrorCode::SchemaError, where + ": 'slots' must be an array");
    }
    for (std::size_t i = 0; i < slots.size(); ++i) {
      edge.slot_schema.push_back(
          slot_from_json(slots[i], where + ".slots[" + std::to_string(i) + "]"));
    }
  }
  edge.is_search = j.value("search", false);
  const std::string query_type = j.value("query_type", std::string("specific"));
  if (query_type == "specific") {
    edge.query_type = QueryType::Specific;
  } else if (query_type == "generic") {
    edge.query_type = QueryType::Generic;
  } else {
    raise(ErrorCode::SchemaError, where + ": 'query_type' must be 'specific' or 'generic'");
  }
  return parsed;
}

nlohmann::json edge_to_json(const EdgeSpec& edge) {
  nlohmann::json j;
  if (!edge.from.empty()) j["from"] = edge.from;
  if (!edge.to.empty()) j["to"] = edge.to;
  j["intent"] = edge.intent;
  j["p"] = edge.probability;
  j["user_prompt"] = edge.user_prompt_id;
  if (!edge.slot_schema.empty()) {
    j["slots"] = nlohmann::json::array();
    for (const SlotSpec& slot : edge.slot_schema) j["slots"].push_back(slot_to_json(slot));
  }
  if (edge.is_search) {
    j["search"] = true;
    j["query_type"] = edge.query_type == QueryType::Generic ? "generic" : "specific";
  }
  if (edge.return_semantics == ReturnSemantics::Resume) j["return"] = "resume";
  if (edge.return_semantics == ReturnSemantics::Redirect) j["return"] = "redirect";
  return j;
}

/// Uniform-default rule: within one source node, either every edge declares
/// a probability or none does (the latter gets 1/n each).
void apply_probability_defaults(std::vector<ParsedEdge>& group, const std::string& node) {
  if (group.empty()) return;
  std::size_t declared = 0;
  for (const ParsedEdge& parsed : group) {
    if (parsed.declared_p.has_value()) ++declared;
  }
  if (declared == group.size()) return;
  if (declared != 0) {
    raise(ErrorCode::SchemaError,
          "node '" + node + "': edges mix declared and omitted probabilities");
  }
  const double uniform = 1.0 / static_cast<double>(group.size());
  for (ParsedEdge& parsed : group) parsed.edge.probability = uniform;
}

}  // namespace

bool ValidationReport::has_error(const std::string& code) const {
  return std::any_of(errors.begin(), errors.end(),
                     [&](const ValidationIssue& issue) { return issue.code == code; });
}

nlohmann::json ValidationReport::to_json() const {
  auto issues_to_json = [](const std::vector<ValidationIssue>& issues) {
    nlohmann::json array = nlohmann::json::array();
    for (const ValidationIssue& issue : issues) {
      array.push_back({{"code", issue.code},
                       {"location", issue.location},
                       {"message", issue.message}});
    }
    return array;
  };
  return {{"errors", issues_to_json(errors)}, {"warnings", issues_to_json(warnings)}};
}

const NodeSpec* TransitionGraph::find_node(const NodeId& id) const {
  for (const NodeSpec& node : nodes) {
    if (node.id == id) return &node;
  }
  return nullptr;
}

const NodeSpec& TransitionGraph::node_at(const NodeId& id) const {
  const NodeSpec* node = find_node(id);
  if (node == nullptr) {
    raise(ErrorCode::InvalidGraph, "no node with id '" + id + "'");
  }
  return *node;
}

std::vector<const EdgeSpec*> TransitionGraph::local_edges_of(const NodeId& id) const {
  std::vector<const EdgeSpec*> result;
  for (const EdgeSpec& edge : edges) {
    if (edge.from == id) result.push_back(&edge);
  }
  return result;
}

std::set<IntentLabel> TransitionGraph::intent_labels() const {
  std::set<IntentLabel> labels;
  for (const EdgeSpec& edge : edges) labels.insert(edge.intent);
  for (const EdgeSpec& edge : global_edges) labels.insert(edge.intent);
  return labels;
}

TransitionGraph graph_from_json(const nlohmann::json& j, const std::string& origin) {
  if (!j.is_object()) {
    raise(ErrorCode::SchemaError, origin + ": graph file must be a JSON object");
  }
  TransitionGraph graph;
  graph.start_node = require_string(j, "start", origin);

  const nlohmann::json& nodes = require_field(j, "nodes", origin);
  if (!nodes.is_array() || nodes.empty()) {
    raise(ErrorCode::SchemaError, origin + ": 'nodes' must be a non-empty array");
  }
  std::unordered_set<std::string> node_ids;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string where = origin + ".nodes[" + std::to_string(i) + "]";
    NodeSpec node;
    node.id = require_string(nodes[i], "id", where);
    node.system_prompt_id = require_string(nodes[i], "system_prompt", where);
    if (nodes[i].contains("effects")) {
      const nlohmann::json& effects = nodes[i].at("effects");
      if (!effects.is_array()) {
        raise(ErrorCode::SchemaError, where + ": 'effects' must be an array");
      }
      for (std::size_t e = 0; e < effects.size(); ++e) {
        node.state_effects.push_back(
            effect_from_json(effects[e], where + ".effects[" + std::to_string(e) + "]"));
      }
    }
    if (!node_ids.insert(node.id).second) {
      raise(ErrorCode::SchemaError, where + ": duplicate node id '" + node.id + "'");
    }
    graph.nodes.push_back(std::move(node));
  }

  auto check_node_ref = [&](const std::string& id, const std::string& where) {
    if (!node_ids.contains(id)) {
      raise(ErrorCode::SchemaError, where + ": references unknown node '" + id + "'");
    }
  };
  check_node_ref(graph.start_node, origin + ".start");

  if (j.contains("terminals")) {
    const nlohmann::json& terminals = j.at("terminals");
    if (!terminals.is_array()) {
      raise(ErrorCode::SchemaError, origin + ": 'terminals' must be an array");
    }
    for (const nlohmann::json& t : terminals) {
      if (!t.is_string()) {
        raise(ErrorCode::SchemaError, origin + ": terminal ids must be strings");
      }
      check_node_ref(t.get<std::string>(), origin + ".terminals");
      graph.terminal_nodes.insert(t.get<std::string>());
    }
  }

  std::unordered_map<std::string, std::vector<ParsedEdge>> by_source;
  std::vector<std::string> source_order;
  if (j.contains("edges")) {
    const nlohmann::json& edges = j.at("edges");
    if (!edges.is_array()) {
      raise(ErrorCode::SchemaError, origin + ": 'edges' must be an array");
    }
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const std::string where = origin + ".edges[" + std::to_string(i) + "]";
      ParsedEdge parsed = edge_from_json(edges[i], /*global=*/false, where);
      check_node_ref(parsed.edge.from, where + ".from");
      check_node_ref(parsed.edge.to, where + ".to");
      if (!by_source.contains(parsed.edge.from)) source_order.push_back(parsed.edge.from);
      by_source[parsed.edge.from].push_back(std::move(parsed));
    }
  }
  for (const std::string& source : source_order) {
    apply_probability_defaults(by_source[source], source);
  }
  // Re-emit local edges in their original declaration order.
  std::unordered_map<std::string, std::size_t> cursor;
  if (j.contains("edges")) {
    for (std::size_t i = 0; i < j.at("edges").size(); ++i) {
      const std::string from =
          require_string(j.at("edges")[i], "from",
                         origin + ".edges[" + std::to_string(i) + "]");
      graph.edges.push_back(by_source[from][cursor[from]++].edge);
    }
  }

  if (j.contains("global_edges")) {
    const nlohmann::json& globals = j.at("global_edges");
    if (!globals.is_array()) {
      raise(ErrorCode::SchemaError, origin + ": 'global_edges' must be an array");
    }
    for (std::size_t i = 0; i < globals.size(); ++i) {
      const std::string where = origin + ".global_edges[" + std::to_string(i) + "]";
      ParsedEdge parsed = edge_from_json(globals[i], /*global=*/true, where);
      if (!parsed.declared_p.has_value()) {
        raise(ErrorCode::SchemaError,
              where + ": global edges must declare an absolute probability 'p'");
      }
      if (!parsed.edge.to.empty()) check_node_ref(parsed.edge.to, where + ".to");
      graph.global_edges.push_back(std::move(parsed.edge));
    }
  }

  return graph;
}

TransitionGraph load_graph(const std::filesystem::path& path) {
  return graph_from_json(read_json(path), path.filename().string());
}

nlohmann::json graph_to_json(const TransitionGraph& graph) {
  nlohmann::json j;
  j["start"] = graph.start_node;
  j["terminals"] = nlohmann::json::array();
  for (const NodeId& id : graph.terminal_nodes) j["terminals"].push_back(id);
  j["nodes"] = nlohmann::json::array();
  for (const NodeSpec& node : graph.nodes) {
    nlohmann::json n;
    n["id"] = node.id;
    n["system_prompt"] = node.system_prompt_id;
    if (!node.state_effects.empty()) {
      n["effects"] = nlohmann::json::array();
      for (const StateEffect& effect : node.state_effects) {
        n["effects"].push_back(effect_to_json(effect));
      }
    }
    j["nodes"].push_back(std::move(n));
  }
  j["edges"] = nlohmann::json::array();
  for (const EdgeSpec& edge : graph.edges) j["edges"].push_back(edge_to_json(edge));
  j["global_edges"] = nlohmann::json::array();
  for (const EdgeSpec& edge : graph.global_edges) {
    j["global_edges"].push_back(edge_to_json(edge));
  }
  return j;
}

std::string serialize_graph(const TransitionGraph& graph) {
  return graph_to_json(graph).dump(2) + "\n";
}

std::uint64_t graph_fingerprint(const TransitionGraph& graph) {
  const std::string serialized = serialize_graph(graph);
  return fnv1a64(serialized.data(), serialized.size());
}

namespace {

double global_mass(const TransitionGraph& graph) {
  double sum = 0.0;
  for (const EdgeSpec& edge : graph.global_edges) sum += edge.probability;
  return sum;
}

}  // namespace

ValidationReport validate(const TransitionGraph& graph, const PromptRegistry* prompts) {
  ValidationReport report;
  auto error = [&](std::string code, std::string location, std::string message) {
    report.errors.push_back({std::move(code), std::move(location), std::move(message)});
  };
  auto warning = [&](std::string code, std::string location, std::string message) {
    report.warnings.push_back({std::move(code), std::move(location), std::move(message)});
  };

  std::unordered_set<std::string> node_ids;
  for (const NodeSpec& node : graph.nodes) {
    if (!node_ids.insert(node.id).second) {
      error("DUPLICATE_NODE", "node '" + node.id + "'", "node id declared twice");
    }
  }
  if (graph.nodes.empty()) {
    error("UNKNOWN_NODE", "nodes", "graph has no nodes");
    return report;
  }
  auto known = [&](const NodeId& id) { return node_ids.contains(id); };

  if (!known(graph.start_node)) {
    error("UNKNOWN_NODE", "start", "start node '" + graph.start_node + "' does not exist");
  }
  for (const NodeId& id : graph.terminal_nodes) {
    if (!known(id)) {
      error("UNKNOWN_NODE", "terminals", "terminal node '" + id + "' does not exist");
    }
  }

  auto check_edge_refs = [&](const EdgeSpec& edge, const std::string& where) {
    if (!edge.is_global() && !known(edge.from)) {
      error("UNKNOWN_NODE", where, "source node '" + edge.from + "' does not exist");
    }
    if (!edge.to.empty() && !known(edge.to)) {
      error("UNKNOWN_NODE", where, "target node '" + edge.to + "' does not exist");
    }
    if (edge.probability <= 0.0 || edge.probability > 1.0) {
      error("BAD_PROBABILITY", where,
            "probability " + std::to_string(edge.probability) + " outside (0,1]");
    }
    std::unordered_set<std::string> slot_names;
    for (const SlotSpec& slot : edge.slot_schema) {
      if (!slot_names.insert(slot.name).second) {
        error("DUPLICATE_SLOT", where, "slot '" + slot.name + "' declared twice");
      }
    }
    if (edge.is_search) {
      bool has_query_slot = std::any_of(
          edge.slot_schema.begin(), edge.slot_schema.end(),
          [](const SlotSpec& slot) { return slot.source == SlotSource::QueryVariable; });
      if (!has_query_slot) {
        warning("NO_QUERY_SLOT", where,
                "search edge has no query-variable slot; the generated query will "
                "not be visible in the state");
      }
    }
  };
  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    const std::string where = "edges[" + std::to_string(i) + "]";
    check_edge_refs(graph.edges[i], where);
    if (graph.edges[i].is_global()) {
      error("UNKNOWN_NODE", where, "local edge has empty 'from'");
    }
    if (graph.edges[i].to.empty()) {
      error("UNKNOWN_NODE", where, "local edge has empty 'to'");
    }
    if (graph.edges[i].return_semantics != ReturnSemantics::None) {
      error("BAD_RETURN", where, "return semantics are only valid on global edges");
    }
  }
  std::unordered_set<std::string> global_intents;
  for (std::size_t i = 0; i < graph.global_edges.size(); ++i) {
    const EdgeSpec& edge = graph.global_edges[i];
    const std::string where = "global_edges[" + std::to_string(i) + "]";
    check_edge_refs(edge, where);
    if (edge.return_semantics == ReturnSemantics::None) {
      error("BAD_RETURN", where, "global edges require return semantics");
    }
    if (edge.return_semantics == ReturnSemantics::Redirect && edge.to.empty()) {
      error("UNKNOWN_NODE", where, "redirect edge has no target");
    }
    if (edge.return_semantics == ReturnSemantics::Resume && !edge.to.empty()) {
      warning("RESUME_TARGET_IGNORED", where,
              "resume edges bounce back to the pre-detour node; 'to' is ignored");
    }
    if (!global_intents.insert(edge.intent).second) {
      error("DUPLICATE_INTENT", where, "intent '" + edge.intent + "' declared twice globally");
    }
  }

  // Per-node checks: intent uniqueness and probability mass.
  const double g_mass = global_mass(graph);
  if (g_mass > 1.0 + kProbabilityTolerance) {
    error("GLOBAL_MASS", "global_edges",
          "global probabilities sum to " + std::to_string(g_mass) + " (> 1)");
  }
  for (const NodeSpec& node : graph.nodes) {
    const std::string where = "node '" + node.id + "'";
    std::vector<const EdgeSpec*> locals = graph.local_edges_of(node.id);
    if (graph.is_terminal(node.id)) {
      if (!locals.empty()) {
        warning("TERMINAL_EDGES", where, "terminal node has outgoing edges; never taken");
      }
      continue;
    }
    std::unordered_set<std::string> intents = global_intents;
    for (const EdgeSpec* edge : locals) {
      if (!intents.insert(edge->intent).second) {
        error("DUPLICATE_INTENT", where,
              "intent '" + edge->intent + "' is ambiguous at this node");
      }
    }
    double local_sum = 0.0;
    for (const EdgeSpec* edge : locals) local_sum += edge->probability;
    if (locals.empty()) {
      if (std::abs(g_mass - 1.0) > kProbabilityTolerance) {
        error("PROB_SUM", where,
              "no local edges and global mass is " + std::to_string(g_mass) +
                  "; outgoing distribution cannot sum to 1");
      }
    } else if (g_mass >= 1.0 - kProbabilityTolerance) {
      error("GLOBAL_MASS", where,
            "global probabilities consume the full mass but local edges exist");
    } else {
      const double mixed = local_sum * (1.0 - g_mass) + g_mass;
      if (std::abs(mixed - 1.0) > kProbabilityTolerance) {
        error("PROB_SUM", where,
              "outgoing distribution sums to " + std::to_string(mixed) + " (expected 1)");
      }
    }
    if (node.state_effects.empty()) continue;
    for (const StateEffect& effect : node.state_effects) {
      if (effect.target.empty()) {
        error("BAD_EFFECT", where, "effect has empty target");
      }
    }
  }

  // Reachability over sampler-visible moves: local edges always move;
  // redirect globals move from any non-terminal node; resume globals do not.
  std::unordered_set<std::string> reachable;
  std::deque<NodeId> queue;
  if (known(graph.start_node)) {
    reachable.insert(graph.start_node);
    queue.push_back(graph.start_node);
  }
  std::vector<NodeId> redirect_targets;
  for (const EdgeSpec& edge : graph.global_edges) {
    if (edge.return_semantics == ReturnSemantics::Redirect && known(edge.to)) {
      redirect_targets.push_back(edge.to);
    }
  }
  while (!queue.empty()) {
    NodeId current = queue.front();
    queue.pop_front();
    if (graph.is_terminal(current)) continue;
    std::vector<NodeId> next;
    for (const EdgeSpec* edge : graph.local_edges_of(current)) {
      if (known(edge->to)) next.push_back(edge->to);
    }
    next.insert(next.end(), redirect_targets.begin(), redirect_targets.end());
    for (const NodeId& id : next) {
      if (reachable.insert(id).second) queue.push_back(id);
    }
  }
  for (const NodeSpec& node : graph.nodes) {
    if (!reachable.contains(node.id)) {
      error("UNREACHABLE", "node '" + node.id + "'",
            "not reachable from start node '" + graph.start_node + "'");
    }
  }

  // Co-reachability: some terminal must be reachable from every reachable node.
  std::unordered_set<std::string> reaches_terminal(graph.terminal_nodes.begin(),
                                                   graph.terminal_nodes.end());
  bool changed = true;
  while (changed) {
    changed = false;
    for (const NodeSpec& node : graph.nodes) {
      if (reaches_terminal.contains(node.id) || graph.is_terminal(node.id)) continue;
      bool ok = false;
      for (const EdgeSpec* edge : graph.local_edges_of(node.id)) {
        if (reaches_terminal.contains(edge->to)) {
          ok = true;
          break;
        }
      }
      if (!ok) {
        for (const NodeId& target : redirect_targets) {
          if (reaches_terminal.contains(target)) {
            ok = true;
            break;
          }
        }
      }
      if (ok) {
        reaches_terminal.insert(node.id);
        changed = true;
      }
    }
  }
  for (const NodeSpec& node : graph.nodes) {
    if (reachable.contains(node.id) && !reaches_terminal.contains(node.id)) {
      error("NO_TERMINAL_PATH", "node '" + node.id + "'",
            "no terminal node is reachable from here");
    }
  }

  if (prompts != nullptr) {
    for (const NodeSpec& node : graph.nodes) {
      if (!prompts->contains(node.system_prompt_id)) {
        error("UNKNOWN_PROMPT", "node '" + node.id + "'",
              "system prompt '" + node.system_prompt_id + "' not in registry");
      }
    }
    auto check_edges = [&](const std::vector<EdgeSpec>& edges, const std::string& prefix) {
      for (std::size_t i = 0; i < edges.size(); ++i) {
        const EdgeSpec& edge = edges[i];
        const std::string where = prefix + "[" + std::to_string(i) + "]";
        if (!prompts->contains(edge.user_prompt_id)) {
          error("UNKNOWN_PROMPT", where,
                "user prompt '" + edge.user_prompt_id + "' not in registry");
        }
        if (edge.is_search) {
          const std::string query_prompt =
              edge.query_type == QueryType::Generic ? "query_generic" : "query_specific";
          if (!prompts->contains(query_prompt)) {
            error("UNKNOWN_PROMPT", where,
                  "search edge needs template '" + query_prompt + "' in the registry");
          }
        }
      }
    };
    check_edges(graph.edges, "edges");
    check_edges(graph.global_edges, "global_edges");
  }

  return report;
}

std::vector<WeightedEdge> outgoing_distribution(const TransitionGraph& graph,
                                                const NodeId& node) {
  graph.node_at(node);  // throws InvalidGraph when unknown
  if (graph.is_terminal(node)) {
    raise(ErrorCode::TerminalNode, "node '" + node + "' is terminal");
  }
  std::vector<const EdgeSpec*> locals = graph.local_edges_of(node);
  const double g_mass = global_mass(graph);

  std::vector<WeightedEdge> result;
  if (locals.empty()) {
    if (g_mass > 1.0 + kProbabilityTolerance) {
      raise(ErrorCode::GlobalMassExceedsOne,
            "global probabilities sum to " + std::to_string(g_mass));
    }
    for (const EdgeSpec& edge : graph.global_edges) {
      result.push_back({&edge, edge.probability});
    }
    return result;
  }
  if (g_mass >= 1.0 - 1e-12) {
    raise(ErrorCode::GlobalMassExceedsOne,
          "global probabilities sum to " + std::to_string(g_mass) +
              " at node '" + node + "' with local edges");
  }
  result.reserve(locals.size() + graph.global_edges.size());
  for (const EdgeSpec* edge : locals) {
    result.push_back({edge, edge->probability * (1.0 - g_mass)});
  }
  for (const EdgeSpec& edge : graph.global_edges) {
    result.push_back({&edge, edge.probability});
  }
  return result;
}

}  // namespace todgen
