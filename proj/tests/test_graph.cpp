// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "helpers.hpp"
#include "todgen/errors.hpp"
#include "todgen/graph.hpp"
#include "todgen/io.hpp"
#include "todgen/prompts.hpp"

using namespace todgen;
using todgen::testing::asset;

namespace {

TransitionGraph from_string(const std::string& json) {
  return graph_from_json(nlohmann::json::parse(json), "test");
}

}  // namespace

TEST_CASE("bundled recipe graph loads with the 14 user-intent labels") {
  TransitionGraph graph = load_graph(asset("recipe/graph.json"));
  CHECK(graph.intent_labels().size() == 14);
  CHECK(graph.start_node == "greeting");
  CHECK(graph.is_terminal("farewell"));
}

TEST_CASE("bundled ecommerce graph loads with the 19 user-intent labels") {
  TransitionGraph graph = load_graph(asset("ecommerce/graph.json"));
  CHECK(graph.intent_labels().size() == 19);
}

TEST_CASE("single-node graph is valid") {
  TransitionGraph graph = from_string(R"({
    "start": "only",
    "terminals": ["only"],
    "nodes": [{"id": "only", "system_prompt": "sys"}]
  })");
  CHECK(graph.nodes.size() == 1);
  CHECK(validate(graph).ok());
}

TEST_CASE("edge referencing an unknown node is a SchemaError at load") {
  CHECK_THROWS_WITH_AS(
      from_string(R"({
        "start": "a",
        "terminals": ["b"],
        "nodes": [{"id": "a", "system_prompt": "s"}, {"id": "b", "system_prompt": "s"}],
        "edges": [{"from": "a", "to": "foo", "intent": "go", "p": 1.0, "user_prompt": "u"}]
      })"),
      doctest::Contains("unknown node 'foo'"), Error);
  try {
    from_string(R"({
      "start": "a", "terminals": ["a"],
      "nodes": [{"id": "a", "system_prompt": "s"}],
      "edges": [{"from": "a", "to": "nope", "intent": "go", "p": 1.0, "user_prompt": "u"}]
    })");
    FAIL("expected SchemaError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SchemaError);
  }
}

TEST_CASE("missing required field is a SchemaError") {
  try {
    from_string(R"({"start": "a", "nodes": [{"id": "a"}]})");
    FAIL("expected SchemaError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SchemaError);
    CHECK(std::string(e.what()).find("system_prompt") != std::string::npos);
  }
}

TEST_CASE("malformed JSON is a ParseError") {
  auto dir = todgen::testing::scratch_dir("graph_parse");
  write_file(dir / "bad.json", "{not json");
  try {
    load_graph(dir / "bad.json");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
  }
}

TEST_CASE("probabilities that do not sum to one produce PROB_SUM") {
  TransitionGraph graph = from_string(R"({
    "start": "a", "terminals": ["b"],
    "nodes": [{"id": "a", "system_prompt": "s"}, {"id": "b", "system_prompt": "s"}],
    "edges": [
      {"from": "a", "to": "b", "intent": "x", "p": 0.5, "user_prompt": "u"},
      {"from": "a", "to": "b", "intent": "y", "p": 0.4, "user_prompt": "u"}
    ]
  })");
  ValidationReport report = validate(graph);
  CHECK_FALSE(report.ok());
  CHECK(report.has_error("PROB_SUM"));
}

TEST_CASE("unreachable node is reported by name") {
  TransitionGraph graph = from_string(R"({
    "start": "a", "terminals": ["b"],
    "nodes": [
      {"id": "a", "system_prompt": "s"},
      {"id": "b", "system_prompt": "s"},
      {"id": "island", "system_prompt": "s"}
    ],
    "edges": [{"from": "a", "to": "b", "intent": "x", "p": 1.0, "user_prompt": "u"},
              {"from": "island", "to": "b", "intent": "x", "p": 1.0, "user_prompt": "u"}]
  })");
  ValidationReport report = validate(graph);
  CHECK(report.has_error("UNREACHABLE"));
  bool names_island = false;
  for (const auto& issue : report.errors) {
    if (issue.code == "UNREACHABLE" && issue.location.find("island") != std::string::npos) {
      names_island = true;
    }
  }
  CHECK(names_island);
}

TEST_CASE("node that cannot reach a terminal is reported") {
  TransitionGraph graph = from_string(R"({
    "start": "a", "terminals": ["b"],
    "nodes": [
      {"id": "a", "system_prompt": "s"},
      {"id": "b", "system_prompt": "s"},
      {"id": "trap", "system_prompt": "s"}
    ],
    "edges": [
      {"from": "a", "to": "b", "intent": "x", "p": 0.5, "user_prompt": "u"},
      {"from": "a", "to": "trap", "intent": "y", "p": 0.5, "user_prompt": "u"},
      {"from": "trap", "to": "trap", "intent": "loop", "p": 1.0, "user_prompt": "u"}
    ]
  })");
  CHECK(validate(graph).has_error("NO_TERMINAL_PATH"));
}

TEST_CASE("duplicate intents at one node are rejected") {
  TransitionGraph graph = from_string(R"({
    "start": "a", "terminals": ["b"],
    "nodes": [{"id": "a", "system_prompt": "s"}, {"id": "b", "system_prompt": "s"}],
    "edges": [
      {"from": "a", "to": "b", "intent": "same", "p": 0.5, "user_prompt": "u"},
      {"from": "a", "to": "b", "intent": "same", "p": 0.5, "user_prompt": "u"}
    ]
  })");
  CHECK(validate(graph).has_error("DUPLICATE_INTENT"));
}

TEST_CASE("bundled graphs validate cleanly, including prompt resolution") {
  for (const char* domain : {"recipe", "ecommerce"}) {
    TransitionGraph graph = load_graph(asset(std::string(domain) + "/graph.json"));
    PromptRegistry prompts =
        PromptRegistry::load_dir(asset(std::string(domain) + "/prompts"));
    ValidationReport report = validate(graph, &prompts);
    for (const auto& issue : report.errors) {
      MESSAGE(domain, ": ", issue.code, " at ", issue.location, ": ", issue.message);
    }
    CHECK(report.ok());
  }
}

TEST_CASE("validation flags unresolved prompt ids") {
  TransitionGraph graph = todgen::testing::linear_graph();
  PromptRegistry empty;
  ValidationReport report = validate(graph, &empty);
  CHECK(report.has_error("UNKNOWN_PROMPT"));
}

TEST_CASE("outgoing_distribution rescales locals around global mass") {
  TransitionGraph graph = from_string(R"({
    "start": "n", "terminals": ["t"],
    "nodes": [{"id": "n", "system_prompt": "s"}, {"id": "t", "system_prompt": "s"}],
    "edges": [
      {"from": "n", "to": "t", "intent": "a", "p": 0.5, "user_prompt": "u"},
      {"from": "n", "to": "t", "intent": "b", "p": 0.5, "user_prompt": "u"}
    ],
    "global_edges": [{"intent": "chitchat", "p": 0.2, "user_prompt": "u", "return": "resume"}]
  })");
  auto dist = outgoing_distribution(graph, "n");
  REQUIRE(dist.size() == 3);
  CHECK(dist[0].edge->intent == "a");
  CHECK(dist[0].probability == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(dist[1].probability == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(dist[2].edge->intent == "chitchat");
  CHECK(dist[2].probability == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("outgoing_distribution without globals returns locals unchanged") {
  TransitionGraph graph = todgen::testing::linear_graph();
  auto dist = outgoing_distribution(graph, "start");
  REQUIRE(dist.size() == 1);
  CHECK(dist[0].probability == 1.0);
}

TEST_CASE("global mass of 1 at a node with locals throws") {
  TransitionGraph graph = from_string(R"({
    "start": "n", "terminals": ["t"],
    "nodes": [{"id": "n", "system_prompt": "s"}, {"id": "t", "system_prompt": "s"}],
    "edges": [{"from": "n", "to": "t", "intent": "a", "p": 1.0, "user_prompt": "u"}],
    "global_edges": [
      {"intent": "g1", "p": 0.6, "user_prompt": "u", "return": "resume"},
      {"intent": "g2", "p": 0.4, "user_prompt": "u", "return": "resume"}
    ]
  })");
  try {
    outgoing_distribution(graph, "n");
    FAIL("expected GlobalMassExceedsOne");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GlobalMassExceedsOne);
  }
}

TEST_CASE("terminal node has no outgoing distribution") {
  TransitionGraph graph = todgen::testing::linear_graph();
  try {
    outgoing_distribution(graph, "end");
    FAIL("expected TerminalNode");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TerminalNode);
  }
}

TEST_CASE("mixed distribution sums to one at every non-terminal node") {
  for (const char* domain : {"recipe", "ecommerce"}) {
    TransitionGraph graph = load_graph(asset(std::string(domain) + "/graph.json"));
    for (const NodeSpec& node : graph.nodes) {
      if (graph.is_terminal(node.id)) continue;
      double sum = 0.0;
      for (const WeightedEdge& weighted : outgoing_distribution(graph, node.id)) {
        sum += weighted.probability;
      }
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("omitted probabilities become uniform, mixing is an error") {
  TransitionGraph graph = from_string(R"({
    "start": "a", "terminals": ["b"],
    "nodes": [{"id": "a", "system_prompt": "s"}, {"id": "b", "system_prompt": "s"}],
    "edges": [
      {"from": "a", "to": "b", "intent": "x", "user_prompt": "u"},
      {"from": "a", "to": "b", "intent": "y", "user_prompt": "u"},
      {"from": "a", "to": "b", "intent": "z", "user_prompt": "u"}
    ]
  })");
  for (const EdgeSpec& edge : graph.edges) {
    CHECK(edge.probability == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  try {
    from_string(R"({
      "start": "a", "terminals": ["b"],
      "nodes": [{"id": "a", "system_prompt": "s"}, {"id": "b", "system_prompt": "s"}],
      "edges": [
        {"from": "a", "to": "b", "intent": "x", "p": 0.5, "user_prompt": "u"},
        {"from": "a", "to": "b", "intent": "y", "user_prompt": "u"}
      ]
    })");
    FAIL("expected SchemaError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SchemaError);
  }
}

TEST_CASE("load . serialize is the identity on the in-memory graph") {
  for (const char* domain : {"recipe", "ecommerce"}) {
    TransitionGraph graph = load_graph(asset(std::string(domain) + "/graph.json"));
    const std::string serialized = serialize_graph(graph);
    TransitionGraph reloaded = graph_from_json(nlohmann::json::parse(serialized), "rt");
    CHECK(graph == reloaded);
    CHECK(serialize_graph(reloaded) == serialized);
  }
}

TEST_CASE("graph fingerprint is stable and input-sensitive") {
  TransitionGraph graph = load_graph(asset("recipe/graph.json"));
  CHECK(graph_fingerprint(graph) == graph_fingerprint(graph));
  TransitionGraph other = graph;
  other.edges[0].probability = 0.56;
  CHECK(graph_fingerprint(graph) != graph_fingerprint(other));
}
