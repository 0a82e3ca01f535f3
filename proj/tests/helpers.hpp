// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#include "todgen/graph.hpp"
#include "todgen/prompts.hpp"

namespace todgen::testing {

inline std::filesystem::path source_dir() {
  return std::filesystem::path(TODGEN_SOURCE_DIR);
}

inline std::filesystem::path asset(const std::string& relative) {
  return source_dir() / "assets" / relative;
}

/// Fresh scratch directory under the build tree, unique per tag.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  std::filesystem::path dir =
      std::filesystem::temp_directory_path() / ("todgen_test_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Chi-square critical values at p = 0.01 for df 1..10; a statistic below
/// the critical value means p > 0.01.
inline double chi2_critical_p01(int df) {
  static const double table[] = {6.635, 9.210,  11.345, 13.277, 15.086,
                                 16.812, 18.475, 20.090, 21.666, 23.209};
  return table[df - 1];
}

/// Minimal linear graph start -> a -> end used by several tests.
inline TransitionGraph linear_graph() {
  TransitionGraph graph;
  graph.start_node = "start";
  graph.terminal_nodes = {"end"};
  graph.nodes = {{"start", "sys_start", {}}, {"a", "sys_a", {}}, {"end", "sys_end", {}}};
  EdgeSpec e1;
  e1.from = "start";
  e1.to = "a";
  e1.intent = "go";
  e1.probability = 1.0;
  e1.user_prompt_id = "usr_go";
  EdgeSpec e2 = e1;
  e2.from = "a";
  e2.to = "end";
  e2.intent = "stop";
  e2.user_prompt_id = "usr_stop";
  graph.edges = {e1, e2};
  return graph;
}

/// Uniform 3-way branch: start forks to three terminals.
inline TransitionGraph branch3_graph() {
  TransitionGraph graph;
  graph.start_node = "start";
  graph.nodes = {{"start", "sys_start", {}},
                 {"t1", "sys_t", {}},
                 {"t2", "sys_t", {}},
                 {"t3", "sys_t", {}}};
  graph.terminal_nodes = {"t1", "t2", "t3"};
  for (int i = 1; i <= 3; ++i) {
    EdgeSpec edge;
    edge.from = "start";
    edge.to = "t" + std::to_string(i);
    edge.intent = "branch" + std::to_string(i);
    edge.probability = 1.0 / 3.0;
    edge.user_prompt_id = "usr_branch";
    graph.edges.push_back(edge);
  }
  return graph;
}

}  // namespace todgen::testing
