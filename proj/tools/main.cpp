// SPDX-License-Identifier: Apache-2.0
//
// todgen: operator CLI tying the pipeline together:
//   validate -> sample -> generate -> evaluate / diversity / judge / stats
//
// Exit codes: 0 success, 1 domain error, 2 usage or IO error.

#include <atomic>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "todgen/backend.hpp"
#include "todgen/dataformat.hpp"
#include "todgen/errors.hpp"
#include "todgen/eval.hpp"
#include "todgen/graph.hpp"
#include "todgen/io.hpp"
#include "todgen/prompts.hpp"
#include "todgen/sampler.hpp"
#include "todgen/simulator.hpp"

namespace {

using namespace todgen;

int exit_code_for(const Error& error) {
  switch (error.code()) {
    case ErrorCode::IoError:
    case ErrorCode::ParseError:
    case ErrorCode::ConfigError:
      return 2;
    default:
      return 1;
  }
}

void emit_report(const nlohmann::json& report, const std::string& out_path) {
  const std::string text = report.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_file(out_path, text);
    std::cerr << "report written to " << out_path << "\n";
  }
}

struct JudgeItem {
  std::string example_id;
  int turn = 0;
  std::string response;
};

std::vector<JudgeItem> load_judge_items(const std::string& path) {
  std::vector<JudgeItem> items;
  for_each_line(read_file(path), [&](std::size_t line_number, const std::string& line) {
    nlohmann::json j = parse_json(line, path + ":" + std::to_string(line_number));
    JudgeItem item;
    item.example_id = j.at("example_id").get<std::string>();
    item.turn = j.at("turn").get<int>();
    item.response = j.value("response", std::string());
    items.push_back(std::move(item));
  });
  return items;
}

std::map<std::pair<std::string, int>, int> load_labels(const std::string& path) {
  std::map<std::pair<std::string, int>, int> labels;
  for_each_line(read_file(path), [&](std::size_t line_number, const std::string& line) {
    nlohmann::json j = parse_json(line, path + ":" + std::to_string(line_number));
    labels[{j.at("example_id").get<std::string>(), j.at("turn").get<int>()}] =
        j.at("label").get<int>();
  });
  return labels;
}

nlohmann::json label_distribution(const std::vector<int>& labels) {
  std::map<int, int> counts;
  double average = 0.0;
  for (int label : labels) {
    ++counts[label];
    average += label;
  }
  if (!labels.empty()) average /= static_cast<double>(labels.size());
  nlohmann::json distribution;
  for (int level : {0, 1, 2}) {
    distribution[std::to_string(level)] =
        labels.empty() ? 0.0
                       : 100.0 * static_cast<double>(counts[level]) /
                             static_cast<double>(labels.size());
  }
  return {{"count", labels.size()},
          {"relevance_percent", distribution},
          {"average_relevance", average}};
}

int cmd_validate(const std::string& graph_path, const std::string& prompts_dir,
                 const std::string& out_path) {
  TransitionGraph graph = load_graph(graph_path);
  ValidationReport report;
  if (prompts_dir.empty()) {
    report = validate(graph);
  } else {
    PromptRegistry prompts = PromptRegistry::load_dir(prompts_dir);
    report = validate(graph, &prompts);
  }
  emit_report(report.to_json(), out_path);
  if (!report.ok()) {
    for (const ValidationIssue& issue : report.errors) {
      std::cerr << "error " << issue.code << " at " << issue.location << ": "
                << issue.message << "\n";
    }
    return 1;
  }
  return 0;
}

int cmd_sample(const std::string& graph_path, int n, std::uint64_t seed, int max_len,
               const std::string& out_path) {
  TransitionGraph graph = load_graph(graph_path);
  std::vector<RandomWalk> walks = sample_walks(graph, n, seed, max_len);
  if (out_path.empty()) {
    for (const RandomWalk& walk : walks) std::cout << walk_to_json_line(walk) << "\n";
  } else {
    export_walks(walks, out_path);
    std::cerr << n << " walks written to " << out_path << "\n";
  }
  return 0;
}

int cmd_generate(const std::string& config_path, int workers_override,
                 const std::string& out_dir_override) {
  GenerationConfig config = GenerationConfig::load(config_path);
  if (workers_override > 0) config.workers = workers_override;
  if (!out_dir_override.empty()) config.output_dir = out_dir_override;

  GenerationResult result = run_generation(config);
  std::cerr << "generated " << result.report.completed << "/" << result.report.requested
            << " conversations\n";
  DatasetMeta meta{config.master_seed, result.report.graph_hash};
  export_dataset(result.examples, config.output_dir, config.split_name, meta);
  write_file(config.output_dir / "report.json", result.report.to_json().dump(2) + "\n");
  emit_report(result.report.to_json(), "");
  return 0;
}

int cmd_evaluate(const std::string& gold_path, const std::string& pred_path,
                 const std::string& graph_path, const std::string& confusion_csv,
                 const std::string& out_path) {
  TransitionGraph graph = load_graph(graph_path);
  std::set<IntentLabel> canonical = graph.intent_labels();
  IntentNormalizer normalizer(
      std::vector<IntentLabel>(canonical.begin(), canonical.end()));

  // Gold: sidecar lines {example_id, target_doc, states:[{intent,slots,...}]}.
  struct GoldExample {
    std::vector<IntentLabel> intents;
    std::vector<std::map<std::string, std::string>> slots;
  };
  std::map<std::string, GoldExample> gold;
  std::vector<std::string> gold_order;
  for_each_line(read_file(gold_path), [&](std::size_t line_number, const std::string& line) {
    nlohmann::json j = parse_json(line, gold_path + ":" + std::to_string(line_number));
    GoldExample example;
    for (const nlohmann::json& state : j.at("states")) {
      example.intents.push_back(state.at("intent").get<std::string>());
      std::map<std::string, std::string> slot_map;
      for (const auto& [name, value] : state.at("slots").items()) {
        slot_map[name] = value.get<std::string>();
      }
      example.slots.push_back(std::move(slot_map));
    }
    const std::string id = j.at("example_id").get<std::string>();
    gold_order.push_back(id);
    gold[id] = std::move(example);
  });

  // Predictions: {example_id, turn, intent, slots, response}.
  std::map<std::pair<std::string, int>,
           std::pair<std::string, std::map<std::string, std::string>>>
      predictions;
  for_each_line(read_file(pred_path), [&](std::size_t line_number, const std::string& line) {
    nlohmann::json j = parse_json(line, pred_path + ":" + std::to_string(line_number));
    std::map<std::string, std::string> slot_map;
    if (j.contains("slots")) {
      for (const auto& [name, value] : j.at("slots").items()) {
        slot_map[name] = value.is_string() ? value.get<std::string>() : value.dump();
      }
    }
    predictions[{j.at("example_id").get<std::string>(), j.at("turn").get<int>()}] = {
        j.at("intent").get<std::string>(), std::move(slot_map)};
  });

  std::vector<IntentLabel> gold_intents, pred_intents;
  std::vector<std::map<std::string, std::string>> gold_slots, pred_slots;
  for (const std::string& id : gold_order) {
    const GoldExample& example = gold.at(id);
    for (std::size_t t = 0; t < example.intents.size(); ++t) {
      auto it = predictions.find({id, static_cast<int>(t)});
      if (it == predictions.end()) {
        raise(ErrorCode::LengthMismatch,
              "no prediction for example " + id + " turn " + std::to_string(t));
      }
      gold_intents.push_back(example.intents[t]);
      pred_intents.push_back(normalizer.normalize(it->second.first));
      gold_slots.push_back(example.slots[t]);
      pred_slots.push_back(it->second.second);
    }
  }
  if (gold_intents.empty()) {
    raise(ErrorCode::EmptyInput, "no aligned turns to evaluate");
  }

  IntentMetrics intent = intent_metrics(gold_intents, pred_intents);
  SlotMetrics slots = slot_metrics(gold_slots, pred_slots);
  std::set<IntentLabel> label_set = canonical;
  for (const IntentLabel& label : gold_intents) label_set.insert(label);
  ConfusionMatrix matrix = confusion_matrix(
      gold_intents, pred_intents,
      std::vector<IntentLabel>(label_set.begin(), label_set.end()));
  if (!confusion_csv.empty()) {
    write_file(confusion_csv, matrix.to_csv());
    std::cerr << "confusion matrix written to " << confusion_csv << "\n";
  }

  nlohmann::json report;
  report["turns"] = gold_intents.size();
  report["intent"] = intent.to_json();
  report["slots"] = slots.to_json();
  emit_report(report, out_path);
  return 0;
}

int cmd_diversity(const std::string& dataset_path, int max_n, const std::string& out_path) {
  std::vector<TrainingExample> examples = load_dataset(dataset_path);
  std::vector<std::string> user_utterances, system_utterances;
  for (const TrainingExample& example : examples) {
    for (const DialogueTurn& turn : example.turns) {
      if (turn.role == TurnRole::User) user_utterances.push_back(turn.text);
      if (turn.role == TurnRole::System) system_utterances.push_back(turn.text);
    }
  }
  nlohmann::json report;
  report["n_user_utterances"] = user_utterances.size();
  report["n_system_utterances"] = system_utterances.size();
  report["user_self_bleu"] = self_bleu(user_utterances, max_n);
  report["system_self_bleu"] = self_bleu(system_utterances, max_n);
  emit_report(report, out_path);
  return 0;
}

int cmd_judge(const std::string& dataset_path, const std::string& responses_path,
              const std::string& backend_config_path, const std::string& labels_path,
              const std::string& against_path, const std::string& out_path,
              const std::string& labels_out) {
  nlohmann::json report;

  std::map<std::pair<std::string, int>, int> produced;
  if (!labels_path.empty()) {
    produced = load_labels(labels_path);
  } else {
    if (dataset_path.empty() || responses_path.empty() || backend_config_path.empty()) {
      raise(ErrorCode::ConfigError,
            "judging needs --dataset, --responses and --backend (or --labels)");
    }
    std::map<std::string, TrainingExample> examples;
    for (TrainingExample& example : load_dataset(dataset_path)) {
      examples[example.example_id] = std::move(example);
    }
    std::unique_ptr<ChatBackend> backend =
        make_backend(BackendConfig::load(backend_config_path));

    const std::vector<JudgeItem> items = load_judge_items(responses_path);

    // Resolve every item against the dataset first so misalignment fails
    // fast, before any judging traffic.
    struct ResolvedItem {
      std::vector<DialogueTurn> history;
      std::string reference;
    };
    std::vector<ResolvedItem> resolved(items.size());
    for (std::size_t index = 0; index < items.size(); ++index) {
      const JudgeItem& item = items[index];
      auto it = examples.find(item.example_id);
      if (it == examples.end()) {
        raise(ErrorCode::LengthMismatch, "unknown example id " + item.example_id);
      }
      const TrainingExample& example = it->second;
      // `turn` is the ordinal of the system utterance being replaced.
      int ordinal = -1;
      std::size_t position = 0;
      for (; position < example.turns.size(); ++position) {
        if (example.turns[position].role == TurnRole::System) {
          ++ordinal;
          if (ordinal == item.turn) break;
        }
      }
      if (ordinal != item.turn || position >= example.turns.size()) {
        raise(ErrorCode::LengthMismatch,
              "example " + item.example_id + " has no system turn " +
                  std::to_string(item.turn));
      }
      resolved[index].history.assign(
          example.turns.begin(),
          example.turns.begin() + static_cast<std::ptrdiff_t>(position));
      resolved[index].reference = example.turns[position].text;
    }

    // Judging parallelizes across items; the backend's concurrency cap does
    // the throttling. Results are emitted in input order regardless of
    // completion order.
    std::vector<int> results(items.size(), -1);
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
      while (true) {
        const std::size_t index = next.fetch_add(1);
        if (index >= items.size()) break;
        try {
          results[index] = judge_relevance(*backend, resolved[index].history,
                                           items[index].response,
                                           resolved[index].reference);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    };
    const unsigned int worker_count = std::min<unsigned int>(
        std::max(1u, std::thread::hardware_concurrency()),
        static_cast<unsigned int>(std::max<std::size_t>(items.size(), 1)));
    if (worker_count <= 1) {
      worker();
    } else {
      std::vector<std::thread> threads;
      for (unsigned int t = 0; t < worker_count; ++t) threads.emplace_back(worker);
      for (std::thread& thread : threads) thread.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    std::string labels_text;
    for (std::size_t index = 0; index < items.size(); ++index) {
      produced[{items[index].example_id, items[index].turn}] = results[index];
      nlohmann::json line = {{"example_id", items[index].example_id},
                             {"turn", items[index].turn},
                             {"label", results[index]}};
      labels_text += line.dump() + "\n";
    }
    if (!labels_out.empty()) {
      write_file(labels_out, labels_text);
      std::cerr << "labels written to " << labels_out << "\n";
    }
  }

  std::vector<int> labels;
  for (const auto& [key, label] : produced) labels.push_back(label);
  report["judged"] = label_distribution(labels);

  if (!against_path.empty()) {
    auto other = load_labels(against_path);
    std::vector<int> a, b;
    for (const auto& [key, label] : produced) {
      auto it = other.find(key);
      if (it == other.end()) {
        raise(ErrorCode::LengthMismatch,
              "label file disagreement: missing " + key.first + "#" +
                  std::to_string(key.second));
      }
      a.push_back(label);
      b.push_back(it->second);
    }
    std::vector<int> other_all;
    for (const auto& [key, label] : other) other_all.push_back(label);
    report["against"] = label_distribution(other_all);
    report["cohens_kappa"] = cohens_kappa(a, b);
  }
  emit_report(report, out_path);
  return 0;
}

int cmd_stats(const std::string& dataset_path, const std::string& out_path) {
  std::vector<TrainingExample> examples = load_dataset(dataset_path);
  DatasetStats stats = dataset_stats(examples);
  nlohmann::json report = stats.to_json();
  report["conversations"] = examples.size();
  emit_report(report, out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph-guided synthetic task-oriented dialogue toolkit"};
  app.require_subcommand(1);

  std::string graph_path, prompts_dir, out_path;
  auto* validate_cmd =
      app.add_subcommand("validate", "check a transition graph and print the report");
  validate_cmd->add_option("graph", graph_path, "graph JSON file")->required();
  validate_cmd->add_option("--prompts", prompts_dir, "prompt directory to resolve ids");
  validate_cmd->add_option("--out", out_path, "write the report here instead of stdout");

  int sample_n = 100, sample_max_len = 60;
  std::uint64_t sample_seed = 0;
  std::string sample_graph, sample_out;
  auto* sample_cmd = app.add_subcommand("sample", "sample seeded random walks as JSONL");
  sample_cmd->add_option("graph", sample_graph, "graph JSON file")->required();
  sample_cmd->add_option("--n", sample_n, "number of walks");
  sample_cmd->add_option("--seed", sample_seed, "master seed");
  sample_cmd->add_option("--max-len", sample_max_len, "maximum walk length (edges)");
  sample_cmd->add_option("--out", sample_out, "output JSONL path (default stdout)");

  std::string gen_config, gen_out_dir;
  int gen_workers = 0;
  auto* generate_cmd =
      app.add_subcommand("generate", "run the full generation pipeline from a config");
  generate_cmd->add_option("config", gen_config, "generation config JSON")->required();
  generate_cmd->add_option("--workers", gen_workers, "worker threads (default: cores)");
  generate_cmd->add_option("--out-dir", gen_out_dir, "override the config output_dir");

  std::string eval_gold, eval_pred, eval_graph, eval_csv, eval_out;
  auto* evaluate_cmd = app.add_subcommand(
      "evaluate", "score predictions against a dataset sidecar (intent + slot metrics)");
  evaluate_cmd->add_option("--gold", eval_gold, "gold sidecar JSONL")->required();
  evaluate_cmd->add_option("--pred", eval_pred, "predictions JSONL")->required();
  evaluate_cmd->add_option("--graph", eval_graph, "graph JSON (canonical intents)")
      ->required();
  evaluate_cmd->add_option("--confusion-csv", eval_csv, "write the confusion matrix CSV");
  evaluate_cmd->add_option("--out", eval_out, "report path (default stdout)");

  std::string div_dataset, div_out;
  int div_max_n = 4;
  auto* diversity_cmd =
      app.add_subcommand("diversity", "Self-BLEU over user and system utterances");
  diversity_cmd->add_option("dataset", div_dataset, "dataset JSONL")->required();
  diversity_cmd->add_option("--max-n", div_max_n, "maximum n-gram order");
  diversity_cmd->add_option("--out", div_out, "report path (default stdout)");

  std::string judge_dataset, judge_responses, judge_backend, judge_labels, judge_against,
      judge_out, judge_labels_out;
  auto* judge_cmd = app.add_subcommand(
      "judge", "LLM relevance judging and kappa agreement between label files");
  judge_cmd->add_option("--dataset", judge_dataset, "dataset JSONL with references");
  judge_cmd->add_option("--responses", judge_responses,
                        "candidate responses JSONL {example_id, turn, response}");
  judge_cmd->add_option("--backend", judge_backend, "judge backend config JSON");
  judge_cmd->add_option("--labels", judge_labels,
                        "precomputed labels JSONL (skip judging)");
  judge_cmd->add_option("--against", judge_against, "second label file for kappa");
  judge_cmd->add_option("--labels-out", judge_labels_out, "write produced labels here");
  judge_cmd->add_option("--out", judge_out, "report path (default stdout)");

  std::string stats_dataset, stats_out;
  auto* stats_cmd = app.add_subcommand("stats", "dataset statistics (means and sds)");
  stats_cmd->add_option("dataset", stats_dataset, "dataset JSONL")->required();
  stats_cmd->add_option("--out", stats_out, "report path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (validate_cmd->parsed()) return cmd_validate(graph_path, prompts_dir, out_path);
    if (sample_cmd->parsed()) {
      return cmd_sample(sample_graph, sample_n, sample_seed, sample_max_len, sample_out);
    }
    if (generate_cmd->parsed()) return cmd_generate(gen_config, gen_workers, gen_out_dir);
    if (evaluate_cmd->parsed()) {
      return cmd_evaluate(eval_gold, eval_pred, eval_graph, eval_csv, eval_out);
    }
    if (diversity_cmd->parsed()) return cmd_diversity(div_dataset, div_max_n, div_out);
    if (judge_cmd->parsed()) {
      return cmd_judge(judge_dataset, judge_responses, judge_backend, judge_labels,
                       judge_against, judge_out, judge_labels_out);
    }
    if (stats_cmd->parsed()) return cmd_stats(stats_dataset, stats_out);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
