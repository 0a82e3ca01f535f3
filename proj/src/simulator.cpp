// SPDX-License-Identifier: Apache-2.0
#include "todgen/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <sstream>
#include <thread>

#include "todgen/dataformat.hpp"
#include "todgen/errors.hpp"
#include "todgen/eval.hpp"
#include "todgen/io.hpp"
#include "todgen/rng.hpp"
#include "todgen/text.hpp"

namespace todgen {

namespace {

constexpr std::size_t kRetrieverDescriptionTokens = 40;

std::string format_example_id(std::uint64_t walk_id) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "ex-%06llu",
                static_cast<unsigned long long>(walk_id));
  return buffer;
}

std::string render_history(const std::vector<DialogueTurn>& turns, int window) {
  if (turns.empty()) return "(conversation start)";
  std::size_t begin =
      turns.size() > static_cast<std::size_t>(window) ? turns.size() - window : 0;
  std::ostringstream out;
  for (std::size_t i = begin; i < turns.size(); ++i) {
    if (i > begin) out << '\n';
    out << to_string(turns[i].role) << ": " << turns[i].text;
  }
  return out.str();
}

std::string render_list(const std::vector<std::string>& items) {
  return "[" + join(items, ", ") + "]";
}

std::string render_state(const StateVariables& vars) {
  std::vector<std::string> parts;
  if (!vars.query.empty()) parts.push_back("query=" + vars.query);
  for (const auto& [name, value] : vars.counters) {
    parts.push_back(name + "=" + std::to_string(value));
  }
  for (const auto& [name, items] : vars.lists) {
    parts.push_back(name + "=" + render_list(items));
  }
  for (const auto& [name, value] : vars.scalars) {
    parts.push_back(name + "=" + value);
  }
  return parts.empty() ? "(empty)" : join(parts, "; ");
}

std::string render_metadata(const SeedDocument& doc) {
  std::vector<std::string> parts;
  for (const auto& [key, value] : doc.metadata) {
    parts.push_back(key + "=" + value);
  }
  return parts.empty() ? "(none)" : join(parts, "; ");
}

std::string render_documents(const std::vector<RetrievalResult>& results) {
  if (results.empty()) return "(none)";
  std::ostringstream out;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (i > 0) out << '\n';
    out << (i + 1) << ". " << results[i].doc->title;
    const std::string description =
        truncate_tokens(results[i].doc->body, kRetrieverDescriptionTokens);
    if (!description.empty()) out << " - " << description;
    auto rating = results[i].doc->metadata.find("rating");
    if (rating != results[i].doc->metadata.end()) {
      out << " (rating " << rating->second << ")";
    }
  }
  return out.str();
}

std::string render_slots(const std::map<std::string, std::string>& slots) {
  std::vector<std::string> parts;
  for (const auto& [name, value] : slots) parts.push_back(name + "=" + value);
  return parts.empty() ? "(none)" : join(parts, "; ");
}

std::string doc_category(const SeedDocument& doc) {
  auto it = doc.metadata.find("category");
  return it == doc.metadata.end() ? std::string() : it->second;
}

/// Pre-sampled extra documents consumed by append_extra effects; the counts
/// (1-3 per pool) and the picks are drawn from the conversation PRNG at
/// start so generation stays worker-count independent.
struct ExtraPools {
  std::vector<std::string> same_category;
  std::vector<std::string> any;
  std::size_t same_cursor = 0;
  std::size_t any_cursor = 0;

  std::string take(const std::string& pool) {
    if (pool == "same_category") {
      if (same_cursor >= same_category.size()) return {};
      return same_category[same_cursor++];
    }
    if (any_cursor >= any.size()) return {};
    return any[any_cursor++];
  }
};

std::vector<std::string> sample_without_replacement(std::vector<std::string> candidates,
                                                    std::size_t count, SplitMix64& rng) {
  std::vector<std::string> picked;
  while (picked.size() < count && !candidates.empty()) {
    std::size_t i = rng.next_index(candidates.size());
    picked.push_back(candidates[i]);
    candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(i));
  }
  return picked;
}

ExtraPools sample_extras(const Corpus& corpus, const SeedDocument& target,
                         SplitMix64& rng) {
  std::vector<std::string> same;
  std::vector<std::string> any;
  const std::string category = doc_category(target);
  for (const SeedDocument& doc : corpus.docs) {
    if (doc.doc_id == target.doc_id) continue;
    any.push_back(doc.doc_id);
    if (!category.empty() && doc_category(doc) == category) same.push_back(doc.doc_id);
  }
  ExtraPools pools;
  const std::size_t n_same = static_cast<std::size_t>(rng.next_int(1, 3));
  const std::size_t n_any = static_cast<std::size_t>(rng.next_int(1, 3));
  pools.same_category = sample_without_replacement(std::move(same), n_same, rng);
  pools.any = sample_without_replacement(std::move(any), n_any, rng);
  return pools;
}

void apply_effects(const NodeSpec& node, StateVariables& vars, ExtraPools& extras,
                   SplitMix64& rng, const std::string& target_id,
                   const SystemState* last_state) {
  for (const StateEffect& effect : node.state_effects) {
    switch (effect.kind) {
      case EffectKind::IncrementCounter:
        ++vars.counters[effect.target];
        break;
      case EffectKind::ResetCounter:
        vars.counters[effect.target] = 0;
        break;
      case EffectKind::AppendSelected: {
        // The selected document is always the target (ground truth).
        auto& list = vars.lists[effect.target];
        if (std::find(list.begin(), list.end(), target_id) == list.end()) {
          list.push_back(target_id);
        }
        break;
      }
      case EffectKind::AppendExtra: {
        auto& list = vars.lists[effect.target];
        std::string extra = extras.take(effect.arg);
        if (!extra.empty() &&
            std::find(list.begin(), list.end(), extra) == list.end()) {
          list.push_back(extra);
        }
        break;
      }
      case EffectKind::RemoveRandom: {
        auto& list = vars.lists[effect.target];
        if (!list.empty()) {
          list.erase(list.begin() +
                     static_cast<std::ptrdiff_t>(rng.next_index(list.size())));
        }
        break;
      }
      case EffectKind::ClearList:
        vars.lists[effect.target].clear();
        break;
      case EffectKind::SetCounterFromSlot: {
        if (last_state == nullptr) break;
        auto it = last_state->slots.find(effect.arg);
        if (it != last_state->slots.end()) {
          try {
            vars.counters[effect.target] = std::max(0, std::stoi(it->second));
          } catch (const std::exception&) {
            // non-numeric slot value; counter left unchanged
          }
        }
        break;
      }
    }
  }
}

const char* const kDurations[] = {"30 seconds", "1 minute",   "2 minutes",
                                  "5 minutes",  "10 minutes", "15 minutes",
                                  "20 minutes", "30 minutes", "45 minutes",
                                  "1 hour"};

std::string generate_literal(const std::string& generator, SplitMix64& rng) {
  if (generator == "duration") {
    return kDurations[rng.next_index(std::size(kDurations))];
  }
  if (generator == "number") {
    return std::to_string(rng.next_int(1, 9));
  }
  if (generator == "country") {
    static const char* const kCountries[] = {"United States", "Canada", "Germany",
                                             "Japan",         "Brazil", "India",
                                             "France",        "Australia"};
    return kCountries[rng.next_index(std::size(kCountries))];
  }
  raise(ErrorCode::PromptError, "unknown literal generator '" + generator + "'");
}

std::string complete_text(ChatBackend& backend, const std::string& prompt,
                          const SimulationOptions& options) {
  CompletionRequest request;
  request.messages.push_back({ChatMessage::Role::System, prompt});
  request.temperature = options.temperature;
  request.max_tokens = options.max_tokens;
  request.model_id = options.model_id;
  return sanitize_turn_text(backend.complete(request));
}

std::vector<std::string> doc_ids(const std::vector<RetrievalResult>& results) {
  std::vector<std::string> ids;
  ids.reserve(results.size());
  for (const RetrievalResult& result : results) ids.push_back(result.doc->doc_id);
  return ids;
}

/// Merge multiple per-query rankings rank-by-rank, dedup, cap at k, then
/// union the target. Used for generic searches with several candidate
/// queries.
std::vector<RetrievalResult> merged_retrieval(const SearchIndex& index,
                                              const std::vector<std::string>& queries,
                                              int k, const SeedDocument& target) {
  std::vector<std::vector<RetrievalResult>> per_query;
  per_query.reserve(queries.size());
  for (const std::string& query : queries) {
    per_query.push_back(index.search(query, k));
  }
  std::vector<RetrievalResult> merged;
  std::vector<std::string> seen;
  for (int rank = 0; rank < k; ++rank) {
    for (const auto& ranking : per_query) {
      if (static_cast<std::size_t>(rank) >= ranking.size()) continue;
      const RetrievalResult& result = ranking[static_cast<std::size_t>(rank)];
      if (std::find(seen.begin(), seen.end(), result.doc->doc_id) != seen.end()) continue;
      if (merged.size() >= static_cast<std::size_t>(k)) break;
      seen.push_back(result.doc->doc_id);
      merged.push_back(result);
    }
  }
  bool has_target = std::find(seen.begin(), seen.end(), target.doc_id) != seen.end();
  if (!has_target) {
    merged.push_back({&index.corpus().at(target.doc_id), 0.0, 0});
  }
  for (std::size_t i = 0; i < merged.size(); ++i) {
    merged[i].rank = static_cast<int>(i) + 1;
  }
  return merged;
}

nlohmann::json retriever_payload(const std::vector<RetrievalResult>& results) {
  nlohmann::json array = nlohmann::json::array();
  for (const RetrievalResult& result : results) {
    nlohmann::json item;
    item["title"] = result.doc->title;
    item["description"] = truncate_tokens(result.doc->body, kRetrieverDescriptionTokens);
    auto rating = result.doc->metadata.find("rating");
    item["rating"] = rating == result.doc->metadata.end() ? "" : rating->second;
    array.push_back(std::move(item));
  }
  return array;
}

nlohmann::json item_information_payload(const SeedDocument& doc) {
  nlohmann::json j;
  j["id"] = doc.doc_id;
  j["title"] = doc.title;
  j["body"] = doc.body;
  j["metadata"] = nlohmann::json::object();
  for (const auto& [key, value] : doc.metadata) j["metadata"][key] = value;
  return j;
}

}  // namespace

std::string generate_query(ChatBackend& backend, const PromptTemplate& query_prompt,
                           const SeedDocument& target, QueryType query_type,
                           const SimulationOptions& options) {
  std::map<std::string, std::string> bindings;
  bindings["query_type"] = query_type == QueryType::Generic ? "generic" : "specific";
  bindings["category"] = doc_category(target);
  bindings["metadata"] = render_metadata(target);
  if (query_type == QueryType::Specific) {
    bindings["title"] = target.title;
  }
  const std::string prompt = render(query_prompt, bindings);

  for (int attempt = 0; attempt < 3; ++attempt) {
    std::string reply = complete_text(backend, prompt, options);
    // Queries are single-line: flatten newlines and strip surrounding quotes.
    std::replace(reply.begin(), reply.end(), '\n', ' ');
    std::string query = collapse_whitespace(reply);
    if (query.size() >= 2 && query.front() == '"' && query.back() == '"') {
      query = trim(query.substr(1, query.size() - 2));
    }
    if (!query.empty()) return query;
  }
  return target.title;  // EmptyGeneration fallback
}

TrainingExample simulate_conversation(const TransitionGraph& graph,
                                      const RandomWalk& walk,
                                      const SearchIndex& index,
                                      ChatBackend& backend,
                                      const PromptRegistry& prompts,
                                      const SeedDocument& target,
                                      std::uint64_t seed,
                                      const SimulationOptions& options) {
  if (!index.corpus().contains(target.doc_id)) {
    raise(ErrorCode::TargetNotInCorpus,
          "target '" + target.doc_id + "' is not in the corpus");
  }

  TrainingExample example;
  example.walk_id = walk.walk_id;
  example.example_id = format_example_id(walk.walk_id);
  example.target_doc = target.doc_id;

  SplitMix64 rng(seed);
  StateVariables vars;
  ExtraPools extras = sample_extras(index.corpus(), target, rng);
  std::vector<RetrievalResult> last_results;   // last rendered result list
  std::vector<RetrievalResult> pending_docs;   // retrieved at the previous search step

  apply_effects(graph.node_at(graph.start_node), vars, extras, rng, target.doc_id,
                nullptr);

  const EdgeSpec* prev_edge = nullptr;
  for (std::size_t step_index = 0; step_index < walk.steps.size(); ++step_index) {
    const WalkStep& step = walk.steps[step_index];
    const NodeSpec& node = graph.node_at(step.node);
    const EdgeSpec& edge = *step.edge;
    const bool prev_was_search = prev_edge != nullptr && prev_edge->is_search;

    try {
      // System response, grounded in the documents retrieved by the
      // previous search step (if any).
      std::map<std::string, std::string> sys_bindings;
      sys_bindings["history"] = render_history(example.turns, options.history_window);
      sys_bindings["state"] = render_state(vars);
      sys_bindings["documents"] =
          prev_was_search ? render_documents(pending_docs) : "(none)";
      sys_bindings["target_title"] = target.title;
      sys_bindings["target_id"] = target.doc_id;
      sys_bindings["target_metadata"] = render_metadata(target);
      sys_bindings["target_body"] = target.body;
      auto step_counter = vars.counters.find("step");
      sys_bindings["step"] =
          std::to_string(step_counter == vars.counters.end() ? 0 : step_counter->second);

      const std::string system_text =
          complete_text(backend, render(prompts.at(node.system_prompt_id), sys_bindings),
                        options);
      SystemState system_state;
      system_state.intent = node.id;
      if (prev_was_search) system_state.documents = doc_ids(pending_docs);
      example.turns.push_back({TurnRole::System, system_text, system_state});

      // Search handling: generate the query (or candidate queries for
      // generic searches) and retrieve with the target always included.
      std::vector<RetrievalResult> current_docs;
      std::vector<std::string> suggestion_queries;
      if (edge.is_search) {
        if (edge.query_type == QueryType::Generic) {
          const PromptTemplate& query_prompt = prompts.at("query_generic");
          for (int i = 0; i < options.suggestion_count; ++i) {
            std::string query =
                generate_query(backend, query_prompt, target, QueryType::Generic, options);
            if (std::find(suggestion_queries.begin(), suggestion_queries.end(), query) ==
                suggestion_queries.end()) {
              suggestion_queries.push_back(query);
            }
          }
          vars.query = suggestion_queries.front();
          current_docs = merged_retrieval(index, suggestion_queries, options.k, target);
        } else {
          const PromptTemplate& query_prompt = prompts.at("query_specific");
          vars.query =
              generate_query(backend, query_prompt, target, QueryType::Specific, options);
          current_docs = index.retrieve_with_target(vars.query, options.k, target);
        }
        last_results = current_docs;
      }

      // Slot values are fixed before the user utterance so the model only
      // verbalizes them.
      std::map<std::string, std::string> slots;
      bool has_select_slot = false;
      for (const SlotSpec& slot : edge.slot_schema) {
        switch (slot.source) {
          case SlotSource::QueryVariable:
            slots[slot.name] = vars.query;
            break;
          case SlotSource::DocumentField: {
            if (slot.arg == "title") {
              slots[slot.name] = target.title;
            } else if (slot.arg == "id") {
              slots[slot.name] = target.doc_id;
            } else if (slot.arg == "body") {
              slots[slot.name] = target.body;
            } else if (slot.arg == "metadata") {
              slots[slot.name] = render_metadata(target);
            } else {
              auto it = target.metadata.find(slot.arg);
              slots[slot.name] = it == target.metadata.end() ? "" : it->second;
            }
            break;
          }
          case SlotSource::ListIndex: {
            has_select_slot = true;
            int position = 1;
            for (std::size_t i = 0; i < last_results.size(); ++i) {
              if (last_results[i].doc->doc_id == target.doc_id) {
                position = static_cast<int>(i) + 1;
                break;
              }
            }
            slots[slot.name] = std::to_string(position);
            break;
          }
          case SlotSource::LiteralGenerator:
            slots[slot.name] = generate_literal(slot.arg, rng);
            break;
        }
      }

      std::map<std::string, std::string> user_bindings;
      user_bindings["history"] = render_history(example.turns, options.history_window);
      user_bindings["state"] = render_state(vars);
      user_bindings["query"] = vars.query;
      user_bindings["slots"] = render_slots(slots);
      user_bindings["intent"] = edge.intent;
      user_bindings["target_title"] = target.title;
      user_bindings["target_metadata"] = render_metadata(target);

      const std::string user_text =
          complete_text(backend, render(prompts.at(edge.user_prompt_id), user_bindings),
                        options);

      SystemState state;
      state.intent = edge.intent;
      state.slots = slots;
      if (edge.is_search) {
        state.documents = doc_ids(current_docs);
      } else if (prev_was_search) {
        state.documents = doc_ids(pending_docs);
      }
      example.turns.push_back({TurnRole::User, user_text, state});
      example.states.push_back(state);

      if (edge.is_search) {
        if (edge.query_type == QueryType::Generic) {
          nlohmann::json payload(suggestion_queries);
          example.turns.push_back({TurnRole::Suggestions, payload.dump(), std::nullopt});
        }
        example.turns.push_back(
            {TurnRole::Retriever, retriever_payload(current_docs).dump(), std::nullopt});
      }
      if (has_select_slot) {
        example.turns.push_back({TurnRole::ItemInformation,
                                 item_information_payload(target).dump(), std::nullopt});
      }

      // Movement: resume detours stay put with frozen state; otherwise the
      // next node's arrival effects fire now.
      if (!(edge.is_global() && edge.is_resume())) {
        apply_effects(graph.node_at(edge.to), vars, extras, rng, target.doc_id, &state);
      }

      pending_docs = edge.is_search ? current_docs : std::vector<RetrievalResult>{};
      prev_edge = &edge;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::BackendError || e.code() == ErrorCode::RateLimited ||
          e.code() == ErrorCode::Timeout || e.code() == ErrorCode::AuthError ||
          e.code() == ErrorCode::MalformedResponse) {
        raise(ErrorCode::BackendError,
              "turn " + std::to_string(step_index) + ": " + e.what());
      }
      throw;
    }
  }
  return example;
}

GenerationConfig GenerationConfig::from_json(const nlohmann::json& j) {
  GenerationConfig config;
  if (!j.contains("graph") || !j.contains("corpus") || !j.contains("prompts_dir")) {
    raise(ErrorCode::ConfigError, "generation config requires graph, corpus, prompts_dir");
  }
  config.graph_path = j.at("graph").get<std::string>();
  config.corpus_path = j.at("corpus").get<std::string>();
  config.prompts_dir = j.at("prompts_dir").get<std::string>();
  config.output_dir = j.value("output_dir", std::string("out"));
  if (j.contains("backend")) {
    config.backend = BackendConfig::from_json(j.at("backend"));
  }
  config.n = j.value("n", 100);
  config.master_seed = j.value("master_seed", std::uint64_t{0});
  config.max_len = j.value("max_len", 60);
  config.failure_threshold = j.value("failure_threshold", 0.05);
  config.split_name = j.value("split_name", std::string("train"));
  config.workers = j.value("workers", 0);
  config.sim.k = j.value("k", 3);
  config.sim.temperature = j.value("temperature", 0.7);
  config.sim.max_tokens = j.value("max_tokens", 512);
  config.sim.model_id = j.value("model", std::string());
  if (config.n < 1) raise(ErrorCode::ConfigError, "n must be >= 1");
  if (config.max_len < 1) raise(ErrorCode::ConfigError, "max_len must be >= 1");
  if (config.sim.k < 1) raise(ErrorCode::ConfigError, "k must be >= 1");
  return config;
}

GenerationConfig GenerationConfig::load(const std::filesystem::path& path) {
  return from_json(read_json(path));
}

nlohmann::json GenerationReport::to_json() const {
  nlohmann::json j;
  j["requested"] = requested;
  j["completed"] = completed;
  j["failures"] = nlohmann::json::array();
  for (const GenerationFailure& failure : failures) {
    j["failures"].push_back({{"walk_id", failure.walk_id}, {"error", failure.error}});
  }
  j["intent_frequencies"] = nlohmann::json::object();
  for (const auto& [intent, frequency] : intent_frequencies) {
    j["intent_frequencies"][intent] = frequency;
  }
  j["stats"] = stats;
  j["master_seed"] = master_seed;
  j["graph_hash"] = graph_hash;
  return j;
}

GenerationResult run_generation(const TransitionGraph& graph, const SearchIndex& index,
                                const PromptRegistry& prompts, ChatBackend& backend,
                                const GenerationConfig& config) {
  ValidationReport validation = validate(graph, &prompts);
  if (!validation.ok()) {
    raise(ErrorCode::InvalidGraph,
          "graph failed validation: " + validation.errors.front().code + " at " +
              validation.errors.front().location);
  }
  if (index.corpus().size() == 0) {
    raise(ErrorCode::EmptyCorpus, "generation needs a non-empty corpus");
  }

  std::vector<RandomWalk> walks =
      sample_walks(graph, config.n, config.master_seed, config.max_len);

  const std::size_t total = walks.size();
  std::vector<std::optional<TrainingExample>> slots(total);
  std::vector<GenerationFailure> failures;
  std::mutex failures_mutex;

  unsigned int worker_count = config.workers > 0
                                  ? static_cast<unsigned int>(config.workers)
                                  : std::max(1u, std::thread::hardware_concurrency());
  worker_count = std::min<unsigned int>(worker_count, static_cast<unsigned int>(total));

  std::atomic<std::size_t> next_index{0};
  auto worker = [&]() {
    while (true) {
      std::size_t i = next_index.fetch_add(1);
      if (i >= total) break;
      const RandomWalk& walk = walks[i];
      const std::size_t target_index =
          derive_seed(walk.seed, 2) % index.corpus().size();
      const std::uint64_t sim_seed = derive_seed(walk.seed, 3);
      try {
        slots[i] = simulate_conversation(graph, walk, index, backend, prompts,
                                         index.corpus().docs[target_index], sim_seed,
                                         config.sim);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(failures_mutex);
        failures.push_back({walk.walk_id, e.what()});
      }
    }
  };

  if (worker_count <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(worker_count);
    for (unsigned int t = 0; t < worker_count; ++t) threads.emplace_back(worker);
    for (std::thread& thread : threads) thread.join();
  }

  GenerationResult result;
  for (std::optional<TrainingExample>& slot : slots) {
    if (slot.has_value()) result.examples.push_back(std::move(*slot));
  }
  std::sort(failures.begin(), failures.end(),
            [](const GenerationFailure& a, const GenerationFailure& b) {
              return a.walk_id < b.walk_id;
            });

  GenerationReport& report = result.report;
  report.requested = config.n;
  report.completed = static_cast<int>(result.examples.size());
  report.failures = std::move(failures);
  report.master_seed = config.master_seed;
  report.graph_hash = graph_fingerprint(graph);

  std::map<IntentLabel, std::size_t> counts;
  std::size_t total_states = 0;
  for (const TrainingExample& example : result.examples) {
    for (const SystemState& state : example.states) {
      ++counts[state.intent];
      ++total_states;
    }
  }
  for (const auto& [intent, count] : counts) {
    report.intent_frequencies[intent] =
        static_cast<double>(count) / static_cast<double>(total_states);
  }
  if (!result.examples.empty()) {
    report.stats = dataset_stats(result.examples).to_json();
  }

  const double failure_rate =
      static_cast<double>(report.failures.size()) / static_cast<double>(config.n);
  if (failure_rate > config.failure_threshold) {
    raise(ErrorCode::BackendError,
          std::to_string(report.failures.size()) + "/" + std::to_string(config.n) +
              " conversations failed (threshold " +
              std::to_string(config.failure_threshold) + "); first: " +
              (report.failures.empty() ? "" : report.failures.front().error));
  }
  return result;
}

GenerationResult run_generation(const GenerationConfig& config) {
  TransitionGraph graph = load_graph(config.graph_path);
  PromptRegistry prompts = PromptRegistry::load_dir(config.prompts_dir);
  Corpus corpus = ingest(config.corpus_path);
  SearchIndex index = SearchIndex::build(std::move(corpus));
  std::unique_ptr<ChatBackend> backend = make_backend(config.backend);
  return run_generation(graph, index, prompts, *backend, config);
}

}  // namespace todgen
