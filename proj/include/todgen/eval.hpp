// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "todgen/backend.hpp"
#include "todgen/dialogue.hpp"

namespace todgen {

/// Sparse unit-normalized embedding: feature hash -> weight. Dense remote
/// embeddings use dimension indices as keys.
using Embedding = std::unordered_map<std::uint64_t, double>;

double dot(const Embedding& a, const Embedding& b);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  /// Returns a unit-normalized embedding. Throws EmbedderError on failure.
  virtual Embedding embed(const std::string& text) const = 0;
};

/// Offline lexical provider: character trigram term frequencies over the
/// normalized string (lowercased, underscores as spaces, whitespace
/// collapsed), unit-normalized. Needs no network and is deterministic.
class TrigramEmbedding : public EmbeddingProvider {
 public:
  Embedding embed(const std::string& text) const override;

  /// The normalization applied before trigram extraction.
  static std::string normalize(const std::string& text);
};

/// Remote embedding endpoint speaking the common embeddings JSON shape:
/// POST {model, input:[text]} -> {data:[{embedding:[...]}]}.
class RemoteEmbedding : public EmbeddingProvider {
 public:
  RemoteEmbedding(std::string endpoint, std::string model,
                  std::string credential_env = {});
  Embedding embed(const std::string& text) const override;

 private:
  std::string endpoint_;
  std::string model_;
  std::string api_key_;
};

/// Maps free-form generated intent strings onto the canonical label set by
/// dot-product nearest neighbor. Canonical embeddings are computed once and
/// cached; ties break lexicographically. If the primary provider fails, the
/// lexical trigram provider takes over.
class IntentNormalizer {
 public:
  IntentNormalizer(std::vector<IntentLabel> canonical,
                   const EmbeddingProvider* primary = nullptr);

  IntentLabel normalize(const std::string& raw) const;

 private:
  const EmbeddingProvider* primary_;
  TrigramEmbedding fallback_;
  std::vector<IntentLabel> canonical_;
  mutable std::vector<Embedding> primary_cache_;
  mutable std::vector<Embedding> fallback_cache_;
  mutable bool primary_failed_ = false;
};

IntentLabel normalize_intent(const std::string& raw,
                             const std::set<IntentLabel>& canonical,
                             const EmbeddingProvider* embedder = nullptr);

struct IntentMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  nlohmann::json to_json() const;
};

/// Micro-averaged intent metrics: per-intent TP/FP/FN are aggregated before
/// division. With one gold and one predicted label per turn this makes
/// precision = recall = F1 = accuracy.
IntentMetrics intent_metrics(const std::vector<IntentLabel>& gold,
                             const std::vector<IntentLabel>& pred);

struct SlotMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  nlohmann::json to_json() const;
};

/// Normalization applied to slot values before exact-match comparison:
/// lowercase, trim, collapse internal whitespace.
std::string normalize_slot_value(const std::string& value);

/// Micro P/R/F1 over per-turn (name, normalized value) pair sets.
SlotMetrics slot_metrics(const std::vector<std::map<std::string, std::string>>& gold,
                         const std::vector<std::map<std::string, std::string>>& pred);

struct ConfusionMatrix {
  std::vector<IntentLabel> labels;
  std::vector<std::vector<long>> counts;  // counts[gold][pred]

  long at(const IntentLabel& gold, const IntentLabel& pred) const;
  std::string to_csv() const;
};

ConfusionMatrix confusion_matrix(const std::vector<IntentLabel>& gold,
                                 const std::vector<IntentLabel>& pred,
                                 const std::vector<IntentLabel>& labels);

/// Mean BLEU of each utterance against all others as references (uniform
/// 1..max_n n-gram weights, geometric mean, clipped counts, brevity
/// penalty). 1.0 = all identical, lower = more diverse.
double self_bleu(const std::vector<std::string>& utterances, int max_n = 4);

struct JudgeOptions {
  double temperature = 0.0;
  int max_tokens = 16;
  std::string model_id;
  int history_window = 8;
};

/// Asks the judging backend to grade a candidate response against the
/// reference on the 3-level scale (0 irrelevant/major issues, 1 relevant
/// but worse than the reference, 2 as good as the reference). Parses the
/// first digit of the reply; retries once, then throws UnparseableJudgment.
int judge_relevance(ChatBackend& backend, const std::vector<DialogueTurn>& history,
                    const std::string& candidate, const std::string& reference,
                    const JudgeOptions& options = {});

/// Majority vote; tied modes resolve to the lowest tied label.
int aggregate_ratings(const std::vector<int>& ratings);

/// Cohen's kappa with expected agreement from marginal products. Returns
/// 1.0 for identical constant sequences (the p_e = 1 corner).
double cohens_kappa(const std::vector<int>& a, const std::vector<int>& b);

struct DatasetStats {
  struct Moments {
    double mean = 0.0;
    double sd = 0.0;
  };
  Moments utterances_per_conversation;
  Moments tokens_per_conversation;
  Moments tokens_per_user_utterance;
  Moments tokens_per_system_utterance;

  nlohmann::json to_json() const;
};

/// Mean and standard deviation (population) of utterance and whitespace
/// token counts. Utterances are system and user turns; auxiliary roles are
/// data, not utterances.
DatasetStats dataset_stats(std::span<const TrainingExample> examples);

}  // namespace todgen
