// SPDX-License-Identifier: Apache-2.0
#include "todgen/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "httplib.h"
#include "todgen/errors.hpp"
#include "todgen/io.hpp"
#include "todgen/rng.hpp"
#include "todgen/text.hpp"

namespace todgen {

double dot(const Embedding& a, const Embedding& b) {
  const Embedding& small = a.size() <= b.size() ? a : b;
  const Embedding& large = a.size() <= b.size() ? b : a;
  double sum = 0.0;
  for (const auto& [key, value] : small) {
    auto it = large.find(key);
    if (it != large.end()) sum += value * it->second;
  }
  return sum;
}

namespace {

void unit_normalize(Embedding& embedding) {
  double norm_sq = 0.0;
  for (const auto& [key, value] : embedding) norm_sq += value * value;
  if (norm_sq <= 0.0) return;
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (auto& [key, value] : embedding) value *= inv;
}

}  // namespace

std::string TrigramEmbedding::normalize(const std::string& text) {
  std::string spaced = text;
  std::replace(spaced.begin(), spaced.end(), '_', ' ');
  return collapse_whitespace(to_lower(spaced));
}

Embedding TrigramEmbedding::embed(const std::string& text) const {
  const std::string normalized = normalize(text);
  Embedding embedding;
  if (normalized.empty()) return embedding;
  if (normalized.size() < 3) {
    embedding[fnv1a64(normalized.data(), normalized.size())] = 1.0;
    return embedding;
  }
  for (std::size_t i = 0; i + 3 <= normalized.size(); ++i) {
    embedding[fnv1a64(normalized.data() + i, 3)] += 1.0;
  }
  unit_normalize(embedding);
  return embedding;
}

RemoteEmbedding::RemoteEmbedding(std::string endpoint, std::string model,
                                 std::string credential_env)
    : endpoint_(std::move(endpoint)), model_(std::move(model)) {
  if (!credential_env.empty()) {
    const char* value = std::getenv(credential_env.c_str());
    if (value != nullptr) api_key_ = value;
  }
}

Embedding RemoteEmbedding::embed(const std::string& text) const {
  std::size_t scheme = endpoint_.find("://");
  if (scheme == std::string::npos) {
    raise(ErrorCode::EmbedderError, "embedding endpoint must include a scheme");
  }
  std::size_t slash = endpoint_.find('/', scheme + 3);
  const std::string base =
      slash == std::string::npos ? endpoint_ : endpoint_.substr(0, slash);
  const std::string path = slash == std::string::npos ? "/" : endpoint_.substr(slash);

  nlohmann::json body;
  body["model"] = model_;
  body["input"] = nlohmann::json::array({text});

  httplib::Client client(base);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  httplib::Result result = client.Post(path, headers, body.dump(), "application/json");
  if (!result || result->status != 200) {
    raise(ErrorCode::EmbedderError,
          "embedding request failed: " +
              (result ? "HTTP " + std::to_string(result->status)
                      : httplib::to_string(result.error())));
  }
  nlohmann::json response = parse_json(result->body, "embedding response");
  if (!response.contains("data") || !response["data"].is_array() ||
      response["data"].empty() || !response["data"][0].contains("embedding")) {
    raise(ErrorCode::EmbedderError, "embedding response has no data[0].embedding");
  }
  Embedding embedding;
  const nlohmann::json& values = response["data"][0]["embedding"];
  for (std::size_t i = 0; i < values.size(); ++i) {
    embedding[i] = values[i].get<double>();
  }
  unit_normalize(embedding);
  return embedding;
}

IntentNormalizer::IntentNormalizer(std::vector<IntentLabel> canonical,
                                   const EmbeddingProvider* primary)
    : primary_(primary), canonical_(std::move(canonical)) {
  if (canonical_.empty()) {
    raise(ErrorCode::EmptyInput, "canonical intent set is empty");
  }
  std::sort(canonical_.begin(), canonical_.end());
}

IntentLabel IntentNormalizer::normalize(const std::string& raw) const {
  const EmbeddingProvider* provider =
      (primary_ != nullptr && !primary_failed_) ? primary_ : &fallback_;
  std::vector<Embedding>* cache =
      provider == primary_ ? &primary_cache_ : &fallback_cache_;

  for (int pass = 0; pass < 2; ++pass) {
    try {
      if (cache->empty()) {
        cache->reserve(canonical_.size());
        for (const IntentLabel& label : canonical_) {
          cache->push_back(provider->embed(label));
        }
      }
      const Embedding raw_embedding = provider->embed(raw);
      std::size_t best = 0;
      double best_score = -1.0;
      for (std::size_t i = 0; i < canonical_.size(); ++i) {
        const double score = dot(raw_embedding, (*cache)[i]);
        if (score > best_score) {
          best_score = score;
          best = i;
        }
        // canonical_ is sorted, so equal scores keep the lexicographically
        // smaller label
      }
      return canonical_[best];
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmbedderError || provider == &fallback_) throw;
      primary_failed_ = true;
      provider = &fallback_;
      cache = &fallback_cache_;
    }
  }
  raise(ErrorCode::EmbedderError, "intent normalization failed");
}

IntentLabel normalize_intent(const std::string& raw,
                             const std::set<IntentLabel>& canonical,
                             const EmbeddingProvider* embedder) {
  IntentNormalizer normalizer(
      std::vector<IntentLabel>(canonical.begin(), canonical.end()), embedder);
  return normalizer.normalize(raw);
}

nlohmann::json IntentMetrics::to_json() const {
  return {{"accuracy", accuracy},
          {"precision", precision},
          {"recall", recall},
          {"f1", f1}};
}

IntentMetrics intent_metrics(const std::vector<IntentLabel>& gold,
                             const std::vector<IntentLabel>& pred) {
  if (gold.size() != pred.size()) {
    raise(ErrorCode::LengthMismatch,
          "gold has " + std::to_string(gold.size()) + " labels, pred has " +
              std::to_string(pred.size()));
  }
  if (gold.empty()) {
    raise(ErrorCode::EmptyInput, "no labels to score");
  }
  std::map<IntentLabel, long> tp, fp, fn;
  long matches = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] == pred[i]) {
      ++tp[gold[i]];
      ++matches;
    } else {
      ++fp[pred[i]];
      ++fn[gold[i]];
    }
  }
  long tp_sum = 0, fp_sum = 0, fn_sum = 0;
  for (const auto& [label, count] : tp) tp_sum += count;
  for (const auto& [label, count] : fp) fp_sum += count;
  for (const auto& [label, count] : fn) fn_sum += count;

  IntentMetrics metrics;
  metrics.accuracy = static_cast<double>(matches) / static_cast<double>(gold.size());
  metrics.precision =
      tp_sum + fp_sum == 0 ? 0.0
                           : static_cast<double>(tp_sum) / static_cast<double>(tp_sum + fp_sum);
  metrics.recall =
      tp_sum + fn_sum == 0 ? 0.0
                           : static_cast<double>(tp_sum) / static_cast<double>(tp_sum + fn_sum);
  metrics.f1 = metrics.precision + metrics.recall == 0.0
                   ? 0.0
                   : 2.0 * metrics.precision * metrics.recall /
                         (metrics.precision + metrics.recall);
  return metrics;
}

nlohmann::json SlotMetrics::to_json() const {
  return {{"precision", precision}, {"recall", recall}, {"f1", f1}};
}

std::string normalize_slot_value(const std::string& value) {
  return collapse_whitespace(to_lower(value));
}

SlotMetrics slot_metrics(const std::vector<std::map<std::string, std::string>>& gold,
                         const std::vector<std::map<std::string, std::string>>& pred) {
  if (gold.size() != pred.size()) {
    raise(ErrorCode::LengthMismatch,
          "gold has " + std::to_string(gold.size()) + " turns, pred has " +
              std::to_string(pred.size()));
  }
  long tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::set<std::pair<std::string, std::string>> gold_pairs, pred_pairs;
    for (const auto& [name, value] : gold[i]) {
      gold_pairs.emplace(name, normalize_slot_value(value));
    }
    for (const auto& [name, value] : pred[i]) {
      pred_pairs.emplace(name, normalize_slot_value(value));
    }
    for (const auto& pair : pred_pairs) {
      if (gold_pairs.contains(pair)) ++tp;
      else ++fp;
    }
    for (const auto& pair : gold_pairs) {
      if (!pred_pairs.contains(pair)) ++fn;
    }
  }
  SlotMetrics metrics;
  metrics.precision =
      tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  metrics.recall =
      tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  metrics.f1 = metrics.precision + metrics.recall == 0.0
                   ? 0.0
                   : 2.0 * metrics.precision * metrics.recall /
                         (metrics.precision + metrics.recall);
  return metrics;
}

long ConfusionMatrix::at(const IntentLabel& gold, const IntentLabel& pred) const {
  auto find_index = [this](const IntentLabel& label) -> std::size_t {
    auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) {
      raise(ErrorCode::UnknownLabel, "label '" + label + "' not in matrix");
    }
    return static_cast<std::size_t>(it - labels.begin());
  };
  return counts[find_index(gold)][find_index(pred)];
}

std::string ConfusionMatrix::to_csv() const {
  std::ostringstream out;
  out << "gold\\pred";
  for (const IntentLabel& label : labels) out << ',' << label;
  out << '\n';
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out << labels[i];
    for (std::size_t j = 0; j < labels.size(); ++j) out << ',' << counts[i][j];
    out << '\n';
  }
  return out.str();
}

ConfusionMatrix confusion_matrix(const std::vector<IntentLabel>& gold,
                                 const std::vector<IntentLabel>& pred,
                                 const std::vector<IntentLabel>& labels) {
  if (gold.size() != pred.size()) {
    raise(ErrorCode::LengthMismatch, "gold/pred length mismatch");
  }
  ConfusionMatrix matrix;
  matrix.labels = labels;
  matrix.counts.assign(labels.size(), std::vector<long>(labels.size(), 0));
  std::map<IntentLabel, std::size_t> index;
  for (std::size_t i = 0; i < labels.size(); ++i) index[labels[i]] = i;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    auto g = index.find(gold[i]);
    auto p = index.find(pred[i]);
    if (g == index.end()) {
      raise(ErrorCode::UnknownLabel, "gold label '" + gold[i] + "' not in label set");
    }
    if (p == index.end()) {
      raise(ErrorCode::UnknownLabel, "pred label '" + pred[i] + "' not in label set");
    }
    ++matrix.counts[g->second][p->second];
  }
  return matrix;
}

namespace {

std::map<std::vector<std::string>, long> ngram_counts(const std::vector<std::string>& tokens,
                                                      int n) {
  std::map<std::vector<std::string>, long> counts;
  if (tokens.size() < static_cast<std::size_t>(n)) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i) + n)];
  }
  return counts;
}

/// BLEU of one candidate against multiple references with clipped counts
/// and brevity penalty; n-gram orders the candidate cannot form are skipped
/// so short identical utterances still score 1.
double bleu(const std::vector<std::string>& candidate,
            const std::vector<std::vector<std::string>>& references, int max_n) {
  if (candidate.empty()) return 0.0;

  double log_precision_sum = 0.0;
  int used_orders = 0;
  for (int n = 1; n <= max_n; ++n) {
    auto cand_counts = ngram_counts(candidate, n);
    if (cand_counts.empty()) break;
    long total = 0, clipped = 0;
    std::map<std::vector<std::string>, long> max_ref_counts;
    for (const auto& reference : references) {
      for (const auto& [gram, count] : ngram_counts(reference, n)) {
        max_ref_counts[gram] = std::max(max_ref_counts[gram], count);
      }
    }
    for (const auto& [gram, count] : cand_counts) {
      total += count;
      auto it = max_ref_counts.find(gram);
      if (it != max_ref_counts.end()) clipped += std::min(count, it->second);
    }
    if (clipped == 0) return 0.0;
    log_precision_sum += std::log(static_cast<double>(clipped) / static_cast<double>(total));
    ++used_orders;
  }
  if (used_orders == 0) return 0.0;

  // Brevity penalty against the closest reference length (shorter wins ties).
  const long c = static_cast<long>(candidate.size());
  long r = 0;
  long best_distance = -1;
  for (const auto& reference : references) {
    const long len = static_cast<long>(reference.size());
    const long distance = std::labs(len - c);
    if (best_distance < 0 || distance < best_distance ||
        (distance == best_distance && len < r)) {
      best_distance = distance;
      r = len;
    }
  }
  double bp = 1.0;
  if (c < r) bp = std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
  return bp * std::exp(log_precision_sum / static_cast<double>(used_orders));
}

}  // namespace

double self_bleu(const std::vector<std::string>& utterances, int max_n) {
  if (utterances.size() < 2) {
    raise(ErrorCode::TooFewUtterances,
          "self-BLEU needs at least 2 utterances, got " +
              std::to_string(utterances.size()));
  }
  std::vector<std::vector<std::string>> tokenized;
  tokenized.reserve(utterances.size());
  for (const std::string& utterance : utterances) {
    tokenized.push_back(analyze_tokens(utterance));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < tokenized.size(); ++i) {
    std::vector<std::vector<std::string>> references;
    references.reserve(tokenized.size() - 1);
    for (std::size_t j = 0; j < tokenized.size(); ++j) {
      if (j != i) references.push_back(tokenized[j]);
    }
    sum += bleu(tokenized[i], references, max_n);
  }
  return sum / static_cast<double>(tokenized.size());
}

namespace {

const char* kJudgeRubric =
    "You grade one candidate response from a task assistant.\n"
    "Scale:\n"
    "0 = the candidate is irrelevant or has major issues\n"
    "1 = the candidate is relevant but worse than the reference response\n"
    "2 = the candidate is as good as the reference response\n"
    "Answer with the single digit 0, 1 or 2 and nothing else.\n";

int parse_judgment(const std::string& reply) {
  for (char c : reply) {
    if (c == '0' || c == '1' || c == '2') return c - '0';
  }
  return -1;
}

}  // namespace

int judge_relevance(ChatBackend& backend, const std::vector<DialogueTurn>& history,
                    const std::string& candidate, const std::string& reference,
                    const JudgeOptions& options) {
  std::ostringstream prompt;
  prompt << kJudgeRubric << "\nConversation history:\n";
  std::size_t begin = history.size() > static_cast<std::size_t>(options.history_window)
                          ? history.size() - static_cast<std::size_t>(options.history_window)
                          : 0;
  if (history.empty()) prompt << "(conversation start)\n";
  for (std::size_t i = begin; i < history.size(); ++i) {
    prompt << to_string(history[i].role) << ": " << history[i].text << '\n';
  }
  prompt << "\nReference response:\n" << reference << "\n\nCandidate response:\n"
         << candidate << "\n\nGrade:";

  CompletionRequest request;
  request.messages.push_back({ChatMessage::Role::System, prompt.str()});
  request.temperature = options.temperature;
  request.max_tokens = options.max_tokens;
  request.model_id = options.model_id;

  for (int attempt = 0; attempt < 2; ++attempt) {
    const std::string reply = backend.complete(request);
    const int label = parse_judgment(reply);
    if (label >= 0) return label;
  }
  raise(ErrorCode::UnparseableJudgment, "judge reply contains no digit in {0,1,2}");
}

int aggregate_ratings(const std::vector<int>& ratings) {
  if (ratings.empty()) {
    raise(ErrorCode::EmptyRatings, "no ratings to aggregate");
  }
  std::map<int, std::size_t> counts;
  for (int rating : ratings) ++counts[rating];
  std::size_t best_count = 0;
  for (const auto& [label, count] : counts) best_count = std::max(best_count, count);
  for (const auto& [label, count] : counts) {
    if (count == best_count) return label;  // counts is ordered: lowest tied wins
  }
  return ratings.front();
}

double cohens_kappa(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) {
    raise(ErrorCode::LengthMismatch, "label sequences differ in length");
  }
  if (a.empty()) {
    raise(ErrorCode::EmptyInput, "no labels");
  }
  const double n = static_cast<double>(a.size());
  std::map<int, long> marg_a, marg_b;
  long agreements = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++marg_a[a[i]];
    ++marg_b[b[i]];
    if (a[i] == b[i]) ++agreements;
  }
  const double p_o = static_cast<double>(agreements) / n;
  double expected = 0.0;
  for (const auto& [label, count_a] : marg_a) {
    auto it = marg_b.find(label);
    if (it != marg_b.end()) {
      expected += static_cast<double>(count_a) * static_cast<double>(it->second);
    }
  }
  const double p_e = expected / (n * n);
  if (p_e >= 1.0) {
    return agreements == static_cast<long>(a.size()) ? 1.0 : 0.0;
  }
  return (p_o - p_e) / (1.0 - p_e);
}

nlohmann::json DatasetStats::to_json() const {
  auto moments = [](const Moments& m) {
    return nlohmann::json{{"mean", m.mean}, {"sd", m.sd}};
  };
  return {{"utterances_per_conversation", moments(utterances_per_conversation)},
          {"tokens_per_conversation", moments(tokens_per_conversation)},
          {"tokens_per_user_utterance", moments(tokens_per_user_utterance)},
          {"tokens_per_system_utterance", moments(tokens_per_system_utterance)}};
}

namespace {

DatasetStats::Moments moments_of(const std::vector<double>& values) {
  DatasetStats::Moments m;
  if (values.empty()) return m;
  double sum = 0.0;
  for (double v : values) sum += v;
  m.mean = sum / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - m.mean) * (v - m.mean);
  m.sd = std::sqrt(var / static_cast<double>(values.size()));
  return m;
}

}  // namespace

DatasetStats dataset_stats(std::span<const TrainingExample> examples) {
  if (examples.empty()) {
    raise(ErrorCode::EmptyDataset, "no examples");
  }
  std::vector<double> utterances, conv_tokens, user_tokens, system_tokens;
  for (const TrainingExample& example : examples) {
    double count = 0.0;
    double tokens = 0.0;
    for (const DialogueTurn& turn : example.turns) {
      if (turn.role != TurnRole::System && turn.role != TurnRole::User) continue;
      const double t = static_cast<double>(whitespace_token_count(turn.text));
      count += 1.0;
      tokens += t;
      if (turn.role == TurnRole::User) user_tokens.push_back(t);
      else system_tokens.push_back(t);
    }
    utterances.push_back(count);
    conv_tokens.push_back(tokens);
  }
  DatasetStats stats;
  stats.utterances_per_conversation = moments_of(utterances);
  stats.tokens_per_conversation = moments_of(conv_tokens);
  stats.tokens_per_user_utterance = moments_of(user_tokens);
  stats.tokens_per_system_utterance = moments_of(system_tokens);
  return stats;
}

}  // namespace todgen
