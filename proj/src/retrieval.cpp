// SPDX-License-Identifier: Apache-2.0
#include "todgen/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "json.hpp"
#include "todgen/errors.hpp"
#include "todgen/io.hpp"
#include "todgen/text.hpp"

namespace todgen {

bool Corpus::contains(const std::string& doc_id) const {
  return std::any_of(docs.begin(), docs.end(),
                     [&](const SeedDocument& doc) { return doc.doc_id == doc_id; });
}

const SeedDocument& Corpus::at(const std::string& doc_id) const {
  for (const SeedDocument& doc : docs) {
    if (doc.doc_id == doc_id) return doc;
  }
  raise(ErrorCode::TargetNotInCorpus, "no document with id '" + doc_id + "'");
}

Corpus ingest_string(const std::string& content, const std::string& origin) {
  Corpus corpus;
  std::unordered_set<std::string> seen_ids;
  for_each_line(content, [&](std::size_t line_number, const std::string& line) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      corpus.warnings.push_back(origin + ":" + std::to_string(line_number) +
                                ": invalid JSON, line skipped (" + e.what() + ")");
      return;
    }
    if (!j.is_object() || !j.contains("id") || !j.at("id").is_string() ||
        !j.contains("title") || !j.at("title").is_string() ||
        j.at("title").get<std::string>().empty()) {
      corpus.warnings.push_back(origin + ":" + std::to_string(line_number) +
                                ": missing id or title, line skipped");
      return;
    }
    SeedDocument doc;
    doc.doc_id = j.at("id").get<std::string>();
    doc.title = j.at("title").get<std::string>();
    doc.body = j.value("body", std::string());
    if (j.contains("metadata")) {
      if (!j.at("metadata").is_object()) {
        corpus.warnings.push_back(origin + ":" + std::to_string(line_number) +
                                  ": metadata is not an object, line skipped");
        return;
      }
      for (const auto& [key, value] : j.at("metadata").items()) {
        doc.metadata[key] = value.is_string() ? value.get<std::string>() : value.dump();
      }
    }
    if (!seen_ids.insert(doc.doc_id).second) {
      raise(ErrorCode::DuplicateId, origin + ":" + std::to_string(line_number) +
                                        ": duplicate document id '" + doc.doc_id + "'");
    }
    corpus.docs.push_back(std::move(doc));
  });
  if (corpus.docs.empty()) {
    corpus.warnings.push_back(origin + ": corpus is empty");
  }
  return corpus;
}

Corpus ingest(const std::filesystem::path& path) {
  return ingest_string(read_file(path), path.filename().string());
}

namespace {

/// Token stream a document is indexed under: title twice, then body, then
/// metadata values in key order.
std::vector<std::string> document_tokens(const SeedDocument& doc) {
  std::vector<std::string> tokens = analyze_tokens(doc.title);
  std::vector<std::string> title_again = tokens;
  tokens.insert(tokens.end(), title_again.begin(), title_again.end());
  std::vector<std::string> body = analyze_tokens(doc.body);
  tokens.insert(tokens.end(), body.begin(), body.end());
  for (const auto& [key, value] : doc.metadata) {
    std::vector<std::string> meta = analyze_tokens(value);
    tokens.insert(tokens.end(), meta.begin(), meta.end());
  }
  return tokens;
}

}  // namespace

SearchIndex SearchIndex::build(Corpus corpus) {
  if (corpus.docs.empty()) {
    raise(ErrorCode::EmptyCorpus, "cannot index an empty corpus");
  }
  SearchIndex index;
  index.corpus_ = std::move(corpus);
  index.doc_lengths_.resize(index.corpus_.docs.size(), 0.0);
  double total_length = 0.0;
  for (std::size_t d = 0; d < index.corpus_.docs.size(); ++d) {
    std::vector<std::string> tokens = document_tokens(index.corpus_.docs[d]);
    index.doc_lengths_[d] = static_cast<double>(tokens.size());
    total_length += index.doc_lengths_[d];
    std::unordered_map<std::string, int> tf;
    for (const std::string& token : tokens) ++tf[token];
    for (const auto& [token, count] : tf) {
      index.postings_[token].push_back({d, count});
    }
  }
  index.avg_doc_length_ = total_length / static_cast<double>(index.corpus_.docs.size());
  return index;
}

std::vector<RetrievalResult> SearchIndex::search(const std::string& query, int k) const {
  std::vector<RetrievalResult> results;
  if (k <= 0) return results;
  const std::vector<std::string> query_tokens = analyze_tokens(query);
  if (query_tokens.empty()) return results;

  const double n_docs = static_cast<double>(corpus_.docs.size());
  std::unordered_map<std::size_t, double> scores;
  for (const std::string& token : query_tokens) {
    auto it = postings_.find(token);
    if (it == postings_.end()) continue;
    const double df = static_cast<double>(it->second.size());
    const double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
    for (const auto& [doc_index, tf] : it->second) {
      const double norm =
          kK1 * (1.0 - kB + kB * doc_lengths_[doc_index] / avg_doc_length_);
      scores[doc_index] += idf * static_cast<double>(tf) / (static_cast<double>(tf) + norm);
    }
  }

  std::vector<std::pair<std::size_t, double>> scored(scores.begin(), scores.end());
  std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return corpus_.docs[a.first].doc_id < corpus_.docs[b.first].doc_id;
  });
  if (scored.size() > static_cast<std::size_t>(k)) scored.resize(static_cast<std::size_t>(k));
  results.reserve(scored.size());
  for (std::size_t i = 0; i < scored.size(); ++i) {
    results.push_back({&corpus_.docs[scored[i].first], scored[i].second,
                       static_cast<int>(i) + 1});
  }
  return results;
}

std::vector<RetrievalResult> SearchIndex::retrieve_with_target(
    const std::string& query, int k, const SeedDocument& target) const {
  if (!corpus_.contains(target.doc_id)) {
    raise(ErrorCode::TargetNotInCorpus,
          "target '" + target.doc_id + "' is not part of the indexed corpus");
  }
  std::vector<RetrievalResult> results = search(query, k);
  const bool present = std::any_of(results.begin(), results.end(),
                                   [&](const RetrievalResult& result) {
                                     return result.doc->doc_id == target.doc_id;
                                   });
  if (!present) {
    results.push_back({&corpus_.at(target.doc_id), 0.0,
                       static_cast<int>(results.size()) + 1});
  }
  return results;
}

}  // namespace todgen
