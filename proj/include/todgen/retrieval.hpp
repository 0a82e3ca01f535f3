// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace todgen {

struct SeedDocument {
  std::string doc_id;
  std::string title;
  std::string body;
  std::map<std::string, std::string> metadata;

  bool operator==(const SeedDocument&) const = default;
};

struct Corpus {
  std::vector<SeedDocument> docs;
  std::vector<std::string> warnings;  // skipped lines, with line numbers

  std::size_t size() const { return docs.size(); }
  bool contains(const std::string& doc_id) const;
  const SeedDocument& at(const std::string& doc_id) const;  // throws TargetNotInCorpus
};

/// Reads a JSONL corpus ({"id","title","body","metadata"} per line). Invalid
/// lines are reported in Corpus::warnings; duplicate ids are an error.
Corpus ingest(const std::filesystem::path& path);
Corpus ingest_string(const std::string& content, const std::string& origin);

struct RetrievalResult {
  const SeedDocument* doc;
  double score;
  int rank;  // 1-based
};

/// Okapi BM25 over an in-memory inverted index (k1 = 1.2, b = 0.75).
/// Documents are analyzed as lowercase, punctuation-stripped whitespace
/// tokens over title (duplicated for 2x weight) + body + metadata values.
/// idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)).
class SearchIndex {
 public:
  static constexpr double kK1 = 1.2;
  static constexpr double kB = 0.75;

  /// Throws EmptyCorpus on an empty corpus. Takes ownership of the corpus.
  static SearchIndex build(Corpus corpus);

  /// Top-k results ordered by (score desc, doc_id asc). Documents with no
  /// query-term overlap are not returned; the list may be empty.
  std::vector<RetrievalResult> search(const std::string& query, int k) const;

  /// Top-k results unioned with the target document (appended at rank k+1
  /// when not already retrieved). The target must belong to the corpus.
  std::vector<RetrievalResult> retrieve_with_target(const std::string& query, int k,
                                                    const SeedDocument& target) const;

  const Corpus& corpus() const { return corpus_; }
  double average_doc_length() const { return avg_doc_length_; }

 private:
  Corpus corpus_;
  std::unordered_map<std::string, std::vector<std::pair<std::size_t, int>>> postings_;
  std::vector<double> doc_lengths_;
  double avg_doc_length_ = 0.0;
};

}  // namespace todgen
