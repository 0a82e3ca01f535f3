// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace todgen {

/// A text template with `{variable}` placeholders. A placeholder is a brace
/// pair wrapping an identifier ([A-Za-z_][A-Za-z0-9_]*); any other brace
/// content is literal text, so JSON snippets in prompt bodies are safe.
struct PromptTemplate {
  std::string id;
  std::string body;
  std::set<std::string> required_vars;

  /// Builds a template, deriving required_vars from the body so the
  /// placeholder/required_vars invariant holds by construction.
  static PromptTemplate from_body(std::string id, std::string body);

  bool operator==(const PromptTemplate&) const = default;
};

/// Substitutes every placeholder from `bindings`. Throws MissingVariable
/// (naming the variable) if a placeholder has no binding. Bindings that do
/// not correspond to any placeholder are reported through `warnings` when
/// provided; they are not an error.
std::string render(const PromptTemplate& tmpl,
                   const std::map<std::string, std::string>& bindings,
                   std::vector<std::string>* warnings = nullptr);

/// Directory-backed template store: one file per template, id = file stem.
class PromptRegistry {
 public:
  PromptRegistry() = default;

  /// Loads every regular file in `dir` (non-recursive) as a template.
  static PromptRegistry load_dir(const std::filesystem::path& dir);

  void insert(PromptTemplate tmpl);
  bool contains(const std::string& id) const;
  const PromptTemplate* find(const std::string& id) const;

  /// Throws UnknownTemplate if absent.
  const PromptTemplate& at(const std::string& id) const;

  std::size_t size() const { return templates_.size(); }

 private:
  std::map<std::string, PromptTemplate> templates_;
};

}  // namespace todgen
