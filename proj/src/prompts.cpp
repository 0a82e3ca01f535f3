// SPDX-License-Identifier: Apache-2.0
#include "todgen/prompts.hpp"

#include <cctype>

#include "todgen/errors.hpp"
#include "todgen/io.hpp"

namespace todgen {

namespace {

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) != 0 || c == '_';
}

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

/// Returns the placeholder name starting at body[pos] == '{', or empty if
/// the brace does not open a placeholder. `end` receives the position one
/// past the closing brace on success.
std::string placeholder_at(const std::string& body, std::size_t pos, std::size_t& end) {
  std::size_t i = pos + 1;
  if (i >= body.size() || !is_ident_start(body[i])) return {};
  std::size_t start = i;
  while (i < body.size() && is_ident_char(body[i])) ++i;
  if (i >= body.size() || body[i] != '}') return {};
  end = i + 1;
  return body.substr(start, i - start);
}

}  // namespace

PromptTemplate PromptTemplate::from_body(std::string id, std::string body) {
  PromptTemplate tmpl;
  tmpl.id = std::move(id);
  tmpl.body = std::move(body);
  for (std::size_t pos = 0; pos < tmpl.body.size(); ++pos) {
    if (tmpl.body[pos] != '{') continue;
    std::size_t end = 0;
    std::string name = placeholder_at(tmpl.body, pos, end);
    if (!name.empty()) {
      tmpl.required_vars.insert(name);
      pos = end - 1;
    }
  }
  return tmpl;
}

std::string render(const PromptTemplate& tmpl,
                   const std::map<std::string, std::string>& bindings,
                   std::vector<std::string>* warnings) {
  std::string out;
  out.reserve(tmpl.body.size());
  for (std::size_t pos = 0; pos < tmpl.body.size(); ++pos) {
    char c = tmpl.body[pos];
    if (c != '{') {
      out.push_back(c);
      continue;
    }
    std::size_t end = 0;
    std::string name = placeholder_at(tmpl.body, pos, end);
    if (name.empty()) {
      out.push_back(c);
      continue;
    }
    auto it = bindings.find(name);
    if (it == bindings.end()) {
      raise(ErrorCode::MissingVariable,
            "template '" + tmpl.id + "' has no binding for '" + name + "'");
    }
    out.append(it->second);
    pos = end - 1;
  }
  if (warnings != nullptr) {
    for (const auto& [name, value] : bindings) {
      if (!tmpl.required_vars.contains(name)) {
        warnings->push_back("UnknownVariable: '" + name + "' not used by template '" +
                            tmpl.id + "'");
      }
    }
  }
  return out;
}

PromptRegistry PromptRegistry::load_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    raise(ErrorCode::IoError, "prompt directory not found: " + dir.string());
  }
  PromptRegistry registry;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    registry.insert(PromptTemplate::from_body(file.stem().string(), read_file(file)));
  }
  return registry;
}

void PromptRegistry::insert(PromptTemplate tmpl) {
  templates_[tmpl.id] = std::move(tmpl);
}

bool PromptRegistry::contains(const std::string& id) const {
  return templates_.contains(id);
}

const PromptTemplate* PromptRegistry::find(const std::string& id) const {
  auto it = templates_.find(id);
  return it == templates_.end() ? nullptr : &it->second;
}

const PromptTemplate& PromptRegistry::at(const std::string& id) const {
  const PromptTemplate* tmpl = find(id);
  if (tmpl == nullptr) {
    raise(ErrorCode::UnknownTemplate, "no template with id '" + id + "'");
  }
  return *tmpl;
}

}  // namespace todgen
