// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace todgen {

/// Lowercases ASCII letters in place-copy; non-ASCII bytes pass through.
std::string to_lower(std::string_view text);

std::string trim(std::string_view text);

/// Collapses runs of internal whitespace to single spaces and trims.
std::string collapse_whitespace(std::string_view text);

/// Analysis used by the search index and by Self-BLEU: lowercase,
/// strip punctuation (non-alphanumeric bytes become separators), split
/// on whitespace.
std::vector<std::string> analyze_tokens(std::string_view text);

/// Plain whitespace split, no normalization. Used for token statistics.
std::vector<std::string> whitespace_tokens(std::string_view text);

std::size_t whitespace_token_count(std::string_view text);

/// First `max_tokens` whitespace tokens re-joined with single spaces.
std::string truncate_tokens(std::string_view text, std::size_t max_tokens);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool starts_with(std::string_view text, std::string_view prefix);

}  // namespace todgen
