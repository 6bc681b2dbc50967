#ifndef LCE_TEXT_ANALYSIS_HPP
#define LCE_TEXT_ANALYSIS_HPP

#include <cstddef>
#include <limits>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "lce/corpus_io.hpp"

namespace lce {

inline constexpr std::size_t kUnlimitedTokens = std::numeric_limits<std::size_t>::max();

/// Token budget for reranker inputs (first-passage truncation of the document text).
inline constexpr std::size_t kRerankerMaxTokens = 512;

struct AnalyzerConfig {
  bool lowercase = true;
  std::set<std::string> stopwords;  // stored lowercased when lowercase is set
  std::size_t max_tokens = kUnlimitedTokens;

  AnalyzerConfig() = default;
  AnalyzerConfig(bool lower, std::set<std::string> stops, std::size_t max = kUnlimitedTokens)
      : lowercase(lower), max_tokens(max) {
    for (auto s : stops) {
      if (lowercase)
        for (auto& c : s) c = (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
      stopwords.insert(std::move(s));
    }
  }
};

namespace detail {

// ASCII letters and digits, plus every byte of a multi-byte UTF-8 sequence, so
// non-ASCII words survive as tokens instead of being split apart.
inline bool token_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

}  // namespace detail

/// Splits text into maximal alphanumeric runs, lowercases, drops stopwords and
/// truncates to the token budget, in that order.
inline std::vector<std::string> analyze(std::string_view text, const AnalyzerConfig& config = {}) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  const auto n = text.size();
  while (i < n && tokens.size() < config.max_tokens) {
    while (i < n && !detail::token_byte(static_cast<unsigned char>(text[i]))) ++i;
    if (i == n) break;
    auto j = i;
    while (j < n && detail::token_byte(static_cast<unsigned char>(text[j]))) ++j;
    std::string tok(text.substr(i, j - i));
    i = j;
    if (config.lowercase)
      for (auto& c : tok)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (!config.stopwords.empty() && config.stopwords.contains(tok)) continue;
    tokens.push_back(std::move(tok));
  }
  return tokens;
}

/// Title, url and body joined by single spaces.
inline std::string document_text(const Document& doc) { return doc.title + " " + doc.url + " " + doc.body; }

}  // namespace lce

#endif
