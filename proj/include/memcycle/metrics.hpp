#pragma once

// Lexical-overlap metrics in the extractive-QA convention.

#include <cctype>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "memcycle/text.hpp"

namespace memcycle {

namespace detail {

inline std::string strip_punctuation(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (unsigned char c : s) {
        if (c < 0x80 && std::ispunct(c)) continue;
        out.push_back(static_cast<char>(c));
    }
    return out;
}

inline bool is_article(const std::string& token) {
    return token == "a" || token == "an" || token == "the";
}

inline std::map<std::string, int> token_counts(
    const std::vector<std::string>& tokens) {
    std::map<std::string, int> counts;
    for (const auto& t : tokens) ++counts[t];
    return counts;
}

}  // namespace detail

// Lowercase, strip punctuation, drop articles, split on whitespace.
inline std::vector<std::string> normalize_answer_tokens(
    const std::string& s) {
    std::vector<std::string> tokens = text::split_whitespace(
        detail::strip_punctuation(text::to_lower_ascii(s)));
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (auto& t : tokens) {
        if (!detail::is_article(t)) out.push_back(std::move(t));
    }
    return out;
}

// BLEU keeps articles: it scores raw unigram overlap, and dropping
// stopwords would distort both the clipped counts and the brevity
// penalty lengths.
inline std::vector<std::string> bleu_tokens(const std::string& s) {
    return text::split_whitespace(
        detail::strip_punctuation(text::to_lower_ascii(s)));
}

// Token-level F1 over normalized multisets; 0 when either side is
// empty or nothing overlaps.
inline double token_f1(const std::string& predicted,
                       const std::string& gold) {
    std::vector<std::string> pred = normalize_answer_tokens(predicted);
    std::vector<std::string> ref = normalize_answer_tokens(gold);
    if (pred.empty() || ref.empty()) return 0.0;
    auto pred_counts = detail::token_counts(pred);
    auto ref_counts = detail::token_counts(ref);
    int overlap = 0;
    for (const auto& [token, count] : pred_counts) {
        auto it = ref_counts.find(token);
        if (it != ref_counts.end()) overlap += std::min(count, it->second);
    }
    if (overlap == 0) return 0.0;
    double precision = static_cast<double>(overlap) /
                       static_cast<double>(pred.size());
    double recall =
        static_cast<double>(overlap) / static_cast<double>(ref.size());
    return 2.0 * precision * recall / (precision + recall);
}

// BLEU-1: clipped unigram precision times the brevity penalty.
inline double bleu1(const std::string& predicted, const std::string& gold) {
    std::vector<std::string> pred = bleu_tokens(predicted);
    std::vector<std::string> ref = bleu_tokens(gold);
    if (pred.empty()) return 0.0;
    auto pred_counts = detail::token_counts(pred);
    auto ref_counts = detail::token_counts(ref);
    int clipped = 0;
    for (const auto& [token, count] : pred_counts) {
        auto it = ref_counts.find(token);
        if (it != ref_counts.end()) clipped += std::min(count, it->second);
    }
    double precision =
        static_cast<double>(clipped) / static_cast<double>(pred.size());
    double brevity_penalty =
        pred.size() >= ref.size()
            ? 1.0
            : std::exp(1.0 - static_cast<double>(ref.size()) /
                                 static_cast<double>(pred.size()));
    return brevity_penalty * precision;
}

}  // namespace memcycle
