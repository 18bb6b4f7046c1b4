#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ragev {

// A whitespace-delimited token and its byte range in the source text.
struct TokenSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};

// Splits on Unicode whitespace (ASCII blanks, NBSP, U+2000..U+200A, line and
// paragraph separators, ideographic space). Runs of whitespace collapse.
std::vector<TokenSpan> tokenize_spans(std::string_view text);
std::vector<std::string> tokenize(std::string_view text);

// Token normalization shared by all lexical metrics: lowercase, whitespace
// split, leading/trailing ASCII punctuation stripped, empty tokens dropped.
std::vector<std::string> metric_tokens(std::string_view text);

// Sentences end at '.', '!' or '?' followed by whitespace or end of text.
std::vector<std::string> split_sentences(std::string_view text);

std::string to_lower_ascii(std::string_view text);
std::string trim(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// 64-bit FNV-1a. Stable across platforms; used wherever a persisted or
// reproducible hash is needed.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

// Decodes UTF-8 into code points; invalid bytes map to U+FFFD.
std::vector<char32_t> decode_utf8(std::string_view text);

}  // namespace ragev
