#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mmt {

/// Lowercases, normalizes punctuation and tokenizes one raw sentence.
///
/// Normalization maps curly quotes to their straight forms, en/em dashes to
/// "-", the ellipsis character to "..." and any run of whitespace to a single
/// space. Tokenization splits on whitespace and then peels the characters
/// . , ! ? ; : " ( ) off both ends of each chunk as separate tokens; hyphens
/// and apostrophes inside words are kept. Applying it to its own space-joined
/// output is a no-op.
///
/// Throws Error(Errc::empty_segment) for empty or whitespace-only input.
std::vector<std::string> preprocess_line(std::string_view raw);

std::string join_tokens(const std::vector<std::string>& tokens);

/// Splits on single spaces; for text that is already tokenized.
std::vector<std::string> split_tokens(std::string_view line);

}  // namespace mmt
