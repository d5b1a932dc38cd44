#ifndef QEXGAN_TEXT_HPP
#define QEXGAN_TEXT_HPP

#include <string>
#include <string_view>
#include <vector>

namespace qexgan {

/// UTF-8 lowercasing with Turkish casing rules: 'I' maps to dotless 'ı' and
/// 'İ' maps to 'i'. Latin-1 and Latin Extended-A uppercase letters are folded
/// as well; other codepoints pass through unchanged.
std::string lower_utf8(std::string_view text);

/// Lowercases, strips ASCII punctuation to word boundaries, and splits on
/// whitespace. Alphanumeric runs stay whole ("16gb" is one token); non-ASCII
/// codepoints are treated as word characters.
std::vector<std::string> tokenize(std::string_view text);

/// Inverse of tokenization for display: tokens joined with single spaces.
std::string join_tokens(const std::vector<std::string>& tokens);

}  // namespace qexgan

#endif
