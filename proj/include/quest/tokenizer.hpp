#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace quest {

// Byte range [begin, end) of one token inside the tokenized text.
struct TokenSpan {
    std::size_t begin = 0;
    std::size_t end = 0;

    friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

enum class TokenizerKind {
    whitespace, // maximal runs of non-whitespace bytes
    wordpunct,  // runs of word characters, or runs of other non-space bytes
};

struct TokenizerConfig {
    std::string id = "wordpunct";
};

// A deterministic proxy for a language-model tokenizer. Registered ids are
// "wordpunct" (default) and "whitespace".
class Tokenizer {
public:
    explicit Tokenizer(const TokenizerConfig& config = {});

    const std::string& id() const { return id_; }
    TokenizerKind kind() const { return kind_; }

    std::vector<TokenSpan> tokenize(std::string_view text) const;
    std::size_t count(std::string_view text) const;

    static bool is_registered(std::string_view id);

private:
    std::string id_;
    TokenizerKind kind_;
};

std::size_t count_tokens(std::string_view text, const TokenizerConfig& config);

// Word characters for the wordpunct rule: ASCII alphanumerics, '_' and any
// byte of a multi-byte UTF-8 sequence.
inline bool is_word_byte(unsigned char c)
{
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' ||
           c >= 0x80;
}

inline bool is_space_byte(unsigned char c)
{
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Lowercase ASCII letters; other bytes pass through.
std::string ascii_lower(std::string_view text);

} // namespace quest
