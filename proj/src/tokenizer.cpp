#include "quest/tokenizer.hpp"

#include "quest/errors.hpp"

namespace quest {

namespace {

TokenizerKind parse_kind(std::string_view id)
{
    if (id == "wordpunct")
        return TokenizerKind::wordpunct;
    if (id == "whitespace")
        return TokenizerKind::whitespace;
    throw ConfigError("unknown tokenizer id: " + std::string(id));
}

template <typename OnToken>
void scan(std::string_view text, TokenizerKind kind, OnToken&& on_token)
{
    const std::size_t n = text.size();
    std::size_t i = 0;
    while (i < n) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (is_space_byte(c)) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        if (kind == TokenizerKind::whitespace) {
            while (i < n && !is_space_byte(static_cast<unsigned char>(text[i])))
                ++i;
        } else if (is_word_byte(c)) {
            while (i < n && is_word_byte(static_cast<unsigned char>(text[i])))
                ++i;
        } else {
            while (i < n) {
                const auto d = static_cast<unsigned char>(text[i]);
                if (is_space_byte(d) || is_word_byte(d))
                    break;
                ++i;
            }
        }
        on_token(start, i);
    }
}

} // namespace

Tokenizer::Tokenizer(const TokenizerConfig& config) : id_(config.id), kind_(parse_kind(config.id)) {}

bool Tokenizer::is_registered(std::string_view id)
{
    return id == "wordpunct" || id == "whitespace";
}

std::vector<TokenSpan> Tokenizer::tokenize(std::string_view text) const
{
    std::vector<TokenSpan> spans;
    scan(text, kind_, [&](std::size_t b, std::size_t e) { spans.push_back({b, e}); });
    return spans;
}

std::size_t Tokenizer::count(std::string_view text) const
{
    std::size_t total = 0;
    scan(text, kind_, [&](std::size_t, std::size_t) { ++total; });
    return total;
}

std::size_t count_tokens(std::string_view text, const TokenizerConfig& config)
{
    return Tokenizer(config).count(text);
}

std::string ascii_lower(std::string_view text)
{
    std::string out(text);
    for (auto& ch : out) {
        if (ch >= 'A' && ch <= 'Z')
            ch = static_cast<char>(ch - 'A' + 'a');
    }
    return out;
}

} // namespace quest
