#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ralm {

/// One language-model token and the byte range of raw text it came from.
///
/// Tokenizer rule: a maximal run of alphanumeric bytes (ASCII letters and
/// digits, plus every byte >= 0x80 so UTF-8 sequences stay whole) is one
/// token, ASCII case-folded. Any other non-whitespace byte is a token by
/// itself. A whitespace run containing at least one '\n' is a single "\n"
/// token; other whitespace only separates.
struct token {
    std::string text;
    std::size_t begin = 0;
    std::size_t end = 0;
};

inline constexpr std::string_view newline_token = "\n";

std::vector<token> lm_tokenize(std::string_view text);
std::vector<std::string> lm_token_strings(std::string_view text);
std::size_t lm_token_count(std::string_view text);

/// Joins tokens with single spaces, except around "\n" tokens.
/// lm_token_strings(detokenize(t)) == t for any tokenizer output t.
std::string detokenize(std::span<const std::string> tokens);

/// Raw prefix of `text` ending at the last byte of its `max_tokens`-th token.
std::string_view truncate_to_tokens(std::string_view text, std::size_t max_tokens);

std::vector<std::string_view> split_whitespace(std::string_view text);
std::size_t whitespace_word_count(std::string_view text);

std::string trim(std::string_view text);
std::string ascii_lower(std::string_view text);

/// Raw text with its token segmentation, so slices keep original casing
/// and spacing.
class tokenized_text {
  public:
    tokenized_text() = default;
    explicit tokenized_text(std::string raw);

    const std::string& raw() const noexcept { return m_raw; }
    std::span<const token> tokens() const noexcept { return m_tokens; }
    std::size_t size() const noexcept { return m_tokens.size(); }
    const std::string& operator[](std::size_t i) const { return m_tokens[i].text; }

    /// Raw bytes from the start of token `first` to the end of token `last - 1`.
    std::string_view span_text(std::size_t first, std::size_t last) const;

    /// Like span_text, but starting right after token `first - 1` so the
    /// separating whitespace is kept. Used for continuations.
    std::string_view continuation_text(std::size_t first, std::size_t last) const;

    std::vector<std::string> strings(std::size_t first, std::size_t last) const;

  private:
    std::string m_raw;
    std::vector<token> m_tokens;
};

}  // namespace ralm
