#include "ralm/text.hpp"

#include <algorithm>
#include <cassert>

namespace ralm {

namespace {

bool is_space(unsigned char c)
{
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

bool is_word_byte(unsigned char c)
{
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

char fold(char c)
{
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

}  // namespace

std::vector<token> lm_tokenize(std::string_view text)
{
    std::vector<token> out;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        auto c = static_cast<unsigned char>(text[i]);
        if (is_space(c)) {
            std::size_t j = i;
            bool has_newline = false;
            while (j < n && is_space(static_cast<unsigned char>(text[j]))) {
                has_newline = has_newline || text[j] == '\n';
                ++j;
            }
            if (has_newline) {
                out.push_back({std::string(newline_token), i, j});
            }
            i = j;
        } else if (is_word_byte(c)) {
            std::size_t j = i;
            std::string word;
            while (j < n && is_word_byte(static_cast<unsigned char>(text[j]))) {
                word.push_back(fold(text[j]));
                ++j;
            }
            out.push_back({std::move(word), i, j});
            i = j;
        } else {
            out.push_back({std::string(1, text[i]), i, i + 1});
            ++i;
        }
    }
    return out;
}

std::vector<std::string> lm_token_strings(std::string_view text)
{
    auto toks = lm_tokenize(text);
    std::vector<std::string> out;
    out.reserve(toks.size());
    for (auto& t : toks) {
        out.push_back(std::move(t.text));
    }
    return out;
}

std::size_t lm_token_count(std::string_view text)
{
    return lm_tokenize(text).size();
}

std::string detokenize(std::span<const std::string> tokens)
{
    std::string out;
    bool prev_newline = true;
    for (const auto& t : tokens) {
        const bool is_nl = t == newline_token;
        if (!out.empty() && !is_nl && !prev_newline) {
            out.push_back(' ');
        }
        out += t;
        prev_newline = is_nl;
    }
    return out;
}

std::string_view truncate_to_tokens(std::string_view text, std::size_t max_tokens)
{
    if (max_tokens == 0) {
        return text.substr(0, 0);
    }
    auto toks = lm_tokenize(text);
    if (toks.size() <= max_tokens) {
        return text;
    }
    return text.substr(0, toks[max_tokens - 1].end);
}

std::vector<std::string_view> split_whitespace(std::string_view text)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) {
            ++i;
        }
        std::size_t j = i;
        while (j < text.size() && !is_space(static_cast<unsigned char>(text[j]))) {
            ++j;
        }
        if (j > i) {
            out.push_back(text.substr(i, j - i));
        }
        i = j;
    }
    return out;
}

std::size_t whitespace_word_count(std::string_view text)
{
    return split_whitespace(text).size();
}

std::string trim(std::string_view text)
{
    std::size_t b = 0;
    std::size_t e = text.size();
    while (b < e && is_space(static_cast<unsigned char>(text[b]))) {
        ++b;
    }
    while (e > b && is_space(static_cast<unsigned char>(text[e - 1]))) {
        --e;
    }
    return std::string(text.substr(b, e - b));
}

std::string ascii_lower(std::string_view text)
{
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(), fold);
    return out;
}

tokenized_text::tokenized_text(std::string raw) : m_raw(std::move(raw)), m_tokens(lm_tokenize(m_raw)) {}

std::string_view tokenized_text::span_text(std::size_t first, std::size_t last) const
{
    assert(first <= last && last <= m_tokens.size());
    if (first == last) {
        return {};
    }
    std::string_view raw = m_raw;
    return raw.substr(m_tokens[first].begin, m_tokens[last - 1].end - m_tokens[first].begin);
}

std::string_view tokenized_text::continuation_text(std::size_t first, std::size_t last) const
{
    assert(first <= last && last <= m_tokens.size());
    if (first == last) {
        return {};
    }
    std::string_view raw = m_raw;
    const std::size_t start = first == 0 ? m_tokens[0].begin : m_tokens[first - 1].end;
    return raw.substr(start, m_tokens[last - 1].end - start);
}

std::vector<std::string> tokenized_text::strings(std::size_t first, std::size_t last) const
{
    std::vector<std::string> out;
    out.reserve(last - first);
    for (std::size_t i = first; i < last; ++i) {
        out.push_back(m_tokens[i].text);
    }
    return out;
}

}  // namespace ralm
