#include "ralm/context.hpp"

#include <algorithm>

#include "ralm/error.hpp"

namespace ralm {

std::string build_query(std::span<const std::string> tokens, std::size_t j, std::size_t stride,
                        std::size_t query_len)
{
    const std::size_t end = stride * j;
    if (end > tokens.size()) {
        throw usage_error("build_query: stride boundary " + std::to_string(end) + " exceeds "
                          + std::to_string(tokens.size()) + " tokens");
    }
    const std::size_t begin = end - std::min(query_len, end);
    std::string out;
    for (std::size_t i = begin; i < end; ++i) {
        if (i > begin) {
            out.push_back(' ');
        }
        out += tokens[i];
    }
    return out;
}

assembled_input assemble_input(std::string_view passage_text, const tokenized_text& text,
                               std::size_t prefix_len, std::size_t continuation_tokens,
                               std::size_t max_context, std::size_t max_passage_tokens)
{
    if (continuation_tokens == 0) {
        throw usage_error("assemble_input: continuation must have at least one token");
    }
    if (prefix_len > text.size()) {
        throw usage_error("assemble_input: prefix longer than text");
    }
    assembled_input out;
    std::string passage = trim(truncate_to_tokens(passage_text, max_passage_tokens));
    std::size_t fixed = continuation_tokens;
    if (!passage.empty()) {
        out.passage_tokens = lm_token_count(passage);
        fixed += out.passage_tokens + lm_token_count(passage_separator);
    }
    if (fixed > max_context) {
        throw usage_error("assemble_input: passage of " + std::to_string(out.passage_tokens)
                          + " tokens plus a " + std::to_string(continuation_tokens)
                          + "-token continuation exceeds the " + std::to_string(max_context)
                          + "-token window; lower max_passage_tokens");
    }
    const std::size_t room = max_context - fixed;
    out.dropped_prefix_count = prefix_len > room ? prefix_len - room : 0;
    out.prefix_tokens = prefix_len - out.dropped_prefix_count;
    out.context_token_budget = fixed - continuation_tokens + out.prefix_tokens;

    if (!passage.empty()) {
        out.context = std::move(passage);
        out.context += passage_separator;
    }
    out.context += text.span_text(out.dropped_prefix_count, prefix_len);
    return out;
}

}  // namespace ralm

namespace ralm {

lm_score_result score_assembled(const lm_backend& backend, const assembled_input& input,
                                std::string_view continuation, std::size_t continuation_tokens,
                                std::size_t max_context)
{
    const std::size_t context_tokens = lm_token_count(input.context);
    if (context_tokens > input.context_token_budget || context_tokens + continuation_tokens > max_context) {
        throw std::logic_error("window invariant violated: " + std::to_string(context_tokens) + " + "
                               + std::to_string(continuation_tokens) + " tokens for a window of "
                               + std::to_string(max_context));
    }
    return backend.score({input.context, std::string(continuation)});
}

}  // namespace ralm
