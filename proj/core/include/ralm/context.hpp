#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

#include "ralm/text.hpp"

namespace ralm {

/// Retrieval query for stride j: the last min(query_len, stride * j) prefix
/// tokens joined by single spaces. Empty when j == 0.
std::string build_query(std::span<const std::string> tokens, std::size_t j, std::size_t stride,
                        std::size_t query_len);

/// Blank line placed between a retrieved passage and the prefix; one token.
inline constexpr std::string_view passage_separator = "\n\n";

struct assembled_input {
    std::string context;
    std::size_t dropped_prefix_count = 0;
    std::size_t passage_tokens = 0;  // after truncation
    std::size_t prefix_tokens = 0;   // kept prefix tokens
    /// Upper bound on the context's token count under the built-in tokenizer.
    std::size_t context_token_budget = 0;
};

/// Builds [passage; "\n\n"; prefix] for scoring `continuation_tokens` more
/// tokens. The passage is cut to `max_passage_tokens`, then prefix tokens
/// are dropped from the left until passage + separator + prefix +
/// continuation fits in `max_context`. With an empty passage the context is
/// just the (left-truncated) prefix.
///
/// The prefix is tokens [0, prefix_len) of `text`; slices keep raw casing.
/// Throws usage_error if the passage alone leaves no room for the continuation.
assembled_input assemble_input(std::string_view passage_text, const tokenized_text& text,
                               std::size_t prefix_len, std::size_t continuation_tokens,
                               std::size_t max_context, std::size_t max_passage_tokens);

}  // namespace ralm

#include "ralm/lm.hpp"

namespace ralm {

/// Scores `continuation` after an assembled context. Throws std::logic_error
/// if the assembled context would not leave room for the continuation in
/// `max_context` tokens; that can only happen through a bug in assembly.
lm_score_result score_assembled(const lm_backend& backend, const assembled_input& input,
                                std::string_view continuation, std::size_t continuation_tokens,
                                std::size_t max_context);

}  // namespace ralm
