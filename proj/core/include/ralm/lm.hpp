#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace ralm {

struct lm_info {
    std::string name;
    std::size_t max_context_tokens = 0;

    /// Throws backend_error unless max_context_tokens >= 2.
    void validate() const;
};

struct lm_score_request {
    std::string context;       // may be empty
    std::string continuation;  // must tokenize to at least one token
};

/// Natural-log probabilities of each continuation token.
struct lm_score_result {
    std::size_t token_count = 0;
    std::vector<double> per_token_logprobs;
    double logprob_sum = 0.0;

    friend bool operator==(const lm_score_result&, const lm_score_result&) = default;
};

/// Scoring and greedy generation over one language model. Implementations
/// never truncate on score(); a request that does not fit the window raises
/// overflow_error. Window management is the caller's job.
class lm_backend {
  public:
    virtual ~lm_backend() = default;

    virtual lm_info info() const = 0;
    virtual lm_score_result score(const lm_score_request& request) const = 0;

    /// Appends argmax tokens until `stop` appears in the output or the budget
    /// runs out; returns the text before `stop`. Drops prompt tokens from the
    /// left if the window fills up.
    virtual std::string generate_greedy(std::string_view prompt, std::size_t max_new_tokens,
                                        std::string_view stop) const = 0;

    /// Token count used for window budgeting. Defaults to the built-in tokenizer.
    virtual std::size_t token_count(std::string_view text) const;
};

/// "builtin:PATH" loads a saved cache n-gram model; "http:URL" connects to a
/// server speaking the scoring protocol.
std::unique_ptr<lm_backend> open_backend(std::string_view spec);

}  // namespace ralm
