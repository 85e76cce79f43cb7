#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ralm/corpus.hpp"
#include "ralm/error.hpp"
#include "ralm/lm.hpp"

namespace ralm::testing {

inline passage_set passages_from(const std::vector<std::string>& texts)
{
    std::vector<passage> ps;
    for (const auto& t : texts) {
        passage p;
        p.passage_id = ps.size();
        p.source_doc_id = "d" + std::to_string(ps.size());
        p.text = t;
        ps.push_back(std::move(p));
    }
    return passage_set(std::move(ps));
}

/// Forwards to another backend, failing with backend_error on the n-th
/// score call (1-based). Counts calls.
class flaky_backend final : public lm_backend {
  public:
    flaky_backend(const lm_backend& inner, std::size_t fail_on) : m_inner(inner), m_fail_on(fail_on) {}

    lm_info info() const override { return m_inner.info(); }
    lm_score_result score(const lm_score_request& request) const override
    {
        if (++m_calls == m_fail_on) {
            throw backend_error("injected failure");
        }
        return m_inner.score(request);
    }
    std::string generate_greedy(std::string_view prompt, std::size_t max_new_tokens,
                                std::string_view stop) const override
    {
        return m_inner.generate_greedy(prompt, max_new_tokens, stop);
    }

    std::size_t calls() const { return m_calls; }

  private:
    const lm_backend& m_inner;
    std::size_t m_fail_on;
    mutable std::size_t m_calls = 0;
};

}  // namespace ralm::testing
