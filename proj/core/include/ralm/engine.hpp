#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ralm/bm25.hpp"
#include "ralm/context.hpp"
#include "ralm/corpus.hpp"
#include "ralm/lm.hpp"
#include "ralm/rerank.hpp"

namespace ralm {

enum class rerank_mode { none, zero_shot, predictive, oracle };

const char* to_string(rerank_mode mode) noexcept;
/// Accepts "none", "zero-shot"/"zero_shot", "predictive", "oracle".
rerank_mode parse_rerank_mode(std::string_view text);

struct ralm_config {
    std::size_t stride = 4;
    std::size_t query_len = 32;
    std::size_t top_k = 16;
    rerank_mode rerank = rerank_mode::none;
    std::size_t rerank_window = 16;
    std::size_t max_passage_tokens = 256;
    bool retrieval_enabled = true;

    void validate() const;
    nlohmann::json to_json() const;
};

struct stride_record {
    std::size_t index = 0;
    std::string query_text;
    std::vector<std::size_t> candidate_ids;
    std::optional<std::size_t> chosen_passage_id;
    double nll_sum = 0.0;  // nats
    std::size_t token_count = 0;
    std::size_t dropped_prefix_tokens = 0;
};

struct perplexity_report {
    double total_nll = 0.0;
    std::size_t token_count = 0;
    std::size_t word_count = 0;
    double token_ppl = 0.0;
    double word_ppl = 0.0;
    std::vector<stride_record> strides;

    nlohmann::json to_json(bool include_strides = true) const;
};

enum class sweep_axis { stride, query_len };

const char* to_string(sweep_axis axis) noexcept;
/// Accepts "stride", "query-len"/"query_len".
sweep_axis parse_sweep_axis(std::string_view text);

struct sweep_row {
    std::size_t value = 0;
    perplexity_report report;
};

/// CSV with header axis_value,token_ppl,word_ppl,total_nll,tokens,words.
std::string sweep_csv(const std::vector<sweep_row>& rows);

/// Per-candidate outcome of oracle selection.
struct oracle_choice {
    std::size_t index = 0;
    std::vector<double> logliks;
};

/// argmax_i p(y | [d_i; prefix]) using the gold next tokens y = tokens
/// [prefix_len, target_end); ties to the lowest rank. Evaluation only.
oracle_choice oracle_select(std::span<const rerank_candidate> candidates, const tokenized_text& text,
                            std::size_t prefix_len, std::size_t target_end, const lm_backend& generator,
                            std::size_t max_context, std::size_t max_passage_tokens);

/// Stride-scheduled In-Context RALM evaluation over a fixed index, passage
/// set, and generator. The referenced objects must outlive the engine.
class ralm_engine {
  public:
    /// Throws data_error when the index was not built from `passages`.
    ralm_engine(const inverted_index& index, const passage_set& passages, const lm_backend& generator,
                ralm_config config = {});

    /// Backend for zero-shot reranking; defaults to the generator.
    void set_rerank_backend(const lm_backend& backend) { m_rerank_backend = &backend; }
    void set_predictive_model(const predictive_reranker& model) { m_predictive = &model; }

    const ralm_config& config() const noexcept { return m_config; }
    void set_config(const ralm_config& config);
    const lm_backend& generator() const noexcept { return m_generator; }
    std::size_t window() const noexcept { return m_window; }

    /// Top-k candidates for `query`, in retriever order.
    std::vector<rerank_candidate> retrieve(std::string_view query, std::size_t k) const;

    /// Scores `text` stride by stride: for stride j, retrieve with the last
    /// query_len prefix tokens, choose one passage per the rerank mode,
    /// prepend it, and score the stride's tokens in one call. Stride 0 and
    /// empty retrievals are scored without a passage.
    perplexity_report evaluate_perplexity(std::string_view text) const;

    /// One evaluation per value with everything else fixed.
    std::vector<sweep_row> sweep(std::string_view text, sweep_axis axis, const std::vector<std::size_t>& values) const;

  private:
    std::size_t choose(std::span<const rerank_candidate> candidates, const tokenized_text& doc,
                       std::size_t begin, std::size_t end, std::optional<double>& oracle_loglik) const;

    const inverted_index& m_index;
    const passage_set& m_passages;
    const lm_backend& m_generator;
    const lm_backend* m_rerank_backend = nullptr;
    const predictive_reranker* m_predictive = nullptr;
    ralm_config m_config;
    std::size_t m_window = 0;
};

}  // namespace ralm
