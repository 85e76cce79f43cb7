#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ralm/lm.hpp"

namespace ralm {

using token_id = std::uint32_t;

struct cache_ngram_options {
    std::size_t order = 3;
    double alpha = 0.1;        // additive smoothing per order
    std::vector<double> eta;   // order weights eta_1..eta_n; empty means uniform
    double lambda = 0.3;       // cache interpolation weight
    double gamma = 1.0;        // cache smoothing
    std::size_t max_context_tokens = 1024;
};

/// Interpolated additive-smoothing n-gram model mixed with a whole-context
/// unigram cache:
///
///   p(w | ctx) = (1 - lambda) * sum_m eta_m * (c_m(h w) + alpha) / (c_m(h) + alpha V)
///              + lambda * (occ(w, ctx) + gamma) / (|ctx| + gamma V)
///
/// where h is the last m-1 tokens, c_m(h) counts m-grams starting with h,
/// and V includes the reserved unknown token (id 0). An order whose history
/// is longer than the available context falls back to zero counts, i.e. 1/V.
/// Every distribution sums to one and every probability is positive.
class cache_ngram_lm final : public lm_backend {
  public:
    static constexpr token_id unk_id = 0;
    static constexpr std::string_view unk_token = "<unk>";

    static cache_ngram_lm train(std::string_view corpus_text, cache_ngram_options options = {});
    /// All-zero counts over the given words (plus UNK).
    static cache_ngram_lm untrained(const std::vector<std::string>& words, cache_ngram_options options = {});

    lm_info info() const override;
    lm_score_result score(const lm_score_request& request) const override;
    std::string generate_greedy(std::string_view prompt, std::size_t max_new_tokens,
                                std::string_view stop) const override;

    std::size_t vocab_size() const noexcept { return m_vocab.size(); }
    const std::string& token_string(token_id id) const { return m_vocab.at(id); }
    token_id id_of(std::string_view token) const;
    std::vector<token_id> encode(std::string_view text) const;
    const cache_ngram_options& options() const noexcept { return m_options; }

    /// Interpolated n-gram term alone, conditioned on the tail of `history`.
    double ngram_probability(std::span<const token_id> history, token_id w) const;
    /// Full model; the cache is built from all of `history`.
    double probability(std::span<const token_id> history, token_id w) const;
    /// Full distribution over every id (including UNK) after `history`.
    std::vector<double> next_distribution(std::span<const token_id> history) const;

    void save(const std::filesystem::path& path) const;
    static cache_ngram_lm load(const std::filesystem::path& path);

  private:
    struct history_stats {
        std::uint64_t total = 0;
        std::vector<std::pair<token_id, std::uint32_t>> successors;  // sorted by id
    };
    using order_table = std::unordered_map<std::string, history_stats>;

    cache_ngram_lm(std::vector<std::string> vocab, cache_ngram_options options);

    void validate_options();
    static std::string history_key(std::span<const token_id> ids);
    const history_stats* lookup(std::size_t order, std::span<const token_id> history) const;
    double order_probability(std::size_t order, std::span<const token_id> history, token_id w) const;
    void add_ngram_terms(std::span<const token_id> history, std::vector<double>& dist) const;

    cache_ngram_options m_options;
    std::vector<std::string> m_vocab;
    std::unordered_map<std::string, token_id> m_ids;
    std::vector<order_table> m_tables;  // m_tables[m-1] holds order-m counts
};

}  // namespace ralm
