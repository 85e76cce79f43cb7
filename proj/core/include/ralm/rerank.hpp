#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ralm/corpus.hpp"
#include "ralm/lm.hpp"
#include "ralm/text.hpp"

namespace ralm {

class ralm_engine;

/// One retrieved passage, in retriever order (rank 0 = best BM25 score).
struct rerank_candidate {
    passage doc;
    double retriever_score = 0.0;
    std::size_t rank = 0;
};

/// ln p(y | [d_i; x]) for every candidate, where x is tokens [0, prefix_len)
/// of `text` and y is tokens [prefix_len, target_end). Inputs are assembled
/// exactly as the engine assembles its scoring inputs.
std::vector<double> candidate_logliks(std::span<const rerank_candidate> candidates, const tokenized_text& text,
                                      std::size_t prefix_len, std::size_t target_end, const lm_backend& backend,
                                      std::size_t max_context, std::size_t max_passage_tokens);

/// Index of the first maximum; ties go to the lowest rank.
std::size_t argmax_lowest(std::span<const double> values);

/// Picks the candidate under which `rerank_backend` best predicts the last
/// `rerank_window` prefix tokens, conditioning on the prefix before them.
/// The window is clamped to the prefix length. Falls back to rank 0 (with a
/// warning) if the backend fails on any candidate.
std::size_t zero_shot_rerank(std::span<const rerank_candidate> candidates, const tokenized_text& text,
                             std::size_t prefix_len, std::size_t rerank_window, const lm_backend& rerank_backend,
                             std::size_t generator_window, std::size_t max_passage_tokens);

// ---------------------------------------------------------------------------
// predictive reranker

inline constexpr std::size_t feature_count = 5;
inline constexpr std::string_view feature_spec_version = "lexical-v1";
using feature_vector = std::array<double, feature_count>;

/// Lexical features of a candidate against the last `query_len` prefix
/// tokens (the window), each in [0, 1]:
///   f0  retriever score s as s / (1 + s)
///   f1  fraction of distinct window unigrams present in the passage
///   f2  same for bigrams
///   f3  window-token overlap weighted by 2^(-d/8), d = distance from prefix end
///   f4  ln(1 + passage tokens) / ln(257), passage length capped at 256
/// f1..f3 are 0 for an empty window.
feature_vector extract_features(std::span<const std::string> prefix_tokens, const rerank_candidate& candidate,
                                std::size_t query_len);

struct rerank_example {
    std::string prefix_text;  // prefix as seen by the LM (after left truncation)
    std::vector<rerank_candidate> candidates;
    std::vector<double> lm_logliks;  // ln p(y | [d_i; prefix]) per candidate
    std::string y_text;

    /// Throws data_error on length mismatch or non-finite logliks.
    void validate() const;
};

struct predictive_reranker {
    feature_vector weights{};
    double bias = 0.0;
    std::string feature_spec{feature_spec_version};
    std::size_t query_len = 32;

    double logit(const feature_vector& features) const;

    void save(const std::filesystem::path& path) const;
    /// Refuses files whose feature spec differs from feature_spec_version.
    static predictive_reranker load(const std::filesystem::path& path);
};

std::vector<double> softmax(std::span<const double> logits);

struct loss_gradient {
    double loss = 0.0;             // stabilized: true loss + max_i lm_loglik_i
    double unstabilized_loss = 0.0;
    feature_vector grad_weights{};
    double grad_bias = 0.0;
    std::vector<double> grad_logits;  // dL/df_i = p_i - p_i w_i / Z
};

/// L = -ln sum_i softmax(f)_i * exp(loglik_i - max_j loglik_j), f_i = w.phi_i + b.
loss_gradient listwise_loss(std::span<const feature_vector> features, std::span<const double> lm_logliks,
                            const predictive_reranker& model);

loss_gradient loss_and_grad(const rerank_example& example, const predictive_reranker& model,
                            std::size_t query_len);

/// Samples stride boundaries j >= 1 uniformly (with a full next stride
/// available), retrieves top-k with the standard query and records each
/// candidate's LM log-likelihood of the next stride. Boundaries whose query
/// retrieves nothing are skipped and resampled.
std::vector<rerank_example> collect_training_examples(std::string_view corpus_text, const ralm_engine& engine,
                                                      std::size_t num_examples, std::uint64_t seed);

struct train_options {
    double learning_rate = 0.1;
    std::size_t steps = 2000;
    std::uint64_t seed = 0;
    std::size_t query_len = 32;
};

struct training_result {
    predictive_reranker model;
    std::vector<double> loss_history;  // mean loss before each step, then the final loss
};

/// Full-batch gradient descent from zero weights on the mean listwise loss.
/// The seed fixes the order in which example gradients are summed. Aborts
/// with data_error if the loss rises for 10 consecutive steps.
training_result train(std::span<const rerank_example> examples, const train_options& options = {});

/// argmax_i f_i, ties to the lowest rank.
std::size_t predictive_rerank(std::span<const rerank_candidate> candidates, std::span<const std::string> prefix_tokens,
                              const predictive_reranker& model, std::size_t query_len);

void save_examples(std::span<const rerank_example> examples, const std::filesystem::path& path);
std::vector<rerank_example> load_examples(const std::filesystem::path& path);

}  // namespace ralm
