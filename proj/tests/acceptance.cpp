// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "ralm/bm25.hpp"
#include "ralm/cache_ngram_lm.hpp"
#include "ralm/engine.hpp"
#include "ralm/odqa.hpp"
#include "ralm/protocol.hpp"
#include "ralm/rerank.hpp"
#include "support/appendix_prompts.hpp"
#include "support/bare_scoring.hpp"
#include "support/bm25_oracle.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"
#include "support/mock_server.hpp"
#include "support/synthetic.hpp"

using namespace ralm;

namespace {

// Tolerances and thresholds.
constexpr double bm25_score_tol = 1e-9;
constexpr double bm25_time_limit_s = 10.0;
constexpr double retrieval_min_rel_improvement = 0.10;
constexpr double retrieval_time_limit_s = 60.0;
constexpr double grad_rel_tol = 1e-6;
constexpr double grad_fd_step = 1e-6;
constexpr double bias_grad_tol = 1e-12;
constexpr double loss_shift_tol = 1e-9;
constexpr double training_min_agreement = 0.90;
constexpr std::size_t trend_corpora = 20;

// Seed of the shipped synthetic suite.
constexpr std::uint64_t suite_seed = 20230131;

struct outcome {
    bool pass = false;
    std::string detail;
};

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0)
{
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

std::string fmt(double v, int precision = 6)
{
    std::ostringstream ss;
    ss.precision(precision);
    ss << v;
    return ss.str();
}

double aggregate_ppl(const std::vector<perplexity_report>& reports)
{
    double nll = 0.0;
    double tokens = 0.0;
    for (const auto& r : reports) {
        nll += r.total_nll;
        tokens += static_cast<double>(r.token_count);
    }
    return std::exp(nll / tokens);
}

/// Corpus, index and default builtin LM for one generated suite.
struct constructed_world {
    testing::synthetic_suite suite;
    inverted_index index;
    cache_ngram_lm lm;

    explicit constructed_world(std::uint64_t seed, testing::synthetic_params params = {})
        : suite(testing::make_synthetic_suite(seed, params)),
          index(inverted_index::build(suite.passages)),
          lm(cache_ngram_lm::train(suite.lm_training_text))
    {
    }

    std::vector<perplexity_report> evaluate(const ralm_config& cfg) const
    {
        ralm_engine engine(index, suite.passages, lm, cfg);
        std::vector<perplexity_report> out;
        for (const auto& text : suite.eval_texts) {
            out.push_back(engine.evaluate_perplexity(text));
        }
        return out;
    }
};

// ---------------------------------------------------------------------------

outcome bm25_oracle_equivalence()
{
    const auto t0 = clock_type::now();
    std::mt19937_64 rng(1);
    std::size_t queries = 0;
    std::size_t mismatches = 0;
    double worst = 0.0;
    for (int corpus = 0; corpus < 50; ++corpus) {
        const std::size_t vocab = std::uniform_int_distribution<std::size_t>(1, 50)(rng);
        const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 200)(rng);
        auto word = [&] { return "t" + std::to_string(std::uniform_int_distribution<std::size_t>(0, vocab - 1)(rng)); };
        std::vector<std::string> texts;
        for (std::size_t p = 0; p < n; ++p) {
            std::string t;
            const std::size_t len = std::uniform_int_distribution<std::size_t>(0, 40)(rng);
            for (std::size_t w = 0; w < len; ++w) {
                t += word() + (w % 7 == 6 ? ", " : " ");
            }
            texts.push_back(t);
        }
        const auto index = inverted_index::build(testing::passages_from(texts));
        for (int q = 0; q < 20; ++q) {
            std::string query;
            const std::size_t qlen = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
            for (std::size_t w = 0; w < qlen; ++w) {
                // occasionally out of vocabulary
                query += (w % 5 == 4 ? "zz" + word() : word()) + " ";
            }
            const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 25)(rng);
            const auto got = index.search(query, k);
            const auto want = testing::brute_force_bm25(texts, query, k);
            ++queries;
            bool same = got.size() == want.size();
            for (std::size_t i = 0; same && i < got.size(); ++i) {
                const double diff = std::abs(got[i].score - want[i].score);
                worst = std::max(worst, diff);
                same = got[i].passage_id == want[i].passage_id && diff <= bm25_score_tol;
            }
            mismatches += same ? 0 : 1;
        }
    }
    const double elapsed = seconds_since(t0);
    return {mismatches == 0 && elapsed < bm25_time_limit_s,
            std::to_string(queries) + " queries over 50 corpora, " + std::to_string(mismatches)
                + " mismatches, max |score diff| " + fmt(worst, 3) + ", " + fmt(elapsed, 3) + " s (limit "
                + fmt(bm25_time_limit_s) + " s)"};
}

outcome no_retrieval_identity()
{
    std::mt19937_64 rng(2);
    const auto world = testing::make_synthetic_suite(3, [] {
        testing::synthetic_params p;
        p.corpus_docs = 10;
        p.lm_training_words = 5000;
        return p;
    }());
    const auto index = inverted_index::build(world.passages);
    const auto lm = cache_ngram_lm::train(world.lm_training_text);
    testing::synthetic_generator gen(4);
    const std::vector<std::string> punct = {" ", " ", " ", ", ", ". ", "\n", " ; ", "\n\n"};
    std::size_t checks = 0;
    std::size_t failures = 0;
    for (int t = 0; t < 20; ++t) {
        // mix of in- and out-of-vocabulary words with punctuation and newlines
        const auto words = split_whitespace(t % 2 == 0 ? gen.document_text(gen.random_topic(), 150)
                                                       : world.lm_training_text.substr(137 * t, 900));
        std::string text;
        for (const auto& w : words) {
            text += std::string(w) + punct[std::uniform_int_distribution<std::size_t>(0, punct.size() - 1)(rng)];
        }
        for (std::size_t s : {1, 4, 7, 64}) {
            ralm_config cfg;
            cfg.stride = s;
            cfg.retrieval_enabled = false;
            ralm_engine engine(index, world.passages, lm, cfg);
            const double got = engine.evaluate_perplexity(text).total_nll;
            const double want = testing::bare_strided_nll(lm, text, s);
            ++checks;
            failures += got == want ? 0 : 1;
        }
    }
    return {failures == 0, std::to_string(checks) + " (text, stride) pairs, " + std::to_string(failures)
                               + " not bit-identical"};
}

// `setup_s` is the time spent generating the suite and building index and LM.
outcome retrieval_helps(const constructed_world& world, double setup_s)
{
    const auto t0 = clock_type::now();
    ralm_config with;
    ralm_config without;
    without.retrieval_enabled = false;
    const double ppl_with = aggregate_ppl(world.evaluate(with));
    const double ppl_without = aggregate_ppl(world.evaluate(without));
    const double rel = (ppl_without - ppl_with) / ppl_without;
    const double elapsed = setup_s + seconds_since(t0);
    return {ppl_with < ppl_without && rel >= retrieval_min_rel_improvement && elapsed < retrieval_time_limit_s,
            "token_ppl " + fmt(ppl_without) + " -> " + fmt(ppl_with) + " (relative improvement " + fmt(100 * rel, 4)
                + "%, need >= " + fmt(100 * retrieval_min_rel_improvement) + "%), " + fmt(elapsed, 3)
                + " s (limit " + fmt(retrieval_time_limit_s) + " s)"};
}

outcome oracle_dominance(const constructed_world& world)
{
    ralm_config cfg;
    const auto top1 = world.evaluate(cfg);
    cfg.rerank = rerank_mode::oracle;
    const auto oracle = world.evaluate(cfg);
    cfg.rerank = rerank_mode::zero_shot;
    const auto zero_shot = world.evaluate(cfg);

    std::size_t strides = 0;
    std::size_t violations = 0;
    for (std::size_t t = 0; t < top1.size(); ++t) {
        for (std::size_t j = 0; j < top1[t].strides.size(); ++j) {
            ++strides;
            violations += oracle[t].strides[j].nll_sum <= top1[t].strides[j].nll_sum ? 0 : 1;
        }
    }
    const double p_oracle = aggregate_ppl(oracle);
    const double p_zero = aggregate_ppl(zero_shot);
    const double p_top1 = aggregate_ppl(top1);
    return {violations == 0 && p_oracle <= p_zero,
            std::to_string(strides - violations) + "/" + std::to_string(strides)
                + " strides with oracle <= top-1; ppl oracle " + fmt(p_oracle) + " <= zero-shot " + fmt(p_zero)
                + " (top-1 " + fmt(p_top1) + ", reported only)"};
}

outcome stride_trend()
{
    const std::vector<std::size_t> strides = {1, 4, 16, 64};
    std::vector<double> mean(strides.size(), 0.0);
    testing::synthetic_params params;
    params.eval_texts = 1;
    for (std::size_t c = 0; c < trend_corpora; ++c) {
        const constructed_world world(1000 + c, params);
        for (std::size_t i = 0; i < strides.size(); ++i) {
            ralm_config cfg;
            cfg.stride = strides[i];
            mean[i] += aggregate_ppl(world.evaluate(cfg)) / static_cast<double>(trend_corpora);
        }
    }
    bool ok = true;
    std::string detail = "mean token_ppl over " + std::to_string(trend_corpora) + " corpora:";
    for (std::size_t i = 0; i < strides.size(); ++i) {
        detail += " s=" + std::to_string(strides[i]) + ":" + fmt(mean[i]);
        if (i > 0 && mean[i] < mean[i - 1]) {
            ok = false;
        }
    }
    return {ok, detail};
}

/// Random example with a real prefix and passages, so features are
/// extracted exactly as in training.
rerank_example random_example(std::mt19937_64& rng)
{
    const std::size_t vocab = 30;
    auto word = [&] { return "v" + std::to_string(std::uniform_int_distribution<std::size_t>(0, vocab - 1)(rng)); };
    rerank_example ex;
    const std::size_t plen = std::uniform_int_distribution<std::size_t>(0, 48)(rng);
    for (std::size_t i = 0; i < plen; ++i) {
        ex.prefix_text += word() + " ";
    }
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 16)(rng);
    for (std::size_t r = 0; r < k; ++r) {
        rerank_candidate c;
        c.doc.passage_id = r;
        const std::size_t len = std::uniform_int_distribution<std::size_t>(1, 60)(rng);
        for (std::size_t i = 0; i < len; ++i) {
            c.doc.text += word() + " ";
        }
        c.retriever_score = std::uniform_real_distribution<double>(0.0, 20.0)(rng);
        c.rank = r;
        ex.candidates.push_back(std::move(c));
        // dyadic values keep shifted arithmetic exact
        ex.lm_logliks.push_back(-std::ldexp(static_cast<double>(std::uniform_int_distribution<int>(64, 6400)(rng)), -6));
    }
    return ex;
}

outcome reranker_gradient()
{
    std::mt19937_64 rng(7);
    double worst_rel = 0.0;
    double worst_bias = 0.0;
    std::size_t shift_failures = 0;
    std::size_t examples = 0;
    while (examples < 100) {
        const auto ex = random_example(rng);
        predictive_reranker model;
        for (auto& w : model.weights) {
            w = std::uniform_real_distribution<double>(-3.0, 3.0)(rng);
        }
        model.bias = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
        const std::size_t query_len = 32;

        const auto lg = loss_and_grad(ex, model, query_len);
        const auto prefix = lm_token_strings(ex.prefix_text);
        std::vector<feature_vector> features;
        for (const auto& c : ex.candidates) {
            features.push_back(extract_features(prefix, c, query_len));
        }
        const auto numeric = testing::numeric_gradient(features, ex.lm_logliks, model, grad_fd_step);
        worst_rel = std::max(worst_rel, testing::relative_error(testing::analytic_gradient(lg), numeric));
        worst_bias = std::max(worst_bias, std::abs(lg.grad_bias));

        auto shifted = ex;
        const double c = std::ldexp(static_cast<double>(std::uniform_int_distribution<int>(-4000, 4000)(rng)), -4);
        for (auto& ll : shifted.lm_logliks) {
            ll += c;
        }
        const auto ls = loss_and_grad(shifted, model, query_len);
        const bool invariant = ls.grad_weights == lg.grad_weights && ls.grad_bias == lg.grad_bias
                               && ls.grad_logits == lg.grad_logits
                               && argmax_lowest(shifted.lm_logliks) == argmax_lowest(ex.lm_logliks)
                               && std::abs((ls.unstabilized_loss - lg.unstabilized_loss) + c) <= loss_shift_tol;
        shift_failures += invariant ? 0 : 1;
        ++examples;
    }
    return {worst_rel <= grad_rel_tol && worst_bias <= bias_grad_tol && shift_failures == 0,
            std::to_string(examples) + " examples: max relative error " + fmt(worst_rel, 3) + " (<= " + fmt(grad_rel_tol)
                + "), max |bias grad| " + fmt(worst_bias, 3) + " (<= " + fmt(bias_grad_tol) + "), "
                + std::to_string(shift_failures) + " shift-invariance failures"};
}

/// Candidates overlap the prefix window by random amounts; the one with the
/// highest unigram overlap (f1) always has the best log-likelihood, while
/// retriever scores and lengths are uninformative noise.
std::vector<rerank_example> training_batch(std::size_t n, std::uint64_t seed, std::size_t query_len)
{
    std::mt19937_64 rng(seed);
    std::vector<rerank_example> out;
    while (out.size() < n) {
        rerank_example ex;
        std::vector<std::string> window;
        for (std::size_t i = 0; i < query_len; ++i) {
            window.push_back("w" + std::to_string(std::uniform_int_distribution<int>(0, 199)(rng)));
            ex.prefix_text += window.back() + " ";
        }
        const std::size_t k = 8;
        std::vector<double> f1;
        for (std::size_t r = 0; r < k; ++r) {
            rerank_candidate c;
            c.doc.passage_id = r;
            c.rank = r;
            c.retriever_score = std::uniform_real_distribution<double>(0.0, 15.0)(rng);
            const double share = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            const std::size_t len = std::uniform_int_distribution<std::size_t>(20, 120)(rng);
            for (std::size_t i = 0; i < len; ++i) {
                const bool from_window = std::bernoulli_distribution(share)(rng);
                c.doc.text += (from_window ? window[std::uniform_int_distribution<std::size_t>(0, query_len - 1)(rng)]
                                           : "x" + std::to_string(std::uniform_int_distribution<int>(0, 999)(rng)))
                              + " ";
            }
            f1.push_back(extract_features(window, c, query_len)[1]);
            ex.candidates.push_back(std::move(c));
        }
        const std::size_t best = argmax_lowest(f1);
        if (std::count(f1.begin(), f1.end(), f1[best]) > 1) {
            continue;  // need a unique maximizer
        }
        for (std::size_t r = 0; r < k; ++r) {
            ex.lm_logliks.push_back(r == best ? -20.0 : -30.0 + std::uniform_real_distribution<double>(-5.0, 5.0)(rng));
        }
        out.push_back(std::move(ex));
    }
    return out;
}

outcome reranker_training()
{
    const std::size_t query_len = 32;
    const auto train_set = training_batch(200, 11, query_len);
    const auto held_out = training_batch(200, 12, query_len);
    train_options opts;
    opts.learning_rate = 0.1;
    opts.steps = 2000;
    opts.query_len = query_len;
    const auto result = train(train_set, opts);

    bool monotone = true;
    for (std::size_t i = 1; i <= 100 && i < result.loss_history.size(); ++i) {
        monotone = monotone && result.loss_history[i] <= result.loss_history[i - 1];
    }
    std::size_t agree = 0;
    for (const auto& ex : held_out) {
        const auto prefix = lm_token_strings(ex.prefix_text);
        agree += predictive_rerank(ex.candidates, prefix, result.model, query_len) == argmax_lowest(ex.lm_logliks) ? 1
                                                                                                                   : 0;
    }
    const double rate = static_cast<double>(agree) / static_cast<double>(held_out.size());
    return {rate >= training_min_agreement && monotone,
            "held-out agreement " + fmt(100 * rate, 4) + "% (need >= " + fmt(100 * training_min_agreement)
                + "%), loss " + fmt(result.loss_history.front()) + " -> " + fmt(result.loss_history.back())
                + ", first 100 steps " + (monotone ? "non-increasing" : "NOT non-increasing") + ", w_f1 = "
                + fmt(result.model.weights[1])};
}

outcome prompt_byte_exactness()
{
    const auto closed = build_closed_book_prompt(testing::appendix_question);
    const std::vector<titled_passage> blocks = {{testing::appendix_title_1, testing::appendix_text_1},
                                                {testing::appendix_title_2, testing::appendix_text_2}};
    const auto open = build_open_book_prompt(blocks, testing::appendix_question);
    const bool c_ok = closed == testing::appendix_closed_book;
    const bool o_ok = open == testing::appendix_open_book;
    return {c_ok && o_ok, std::string("closed-book ") + (c_ok ? "identical" : "differs") + " (" +
                              std::to_string(closed.size()) + " bytes), open-book " + (o_ok ? "identical" : "differs")
                              + " (" + std::to_string(open.size()) + " bytes)"};
}

outcome protocol_conformance()
{
    testing::scripted_mock mock;
    const auto checks = run_protocol_conformance(mock.url());
    std::size_t passed = 0;
    std::string failed;
    for (const auto& c : checks) {
        if (c.passed) {
            ++passed;
        } else {
            failed += " " + c.name + "(" + c.detail + ")";
        }
    }
    return {passed == checks.size() && !checks.empty(),
            std::to_string(passed) + "/" + std::to_string(checks.size()) + " checks against the scripted mock"
                + (failed.empty() ? "" : ", failed:" + failed)};
}

}  // namespace

int main()
{
    spdlog::set_level(spdlog::level::err);

    int failures = 0;
    auto report = [&](const char* name, const std::function<outcome()>& fn) {
        outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    };

    report("bm25_oracle_equivalence", bm25_oracle_equivalence);
    report("no_retrieval_identity", no_retrieval_identity);
    const auto setup_start = clock_type::now();
    const constructed_world world(suite_seed);
    const double setup_s = seconds_since(setup_start);
    report("retrieval_helps", [&] { return retrieval_helps(world, setup_s); });
    report("oracle_dominance", [&] { return oracle_dominance(world); });
    report("stride_trend", stride_trend);
    report("reranker_gradient", reranker_gradient);
    report("reranker_training", reranker_training);
    report("prompt_byte_exactness", prompt_byte_exactness);
    report("protocol_conformance", protocol_conformance);
    return failures == 0 ? 0 : 1;
}
