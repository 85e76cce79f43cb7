#include "ralm/engine.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include <spdlog/spdlog.h>

#include "ralm/error.hpp"

namespace ralm {

using json = nlohmann::json;

const char* to_string(rerank_mode mode) noexcept
{
    switch (mode) {
    case rerank_mode::none: return "none";
    case rerank_mode::zero_shot: return "zero-shot";
    case rerank_mode::predictive: return "predictive";
    case rerank_mode::oracle: return "oracle";
    }
    return "unknown";
}

rerank_mode parse_rerank_mode(std::string_view text)
{
    if (text == "none") return rerank_mode::none;
    if (text == "zero-shot" || text == "zero_shot") return rerank_mode::zero_shot;
    if (text == "predictive") return rerank_mode::predictive;
    if (text == "oracle") return rerank_mode::oracle;
    throw usage_error("unknown rerank mode '" + std::string(text) + "'");
}

const char* to_string(sweep_axis axis) noexcept
{
    return axis == sweep_axis::stride ? "stride" : "query-len";
}

sweep_axis parse_sweep_axis(std::string_view text)
{
    if (text == "stride") return sweep_axis::stride;
    if (text == "query-len" || text == "query_len") return sweep_axis::query_len;
    throw usage_error("unknown sweep axis '" + std::string(text) + "'");
}

void ralm_config::validate() const
{
    if (stride < 1) throw usage_error("stride must be >= 1");
    if (query_len < 1) throw usage_error("query length must be >= 1");
    if (top_k < 1) throw usage_error("top-k must be >= 1");
    if (rerank == rerank_mode::zero_shot && rerank_window < 1) {
        throw usage_error("rerank window must be >= 1");
    }
}

json ralm_config::to_json() const
{
    return {{"stride", stride},
            {"query_len", query_len},
            {"top_k", top_k},
            {"rerank", to_string(rerank)},
            {"rerank_window", rerank_window},
            {"max_passage_tokens", max_passage_tokens},
            {"retrieval_enabled", retrieval_enabled}};
}

json perplexity_report::to_json(bool include_strides) const
{
    json j = {{"total_nll", total_nll},
              {"token_count", token_count},
              {"word_count", word_count},
              {"token_ppl", token_ppl},
              {"word_ppl", word_ppl}};
    if (include_strides) {
        json rows = json::array();
        for (const auto& r : strides) {
            rows.push_back({{"j", r.index},
                            {"query", r.query_text},
                            {"candidates", r.candidate_ids},
                            {"chosen", r.chosen_passage_id ? json(*r.chosen_passage_id) : json(nullptr)},
                            {"nll", r.nll_sum},
                            {"tokens", r.token_count},
                            {"dropped_prefix_tokens", r.dropped_prefix_tokens}});
        }
        j["strides"] = std::move(rows);
    }
    return j;
}

std::string sweep_csv(const std::vector<sweep_row>& rows)
{
    std::ostringstream out;
    out << std::setprecision(17);
    out << "axis_value,token_ppl,word_ppl,total_nll,tokens,words\n";
    for (const auto& row : rows) {
        const auto& r = row.report;
        out << row.value << ',' << r.token_ppl << ',' << r.word_ppl << ',' << r.total_nll << ','
            << r.token_count << ',' << r.word_count << '\n';
    }
    return out.str();
}

oracle_choice oracle_select(std::span<const rerank_candidate> candidates, const tokenized_text& text,
                            std::size_t prefix_len, std::size_t target_end, const lm_backend& generator,
                            std::size_t max_context, std::size_t max_passage_tokens)
{
    if (candidates.empty()) {
        throw usage_error("oracle_select needs at least one candidate");
    }
    oracle_choice out;
    out.logliks = candidate_logliks(candidates, text, prefix_len, target_end, generator, max_context,
                                    max_passage_tokens);
    out.index = argmax_lowest(out.logliks);
    return out;
}

ralm_engine::ralm_engine(const inverted_index& index, const passage_set& passages, const lm_backend& generator,
                         ralm_config config)
    : m_index(index), m_passages(passages), m_generator(generator), m_config(config)
{
    m_config.validate();
    if (index.corpus_fingerprint() != passages.fingerprint() || index.size() != passages.size()) {
        throw data_error("index fingerprint " + index.corpus_fingerprint() + " does not match passages "
                         + passages.fingerprint());
    }
    auto info = generator.info();
    info.validate();
    m_window = info.max_context_tokens;
}

void ralm_engine::set_config(const ralm_config& config)
{
    config.validate();
    m_config = config;
}

std::vector<rerank_candidate> ralm_engine::retrieve(std::string_view query, std::size_t k) const
{
    std::vector<rerank_candidate> out;
    for (const auto& hit : m_index.search(query, k)) {
        out.push_back({m_passages[hit.passage_id], hit.score, out.size()});
    }
    return out;
}

std::size_t ralm_engine::choose(std::span<const rerank_candidate> candidates, const tokenized_text& doc,
                                std::size_t begin, std::size_t end, std::optional<double>& oracle_loglik) const
{
    switch (m_config.rerank) {
    case rerank_mode::none:
        return 0;
    case rerank_mode::zero_shot: {
        const auto& backend = m_rerank_backend ? *m_rerank_backend : m_generator;
        return zero_shot_rerank(candidates, doc, begin, m_config.rerank_window, backend, m_window,
                                m_config.max_passage_tokens);
    }
    case rerank_mode::predictive: {
        if (m_predictive == nullptr) {
            throw usage_error("predictive reranking requires a trained reranker model");
        }
        const auto prefix = doc.strings(begin - std::min(begin, m_config.query_len), begin);
        return predictive_rerank(candidates, prefix, *m_predictive, m_config.query_len);
    }
    case rerank_mode::oracle: {
        auto choice = oracle_select(candidates, doc, begin, end, m_generator, m_window, m_config.max_passage_tokens);
        oracle_loglik = choice.logliks[choice.index];
        return choice.index;
    }
    }
    return 0;
}

perplexity_report ralm_engine::evaluate_perplexity(std::string_view text) const
{
    const tokenized_text doc{std::string(text)};
    const std::size_t n = doc.size();
    if (n == 0) {
        throw usage_error("text to evaluate contains no tokens");
    }
    const auto& cfg = m_config;
    const auto token_strings = doc.strings(0, n);

    perplexity_report report;
    const std::size_t num_strides = (n + cfg.stride - 1) / cfg.stride;
    report.strides.reserve(num_strides);
    for (std::size_t j = 0; j < num_strides; ++j) {
        const std::size_t begin = j * cfg.stride;
        const std::size_t end = std::min(n, begin + cfg.stride);
        const std::size_t cont = end - begin;

        stride_record rec;
        rec.index = j;
        rec.token_count = cont;
        try {
            std::vector<rerank_candidate> candidates;
            if (cfg.retrieval_enabled) {
                rec.query_text = build_query(token_strings, j, cfg.stride, cfg.query_len);
                if (!rec.query_text.empty()) {
                    candidates = retrieve(rec.query_text, cfg.top_k);
                }
            }
            std::optional<double> known_loglik;
            std::string_view passage_text;
            if (!candidates.empty()) {
                const std::size_t pick = choose(candidates, doc, begin, end, known_loglik);
                rec.chosen_passage_id = candidates[pick].doc.passage_id;
                passage_text = candidates[pick].doc.text;
                for (const auto& c : candidates) {
                    rec.candidate_ids.push_back(c.doc.passage_id);
                }
            }
            const auto input = assemble_input(passage_text, doc, begin, cont, m_window, cfg.max_passage_tokens);
            rec.dropped_prefix_tokens = input.dropped_prefix_count;
            if (known_loglik) {
                rec.nll_sum = -*known_loglik;
            } else {
                rec.nll_sum = -score_assembled(m_generator, input, doc.continuation_text(begin, end), cont, m_window)
                                   .logprob_sum;
            }
        } catch (const backend_error& e) {
            throw backend_error("stride " + std::to_string(j) + ": " + e.what());
        }
        report.total_nll += rec.nll_sum;
        report.token_count += rec.token_count;
        report.strides.push_back(std::move(rec));
    }

    report.word_count = whitespace_word_count(text);
    report.token_ppl = std::exp(report.total_nll / static_cast<double>(report.token_count));
    report.word_ppl = std::exp(report.total_nll / static_cast<double>(report.word_count));
    return report;
}

std::vector<sweep_row> ralm_engine::sweep(std::string_view text, sweep_axis axis,
                                          const std::vector<std::size_t>& values) const
{
    if (values.empty()) {
        throw usage_error("sweep needs at least one value");
    }
    std::vector<sweep_row> rows;
    for (auto v : values) {
        ralm_engine run = *this;
        auto cfg = m_config;
        (axis == sweep_axis::stride ? cfg.stride : cfg.query_len) = v;
        run.set_config(cfg);
        spdlog::debug("sweep {}={}", to_string(axis), v);
        rows.push_back({v, run.evaluate_perplexity(text)});
    }
    return rows;
}

}  // namespace ralm
