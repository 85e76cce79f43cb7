#include "ralm/rerank.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <unordered_set>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "ralm/context.hpp"
#include "ralm/engine.hpp"
#include "ralm/error.hpp"

namespace ralm {

using json = nlohmann::json;

namespace {

constexpr const char* model_format = "ralm.predictive_reranker";
constexpr const char* examples_format = "ralm.rerank_examples";
constexpr int format_version = 1;
constexpr std::size_t feature_passage_cap = 256;

double log_sum_exp(std::span<const double> xs, double& max_out)
{
    max_out = *std::max_element(xs.begin(), xs.end());
    double sum = 0.0;
    for (double x : xs) {
        sum += std::exp(x - max_out);
    }
    return max_out + std::log(sum);
}

json candidate_to_json(const rerank_candidate& c)
{
    json j = {{"id", c.doc.passage_id},
              {"doc", c.doc.source_doc_id},
              {"start", c.doc.span.start},
              {"end", c.doc.span.end},
              {"text", c.doc.text},
              {"score", c.retriever_score},
              {"rank", c.rank}};
    if (c.doc.title) {
        j["title"] = *c.doc.title;
    }
    return j;
}

rerank_candidate candidate_from_json(const json& j)
{
    rerank_candidate c;
    c.doc.passage_id = j.at("id").get<std::size_t>();
    c.doc.source_doc_id = j.at("doc").get<std::string>();
    c.doc.span = {j.at("start").get<std::size_t>(), j.at("end").get<std::size_t>()};
    c.doc.text = j.at("text").get<std::string>();
    if (j.contains("title")) {
        c.doc.title = j["title"].get<std::string>();
    }
    c.retriever_score = j.at("score").get<double>();
    c.rank = j.at("rank").get<std::size_t>();
    return c;
}

}  // namespace

std::size_t argmax_lowest(std::span<const double> values)
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) {
            best = i;
        }
    }
    return best;
}

std::vector<double> candidate_logliks(std::span<const rerank_candidate> candidates, const tokenized_text& text,
                                      std::size_t prefix_len, std::size_t target_end, const lm_backend& backend,
                                      std::size_t max_context, std::size_t max_passage_tokens)
{
    if (target_end <= prefix_len || target_end > text.size()) {
        throw usage_error("candidate_logliks: target span must be nonempty and inside the text");
    }
    const std::size_t cont = target_end - prefix_len;
    const auto target = text.continuation_text(prefix_len, target_end);
    std::vector<double> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) {
        const auto input = assemble_input(c.doc.text, text, prefix_len, cont, max_context, max_passage_tokens);
        out.push_back(score_assembled(backend, input, target, cont, max_context).logprob_sum);
    }
    return out;
}

std::size_t zero_shot_rerank(std::span<const rerank_candidate> candidates, const tokenized_text& text,
                             std::size_t prefix_len, std::size_t rerank_window, const lm_backend& rerank_backend,
                             std::size_t generator_window, std::size_t max_passage_tokens)
{
    if (candidates.empty()) {
        throw usage_error("zero_shot_rerank needs at least one candidate");
    }
    const std::size_t window = std::min(rerank_window, prefix_len);
    if (candidates.size() == 1 || window == 0) {
        return 0;
    }
    try {
        const auto scores = candidate_logliks(candidates, text, prefix_len - window, prefix_len, rerank_backend,
                                              generator_window, max_passage_tokens);
        return argmax_lowest(scores);
    } catch (const error& e) {
        spdlog::warn("zero-shot reranking failed, keeping the top retrieved passage: {}", e.what());
        return 0;
    }
}

feature_vector extract_features(std::span<const std::string> prefix_tokens, const rerank_candidate& candidate,
                                std::size_t query_len)
{
    feature_vector f{};
    const double s = std::max(0.0, candidate.retriever_score);
    f[0] = s / (1.0 + s);

    const auto passage_tokens = lm_token_strings(candidate.doc.text);
    const double capped = static_cast<double>(std::min(passage_tokens.size(), feature_passage_cap));
    f[4] = std::log1p(capped) / std::log(static_cast<double>(feature_passage_cap + 1));

    const std::size_t wlen = std::min(query_len, prefix_tokens.size());
    if (wlen == 0) {
        return f;
    }
    const auto window = prefix_tokens.last(wlen);

    const std::unordered_set<std::string> passage_uni(passage_tokens.begin(), passage_tokens.end());
    std::set<std::pair<std::string, std::string>> passage_bi;
    for (std::size_t i = 1; i < passage_tokens.size(); ++i) {
        passage_bi.emplace(passage_tokens[i - 1], passage_tokens[i]);
    }

    const std::set<std::string> window_uni(window.begin(), window.end());
    std::size_t uni_hits = 0;
    for (const auto& t : window_uni) {
        uni_hits += passage_uni.contains(t) ? 1 : 0;
    }
    f[1] = static_cast<double>(uni_hits) / static_cast<double>(window_uni.size());

    std::set<std::pair<std::string, std::string>> window_bi;
    for (std::size_t i = 1; i < window.size(); ++i) {
        window_bi.emplace(window[i - 1], window[i]);
    }
    if (!window_bi.empty()) {
        std::size_t bi_hits = 0;
        for (const auto& b : window_bi) {
            bi_hits += passage_bi.contains(b) ? 1 : 0;
        }
        f[2] = static_cast<double>(bi_hits) / static_cast<double>(window_bi.size());
    }

    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < window.size(); ++i) {
        const double distance = static_cast<double>(window.size() - 1 - i);
        const double w = std::exp2(-distance / 8.0);
        den += w;
        if (passage_uni.contains(window[i])) {
            num += w;
        }
    }
    f[3] = num / den;
    return f;
}

void rerank_example::validate() const
{
    if (candidates.empty()) {
        throw data_error("rerank example has no candidates");
    }
    if (lm_logliks.size() != candidates.size()) {
        throw data_error("rerank example has " + std::to_string(lm_logliks.size()) + " logliks for "
                         + std::to_string(candidates.size()) + " candidates");
    }
    for (double ll : lm_logliks) {
        if (!std::isfinite(ll)) {
            throw data_error("rerank example has a non-finite log-likelihood");
        }
    }
}

double predictive_reranker::logit(const feature_vector& features) const
{
    double f = bias;
    for (std::size_t i = 0; i < feature_count; ++i) {
        f += weights[i] * features[i];
    }
    return f;
}

void predictive_reranker::save(const std::filesystem::path& path) const
{
    json j = {{"format", model_format},
              {"version", format_version},
              {"feature_spec", feature_spec},
              {"query_len", query_len},
              {"weights", weights},
              {"bias", bias}};
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw data_error("cannot write reranker " + path.string());
    }
    out << j.dump(2) << '\n';
}

predictive_reranker predictive_reranker::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw data_error("cannot open reranker " + path.string());
    }
    try {
        const auto j = json::parse(in);
        if (j.at("format") != model_format || j.at("version") != format_version) {
            throw data_error("not a predictive reranker file: " + path.string());
        }
        predictive_reranker m;
        m.feature_spec = j.at("feature_spec").get<std::string>();
        if (m.feature_spec != feature_spec_version) {
            throw data_error("reranker feature spec '" + m.feature_spec + "' does not match extractor '"
                             + std::string(feature_spec_version) + "'");
        }
        m.query_len = j.at("query_len").get<std::size_t>();
        m.weights = j.at("weights").get<feature_vector>();
        m.bias = j.at("bias").get<double>();
        return m;
    } catch (const json::exception& e) {
        throw data_error("corrupt reranker " + path.string() + ": " + e.what());
    }
}

std::vector<double> softmax(std::span<const double> logits)
{
    if (logits.empty()) {
        return {};
    }
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        sum += p[i];
    }
    for (auto& v : p) {
        v /= sum;
    }
    return p;
}

loss_gradient listwise_loss(std::span<const feature_vector> features, std::span<const double> lm_logliks,
                            const predictive_reranker& model)
{
    const std::size_t k = features.size();
    if (k == 0) {
        throw usage_error("listwise loss needs at least one candidate");
    }
    if (lm_logliks.size() != k) {
        throw usage_error("listwise loss: feature and loglik counts differ");
    }
    for (double ll : lm_logliks) {
        if (!std::isfinite(ll)) {
            throw data_error("listwise loss: non-finite log-likelihood");
        }
    }

    std::vector<double> logits(k);
    for (std::size_t i = 0; i < k; ++i) {
        logits[i] = model.logit(features[i]);
    }
    const double ll_max = *std::max_element(lm_logliks.begin(), lm_logliks.end());
    // a_i = f_i + ln w_i with w_i = exp(ll_i - ll_max); softmax(a) = p_i w_i / Z
    std::vector<double> shifted(k);
    for (std::size_t i = 0; i < k; ++i) {
        shifted[i] = logits[i] + (lm_logliks[i] - ll_max);
    }
    double f_max = 0.0;
    double a_max = 0.0;
    const double lse_f = log_sum_exp(logits, f_max);
    const double lse_a = log_sum_exp(shifted, a_max);

    const auto p = softmax(logits);
    const auto q = softmax(shifted);

    loss_gradient out;
    out.loss = lse_f - lse_a;
    out.unstabilized_loss = out.loss - ll_max;
    out.grad_logits.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        const double g = p[i] - q[i];
        out.grad_logits[i] = g;
        out.grad_bias += g;
        for (std::size_t d = 0; d < feature_count; ++d) {
            out.grad_weights[d] += g * features[i][d];
        }
    }
    return out;
}

loss_gradient loss_and_grad(const rerank_example& example, const predictive_reranker& model, std::size_t query_len)
{
    example.validate();
    const auto prefix = lm_token_strings(example.prefix_text);
    std::vector<feature_vector> features;
    features.reserve(example.candidates.size());
    for (const auto& c : example.candidates) {
        features.push_back(extract_features(prefix, c, query_len));
    }
    return listwise_loss(features, example.lm_logliks, model);
}

std::vector<rerank_example> collect_training_examples(std::string_view corpus_text, const ralm_engine& engine,
                                                      std::size_t num_examples, std::uint64_t seed)
{
    std::vector<rerank_example> out;
    if (num_examples == 0) {
        return out;
    }
    const tokenized_text doc{std::string(corpus_text)};
    const auto& cfg = engine.config();
    const std::size_t s = cfg.stride;
    if (doc.size() < 2 * s) {
        throw usage_error("training text too short: need at least " + std::to_string(2 * s) + " tokens");
    }
    const std::size_t max_j = (doc.size() - s) / s;
    const auto tokens = doc.strings(0, doc.size());

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(1, max_j);
    const std::size_t max_attempts = 50 * num_examples + 100;
    std::size_t attempts = 0;
    while (out.size() < num_examples) {
        if (attempts++ >= max_attempts) {
            throw usage_error("could not collect " + std::to_string(num_examples) + " examples: only "
                              + std::to_string(out.size()) + " stride boundaries retrieved any passage");
        }
        const std::size_t j = pick(rng);
        const std::size_t begin = j * s;
        const std::size_t end = begin + s;
        const auto query = build_query(tokens, j, s, cfg.query_len);
        auto candidates = engine.retrieve(query, cfg.top_k);
        if (candidates.empty()) {
            continue;
        }
        rerank_example ex;
        ex.lm_logliks = candidate_logliks(candidates, doc, begin, end, engine.generator(), engine.window(),
                                          cfg.max_passage_tokens);
        ex.prefix_text = std::string(doc.span_text(begin - std::min(begin, engine.window()), begin));
        ex.y_text = std::string(doc.continuation_text(begin, end));
        ex.candidates = std::move(candidates);
        ex.validate();
        out.push_back(std::move(ex));
    }
    return out;
}

training_result train(std::span<const rerank_example> examples, const train_options& options)
{
    if (examples.empty()) {
        throw usage_error("training needs at least one example");
    }
    std::vector<std::vector<feature_vector>> features;
    features.reserve(examples.size());
    for (const auto& ex : examples) {
        ex.validate();
        const auto prefix = lm_token_strings(ex.prefix_text);
        auto& rows = features.emplace_back();
        for (const auto& c : ex.candidates) {
            rows.push_back(extract_features(prefix, c, options.query_len));
        }
    }

    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(options.seed);
    std::shuffle(order.begin(), order.end(), rng);

    training_result result;
    result.model.query_len = options.query_len;
    auto& model = result.model;
    const double m = static_cast<double>(examples.size());

    auto evaluate = [&](feature_vector& gw, double& gb) {
        double loss = 0.0;
        gw = {};
        gb = 0.0;
        for (auto idx : order) {
            const auto lg = listwise_loss(features[idx], examples[idx].lm_logliks, model);
            loss += lg.loss;
            for (std::size_t d = 0; d < feature_count; ++d) {
                gw[d] += lg.grad_weights[d];
            }
            gb += lg.grad_bias;
        }
        for (auto& g : gw) {
            g /= m;
        }
        gb /= m;
        return loss / m;
    };

    std::size_t rising = 0;
    feature_vector gw{};
    double gb = 0.0;
    for (std::size_t step = 0; step < options.steps; ++step) {
        const double loss = evaluate(gw, gb);
        if (!std::isfinite(loss)) {
            throw data_error("training diverged: non-finite loss at step " + std::to_string(step));
        }
        if (!result.loss_history.empty() && loss > result.loss_history.back()) {
            if (++rising >= 10) {
                throw data_error("training diverged: loss rose for 10 consecutive steps (step "
                                 + std::to_string(step) + ", loss " + std::to_string(loss)
                                 + "); lower the learning rate");
            }
        } else {
            rising = 0;
        }
        result.loss_history.push_back(loss);
        for (std::size_t d = 0; d < feature_count; ++d) {
            model.weights[d] -= options.learning_rate * gw[d];
        }
        model.bias -= options.learning_rate * gb;
    }
    result.loss_history.push_back(evaluate(gw, gb));
    return result;
}

std::size_t predictive_rerank(std::span<const rerank_candidate> candidates, std::span<const std::string> prefix_tokens,
                              const predictive_reranker& model, std::size_t query_len)
{
    if (candidates.empty()) {
        throw usage_error("predictive_rerank needs at least one candidate");
    }
    if (model.feature_spec != feature_spec_version) {
        throw data_error("reranker feature spec '" + model.feature_spec + "' does not match extractor");
    }
    std::vector<double> logits;
    logits.reserve(candidates.size());
    for (const auto& c : candidates) {
        logits.push_back(model.logit(extract_features(prefix_tokens, c, query_len)));
    }
    return argmax_lowest(logits);
}

void save_examples(std::span<const rerank_example> examples, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw data_error("cannot write examples " + path.string());
    }
    out << json{{"format", examples_format}, {"version", format_version}, {"count", examples.size()}}.dump() << '\n';
    for (const auto& ex : examples) {
        json cands = json::array();
        for (const auto& c : ex.candidates) {
            cands.push_back(candidate_to_json(c));
        }
        out << json{{"prefix", ex.prefix_text}, {"y", ex.y_text}, {"logliks", ex.lm_logliks}, {"candidates", cands}}
                   .dump()
            << '\n';
    }
}

std::vector<rerank_example> load_examples(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw data_error("cannot open examples " + path.string());
    }
    std::vector<rerank_example> out;
    std::string line;
    try {
        if (!std::getline(in, line)) {
            throw data_error("empty examples file " + path.string());
        }
        const auto header = json::parse(line);
        if (header.at("format") != examples_format || header.at("version") != format_version) {
            throw data_error("not a rerank examples file: " + path.string());
        }
        const auto count = header.at("count").get<std::size_t>();
        while (out.size() < count && std::getline(in, line)) {
            const auto j = json::parse(line);
            rerank_example ex;
            ex.prefix_text = j.at("prefix").get<std::string>();
            ex.y_text = j.at("y").get<std::string>();
            ex.lm_logliks = j.at("logliks").get<std::vector<double>>();
            for (const auto& c : j.at("candidates")) {
                ex.candidates.push_back(candidate_from_json(c));
            }
            ex.validate();
            out.push_back(std::move(ex));
        }
        if (out.size() != count) {
            throw data_error("examples file " + path.string() + " is truncated");
        }
    } catch (const json::exception& e) {
        throw data_error("corrupt examples file " + path.string() + ": " + e.what());
    }
    return out;
}

}  // namespace ralm
