#include "ralm/cache_ngram_lm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>

#include <json.hpp>

#include "ralm/error.hpp"
#include "ralm/text.hpp"

namespace ralm {

using json = nlohmann::json;

namespace {

constexpr const char* model_format = "ralm.cache_ngram";
constexpr int model_format_version = 1;

}  // namespace

cache_ngram_lm::cache_ngram_lm(std::vector<std::string> vocab, cache_ngram_options options)
    : m_options(std::move(options)), m_vocab(std::move(vocab))
{
    validate_options();
    for (std::size_t i = 0; i < m_vocab.size(); ++i) {
        m_ids.emplace(m_vocab[i], static_cast<token_id>(i));
    }
    m_tables.resize(m_options.order);
}

void cache_ngram_lm::validate_options()
{
    auto& o = m_options;
    if (o.order < 1) {
        throw usage_error("n-gram order must be >= 1");
    }
    if (!(o.alpha > 0.0)) {
        throw usage_error("alpha must be > 0");
    }
    if (!(o.gamma > 0.0)) {
        throw usage_error("gamma must be > 0");
    }
    if (!(o.lambda >= 0.0 && o.lambda <= 1.0)) {
        throw usage_error("lambda must lie in [0, 1]");
    }
    if (o.max_context_tokens < 2) {
        throw usage_error("max_context_tokens must be >= 2");
    }
    if (o.eta.empty()) {
        o.eta.assign(o.order, 1.0 / static_cast<double>(o.order));
    }
    if (o.eta.size() != o.order) {
        throw usage_error("eta must have one weight per order");
    }
    double sum = 0.0;
    for (double e : o.eta) {
        if (!(e >= 0.0)) {
            throw usage_error("eta weights must be nonnegative");
        }
        sum += e;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw usage_error("eta weights must sum to 1");
    }
}

std::string cache_ngram_lm::history_key(std::span<const token_id> ids)
{
    std::string key(ids.size() * sizeof(token_id), '\0');
    if (!ids.empty()) {
        std::memcpy(key.data(), ids.data(), key.size());
    }
    return key;
}

cache_ngram_lm cache_ngram_lm::untrained(const std::vector<std::string>& words, cache_ngram_options options)
{
    std::vector<std::string> vocab(words);
    std::sort(vocab.begin(), vocab.end());
    vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
    vocab.insert(vocab.begin(), std::string(unk_token));
    return cache_ngram_lm(std::move(vocab), std::move(options));
}

cache_ngram_lm cache_ngram_lm::train(std::string_view corpus_text, cache_ngram_options options)
{
    const auto tokens = lm_token_strings(corpus_text);
    if (tokens.empty()) {
        throw usage_error("training text is empty after tokenization");
    }
    auto lm = untrained(tokens, std::move(options));
    const auto ids = lm.encode(corpus_text);

    for (std::size_t m = 1; m <= lm.m_options.order; ++m) {
        // ordered map so successor lists come out sorted by id
        std::unordered_map<std::string, std::map<token_id, std::uint32_t>> counts;
        for (std::size_t i = m - 1; i < ids.size(); ++i) {
            auto hist = std::span<const token_id>(ids).subspan(i - (m - 1), m - 1);
            ++counts[history_key(hist)][ids[i]];
        }
        auto& table = lm.m_tables[m - 1];
        for (auto& [key, succ] : counts) {
            history_stats stats;
            for (auto [w, c] : succ) {
                stats.successors.emplace_back(w, c);
                stats.total += c;
            }
            table.emplace(key, std::move(stats));
        }
    }
    return lm;
}

lm_info cache_ngram_lm::info() const
{
    return {"builtin-cache-ngram-" + std::to_string(m_options.order), m_options.max_context_tokens};
}

token_id cache_ngram_lm::id_of(std::string_view token) const
{
    auto it = m_ids.find(std::string(token));
    return it == m_ids.end() ? unk_id : it->second;
}

std::vector<token_id> cache_ngram_lm::encode(std::string_view text) const
{
    std::vector<token_id> ids;
    for (const auto& t : lm_tokenize(text)) {
        ids.push_back(id_of(t.text));
    }
    return ids;
}

const cache_ngram_lm::history_stats* cache_ngram_lm::lookup(std::size_t order,
                                                            std::span<const token_id> history) const
{
    if (history.size() < order - 1) {
        return nullptr;
    }
    const auto& table = m_tables[order - 1];
    auto it = table.find(history_key(history.last(order - 1)));
    return it == table.end() ? nullptr : &it->second;
}

double cache_ngram_lm::order_probability(std::size_t order, std::span<const token_id> history,
                                         token_id w) const
{
    const double v = static_cast<double>(m_vocab.size());
    const double alpha = m_options.alpha;
    double total = 0.0;
    double count = 0.0;
    if (const auto* stats = lookup(order, history)) {
        total = static_cast<double>(stats->total);
        auto it = std::lower_bound(stats->successors.begin(), stats->successors.end(), w,
                                   [](const auto& s, token_id id) { return s.first < id; });
        if (it != stats->successors.end() && it->first == w) {
            count = it->second;
        }
    }
    return (count + alpha) / (total + alpha * v);
}

double cache_ngram_lm::ngram_probability(std::span<const token_id> history, token_id w) const
{
    double p = 0.0;
    for (std::size_t m = 1; m <= m_options.order; ++m) {
        p += m_options.eta[m - 1] * order_probability(m, history, w);
    }
    return p;
}

double cache_ngram_lm::probability(std::span<const token_id> history, token_id w) const
{
    const double v = static_cast<double>(m_vocab.size());
    const auto occurrences = static_cast<double>(std::count(history.begin(), history.end(), w));
    const double cache = (occurrences + m_options.gamma) / (static_cast<double>(history.size()) + m_options.gamma * v);
    return (1.0 - m_options.lambda) * ngram_probability(history, w) + m_options.lambda * cache;
}

void cache_ngram_lm::add_ngram_terms(std::span<const token_id> history, std::vector<double>& dist) const
{
    const double v = static_cast<double>(m_vocab.size());
    const double alpha = m_options.alpha;
    for (std::size_t m = 1; m <= m_options.order; ++m) {
        const auto* stats = lookup(m, history);
        const double total = stats ? static_cast<double>(stats->total) : 0.0;
        const double eta = m_options.eta[m - 1];
        auto succ = stats ? stats->successors.begin() : decltype(stats->successors.begin()){};
        const auto succ_end = stats ? stats->successors.end() : succ;
        for (std::size_t w = 0; w < dist.size(); ++w) {
            double count = 0.0;
            if (succ != succ_end && succ->first == w) {
                count = succ->second;
                ++succ;
            }
            dist[w] += eta * ((count + alpha) / (total + alpha * v));
        }
    }
}

std::vector<double> cache_ngram_lm::next_distribution(std::span<const token_id> history) const
{
    const std::size_t vsize = m_vocab.size();
    const double v = static_cast<double>(vsize);
    std::vector<double> ngram(vsize, 0.0);
    add_ngram_terms(history, ngram);

    std::vector<std::uint32_t> occ(vsize, 0);
    for (auto id : history) {
        ++occ[id];
    }
    const double denom = static_cast<double>(history.size()) + m_options.gamma * v;
    std::vector<double> dist(vsize);
    for (std::size_t w = 0; w < vsize; ++w) {
        const double cache = (static_cast<double>(occ[w]) + m_options.gamma) / denom;
        dist[w] = (1.0 - m_options.lambda) * ngram[w] + m_options.lambda * cache;
    }
    return dist;
}

lm_score_result cache_ngram_lm::score(const lm_score_request& request) const
{
    auto history = encode(request.context);
    const auto continuation = encode(request.continuation);
    if (continuation.empty()) {
        throw usage_error("continuation must contain at least one token");
    }
    if (history.size() + continuation.size() > m_options.max_context_tokens) {
        throw overflow_error("context overflow: " + std::to_string(history.size()) + " context + "
                             + std::to_string(continuation.size()) + " continuation tokens exceed window of "
                             + std::to_string(m_options.max_context_tokens));
    }

    const std::size_t vsize = m_vocab.size();
    const double v = static_cast<double>(vsize);
    std::vector<std::uint32_t> occ(vsize, 0);
    for (auto id : history) {
        ++occ[id];
    }

    lm_score_result result;
    result.token_count = continuation.size();
    result.per_token_logprobs.reserve(continuation.size());
    history.reserve(history.size() + continuation.size());
    for (auto w : continuation) {
        const double cache = (static_cast<double>(occ[w]) + m_options.gamma)
                             / (static_cast<double>(history.size()) + m_options.gamma * v);
        const double p = (1.0 - m_options.lambda) * ngram_probability(history, w) + m_options.lambda * cache;
        const double lp = std::log(p);
        result.per_token_logprobs.push_back(lp);
        result.logprob_sum += lp;
        history.push_back(w);
        ++occ[w];
    }
    return result;
}

std::string cache_ngram_lm::generate_greedy(std::string_view prompt, std::size_t max_new_tokens,
                                            std::string_view stop) const
{
    auto history = encode(prompt);
    std::vector<std::string> generated;
    for (std::size_t step = 0; step < max_new_tokens; ++step) {
        while (!history.empty() && history.size() + 1 > m_options.max_context_tokens) {
            history.erase(history.begin());
        }
        if (m_vocab.size() < 2) {
            break;
        }
        const auto dist = next_distribution(history);
        // UNK has no surface form, so it is never emitted
        token_id best = 1;
        for (token_id w = 2; w < dist.size(); ++w) {
            if (dist[w] > dist[best]) {
                best = w;
            }
        }
        history.push_back(best);
        generated.push_back(m_vocab[best]);
        if (!stop.empty()) {
            auto text = detokenize(generated);
            if (auto pos = text.find(stop); pos != std::string::npos) {
                return text.substr(0, pos);
            }
        }
    }
    return detokenize(generated);
}

void cache_ngram_lm::save(const std::filesystem::path& path) const
{
    json j;
    j["format"] = model_format;
    j["version"] = model_format_version;
    j["order"] = m_options.order;
    j["alpha"] = m_options.alpha;
    j["eta"] = m_options.eta;
    j["lambda"] = m_options.lambda;
    j["gamma"] = m_options.gamma;
    j["max_context_tokens"] = m_options.max_context_tokens;
    j["vocab"] = std::vector<std::string>(m_vocab.begin() + 1, m_vocab.end());
    json tables = json::array();
    for (const auto& table : m_tables) {
        std::vector<std::pair<std::vector<token_id>, const history_stats*>> rows;
        for (const auto& [key, stats] : table) {
            std::vector<token_id> hist(key.size() / sizeof(token_id));
            std::memcpy(hist.data(), key.data(), key.size());
            rows.emplace_back(std::move(hist), &stats);
        }
        std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        json jt = json::array();
        for (const auto& [hist, stats] : rows) {
            json succ = json::array();
            for (auto [w, c] : stats->successors) {
                succ.push_back({w, c});
            }
            jt.push_back({{"h", hist}, {"s", std::move(succ)}});
        }
        tables.push_back(std::move(jt));
    }
    j["tables"] = std::move(tables);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw data_error("cannot write model " + path.string());
    }
    out << j.dump() << '\n';
}

cache_ngram_lm cache_ngram_lm::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw data_error("cannot open model " + path.string());
    }
    try {
        const json j = json::parse(in);
        if (j.at("format") != model_format || j.at("version") != model_format_version) {
            throw data_error("not a cache n-gram model (format/version mismatch): " + path.string());
        }
        cache_ngram_options o;
        o.order = j.at("order").get<std::size_t>();
        o.alpha = j.at("alpha").get<double>();
        o.eta = j.at("eta").get<std::vector<double>>();
        o.lambda = j.at("lambda").get<double>();
        o.gamma = j.at("gamma").get<double>();
        o.max_context_tokens = j.at("max_context_tokens").get<std::size_t>();
        auto vocab = j.at("vocab").get<std::vector<std::string>>();
        vocab.insert(vocab.begin(), std::string(unk_token));
        cache_ngram_lm lm(std::move(vocab), std::move(o));

        const auto& tables = j.at("tables");
        if (tables.size() != lm.m_options.order) {
            throw data_error("model table count does not match order");
        }
        for (std::size_t m = 0; m < tables.size(); ++m) {
            for (const auto& row : tables[m]) {
                auto hist = row.at("h").get<std::vector<token_id>>();
                if (hist.size() != m) {
                    throw data_error("history length mismatch in order " + std::to_string(m + 1));
                }
                history_stats stats;
                for (const auto& s : row.at("s")) {
                    auto w = s.at(0).get<token_id>();
                    auto c = s.at(1).get<std::uint32_t>();
                    if (w >= lm.m_vocab.size()) {
                        throw data_error("token id out of range");
                    }
                    stats.successors.emplace_back(w, c);
                    stats.total += c;
                }
                lm.m_tables[m].emplace(history_key(hist), std::move(stats));
            }
        }
        return lm;
    } catch (const json::exception& e) {
        throw data_error("corrupt model " + path.string() + ": " + e.what());
    } catch (const usage_error& e) {
        throw data_error("invalid model " + path.string() + ": " + e.what());
    }
}

}  // namespace ralm
