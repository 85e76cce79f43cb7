#include <cstdlib>
#include <filesystem>

#include <httplib.h>

#include "ralm/cache_ngram_lm.hpp"
#include "ralm/error.hpp"
#include "ralm/protocol.hpp"
#include "ralm/text.hpp"

namespace ralm {

using json = nlohmann::json;

void lm_info::validate() const
{
    if (max_context_tokens < 2) {
        throw backend_error("backend '" + name + "' reports max_context_tokens = "
                            + std::to_string(max_context_tokens) + " (must be >= 2)");
    }
}

std::size_t lm_backend::token_count(std::string_view text) const
{
    return lm_token_count(text);
}

std::chrono::milliseconds http_timeout_from_env()
{
    if (const char* v = std::getenv("RALM_HTTP_TIMEOUT_MS"); v != nullptr && *v != '\0') {
        char* end = nullptr;
        const long long ms = std::strtoll(v, &end, 10);
        if (end != nullptr && *end == '\0' && ms > 0) {
            return std::chrono::milliseconds(ms);
        }
        throw usage_error(std::string("RALM_HTTP_TIMEOUT_MS must be a positive integer, got '") + v + "'");
    }
    return std::chrono::milliseconds(30000);
}

http_lm_backend::http_lm_backend(std::string base_url)
    : http_lm_backend(std::move(base_url), http_timeout_from_env())
{
}

http_lm_backend::http_lm_backend(std::string base_url, std::chrono::milliseconds timeout)
    : m_base_url(std::move(base_url)), m_timeout(timeout)
{
    while (!m_base_url.empty() && m_base_url.back() == '/') {
        m_base_url.pop_back();
    }
    if (m_base_url.rfind("http://", 0) != 0 && m_base_url.rfind("https://", 0) != 0) {
        throw usage_error("backend URL must start with http:// or https://, got '" + m_base_url + "'");
    }
}

namespace {

json decode(const httplib::Result& res, const std::string& what)
{
    if (!res) {
        throw backend_error(what + ": " + httplib::to_string(res.error()));
    }
    json body;
    try {
        body = json::parse(res->body);
    } catch (const json::exception&) {
        throw backend_error(what + ": HTTP " + std::to_string(res->status) + " with non-JSON body");
    }
    if (res->status != 200) {
        if (body.is_object() && body.contains("error") && body["error"].is_string()) {
            throw backend_error(body["error"].get<std::string>());
        }
        throw backend_error(what + ": HTTP " + std::to_string(res->status));
    }
    return body;
}

}  // namespace

json http_lm_backend::get(const std::string& path) const
{
    httplib::Client cli(m_base_url);
    cli.set_connection_timeout(m_timeout);
    cli.set_read_timeout(m_timeout);
    return decode(cli.Get(path), "GET " + m_base_url + path);
}

json http_lm_backend::post(const std::string& path, const json& body) const
{
    httplib::Client cli(m_base_url);
    cli.set_connection_timeout(m_timeout);
    cli.set_read_timeout(m_timeout);
    cli.set_write_timeout(m_timeout);
    return decode(cli.Post(path, body.dump(), "application/json"), "POST " + m_base_url + path);
}

lm_info http_lm_backend::info() const
{
    return wire::parse_info(get("/v1/info"));
}

lm_score_result http_lm_backend::score(const lm_score_request& request) const
{
    return wire::parse_score_result(post("/v1/score", wire::to_json(request)));
}

std::string http_lm_backend::generate_greedy(std::string_view prompt, std::size_t max_new_tokens,
                                             std::string_view stop) const
{
    auto body = post("/v1/generate", wire::to_json(wire::generate_request{std::string(prompt), max_new_tokens,
                                                                          std::string(stop)}));
    if (!body.is_object() || !body.contains("text") || !body["text"].is_string()) {
        throw backend_error("protocol: generate response lacks string field 'text'");
    }
    return body["text"].get<std::string>();
}

std::unique_ptr<lm_backend> open_backend(std::string_view spec)
{
    if (spec.rfind("builtin:", 0) == 0) {
        std::filesystem::path path(spec.substr(8));
        return std::make_unique<cache_ngram_lm>(cache_ngram_lm::load(path));
    }
    if (spec.rfind("http:", 0) == 0) {
        auto rest = spec.substr(5);
        // accept both "http:URL" and a bare "http://host:port"
        std::string url = rest.rfind("//", 0) == 0 ? "http:" + std::string(rest) : std::string(rest);
        return std::make_unique<http_lm_backend>(std::move(url));
    }
    throw usage_error("backend must be builtin:PATH or http:URL, got '" + std::string(spec) + "'");
}

}  // namespace ralm
