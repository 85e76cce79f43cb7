#include "ralm/protocol.hpp"

#include <cmath>

#include <httplib.h>

#include "ralm/error.hpp"

namespace ralm {

using json = nlohmann::json;

namespace wire {

namespace {

const json& field(const json& body, const char* name)
{
    if (!body.is_object()) {
        throw backend_error("protocol: body is not a JSON object");
    }
    auto it = body.find(name);
    if (it == body.end()) {
        throw backend_error(std::string("protocol: missing field '") + name + "'");
    }
    return *it;
}

std::string string_field(const json& body, const char* name)
{
    const auto& v = field(body, name);
    if (!v.is_string()) {
        throw backend_error(std::string("protocol: field '") + name + "' must be a string");
    }
    return v.get<std::string>();
}

std::size_t count_field(const json& body, const char* name)
{
    const auto& v = field(body, name);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw backend_error(std::string("protocol: field '") + name + "' must be a nonnegative integer");
    }
    return v.get<std::size_t>();
}

}  // namespace

json to_json(const lm_info& info)
{
    return {{"name", info.name}, {"max_context_tokens", info.max_context_tokens}};
}

json to_json(const lm_score_request& request)
{
    return {{"context", request.context}, {"continuation", request.continuation}};
}

json to_json(const lm_score_result& result)
{
    return {{"token_count", result.token_count},
            {"per_token_logprobs", result.per_token_logprobs},
            {"logprob_sum", result.logprob_sum}};
}

json to_json(const generate_request& request)
{
    return {{"prompt", request.prompt}, {"max_new_tokens", request.max_new_tokens}, {"stop", request.stop}};
}

lm_info parse_info(const json& body)
{
    lm_info info{string_field(body, "name"), count_field(body, "max_context_tokens")};
    info.validate();
    return info;
}

lm_score_request parse_score_request(const json& body)
{
    return {string_field(body, "context"), string_field(body, "continuation")};
}

lm_score_result parse_score_result(const json& body)
{
    lm_score_result r;
    r.token_count = count_field(body, "token_count");
    const auto& lps = field(body, "per_token_logprobs");
    if (!lps.is_array()) {
        throw backend_error("protocol: 'per_token_logprobs' must be an array");
    }
    for (const auto& v : lps) {
        if (!v.is_number()) {
            throw backend_error("protocol: 'per_token_logprobs' must hold numbers");
        }
        r.per_token_logprobs.push_back(v.get<double>());
    }
    const auto& sum = field(body, "logprob_sum");
    if (!sum.is_number()) {
        throw backend_error("protocol: 'logprob_sum' must be a number");
    }
    r.logprob_sum = sum.get<double>();
    if (r.per_token_logprobs.size() != r.token_count) {
        throw backend_error("protocol: token_count does not match per_token_logprobs length");
    }
    return r;
}

generate_request parse_generate_request(const json& body)
{
    return {string_field(body, "prompt"), count_field(body, "max_new_tokens"), string_field(body, "stop")};
}

}  // namespace wire

namespace {

void reply(httplib::Response& res, int status, const json& body)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

template <typename Handler>
void guarded(httplib::Response& res, Handler&& handler)
{
    try {
        reply(res, 200, handler());
    } catch (const json::exception& e) {
        reply(res, 400, {{"error", std::string("malformed request: ") + e.what()}});
    } catch (const error& e) {
        reply(res, 400, {{"error", e.what()}});
    } catch (const std::exception& e) {
        reply(res, 500, {{"error", e.what()}});
    }
}

}  // namespace

void mount_protocol(httplib::Server& server, const lm_backend& backend)
{
    server.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
        reply(res, 200, {{"ok", true}});
    });
    server.Get("/v1/info", [&backend](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] { return wire::to_json(backend.info()); });
    });
    server.Post("/v1/score", [&backend](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto request = wire::parse_score_request(json::parse(req.body));
            return wire::to_json(backend.score(request));
        });
    });
    server.Post("/v1/generate", [&backend](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto request = wire::parse_generate_request(json::parse(req.body));
            return json{{"text", backend.generate_greedy(request.prompt, request.max_new_tokens, request.stop)}};
        });
    });
}

// ---------------------------------------------------------------------------
// conformance suite

namespace {

struct raw_response {
    int status = 0;
    json body;
    std::string error;
};

raw_response raw_call(httplib::Client& cli, const std::string& method, const std::string& path,
                      const std::string& payload = {})
{
    raw_response out;
    auto res = method == "GET" ? cli.Get(path) : cli.Post(path, payload, "application/json");
    if (!res) {
        out.error = "transport error: " + httplib::to_string(res.error());
        return out;
    }
    out.status = res->status;
    try {
        out.body = json::parse(res->body);
    } catch (const json::exception& e) {
        out.error = std::string("response is not JSON: ") + e.what();
    }
    return out;
}

bool is_error_body(const raw_response& r)
{
    return r.body.is_object() && r.body.contains("error") && r.body["error"].is_string();
}

}  // namespace

std::vector<conformance_check> run_protocol_conformance(const std::string& base_url)
{
    httplib::Client cli(base_url);
    const auto timeout = http_timeout_from_env();
    cli.set_connection_timeout(timeout);
    cli.set_read_timeout(timeout);
    cli.set_write_timeout(timeout);

    std::vector<conformance_check> checks;
    auto record = [&](std::string name, bool ok, std::string detail = {}) {
        checks.push_back({std::move(name), ok, std::move(detail)});
    };

    // info
    std::size_t window = 0;
    {
        auto r = raw_call(cli, "GET", "/v1/info");
        if (!r.error.empty() || r.status != 200) {
            record("info.schema", false, r.error.empty() ? "status " + std::to_string(r.status) : r.error);
        } else {
            try {
                window = wire::parse_info(r.body).max_context_tokens;
                record("info.schema", true);
            } catch (const error& e) {
                record("info.schema", false, e.what());
            }
        }
    }

    // score schema + determinism
    const json score_body = wire::to_json(lm_score_request{"the quick brown fox", " jumps over the lazy dog"});
    {
        auto a = raw_call(cli, "POST", "/v1/score", score_body.dump());
        auto b = raw_call(cli, "POST", "/v1/score", score_body.dump());
        bool schema_ok = false;
        std::string detail;
        lm_score_result ra;
        if (!a.error.empty() || a.status != 200) {
            detail = a.error.empty() ? "status " + std::to_string(a.status) : a.error;
        } else {
            try {
                ra = wire::parse_score_result(a.body);
                double sum = 0.0;
                bool proper = ra.token_count >= 1;
                for (double lp : ra.per_token_logprobs) {
                    sum += lp;
                    proper = proper && std::isfinite(lp) && lp <= 1e-9;
                }
                if (!proper) {
                    detail = "log-probabilities must be finite, <= 0, and at least one";
                } else if (std::abs(sum - ra.logprob_sum) > 1e-6 * std::max(1.0, std::abs(sum))) {
                    detail = "logprob_sum differs from the sum of per_token_logprobs";
                } else {
                    schema_ok = true;
                }
            } catch (const error& e) {
                detail = e.what();
            }
        }
        record("score.schema", schema_ok, detail);

        bool deterministic = false;
        if (schema_ok && b.error.empty() && b.status == 200) {
            try {
                deterministic = wire::parse_score_result(b.body) == ra;
            } catch (const error&) {
            }
        }
        record("score.deterministic", deterministic, deterministic ? "" : "repeated request gave a different result");
    }

    // overflow
    {
        std::string long_text;
        const std::size_t n = (window == 0 ? 4096 : window) + 8;
        for (std::size_t i = 0; i < n; ++i) {
            long_text += " a";
        }
        auto r = raw_call(cli, "POST", "/v1/score", wire::to_json(lm_score_request{"", long_text}).dump());
        const bool ok = r.status == 400 && is_error_body(r);
        record("score.overflow_400", ok, ok ? "" : "expected HTTP 400 {error}, got status " + std::to_string(r.status));
    }

    // malformed
    {
        auto r1 = raw_call(cli, "POST", "/v1/score", "{not json");
        auto r2 = raw_call(cli, "POST", "/v1/score", json{{"context", "x"}}.dump());
        const bool ok = r1.status == 400 && is_error_body(r1) && r2.status == 400 && is_error_body(r2);
        record("score.malformed_400", ok, ok ? "" : "malformed bodies must yield HTTP 400 {error}");
    }

    // generate
    {
        auto r = raw_call(cli, "POST", "/v1/generate",
                          wire::to_json(wire::generate_request{"Answer these questions:\nQ: x\nA:", 4, "\n"}).dump());
        const bool schema = r.status == 200 && r.body.is_object() && r.body.contains("text") && r.body["text"].is_string();
        record("generate.schema", schema, schema ? "" : "expected 200 {text}");

        auto z = raw_call(cli, "POST", "/v1/generate", wire::to_json(wire::generate_request{"x", 0, "\n"}).dump());
        const bool empty = z.status == 200 && z.body.is_object() && z.body.value("text", std::string("?")).empty();
        record("generate.zero_budget", empty, empty ? "" : "max_new_tokens=0 must return empty text");
    }
    return checks;
}

}  // namespace ralm
