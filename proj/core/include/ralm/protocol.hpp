#pragma once

#include <chrono>
#include <string>
#include <vector>

#include <json.hpp>

#include "ralm/lm.hpp"

namespace httplib {
class Server;
}

namespace ralm {

// JSON bodies of the scoring protocol:
//   GET  /v1/info     -> {name, max_context_tokens}
//   POST /v1/score    {context, continuation} -> {token_count, per_token_logprobs, logprob_sum}
//   POST /v1/generate {prompt, max_new_tokens, stop} -> {text}
//   errors            -> HTTP 400 {error}
namespace wire {

nlohmann::json to_json(const lm_info& info);
nlohmann::json to_json(const lm_score_request& request);
nlohmann::json to_json(const lm_score_result& result);

/// Parsers throw backend_error describing the first schema violation.
lm_info parse_info(const nlohmann::json& body);
lm_score_request parse_score_request(const nlohmann::json& body);
lm_score_result parse_score_result(const nlohmann::json& body);

struct generate_request {
    std::string prompt;
    std::size_t max_new_tokens = 0;
    std::string stop;
};
nlohmann::json to_json(const generate_request& request);
generate_request parse_generate_request(const nlohmann::json& body);

}  // namespace wire

/// Client for a remote model served over the scoring protocol. Each call
/// opens its own connection, so concurrent calls are fine.
class http_lm_backend final : public lm_backend {
  public:
    /// `base_url` like "http://127.0.0.1:8080". Timeout defaults to
    /// RALM_HTTP_TIMEOUT_MS or 30000 ms.
    explicit http_lm_backend(std::string base_url);
    http_lm_backend(std::string base_url, std::chrono::milliseconds timeout);

    lm_info info() const override;
    lm_score_result score(const lm_score_request& request) const override;
    std::string generate_greedy(std::string_view prompt, std::size_t max_new_tokens,
                                std::string_view stop) const override;

    const std::string& base_url() const noexcept { return m_base_url; }

  private:
    nlohmann::json get(const std::string& path) const;
    nlohmann::json post(const std::string& path, const nlohmann::json& body) const;

    std::string m_base_url;
    std::chrono::milliseconds m_timeout;
};

std::chrono::milliseconds http_timeout_from_env();

/// Registers the protocol endpoints (plus GET /v1/health) on `server`,
/// answering from `backend`. The backend must outlive the server.
void mount_protocol(httplib::Server& server, const lm_backend& backend);

struct conformance_check {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Black-box protocol checks against a live server: response schemas,
/// deterministic scoring, and HTTP 400 for overflow and malformed requests.
std::vector<conformance_check> run_protocol_conformance(const std::string& base_url);

}  // namespace ralm
