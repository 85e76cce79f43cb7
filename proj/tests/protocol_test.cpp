#include <gtest/gtest.h>

#include <cstdlib>
#include <future>

#include "ralm/cache_ngram_lm.hpp"
#include "ralm/error.hpp"
#include "support/mock_server.hpp"
#include "support/temp_dir.hpp"

using namespace ralm;
using ralm::testing::scripted_mock;
using ralm::testing::scripted_mock_options;

namespace {

const std::string training_text = "the quick brown fox jumps over the lazy dog .\nthe dog sleeps . a fox runs .";

bool passed(const std::vector<conformance_check>& checks, const std::string& name)
{
    for (const auto& c : checks) {
        if (c.name == name) {
            return c.passed;
        }
    }
    ADD_FAILURE() << "no check named " << name;
    return false;
}

bool all_passed(const std::vector<conformance_check>& checks)
{
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

}  // namespace

TEST(Wire, RoundTripsBodies)
{
    const lm_score_result r{2, {-0.5, -1.25}, -1.75};
    EXPECT_EQ(wire::parse_score_result(wire::to_json(r)), r);
    const lm_score_request q{"ctx", "cont"};
    const auto q2 = wire::parse_score_request(wire::to_json(q));
    EXPECT_EQ(q2.context, "ctx");
    EXPECT_EQ(q2.continuation, "cont");
    const auto info = wire::parse_info(wire::to_json(lm_info{"m", 99}));
    EXPECT_EQ(info.max_context_tokens, 99u);
    const auto g = wire::parse_generate_request(wire::to_json(wire::generate_request{"p", 3, "\n"}));
    EXPECT_EQ(g.max_new_tokens, 3u);
    EXPECT_EQ(g.stop, "\n");
}

TEST(Wire, RejectsSchemaViolations)
{
    using nlohmann::json;
    EXPECT_THROW(wire::parse_info(json{{"name", "m"}, {"max_context_tokens", 0}}), backend_error);
    EXPECT_THROW(wire::parse_info(json{{"name", "m"}}), backend_error);
    EXPECT_THROW(wire::parse_score_result(json{{"token_count", 2}, {"per_token_logprobs", {-1.0}}, {"logprob_sum", -1.0}}),
                 backend_error);
    EXPECT_THROW(wire::parse_score_request(json{{"context", "x"}}), backend_error);
    EXPECT_THROW(wire::parse_score_request(json::array()), backend_error);
}

TEST(Conformance, BuiltinServerPassesEverything)
{
    auto lm = cache_ngram_lm::train(training_text);
    ralm::testing::backend_server srv(lm);
    const auto checks = run_protocol_conformance(srv.url());
    EXPECT_EQ(checks.size(), 7u);
    for (const auto& c : checks) {
        EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
    }
}

TEST(Conformance, ScriptedMockPassesEverything)
{
    scripted_mock mock;
    EXPECT_TRUE(all_passed(run_protocol_conformance(mock.url())));
}

TEST(Conformance, FlagsZeroWindow)
{
    scripted_mock_options o;
    o.info = {{"name", "broken"}, {"max_context_tokens", 0}};
    scripted_mock mock(o);
    EXPECT_FALSE(passed(run_protocol_conformance(mock.url()), "info.schema"));
    http_lm_backend client(mock.url());
    EXPECT_THROW(client.info(), backend_error);
}

TEST(Conformance, FlagsNondeterminism)
{
    scripted_mock_options o;
    o.nondeterministic_scores = true;
    scripted_mock mock(o);
    const auto checks = run_protocol_conformance(mock.url());
    EXPECT_TRUE(passed(checks, "score.schema"));
    EXPECT_FALSE(passed(checks, "score.deterministic"));
}

TEST(Conformance, FlagsSilentTruncation)
{
    scripted_mock_options o;
    o.overflow_returns_200 = true;
    scripted_mock mock(o);
    EXPECT_FALSE(passed(run_protocol_conformance(mock.url()), "score.overflow_400"));
}

TEST(Conformance, FlagsWrongErrorStatus)
{
    scripted_mock_options o;
    o.malformed_returns_500 = true;
    scripted_mock mock(o);
    EXPECT_FALSE(passed(run_protocol_conformance(mock.url()), "score.malformed_400"));
}

TEST(Conformance, FlagsIgnoredBudget)
{
    scripted_mock_options o;
    o.generate_ignores_budget = true;
    scripted_mock mock(o);
    const auto checks = run_protocol_conformance(mock.url());
    EXPECT_TRUE(passed(checks, "generate.schema"));
    EXPECT_FALSE(passed(checks, "generate.zero_budget"));
}

TEST(Conformance, UnreachableServerFailsCleanly)
{
    std::string url;
    {
        scripted_mock mock;
        url = mock.url();
    }
    ::setenv("RALM_HTTP_TIMEOUT_MS", "500", 1);
    const auto checks = run_protocol_conformance(url);
    ::unsetenv("RALM_HTTP_TIMEOUT_MS");
    EXPECT_FALSE(all_passed(checks));
}

TEST(HttpBackend, MatchesBuiltinExactly)
{
    auto lm = cache_ngram_lm::train(training_text);
    ralm::testing::backend_server srv(lm);
    http_lm_backend remote(srv.url());
    EXPECT_EQ(remote.info().max_context_tokens, lm.info().max_context_tokens);
    EXPECT_EQ(remote.info().name, lm.info().name);
    for (const lm_score_request& req : {lm_score_request{"", "the fox"}, lm_score_request{"the lazy", "dog sleeps ."},
                                        lm_score_request{"Q: unseen\n", "fox runs"}}) {
        EXPECT_EQ(remote.score(req), lm.score(req));
    }
    EXPECT_EQ(remote.generate_greedy("the quick", 5, "\n"), lm.generate_greedy("the quick", 5, "\n"));
}

TEST(HttpBackend, SurfacesServerErrorsVerbatim)
{
    auto o = cache_ngram_options{};
    o.max_context_tokens = 4;
    auto lm = cache_ngram_lm::train(training_text, o);
    ralm::testing::backend_server srv(lm);
    http_lm_backend remote(srv.url());
    try {
        remote.score({"the quick brown fox", "jumps"});
        FAIL() << "expected overflow";
    } catch (const backend_error& e) {
        try {
            lm.score({"the quick brown fox", "jumps"});
        } catch (const overflow_error& local) {
            EXPECT_STREQ(e.what(), local.what());
        }
    }
}

TEST(HttpBackend, ConcurrentCallsAgree)
{
    auto lm = cache_ngram_lm::train(training_text);
    ralm::testing::backend_server srv(lm);
    http_lm_backend remote(srv.url());
    const lm_score_request req{"the dog", "sleeps . a fox"};
    std::vector<std::future<lm_score_result>> futures;
    for (int i = 0; i < 4; ++i) {
        futures.push_back(std::async(std::launch::async, [&] { return remote.score(req); }));
    }
    for (auto& f : futures) {
        EXPECT_EQ(f.get(), lm.score(req));
    }
}

TEST(HttpBackend, ConfigurationErrors)
{
    EXPECT_THROW(http_lm_backend("ftp://x"), usage_error);
    ::setenv("RALM_HTTP_TIMEOUT_MS", "abc", 1);
    EXPECT_THROW(http_timeout_from_env(), usage_error);
    ::setenv("RALM_HTTP_TIMEOUT_MS", "1234", 1);
    EXPECT_EQ(http_timeout_from_env().count(), 1234);
    ::unsetenv("RALM_HTTP_TIMEOUT_MS");
    EXPECT_EQ(http_timeout_from_env().count(), 30000);
}

TEST(OpenBackend, ParsesSpecs)
{
    ralm::testing::temp_dir dir;
    auto lm = cache_ngram_lm::train(training_text);
    lm.save(dir / "lm.json");
    auto b = open_backend("builtin:" + (dir / "lm.json").string());
    EXPECT_EQ(b->score({"the", "fox"}), lm.score({"the", "fox"}));
    EXPECT_THROW(open_backend("nonsense"), usage_error);
    EXPECT_THROW(open_backend("builtin:" + (dir / "missing.json").string()), data_error);
}
