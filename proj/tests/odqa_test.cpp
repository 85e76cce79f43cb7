#include <gtest/gtest.h>

#include <map>

#include "ralm/cache_ngram_lm.hpp"
#include "ralm/error.hpp"
#include "ralm/odqa.hpp"
#include "support/appendix_prompts.hpp"
#include "support/fixtures.hpp"
#include "support/temp_dir.hpp"

using namespace ralm;

namespace {

// Answers any prompt ending in a known question with the stored answer.
class answer_key_backend final : public lm_backend {
  public:
    explicit answer_key_backend(std::map<std::string, std::string> key) : m_key(std::move(key)) {}
    lm_info info() const override { return {"answer-key", 4096}; }
    lm_score_result score(const lm_score_request&) const override { throw backend_error("not supported"); }
    std::string generate_greedy(std::string_view prompt, std::size_t, std::string_view) const override
    {
        for (const auto& [q, a] : m_key) {
            if (prompt.find("Q: " + q + "\nA:") != std::string_view::npos) {
                return " " + a + "\n";
            }
        }
        throw backend_error("unknown question");
    }

  private:
    std::map<std::string, std::string> m_key;
};

}  // namespace

TEST(Prompts, ClosedBookMatchesAppendix)
{
    EXPECT_EQ(build_closed_book_prompt(ralm::testing::appendix_question), ralm::testing::appendix_closed_book);
    EXPECT_EQ(build_closed_book_prompt("  " + ralm::testing::appendix_question + " \n"),
              ralm::testing::appendix_closed_book);
    EXPECT_THROW(build_closed_book_prompt(" \t"), usage_error);
}

TEST(Prompts, OpenBookMatchesAppendix)
{
    const std::vector<titled_passage> blocks = {
        {ralm::testing::appendix_title_1, ralm::testing::appendix_text_1},
        {ralm::testing::appendix_title_2, ralm::testing::appendix_text_2},
    };
    EXPECT_EQ(build_open_book_prompt(blocks, ralm::testing::appendix_question), ralm::testing::appendix_open_book);
}

TEST(Prompts, OpenBookSingleAndEmpty)
{
    const std::vector<titled_passage> one = {{"T", "body"}};
    EXPECT_EQ(build_open_book_prompt(one, "q?"),
              "T\n\nbody\n\nBased on these texts, answer these questions:\nQ: q?\nA:");
    EXPECT_THROW(build_open_book_prompt({}, "q?"), usage_error);
}

TEST(ExactMatch, Normalization)
{
    const std::vector<std::string> tower = {"eiffel tower"};
    EXPECT_EQ(exact_match("The Eiffel Tower.", tower), 1);
    const std::vector<std::string> paris = {"Paris"};
    EXPECT_EQ(exact_match("Paris, France", paris), 0);
    EXPECT_EQ(exact_match("", paris), 0);
    EXPECT_EQ(exact_match("  an   apple! ", std::vector<std::string>{"x", "Apple"}), 1);
    EXPECT_EQ(normalize_answer("The  Theory of a Thing"), "theory of thing");
    EXPECT_EQ(normalize_answer("anthem"), "anthem");
}

TEST(ExactMatch, Symmetric)
{
    const std::vector<std::string> samples = {"The Eiffel Tower.", "eiffel tower", "Paris", "Paris, France",
                                              "",  "a",           "An Apple", "apple!", "the the"};
    for (const auto& a : samples) {
        for (const auto& b : samples) {
            EXPECT_EQ(exact_match(a, std::vector<std::string>{b}), exact_match(b, std::vector<std::string>{a}))
                << a << " | " << b;
        }
    }
}

TEST(EvaluateQa, EmptyItems)
{
    answer_key_backend backend(std::map<std::string, std::string>{});
    const auto r = evaluate_qa({}, backend, {});
    EXPECT_EQ(r.exact_match, 0.0);
    EXPECT_TRUE(r.results.empty());
}

TEST(EvaluateQa, OracleBackendScoresFull)
{
    answer_key_backend backend(std::map<std::string, std::string>{{"Capital of France?", "Paris"}, {"Tallest tower?", "The Eiffel Tower"}});
    const std::vector<qa_item> items = {{"Capital of France?", {"Paris", "paris city"}},
                                        {"Tallest tower?", {"eiffel tower"}}};
    const auto r = evaluate_qa(items, backend, {});
    EXPECT_DOUBLE_EQ(r.exact_match, 100.0);
    EXPECT_EQ(r.results[0].prediction, "Paris");
    EXPECT_EQ(r.results[1].prompt, "Answer these questions:\nQ: Tallest tower?\nA:");
}

TEST(EvaluateQa, GenerationFailureIsAnnotated)
{
    answer_key_backend backend(std::map<std::string, std::string>{{"Known?", "yes"}});
    const std::vector<qa_item> items = {{"Unknown?", {"no"}}, {"Known?", {"yes"}}};
    const auto r = evaluate_qa(items, backend, {});
    ASSERT_TRUE(r.results[0].error.has_value());
    EXPECT_EQ(r.results[0].exact_match, 0);
    EXPECT_EQ(r.results[1].exact_match, 1);
    EXPECT_DOUBLE_EQ(r.exact_match, 50.0);
    EXPECT_EQ(r.to_json().at("results").size(), 2u);
}

TEST(EvaluateQa, OpenBookUsesRetrievedTitles)
{
    std::vector<passage> ps(2);
    ps[0] = {0, "doc-a", std::string("Zorb Facts"), {0, 5}, "zorbs are blue and live on quenmoor"};
    ps[1] = {1, "doc-b", std::nullopt, {0, 3}, "gravel roads crumble"};
    const passage_set set(ps);
    const auto index = inverted_index::build(set);
    answer_key_backend backend(std::map<std::string, std::string>{{"what color are zorbs?", "blue"}, {"nothing matches here?", "x"}});
    qa_options o;
    o.use_retrieval = true;
    const std::vector<qa_item> items = {{"what color are zorbs?", {"blue"}}, {"nothing matches here?", {"x"}}};
    const auto r = evaluate_qa(items, backend, o, &index, &set);
    EXPECT_EQ(r.results[0].passages_used, std::vector<std::size_t>{0});
    EXPECT_EQ(r.results[0].prompt, "Zorb Facts\n\nzorbs are blue and live on quenmoor\n\n"
                                   "Based on these texts, answer these questions:\nQ: what color are zorbs?\nA:");
    EXPECT_EQ(r.results[1].prompt, build_closed_book_prompt("nothing matches here?"));
    o.num_docs = 0;
    EXPECT_THROW(evaluate_qa(items, backend, o, &index, &set), usage_error);
    o.num_docs = 2;
    EXPECT_THROW(evaluate_qa(items, backend, o), usage_error);
}

TEST(EvaluateQa, RetrievalHelpsCopyingModel)
{
    // answers repeat inside their passage; a cache-heavy model copies the
    // most frequent context token
    const std::vector<std::string> texts = {
        "the vorn river is famous for its fish vorn vorn vorn vorn",
        "the talpa mountain is famous for its snow talpa talpa talpa talpa",
        "the ximen city is famous for its bridges ximen ximen ximen ximen",
    };
    const std::vector<qa_item> items = {
        {"which river is famous for its fish ?", {"vorn"}},
        {"which mountain is famous for its snow ?", {"talpa"}},
        {"which city is famous for its bridges ?", {"ximen"}},
    };
    std::string lm_text = "Q: which is it ?\nA: it\n";
    for (const auto& t : texts) {
        lm_text += t + "\n";
    }
    const auto set = ralm::testing::passages_from(texts);
    const auto index = inverted_index::build(set);
    cache_ngram_options lo;
    lo.lambda = 0.9;
    const auto lm = cache_ngram_lm::train(lm_text, lo);

    qa_options closed;
    closed.max_new_tokens = 1;
    qa_options open = closed;
    open.use_retrieval = true;
    open.num_docs = 1;
    const auto c = evaluate_qa(items, lm, closed);
    const auto o = evaluate_qa(items, lm, open, &index, &set);
    EXPECT_GE(o.exact_match, c.exact_match);
    EXPECT_GT(o.exact_match, 0.0);
}

TEST(LoadQuestions, ParsesAndValidates)
{
    ralm::testing::temp_dir dir;
    ralm::testing::write_file(dir / "q.jsonl", "{\"question\":\"a?\",\"answers\":[\"x\",\"y\"]}\n\n"
                                               "{\"question\":\"b?\",\"answers\":[\"z\"]}\n");
    const auto items = load_questions(dir / "q.jsonl");
    ASSERT_EQ(items.size(), 2u);
    EXPECT_EQ(items[0].gold_answers.size(), 2u);
    ralm::testing::write_file(dir / "bad.jsonl", "{\"question\":\"a?\",\"answers\":[]}\n");
    EXPECT_THROW(load_questions(dir / "bad.jsonl"), data_error);
    ralm::testing::write_file(dir / "bad2.jsonl", "{\"question\":\"\",\"answers\":[\"x\"]}\n");
    EXPECT_THROW(load_questions(dir / "bad2.jsonl"), data_error);
}
