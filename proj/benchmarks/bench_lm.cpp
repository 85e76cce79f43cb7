#include <benchmark/benchmark.h>

#include "ralm/cache_ngram_lm.hpp"
#include "support/synthetic.hpp"

namespace {

void BM_Score(benchmark::State& state)
{
    ralm::testing::synthetic_generator gen(3);
    auto suite = gen.make_suite();
    auto lm = ralm::cache_ngram_lm::train(suite.lm_training_text);
    ralm::lm_score_request req{gen.document_text(0, static_cast<std::size_t>(state.range(0))),
                               gen.document_text(0, 16)};
    for (auto _ : state) {
        auto r = lm.score(req);
        benchmark::DoNotOptimize(r.per_token_logprobs.data());
    }
}
BENCHMARK(BM_Score)->Arg(64)->Arg(512)->Unit(benchmark::kMicrosecond);

void BM_Train(benchmark::State& state)
{
    auto suite = ralm::testing::make_synthetic_suite(5);
    for (auto _ : state) {
        auto lm = ralm::cache_ngram_lm::train(suite.lm_training_text);
        benchmark::DoNotOptimize(lm.vocab_size());
    }
}
BENCHMARK(BM_Train)->Unit(benchmark::kMillisecond);

}  // namespace
