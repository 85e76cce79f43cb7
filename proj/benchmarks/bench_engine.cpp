#include <benchmark/benchmark.h>

#include "ralm/bm25.hpp"
#include "ralm/cache_ngram_lm.hpp"
#include "ralm/engine.hpp"
#include "support/synthetic.hpp"

namespace {

void BM_EvaluatePerplexity(benchmark::State& state)
{
    auto suite = ralm::testing::make_synthetic_suite(20230131);
    auto index = ralm::inverted_index::build(suite.passages);
    auto lm = ralm::cache_ngram_lm::train(suite.lm_training_text);
    ralm::ralm_config cfg;
    cfg.stride = static_cast<std::size_t>(state.range(0));
    ralm::ralm_engine engine(index, suite.passages, lm, cfg);
    for (auto _ : state) {
        auto report = engine.evaluate_perplexity(suite.eval_texts.front());
        benchmark::DoNotOptimize(report.total_nll);
    }
}
BENCHMARK(BM_EvaluatePerplexity)->Arg(4)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
