#include <benchmark/benchmark.h>

#include "ralm/bm25.hpp"
#include "support/synthetic.hpp"

namespace {

ralm::testing::synthetic_params corpus_params(std::size_t docs)
{
    ralm::testing::synthetic_params p;
    p.corpus_docs = docs;
    p.lm_training_words = 200;
    return p;
}

void BM_IndexBuild(benchmark::State& state)
{
    auto suite = ralm::testing::make_synthetic_suite(7, corpus_params(static_cast<std::size_t>(state.range(0))));
    for (auto _ : state) {
        auto index = ralm::inverted_index::build(suite.passages);
        benchmark::DoNotOptimize(index.size());
    }
    state.counters["passages"] = static_cast<double>(suite.passages.size());
}
BENCHMARK(BM_IndexBuild)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Search(benchmark::State& state)
{
    ralm::testing::synthetic_generator gen(11, corpus_params(static_cast<std::size_t>(state.range(0))));
    auto suite = gen.make_suite();
    auto index = ralm::inverted_index::build(suite.passages);
    std::vector<std::string> queries;
    for (int i = 0; i < 64; ++i) {
        queries.push_back(gen.document_text(gen.random_topic(), 32));
    }
    std::size_t q = 0;
    for (auto _ : state) {
        auto hits = index.search(queries[q++ % queries.size()], 16);
        benchmark::DoNotOptimize(hits.data());
    }
}
BENCHMARK(BM_Search)->Arg(100)->Arg(1000)->Unit(benchmark::kMicrosecond);

}  // namespace
