#include <benchmark/benchmark.h>

#include <random>

#include "simarena/corpus.hpp"
#include "simarena/embedding.hpp"
#include "simarena/index.hpp"
#include "simarena/metrics.hpp"
#include "simarena/synthetic.hpp"

using namespace simarena;

namespace {

std::vector<IndexedItem> random_items(std::size_t n, std::size_t dim) {
  std::mt19937_64 rng(42);
  std::normal_distribution<float> nd;
  std::vector<IndexedItem> out;
  for (std::size_t i = 0; i < n; ++i) {
    EmbeddingVector v;
    v.model_id = "bench";
    for (std::size_t d = 0; d < dim; ++d) v.values.push_back(nd(rng));
    out.push_back({"item-" + std::to_string(i), "", std::move(v), static_cast<Timestamp>(i), ItemKind::kPair});
  }
  return out;
}

void BM_IndexSearch(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  VectorIndex idx;
  idx.add(random_items(n, 256));
  const auto q = random_items(1, 256)[0].vector;
  RetrievalQuery rq;
  rq.min_cosine = 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(idx.search(q, rq));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_IndexSearch)->Arg(1000)->Arg(10000)->Arg(50000);

void BM_Metrics(benchmark::State& state) {
  const auto cand = tokenize("周末要不要一起去爬山 then grab hotpot after, my treat this time");
  const auto ref = tokenize("周末去爬山吧 and hotpot after, I will pay this time for sure");
  for (auto _ : state) {
    benchmark::DoNotOptimize(bleu(cand, ref, 2));
    benchmark::DoNotOptimize(rouge_l(cand, ref));
    benchmark::DoNotOptimize(token_precision_recall(cand, ref));
  }
}
BENCHMARK(BM_Metrics);

void BM_Pairing(benchmark::State& state) {
  SynthOptions opts;
  opts.years = static_cast<int>(state.range(0));
  const auto events = make_synthetic(opts).events;
  const auto cfg = PipelineConfig::defaults();
  for (auto _ : state) benchmark::DoNotOptimize(build_pairs(events, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(events.size()));
}
BENCHMARK(BM_Pairing)->Arg(1)->Arg(10);

}  // namespace
BENCHMARK_MAIN();
