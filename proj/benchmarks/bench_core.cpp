#include <benchmark/benchmark.h>

#include <algorithm>
#include <vector>

#include "aggrisk/analytics.hpp"
#include "aggrisk/engine.hpp"
#include "aggrisk/financial.hpp"
#include "aggrisk/generator.hpp"
#include "aggrisk/query.hpp"
#include "aggrisk/rng.hpp"

using namespace aggrisk;

namespace {

Dataset bench_dataset(std::uint32_t trials, std::uint32_t layers) {
  GeneratorConfig cfg;
  cfg.seed = 42;
  cfg.num_trials = trials;
  cfg.events_per_trial = 100;
  cfg.num_layers = layers;
  cfg.elts_per_layer = 5;
  cfg.catalogue_size = 100;
  return generate_dataset(cfg);
}

QueryPlan bench_plan(const Dataset& ds, const char* sql) {
  const auto parsed = parse_query(sql);
  auto compiled = compile_query(*parsed.query, ds);
  return *compiled.plan;
}

void BM_InverseBeta(benchmark::State& state) {
  const BetaParams p{2.5, 6.0};
  SplitMix64 rng(1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(inverse_incomplete_beta(rng.next_unit(), p));
  }
}
BENCHMARK(BM_InverseBeta);

void BM_SampleEventLoss(benchmark::State& state) {
  EeltEntry entry;
  entry.mean_loss = 2.5e5;
  entry.max_loss = 1e6;
  entry.sigma_i = 8e4;
  entry.sigma_c = 4e4;
  entry.z_e = 0.37;
  SplitMix64 rng(2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_event_loss(entry, rng.next_unit(), true));
  }
}
BENCHMARK(BM_SampleEventLoss);

void BM_OccurrenceAndAggregateTerms(benchmark::State& state) {
  LayerTerms terms;
  terms.occ_ret = 1e5;
  terms.occ_lim = 1e6;
  terms.agg_ret = 5e5;
  terms.agg_lim = 5e6;
  terms.share = 0.6;
  SplitMix64 rng(3);
  AggregateState agg;
  for (auto _ : state) {
    const double occ = apply_occurrence_terms(rng.next_unit() * 2e6, terms);
    auto [next, inc] = apply_aggregate_terms(agg, occ, terms);
    agg = next;
    benchmark::DoNotOptimize(inc);
  }
}
BENCHMARK(BM_OccurrenceAndAggregateTerms);

void BM_MapCombine(benchmark::State& state) {
  const auto workers = static_cast<unsigned>(state.range(0));
  const Dataset ds = bench_dataset(2000, 100);
  const QueryPlan plan = bench_plan(ds, "SELECT MEAN FROM PORTFOLIO");
  ExecConfig cfg;
  cfg.workers = workers;
  cfg.job_size = 200;
  for (auto _ : state) {
    benchmark::DoNotOptimize(compute_trial_losses(plan, plan.layer_ids, ds, cfg));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ds.yet.size()));
}
BENCHMARK(BM_MapCombine)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_ReduceQuantiles(benchmark::State& state) {
  SplitMix64 rng(4);
  std::vector<double> losses(static_cast<std::size_t>(state.range(0)));
  for (double& x : losses) x = rng.next_unit() * 1e7;
  ReducerSpec spec;
  spec.kind = StatKind::Stats;
  for (auto _ : state) {
    benchmark::DoNotOptimize(reduce_group("TOTAL", losses, spec));
  }
}
BENCHMARK(BM_ReduceQuantiles)->Arg(1000)->Arg(100000);

void BM_CombinedEltBuild(benchmark::State& state) {
  const Dataset ds = bench_dataset(1, static_cast<std::uint32_t>(state.range(0)));
  std::vector<std::pair<EltId, std::vector<EeltEntry>>> input;
  for (const EltMeta& meta : ds.elt_pool) input.emplace_back(meta.elt_id, ds.eelts.at(meta.elt_id));
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_combined_elt(input));
  }
}
BENCHMARK(BM_CombinedEltBuild)->Arg(40)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
