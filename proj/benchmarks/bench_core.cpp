#include <benchmark/benchmark.h>

#include <vector>

#include "betae/beta_math.hpp"
#include "betae/evaluator.hpp"
#include "betae/kg.hpp"
#include "betae/model.hpp"
#include "betae/query.hpp"
#include "betae/rng.hpp"

namespace {

using namespace betae;

KnowledgeGraph bench_graph(std::uint32_t entities, std::uint32_t relations) {
  Rng rng(11);
  std::vector<Triple> triples;
  for (std::size_t i = 0; i < entities * 6; ++i) {
    triples.push_back(Triple{static_cast<EntityId>(rng.below(entities)),
                             static_cast<RelationId>(rng.below(relations)),
                             static_cast<EntityId>(rng.below(entities))});
  }
  return build_graph(std::move(triples), entities, relations);
}

Model bench_model(std::uint32_t n, std::uint32_t hidden) {
  ModelConfig cfg;
  cfg.n = n;
  cfg.hidden_dim = hidden;
  return Model(cfg, 200, 8, 12);
}

void BM_Digamma(benchmark::State& state) {
  double x = 0.07;
  for (auto _ : state) {
    benchmark::DoNotOptimize(digamma(x));
    x += 0.373;
    if (x > 50.0) x = 0.07;
  }
}
BENCHMARK(BM_Digamma);

void BM_KlDivergence(benchmark::State& state) {
  Rng rng(13);
  std::vector<BetaParams> ps, qs;
  for (int i = 0; i < 1024; ++i) {
    ps.push_back({0.05 + rng.real() * 19.95, 0.05 + rng.real() * 19.95});
    qs.push_back({0.05 + rng.real() * 19.95, 0.05 + rng.real() * 19.95});
  }
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(kl(ps[i & 1023], qs[i & 1023]));
    ++i;
  }
}
BENCHMARK(BM_KlDivergence);

void BM_KlGradient(benchmark::State& state) {
  Rng rng(14);
  std::vector<BetaParams> ps, qs;
  for (int i = 0; i < 1024; ++i) {
    ps.push_back({0.05 + rng.real() * 19.95, 0.05 + rng.real() * 19.95});
    qs.push_back({0.05 + rng.real() * 19.95, 0.05 + rng.real() * 19.95});
  }
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(kl_grad(ps[i & 1023], qs[i & 1023]));
    ++i;
  }
}
BENCHMARK(BM_KlGradient);

void BM_Project(benchmark::State& state) {
  const Model model = bench_model(16, static_cast<std::uint32_t>(state.range(0)));
  const BetaVector in = model.embed_entity(0);
  RelationId r = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.project(in, r));
    r = (r + 1) % 8;
  }
}
BENCHMARK(BM_Project)->Arg(64)->Arg(512);

void BM_Intersect(benchmark::State& state) {
  const Model model = bench_model(16, 64);
  std::vector<BetaVector> inputs;
  for (EntityId v = 0; v < static_cast<EntityId>(state.range(0)); ++v) {
    inputs.push_back(model.embed_entity(v));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.intersect(inputs));
  }
}
BENCHMARK(BM_Intersect)->Arg(2)->Arg(3)->Arg(5);

void BM_EmbedQuery(benchmark::State& state) {
  const Model model = bench_model(16, 64);
  const QueryGraph q =
      parse_query("(p 2 (and (p 0 (e 1)) (not (p 1 (e 4)))))");
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.embed_query(q));
  }
}
BENCHMARK(BM_EmbedQuery);

void BM_EvaluateSymbolic(benchmark::State& state) {
  const KnowledgeGraph g = bench_graph(512, 8);
  const QueryGraph q = parse_query("(p 0 (p 1 (e 7)))");
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate(q, g));
  }
}
BENCHMARK(BM_EvaluateSymbolic);

void BM_RankAllEntities(benchmark::State& state) {
  const Model model = bench_model(16, 64);
  const auto entities = model.all_entity_embeddings();
  const QueryGraph q = parse_query("(p 0 (e 1))");
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        score_all_entities(model, entities, q, /*use_dnf=*/false));
  }
}
BENCHMARK(BM_RankAllEntities);

}  // namespace

BENCHMARK_MAIN();
