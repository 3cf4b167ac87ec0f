// Microbenchmarks for the kernels that dominate wall time: the translation
// distance, candidate ranking, community detection, and a whole training
// step. Fixtures are built once and reused across iterations; seeds vary per
// iteration where repeating identical work would flatter the numbers.
#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "fewkg/eval.hpp"
#include "fewkg/kg.hpp"
#include "fewkg/model.hpp"
#include "fewkg/nullmodels.hpp"
#include "fewkg/optim.hpp"
#include "fewkg/rng.hpp"
#include "fewkg/taskgen.hpp"

namespace {

using namespace fewkg;

Vec random_vec(Rng& rng, int n) {
    Vec v(static_cast<size_t>(n));
    for (double& x : v) x = rng.next_double() * 2.0 - 1.0;
    return v;
}

// Ring communities with random intra chords, sparse inter edges, and a few
// dozen task relations of intra-community pairs. Shaped like the synthetic
// training fixtures, big enough that per-step costs dominate setup noise.
struct BenchFixture {
    KnowledgeGraph g;
    EntityTypeTable types;
    RelationSplit split;
    std::vector<int> lcc;

    BenchFixture() {
        constexpr int kEntities = 2000;
        constexpr int kCommunities = 20;
        constexpr int kPer = kEntities / kCommunities;
        constexpr int kTaskRelations = 10;
        Rng rng(414243);
        for (int i = 0; i < kEntities; ++i) g.entities.intern("n" + std::to_string(i));
        g.relations.intern("bg");
        for (int c = 0; c < kCommunities; ++c) {
            const int base = c * kPer;
            for (int i = 0; i < kPer; ++i) {
                g.triples.push_back({base + i, 0, base + (i + 1) % kPer});
                for (int k = 0; k < 3; ++k)
                    g.triples.push_back(
                        {base + i, 0,
                         base + static_cast<int>(rng.next_below(kPer))});
            }
        }
        for (int i = 0; i < kEntities / 10; ++i)
            g.triples.push_back({static_cast<int>(rng.next_below(kEntities)), 0,
                                 static_cast<int>(rng.next_below(kEntities))});
        for (int r = 0; r < kTaskRelations; ++r) {
            const int rel = g.relations.intern("task" + std::to_string(r));
            std::vector<Pair>& pairs = g.task_pairs[rel];
            const int base = (r % kCommunities) * kPer;
            while (pairs.size() < 50) {
                const int h = base + static_cast<int>(rng.next_below(kPer));
                const int t = base + static_cast<int>(rng.next_below(kPer));
                if (h != t) pairs.push_back({h, t});
            }
            split.train.push_back(rel);
        }
        g.rebuild_indices();
        types = EntityTypeTable::from_graph(g);
        lcc = largest_connected_component(g);
    }
};

const BenchFixture& fixture() {
    static const BenchFixture f;
    return f;
}

void BM_TranseDistance(benchmark::State& state, Norm norm) {
    Rng rng(7);
    const Vec h = random_vec(rng, 100);
    const Vec r = random_vec(rng, 100);
    const Vec t = random_vec(rng, 100);
    for (auto _ : state) benchmark::DoNotOptimize(transe_distance(h, r, t, norm));
}
BENCHMARK_CAPTURE(BM_TranseDistance, l2, Norm::L2);
BENCHMARK_CAPTURE(BM_TranseDistance, l1, Norm::L1);

void BM_RankQuery(benchmark::State& state) {
    Rng rng(11);
    std::vector<double> scores(static_cast<size_t>(state.range(0)));
    for (double& s : scores) s = rng.next_double();
    const size_t true_index = scores.size() / 2;
    for (auto _ : state) benchmark::DoNotOptimize(rank_query(scores, true_index));
}
BENCHMARK(BM_RankQuery)->Arg(1000)->Arg(10000);

void BM_Louvain(benchmark::State& state) {
    const BenchFixture& f = fixture();
    for (auto _ : state) benchmark::DoNotOptimize(louvain(f.g, f.lcc));
}
BENCHMARK(BM_Louvain)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state, Variant v) {
    const BenchFixture& f = fixture();
    HyperParams hp;
    hp.d = 32;
    hp.gamma = 1.0;
    hp.neg_ratio = 2;
    TrainConfig cfg;
    cfg.lr = 0.01;
    cfg.batch_tasks = 32;
    cfg.k_shot = 3;
    cfg.queries_per_task = 5;
    cfg.seed = 9;
    ModelState s = ModelState::init(v, f.g.entities.size(), f.g.relations.size(), hp,
                                    derive_seed(cfg.seed, "init"));
    AdamState adam = AdamState::zeros_like(s);
    uint64_t step = 0;
    for (auto _ : state)
        benchmark::DoNotOptimize(train_step(s, adam, f.g, f.types, f.split, cfg, hp,
                                            derive_seed(cfg.seed, "step", step++)));
}
BENCHMARK_CAPTURE(BM_TrainStep, shared_embed, Variant::SharedEmbed)
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_TrainStep, metar, Variant::MetaR)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
