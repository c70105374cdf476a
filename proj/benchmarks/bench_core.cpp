#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "acqa/graph.hpp"
#include "acqa/inference.hpp"
#include "acqa/models.hpp"
#include "acqa/rng.hpp"
#include "acqa/textio.hpp"

using namespace acqa;

namespace {

std::string sample_paragraph() {
    std::string text;
    for (int i = 0; i < 40; ++i) {
        text += "The Grotto, at Notre Dame, is a Marian place of prayer and reflection. ";
    }
    return text;
}

CriticModel bench_critic(int dim) {
    CriticModel critic;
    critic.embed_dim = dim;
    critic.hidden_dim = dim;
    critic.head_dim1 = 2 * dim;
    critic.head_dim2 = dim;
    for (int i = 0; i < 200; ++i) {
        critic.vocab.add("t" + std::to_string(i));
    }
    Rng rng(1);
    critic.init(rng);
    return critic;
}

std::vector<int> random_ids(Rng& rng, int n) {
    std::vector<int> ids;
    for (int i = 0; i < n; ++i) {
        ids.push_back(3 + static_cast<int>(rng.bounded(200)));
    }
    return ids;
}

} // namespace

static void BM_Tokenize(benchmark::State& state) {
    const std::string text = sample_paragraph();
    for (auto _ : state) {
        benchmark::DoNotOptimize(tokenize(text));
    }
    state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) * text.size());
}
BENCHMARK(BM_Tokenize);

static void BM_SelectSpan(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng(7);
    std::vector<float> starts(n), ends(n);
    for (auto& v : starts) v = rng.uniform_float(-3.0f, 3.0f);
    for (auto& v : ends) v = rng.uniform_float(-3.0f, 3.0f);
    for (auto _ : state) {
        benchmark::DoNotOptimize(select_span(starts, ends, ExclusionSet{}, 30));
    }
}
BENCHMARK(BM_SelectSpan)->Arg(50)->Arg(200)->Arg(400);

static void BM_CriticForward(benchmark::State& state) {
    const CriticModel critic = bench_critic(static_cast<int>(state.range(0)));
    Rng rng(3);
    std::vector<int> query = {Vocabulary::kBosId};
    for (int id : random_ids(rng, 24)) {
        query.push_back(id);
    }
    const std::vector<int> span = random_ids(rng, 4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(critic_forward(critic, query, span));
    }
}
BENCHMARK(BM_CriticForward)->Arg(32)->Arg(64);

static void BM_CriticForwardBackward(benchmark::State& state) {
    CriticModel critic = bench_critic(static_cast<int>(state.range(0)));
    Rng rng(3);
    std::vector<int> query = {Vocabulary::kBosId};
    for (int id : random_ids(rng, 24)) {
        query.push_back(id);
    }
    const std::vector<int> span = random_ids(rng, 4);
    for (auto _ : state) {
        Graph g(&critic.params);
        g.backward(g.binary_cross_entropy(critic_forward_nodes(g, critic, query, span), 1));
        benchmark::ClobberMemory();
    }
}
BENCHMARK(BM_CriticForwardBackward)->Arg(32)->Arg(64);

static void BM_AdamStep(benchmark::State& state) {
    CriticModel critic = bench_critic(32);
    Rng rng(5);
    for (auto& e : critic.params.entries()) {
        for (auto& gv : e.grad.data) {
            gv = rng.uniform_float(-0.1f, 0.1f);
        }
    }
    Adam opt(AdamConfig{});
    for (auto _ : state) {
        opt.step(critic.params);
        benchmark::ClobberMemory();
    }
}
BENCHMARK(BM_AdamStep);

BENCHMARK_MAIN();
