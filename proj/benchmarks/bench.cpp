// Microbenchmarks for the hot paths: LM forward/backward, the two BPTT
// variants, and one full gate-update step.

#include <benchmark/benchmark.h>

#include <random>

#include "dlm/lm.hpp"
#include "dlm/meta.hpp"

namespace {

using namespace dlm;

struct Fixture {
    LMConfig cfg{64, 32, 64, false};
    LstmLm lm{cfg};
    ParamVector params;
    std::vector<MiniBatch> span;

    explicit Fixture(size_t batches = 40, size_t m = 10) {
        params = lm.init_params(1);
        std::mt19937_64 rng(1);
        for (size_t i = 0; i < batches; ++i) {
            MiniBatch b;
            b.index = i;
            for (size_t t = 0; t < m; ++t) {
                b.inputs.push_back(static_cast<int32_t>(rng() % cfg.vocab_size));
                b.targets.push_back(static_cast<int32_t>(rng() % cfg.vocab_size));
            }
            span.push_back(std::move(b));
        }
    }
};

void bm_forward(benchmark::State& state) {
    Fixture f;
    for (auto _ : state) {
        auto out = f.lm.forward(f.params, f.lm.zero_state(), f.span[0]);
        benchmark::DoNotOptimize(out.first.total);
    }
}
BENCHMARK(bm_forward);

void bm_backward(benchmark::State& state) {
    Fixture f;
    for (auto _ : state) {
        auto out = f.lm.backward(f.params, f.lm.zero_state(), f.span[0]);
        benchmark::DoNotOptimize(out.grad[0]);
    }
}
BENCHMARK(bm_backward);

void bm_naive_bptt(benchmark::State& state) {
    Fixture f;
    for (auto _ : state) {
        auto g = f.lm.naive_bptt(f.params, f.lm.zero_state(), f.span);
        benchmark::DoNotOptimize(g[0]);
    }
}
BENCHMARK(bm_naive_bptt);

void bm_checkpointed_bptt(benchmark::State& state) {
    Fixture f;
    const size_t seg = static_cast<size_t>(state.range(0));
    for (auto _ : state) {
        auto g = f.lm.checkpointed_bptt(f.params, f.lm.zero_state(), f.span, seg);
        benchmark::DoNotOptimize(g[0]);
    }
}
BENCHMARK(bm_checkpointed_bptt)->Arg(1)->Arg(5)->Arg(10);

void bm_gate_update(benchmark::State& state) {
    Fixture f;
    MetaParams meta = init_meta(kNumParamGroups);
    const auto groups = f.lm.layout().group_map();
    const ParamVector anchor(f.params.size(), 0.0);
    auto res = f.lm.backward(f.params, f.lm.zero_state(), f.span[0]);
    for (auto _ : state) {
        auto feats = preprocess_features(f.params, res.loss, res.grad, anchor);
        auto gates = compute_gates(meta, feats, groups);
        auto next = apply_update(f.params, gates, res.grad, anchor, meta);
        benchmark::DoNotOptimize(next[0]);
    }
}
BENCHMARK(bm_gate_update);

}  // namespace

BENCHMARK_MAIN();
