#include <benchmark/benchmark.h>

#include "driftreg/config.hpp"
#include "driftreg/losses.hpp"
#include "driftreg/phantom.hpp"
#include "driftreg/registration.hpp"
#include "driftreg/warp.hpp"

using namespace driftreg;

namespace {

PhantomPair pair_of(benchmark::State& state) {
    return make_pair(PhantomSpec{.size = std::size_t(state.range(0)), .max_displacement = 3.0});
}

void BM_warp(benchmark::State& state) {
    const PhantomPair p = pair_of(state);
    for (auto _ : state) benchmark::DoNotOptimize(warp_trilinear(p.moving, p.gt));
    state.SetItemsProcessed(state.iterations() * std::int64_t(p.fixed.size()));
}

void BM_ncc(benchmark::State& state) {
    const PhantomPair p = pair_of(state);
    for (auto _ : state) benchmark::DoNotOptimize(ncc(p.fixed, p.moving));
}

void BM_nmi(benchmark::State& state) {
    const PhantomPair p = pair_of(state);
    for (auto _ : state) benchmark::DoNotOptimize(nmi(p.fixed, p.moving, 32));
}

void BM_micdir_loss(benchmark::State& state) {
    const PhantomPair p = pair_of(state);
    const DeformationField u(p.fixed.dims());
    for (auto _ : state)
        benchmark::DoNotOptimize(micdir_loss(p.fixed, p.moving, u, u, LossWeights::micdir_defaults(),
                                             ObjectiveFlags{true, true, false}, SimilarityOptions{}));
}

// Ten iterations of the full objective, all flags on.
void BM_register_micdir(benchmark::State& state) {
    const PhantomPair p = pair_of(state);
    RegistrationConfig c;
    c.optimizer = default_optimizer(optim::Kind::rmsprop);
    c.iterations = 10;
    for (auto _ : state) benchmark::DoNotOptimize(register_micdir(p.fixed, p.moving, c));
}

}  // namespace

BENCHMARK(BM_warp)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ncc)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_nmi)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_micdir_loss)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_register_micdir)->Arg(32)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
