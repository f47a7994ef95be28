#include "bkmr/kernel.hpp"
#include "bkmr/mediation.hpp"
#include "bkmr/simulation.hpp"

#include <benchmark/benchmark.h>

#include <memory>

using namespace bkmr;

namespace {

MatrixXd random_inputs(Index n, Index d, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    MatrixXd x(n, d);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < d; ++j) x(i, j) = std_normal(rng);
    }
    return x;
}

KernelState weights_for(Index d) { return KernelState::weights(VectorXd::LinSpaced(d, 0.1, 1.0)); }

void BM_KernelMatrixParallel(benchmark::State& state) {
    const MatrixXd x = random_inputs(state.range(0), 4, 1);
    const KernelState k = weights_for(4);
    for (auto _ : state) benchmark::DoNotOptimize(kernel_matrix(x, k));
}

void BM_KernelMatrixSerial(benchmark::State& state) {
    const MatrixXd x = random_inputs(state.range(0), 4, 1);
    const KernelState k = weights_for(4);
    for (auto _ : state) benchmark::DoNotOptimize(kernel_matrix_serial(x, k));
}

void BM_CrossKernelParallel(benchmark::State& state) {
    const MatrixXd obs = random_inputs(state.range(0), 4, 2);
    const MatrixXd fresh = random_inputs(100, 4, 3);
    const KernelState k = weights_for(4);
    for (auto _ : state) benchmark::DoNotOptimize(cross_kernel(fresh, obs, k));
}

void BM_CrossKernelSerial(benchmark::State& state) {
    const MatrixXd obs = random_inputs(state.range(0), 4, 2);
    const MatrixXd fresh = random_inputs(100, 4, 3);
    const KernelState k = weights_for(4);
    for (auto _ : state) benchmark::DoNotOptimize(cross_kernel_serial(fresh, obs, k));
}

ScenarioSpec bench_scenario(Index size) {
    ScenarioSpec s = paper_scenario(2, 3);
    s.truth_size = size;
    s.sample_size = 10;
    return s;
}

void BM_PopulationParallel(benchmark::State& state) {
    const ScenarioSpec s = bench_scenario(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(generate_population(s));
}

void BM_PopulationSerial(benchmark::State& state) {
    const ScenarioSpec s = bench_scenario(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(generate_population_serial(s));
}

struct MediationFixture {
    std::unique_ptr<PosteriorSurface> mediator, outcome, total;
    ContrastSpec contrast;

    MediationFixture() {
        ScenarioSpec s = paper_scenario(2, 3);
        s.truth_size = 2000;
        const TruthPopulation pop = generate_population(s);
        const Index n = 100;
        const Dataset data(pop.y.head(n), pop.z.topRows(n), MatrixXd(), VectorXd(pop.m.head(n)));
        McmcConfig mc;
        mc.iterations = 400;
        PriorConfig pr;
        ModelSpec med, out, te;
        out.include_mediator = true;
        auto fit = [&](const Dataset& d, const ModelSpec& spec) {
            return std::make_shared<const PosteriorDraws>(fit_bkmr(d, spec, pr, mc));
        };
        mediator = std::make_unique<PosteriorSurface>(fit(data.without_mediator().with_outcome(data.m(), "m"), med));
        outcome = std::make_unique<PosteriorSurface>(fit(data, out));
        total = std::make_unique<PosteriorSurface>(fit(data.without_mediator(), te));
        contrast.z_star = VectorXd::Constant(3, -0.67);
        contrast.z = VectorXd::Constant(3, 0.67);
        contrast.k_inner = 50;
        estimate_mediation_serial(*mediator, *outcome, *total, contrast, 7);  // fill the weight caches
    }
};

MediationFixture& fixture() {
    static MediationFixture f;
    return f;
}

void BM_MediationParallel(benchmark::State& state) {
    auto& f = fixture();
    for (auto _ : state) {
        benchmark::DoNotOptimize(estimate_mediation(*f.mediator, *f.outcome, *f.total, f.contrast, 7));
    }
}

void BM_MediationSerial(benchmark::State& state) {
    auto& f = fixture();
    for (auto _ : state) {
        benchmark::DoNotOptimize(estimate_mediation_serial(*f.mediator, *f.outcome, *f.total, f.contrast, 7));
    }
}

}  // namespace

BENCHMARK(BM_KernelMatrixParallel)->Arg(200)->Arg(800)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_KernelMatrixSerial)->Arg(200)->Arg(800)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_CrossKernelParallel)->Arg(200)->Arg(800)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_CrossKernelSerial)->Arg(200)->Arg(800)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_PopulationParallel)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PopulationSerial)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MediationParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MediationSerial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
