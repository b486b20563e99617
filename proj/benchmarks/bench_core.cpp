#include <random>

#include <benchmark/benchmark.h>

#include <stablesem/correlations.hpp>
#include <stablesem/estimator.hpp>
#include <stablesem/moea.hpp>
#include <stablesem/simgen.hpp>

using namespace stablesem;

static void BM_FitExact(benchmark::State& state)
{
    Rng rng(1);
    const auto sem = random_sem(static_cast<int>(state.range(0)), 3, 5, rng);
    const Matrix s = to_indicator_order(sem.params.layout, implied_covariance(sem.params));
    for (auto _ : state) benchmark::DoNotOptimize(fit(sem.params, s, 1000).f_ml);
}
BENCHMARK(BM_FitExact)->Arg(3)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);

static void BM_NondominatedSort(benchmark::State& state)
{
    Rng rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Objectives> pop(static_cast<std::size_t>(state.range(0)));
    for (auto& o : pop) o = {u(rng), u(rng)};
    for (auto _ : state) benchmark::DoNotOptimize(fast_nondominated_sort(pop));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_NondominatedSort)->RangeMultiplier(2)->Range(50, 800)->Complexity(benchmark::oNSquared);

static void BM_Polychoric(benchmark::State& state)
{
    Rng rng(3);
    std::normal_distribution<double> z;
    const auto n = static_cast<std::size_t>(state.range(0));
    std::vector<double> x(n), y(n);
    auto code = [](double v) { return v < -0.5 ? 1.0 : v < 0.4 ? 2.0 : v < 1.1 ? 3.0 : 4.0; };
    for (std::size_t i = 0; i < n; ++i) {
        const double a = z(rng);
        x[i] = code(a);
        y[i] = code(0.5 * a + std::sqrt(0.75) * z(rng));
    }
    for (auto _ : state) benchmark::DoNotOptimize(polychoric(x, 4, y, 4).rho);
}
BENCHMARK(BM_Polychoric)->Arg(1000)->Arg(100000)->Unit(benchmark::kMicrosecond);

static void BM_Evolve(benchmark::State& state)
{
    Rng rng(4);
    const auto sem = random_sem(4, 3, 4, rng);
    const Matrix s = to_indicator_order(sem.params.layout, implied_covariance(sem.params));
    const SearchProblem problem{sem.measurement, sem.plan, {}, {}, {}};
    SearchParams params;
    params.population = 20;
    params.iterations = 5;
    for (auto _ : state) benchmark::DoNotOptimize(evolve(s, 500, problem, params).evaluations);
}
BENCHMARK(BM_Evolve)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
