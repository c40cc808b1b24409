#include "bagreg/datagen.hpp"
#include "bagreg/embeddings.hpp"
#include "bagreg/inference.hpp"
#include "bagreg/models.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace bagreg;

namespace {

Matrix random_points(Index n, Index p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    Matrix m(n, p);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) m(i, j) = n01(rng);
    }
    return m;
}

GammaSplits gamma_data(std::size_t n_bags, Index bag_size) {
    GammaConfig c;
    c.n_train = n_bags;
    c.n_early = 1;
    c.n_val = 1;
    c.n_test = n_bags;
    c.bag_size = FixedBagSize{bag_size};
    c.noise_sd = 1.0;
    return gamma_generate(c);
}

void BM_RbfGram(benchmark::State& state) {
    const Index n = state.range(0);
    const Matrix a = random_points(n, 5, 1);
    for (auto _ : state) benchmark::DoNotOptimize(rbf_gram(a, a, 1.5));
    state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_RbfGram)->Arg(50)->Arg(100)->Arg(400);

void BM_ConvGram(benchmark::State& state) {
    const Index n = state.range(0);
    const Matrix a = random_points(n, 5, 2);
    KernelParams p;
    p.bandwidth = 1.5;
    p.conv_scale = 2.0;
    p.r_choice = RChoice::RConv;
    for (auto _ : state) benchmark::DoNotOptimize(gram(a, p, 1.0));
}
BENCHMARK(BM_ConvGram)->Arg(50)->Arg(100);

void BM_EmbedDataset(benchmark::State& state) {
    const GammaSplits data = gamma_data(100, state.range(0));
    const Matrix u = random_points(50, 5, 3).cwiseAbs();
    KernelParams p;
    p.bandwidth = 1.5;
    for (auto _ : state) benchmark::DoNotOptimize(embed_dataset(data.train, u, p));
    state.SetItemsProcessed(state.iterations() * 100 * state.range(0));
}
BENCHMARK(BM_EmbedDataset)->Arg(100)->Arg(1000);

void BM_ShrinkageObjective(benchmark::State& state) {
    const GammaSplits data = gamma_data(static_cast<std::size_t>(state.range(0)), 100);
    KernelParams p;
    p.bandwidth = 1.5;
    const LandmarkSet lm = sample_landmarks(data.train.stacked_points(), 50, 4);
    const NoiseModel noise = pooled_covariance(data.train, lm, p);
    const GramMatrices grams = build_grams(lm, p, 1.0);
    const auto stats = embed_dataset(data.train, lm.u, p);
    const Vector y = (data.train.labels().array() - 6.0).matrix();
    const ShrinkageObjective obj(stats, y, noise, grams, 1.0, true);
    Vector params = Vector::Zero(obj.num_params());
    params(obj.s()) = std::log(0.5);
    for (auto _ : state) benchmark::DoNotOptimize(obj.evaluate(params));
}
BENCHMARK(BM_ShrinkageObjective)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_HmcStandardNormal(benchmark::State& state) {
    const Index d = state.range(0);
    const DifferentiableFunction target = [](const Vector& x) {
        ValueAndGradient v;
        v.value = -0.5 * x.squaredNorm();
        v.gradient = -x;
        return v;
    };
    HMCConfig cfg;
    cfg.n_warmup = 200;
    cfg.n_samples = 200;
    for (auto _ : state) benchmark::DoNotOptimize(hmc_sample(target, Vector::Zero(d), cfg));
}
BENCHMARK(BM_HmcStandardNormal)->Arg(5)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_BayesOptimalNoisy(benchmark::State& state) {
    const GammaSplits data = gamma_data(10, 1000);
    BayesOptimalOptions o;
    o.noise_sd = 1.0;
    const BayesOptimalPredictor oracle(o);
    for (auto _ : state) benchmark::DoNotOptimize(oracle.predict(data.test.bags.front()));
}
BENCHMARK(BM_BayesOptimalNoisy)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
