#include "bagreg/datagen.hpp"
#include "bagreg/errors.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>

using namespace bagreg;
namespace bt = bagreg::testing;

namespace {

/// Density of x = g / y with g ~ Gamma(shape y / 2, rate 1 / 2).
double scaled_gamma_density(double x, double y) {
    if (x <= 0.0) return 0.0;
    const double k = 0.5 * y;
    const double g = y * x;
    return y * std::exp((k - 1.0) * std::log(g) - 0.5 * g - std::lgamma(k) - k * std::log(2.0));
}

/// Gamma density convolved with N(0, sd^2), by a fine composite Simpson rule.
double noisy_density(double x, double y, double sd) {
    const int n = 20000;
    const double hi = 12.0;
    const double h = hi / n;
    double acc = 0.0;
    for (int i = 1; i < n; ++i) {
        const double u = i * h;
        const double z = (x - u) / sd;
        acc += (i % 2 ? 4.0 : 2.0) * scaled_gamma_density(u, y) * std::exp(-0.5 * z * z);
    }
    return acc * h / 3.0 / (sd * std::sqrt(2.0 * std::numbers::pi));
}

GammaConfig small_config(std::uint64_t seed) {
    GammaConfig c;
    c.n_train = 40;
    c.n_early = 10;
    c.n_val = 10;
    c.n_test = 20;
    c.bag_size = FixedBagSize{30};
    c.seed = seed;
    return c;
}

}  // namespace

TEST(GammaGenerate, HugeBagMoments) {
    GammaConfig c;
    c.n_train = 1;
    c.bag_size = FixedBagSize{1000000};
    c.label_lo = 5.0;
    c.label_hi = 5.0 + 1e-9;
    c.dim = 1;
    const BagDataset d = gamma_generate_split(c, Split::Train);
    const Matrix& x = d.bags[0].points;
    const double y = *d.bags[0].label;
    const double mean = x.mean();
    const double var = (x.array() - mean).square().mean();
    EXPECT_NEAR(mean, 1.0, 0.01);
    EXPECT_NEAR(var, 2.0 / y, 0.02 * 2.0 / y);
    EXPECT_GT(x.minCoeff(), 0.0);
}

TEST(GammaGenerate, ScaleConventionMoments) {
    GammaConfig c;
    c.n_train = 1;
    c.bag_size = FixedBagSize{200000};
    c.label_lo = 6.0;
    c.label_hi = 6.0 + 1e-9;
    c.dim = 1;
    c.convention = GammaConvention::Scale;
    const Matrix x = gamma_generate_split(c, Split::Train).bags[0].points;
    // shape y/2, scale 1/2, divided by y: mean 1/4, variance 1/(8 y)
    EXPECT_NEAR(x.mean(), 0.25, 0.0025);
}

TEST(GammaGenerate, MixedHistogramAtFifty) {
    GammaConfig c = small_config(3);
    c.n_train = 1000;
    c.bag_size = MixedBagSizes{50.0};
    const auto sizes = bag_sizes(c, 1000, 5);
    std::map<Index, int> hist;
    for (Index n : sizes) ++hist[n];
    EXPECT_EQ(hist[5], 500);
    EXPECT_EQ(hist[20], 250);
    EXPECT_EQ(hist[100], 250);
    EXPECT_EQ(hist.count(1000), 0u);
}

TEST(GammaGenerate, MixedProportionsRoundExactly) {
    GammaConfig c = small_config(3);
    c.bag_size = MixedBagSizes{12.5};
    const auto sizes = bag_sizes(c, 10, 1);
    ASSERT_EQ(sizes.size(), 10u);
    std::map<Index, int> hist;
    for (Index n : sizes) ++hist[n];
    int total = 0;
    for (auto [n, k] : hist) total += k;
    EXPECT_EQ(total, 10);
    // exact shares 1.25 / 2.5 / 2.5 / 3.75 round to a neighbouring integer
    EXPECT_EQ(hist[5], 1);
    EXPECT_EQ(hist[1000], 4);
    EXPECT_EQ(hist[20] + hist[100], 5);
}

TEST(GammaGenerate, DeterministicGivenSeed) {
    const GammaSplits a = gamma_generate(small_config(9));
    const GammaSplits b = gamma_generate(small_config(9));
    for (Split s : kAllSplits) {
        ASSERT_EQ(a.get(s).size(), b.get(s).size());
        for (std::size_t i = 0; i < a.get(s).size(); ++i) {
            EXPECT_EQ(a.get(s).bags[i].points, b.get(s).bags[i].points);
            EXPECT_EQ(a.get(s).bags[i].label, b.get(s).bags[i].label);
        }
    }
    EXPECT_NE(gamma_generate(small_config(10)).train.bags[0].points, a.train.bags[0].points);
}

TEST(GammaGenerate, LabelsInRangeAndPositiveCoordinates) {
    const GammaSplits s = gamma_generate(small_config(11));
    for (Split sp : kAllSplits) {
        EXPECT_EQ(s.get(sp).size(), small_config(11).count(sp));
        for (const Bag& b : s.get(sp).bags) {
            ASSERT_TRUE(b.label.has_value());
            EXPECT_GT(*b.label, 4.0);
            EXPECT_LT(*b.label, 8.0);
            EXPECT_GT(b.points.minCoeff(), 0.0);
            EXPECT_EQ(b.points.rows(), 30);
            EXPECT_EQ(b.points.cols(), 5);
        }
    }
}

TEST(GammaGenerate, SplitsUseIndependentStreams) {
    GammaConfig c = small_config(12);
    const GammaSplits a = gamma_generate(c);
    c.n_test = 35;
    const GammaSplits b = gamma_generate(c);
    for (Split s : {Split::Train, Split::Early, Split::Val}) {
        for (std::size_t i = 0; i < a.get(s).size(); ++i) EXPECT_EQ(a.get(s).bags[i].points, b.get(s).bags[i].points);
    }
    EXPECT_EQ(b.test.size(), 35u);
    std::set<std::uint64_t> seeds;
    for (Split s : kAllSplits) seeds.insert(split_seed(12, s));
    EXPECT_EQ(seeds.size(), 4u);
}

TEST(GammaGenerate, ValidateRejectsBadConfigs) {
    GammaConfig c;
    c.bag_size = MixedBagSizes{51.0};
    EXPECT_THROW(c.validate(), InvalidArgument);
    c.bag_size = FixedBagSize{0};
    EXPECT_THROW(c.validate(), InvalidArgument);
    c.bag_size = FixedBagSize{10};
    c.noise_sd = -1.0;
    EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(BayesOptimal, EmptyBagGivesUniformPrior) {
    const BayesOptimalPredictor oracle;
    Bag empty;
    empty.points = Matrix::Zero(0, 5);
    const PredictiveDistribution p = oracle.predict(empty);
    EXPECT_NEAR(p.mean, 6.0, 1e-6);
    EXPECT_NEAR(p.variance, 4.0 / 3.0, 1e-5);
}

TEST(BayesOptimal, LargeBagConcentratesOnTruth) {
    GammaConfig c;
    c.n_train = 1;
    c.bag_size = FixedBagSize{20000};
    c.label_lo = 6.0;
    c.label_hi = 6.0 + 1e-9;
    const Bag bag = gamma_generate_split(c, Split::Train).bags[0];
    const PredictiveDistribution p = BayesOptimalPredictor().predict(bag);
    EXPECT_NEAR(p.mean, 6.0, 0.05);
    EXPECT_LT(p.variance, 0.01);
}

TEST(BayesOptimal, GridRefinementAgrees) {
    BayesOptimalOptions coarse, fine;
    coarse.grid_points = 512;
    fine.grid_points = 4096;
    const BayesOptimalPredictor a(coarse), b(fine);
    const GammaSplits s = gamma_generate(small_config(13));
    for (const Bag& bag : s.test.bags) EXPECT_NEAR(a.predict(bag).mean, b.predict(bag).mean, 1e-4);
}

TEST(BayesOptimal, PointOrderInvariant) {
    const GammaSplits s = gamma_generate(small_config(14));
    Bag bag = s.test.bags[0];
    const double before = BayesOptimalPredictor().predict(bag).mean;
    bag.points = bag.points.colwise().reverse().eval();
    EXPECT_NEAR(BayesOptimalPredictor().predict(bag).mean, before, 1e-12);
}

TEST(BayesOptimal, NoiseFreeMatchesDirectGridPosterior) {
    const GammaSplits s = gamma_generate(small_config(15));
    const Bag& bag = s.test.bags[0];
    // trapezoid posterior over 4001 labels using the independent density
    const int g = 4001;
    std::vector<double> logp(g);
    double hi = -1e300;
    for (int k = 0; k < g; ++k) {
        const double y = 4.0 + 4.0 * k / (g - 1);
        double l = 0.0;
        for (Index r = 0; r < bag.points.rows(); ++r) {
            for (Index c = 0; c < bag.points.cols(); ++c) l += std::log(scaled_gamma_density(bag.points(r, c), y));
        }
        logp[k] = l;
        hi = std::max(hi, l);
    }
    double z = 0.0, m = 0.0;
    for (int k = 0; k < g; ++k) {
        const double w = (k == 0 || k == g - 1 ? 0.5 : 1.0) * std::exp(logp[k] - hi);
        z += w;
        m += w * (4.0 + 4.0 * k / (g - 1));
    }
    EXPECT_NEAR(BayesOptimalPredictor().predict(bag).mean, m / z, 1e-4);
}

TEST(BayesOptimal, NoisyCoordinateDensityMatchesQuadrature) {
    BayesOptimalOptions o;
    o.noise_sd = 1.0;
    const BayesOptimalPredictor oracle(o);
    for (double y : {4.2, 6.0, 7.9}) {
        for (double x : {-2.5, -0.3, 0.4, 1.0, 2.2, 5.0}) {
            const double want = std::log(noisy_density(x, y, 1.0));
            EXPECT_NEAR(oracle.coordinate_log_density(x, y), want, 1e-6 * std::max(1.0, std::abs(want)))
                << "x = " << x << ", y = " << y;
        }
    }
}

TEST(BayesOptimal, NoisyPosteriorMatchesDirectSum) {
    GammaConfig c = small_config(16);
    c.noise_sd = 1.0;
    c.bag_size = FixedBagSize{4};
    const Bag bag = gamma_generate_split(c, Split::Test).bags[0];
    BayesOptimalOptions o;
    o.noise_sd = 1.0;
    const BayesOptimalPredictor oracle(o);
    const int g = 161;
    std::vector<double> logp(g);
    double hi = -1e300;
    for (int k = 0; k < g; ++k) {
        const double y = 4.0 + 4.0 * k / (g - 1);
        double l = 0.0;
        for (Index r = 0; r < bag.points.rows(); ++r) {
            for (Index cc = 0; cc < bag.points.cols(); ++cc) l += std::log(noisy_density(bag.points(r, cc), y, 1.0));
        }
        logp[k] = l;
        hi = std::max(hi, l);
    }
    double z = 0.0, m = 0.0, m2 = 0.0;
    for (int k = 0; k < g; ++k) {
        const double y = 4.0 + 4.0 * k / (g - 1);
        const double w = (k == 0 || k == g - 1 ? 0.5 : 1.0) * std::exp(logp[k] - hi);
        z += w;
        m += w * y;
        m2 += w * y * y;
    }
    const PredictiveDistribution p = oracle.predict(bag);
    EXPECT_NEAR(p.mean, m / z, 2e-3);
    EXPECT_NEAR(p.variance, m2 / z - (m / z) * (m / z), 2e-3);
}

TEST(BayesOptimal, RejectsNonPositiveNoiseFreeCoordinates) {
    Bag bag;
    bag.id = "neg";
    bag.points = Matrix::Constant(1, 5, -0.1);
    EXPECT_THROW(BayesOptimalPredictor().predict(bag), InvalidArgument);
}
