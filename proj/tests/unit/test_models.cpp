#include "bagreg/errors.hpp"
#include "bagreg/inference.hpp"
#include "bagreg/models.hpp"
#include "oracles.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace bagreg;
namespace bt = bagreg::testing;

namespace {

EmbeddingPosterior random_posterior(Index s, std::mt19937_64& rng, double c_scale = 0.1) {
    EmbeddingPosterior post;
    post.M = bt::random_matrix(s, 1, rng);
    post.C = bt::random_spd(s, 0.0, c_scale, rng);
    post.n = 5;
    return post;
}

EmbeddingStats stats_of(const Vector& mu) {
    EmbeddingStats s;
    s.mu_hat = mu;
    s.n = 1;
    return s;
}

}  // namespace

TEST(BaselinePredict, ConstantHead) {
    RegressionModel m;
    m.kind = ModelKind::Baseline;
    m.alpha = Vector::Zero(4);
    m.intercept = 3.0;
    std::mt19937_64 rng(1);
    EXPECT_EQ(baseline_predict(m, stats_of(bt::random_matrix(4, 1, rng))), 3.0);
}

TEST(BaselinePredict, CoordinatePick) {
    RegressionModel m;
    m.alpha = Vector::Unit(3, 0);
    Vector mu(3);
    mu << 0.5, 0.9, 0.1;
    EXPECT_EQ(baseline_predict(m, stats_of(mu)), 0.5);
}

TEST(BaselinePredict, MatchesDotProductLoop) {
    std::mt19937_64 rng(2);
    RegressionModel m;
    m.alpha = bt::random_matrix(6, 1, rng);
    m.intercept = -0.7;
    for (int t = 0; t < 10; ++t) {
        const Vector mu = bt::random_matrix(6, 1, rng);
        double want = m.intercept;
        for (Index k = 0; k < 6; ++k) want += m.alpha(k) * mu(k);
        EXPECT_NEAR(baseline_predict(m, stats_of(mu)), want, 1e-14);
    }
    EXPECT_THROW(baseline_predict(m, stats_of(Vector::Zero(5))), InvalidArgument);
}

TEST(BaselineLoss, PerfectPredictionsGiveZero) {
    std::vector<EmbeddingStats> batch = {stats_of(Vector::Constant(2, 0.3)), stats_of(Vector::Constant(2, 0.6))};
    std::vector<double> y = {1.5, 1.5};
    EXPECT_EQ(baseline_loss(Vector::Zero(2), 1.5, batch, y, 1.0, 10).value, 0.0);
}

TEST(BaselineLoss, SquaredResidual) {
    std::vector<EmbeddingStats> batch = {stats_of(Vector::Constant(2, 0.3))};
    std::vector<double> y = {1.0};
    EXPECT_EQ(baseline_loss(Vector::Zero(2), 3.0, batch, y, 1.0, 1).value, 4.0);
}

TEST(BaselineLoss, MatchesScalarLoopAndGradient) {
    std::mt19937_64 rng(3);
    std::vector<EmbeddingStats> batch;
    std::vector<double> y;
    for (int i = 0; i < 9; ++i) {
        batch.push_back(stats_of(bt::random_matrix(4, 1, rng)));
        y.push_back(bt::random_matrix(1, 1, rng)(0, 0));
    }
    const Vector beta = bt::random_matrix(4, 1, rng);
    const double b = 0.4, rho = 1.7;
    const std::size_t n_train = 50;
    double want = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        double pred = b;
        for (Index k = 0; k < 4; ++k) pred += beta(k) * batch[i].mu_hat(k);
        want += (pred - y[i]) * (pred - y[i]);
    }
    want /= static_cast<double>(batch.size());
    double pen = 0.0;
    for (Index k = 0; k < 4; ++k) pen += beta(k) * beta(k);
    want += pen / (2.0 * rho * rho * static_cast<double>(n_train));
    EXPECT_NEAR(baseline_loss(beta, b, batch, y, rho, n_train).value, want, 1e-12 * want);

    Vector params(5);
    params << beta, b;
    const auto f = [&](const Vector& p) {
        const ValueAndGradient v = baseline_loss(p.head(4), p(4), batch, y, rho, n_train);
        return v;
    };
    EXPECT_TRUE(grad_check(f, params, 1e-6).passed);
}

TEST(Blr, OneBagHandComputedPosterior) {
    Matrix X(1, 1);
    X << 1.0;
    Vector y(1);
    y << 1.0;
    const BlrPosterior post = blr_posterior(X, y, 1.0, Vector::Ones(1));
    EXPECT_NEAR(post.mean(0), 0.5, 1e-15);
    EXPECT_NEAR(post.cov(0, 0), 0.5, 1e-15);

    RegressionModel m;
    m.kind = ModelKind::BLR;
    m.alpha = post.mean;
    m.weight_cov = post.cov;
    m.sigma = 1.0;
    const PredictiveDistribution p = blr_predict(m, stats_of(Vector::Ones(1)));
    EXPECT_NEAR(p.mean, 0.5, 1e-15);
    EXPECT_NEAR(p.variance, 1.5, 1e-15);
}

TEST(Blr, TinyPriorGivesZeroMean) {
    std::mt19937_64 rng(4);
    const Matrix X = bt::random_matrix(20, 3, rng);
    const Vector y = bt::random_matrix(20, 1, rng);
    const BlrPosterior post = blr_posterior(X, y, 1.0, Vector::Constant(3, 1e-12));
    EXPECT_LT(post.mean.cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Blr, SmallNoiseInterpolatesLeastSquares) {
    std::mt19937_64 rng(5);
    const Matrix base = bt::random_matrix(4, 3, rng);
    Matrix X(8, 3);
    X << base, base;
    const Vector y0 = bt::random_matrix(4, 1, rng);
    Vector y(8);
    y << y0, y0;
    const BlrPosterior post = blr_posterior(X, y, 1e-6, Vector::Constant(3, 1e6));
    const Vector ols = X.colPivHouseholderQr().solve(y);
    EXPECT_LT((post.mean - ols).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Blr, ZeroCovarianceGivesNoiseVariance) {
    RegressionModel m;
    m.kind = ModelKind::BLR;
    m.alpha = Vector::Constant(3, 0.2);
    m.weight_cov = Matrix::Zero(3, 3);
    m.sigma = 0.7;
    const PredictiveDistribution p = blr_predict(m, stats_of(Vector::Constant(3, 0.5)));
    EXPECT_DOUBLE_EQ(p.variance, 0.49);
    const PredictiveDistribution z = blr_predict(m, stats_of(Vector::Zero(3)));
    EXPECT_EQ(z.mean, 0.0);
}

TEST(Blr, ZeroInputGivesNoiseVariance) {
    std::mt19937_64 rng(6);
    RegressionModel m;
    m.kind = ModelKind::BLR;
    m.alpha = bt::random_matrix(3, 1, rng);
    m.weight_cov = bt::random_spd(3, 0.1, 1.0, rng);
    m.sigma = 0.3;
    const PredictiveDistribution p = blr_predict(m, stats_of(Vector::Zero(3)));
    EXPECT_EQ(p.mean, 0.0);
    EXPECT_DOUBLE_EQ(p.variance, 0.09);
}

TEST(Blr, PredictiveMatchesMonteCarlo) {
    std::mt19937_64 rng(7);
    RegressionModel m;
    m.kind = ModelKind::BLR;
    m.alpha = bt::random_matrix(3, 1, rng);
    m.intercept = 0.3;
    m.weight_cov = bt::random_spd(4, 0.05, 0.5, rng);
    m.sigma = 0.4;
    const Vector x = bt::random_matrix(3, 1, rng);
    Vector xt(4);
    xt << x, 1.0;
    Vector mean(4);
    mean << m.alpha, m.intercept;
    const bt::MvnSampler weights(mean, m.weight_cov);
    std::normal_distribution<double> noise(0.0, m.sigma);
    std::vector<double> ys;
    for (int t = 0; t < 100000; ++t) ys.push_back(weights.draw(rng).dot(xt) + noise(rng));
    const bt::SampleMoments mc = bt::sample_moments(ys);
    const PredictiveDistribution p = blr_predict(m, stats_of(x));
    EXPECT_LT(std::abs(mc.mean - p.mean), 3.0 * mc.mean_se);
    EXPECT_LT(std::abs(mc.variance - p.variance), 3.0 * mc.variance_se);
}

TEST(Blr, EvidenceMatchesMarginalGaussianDensity) {
    std::mt19937_64 rng(8);
    const Matrix X = bt::random_matrix(7, 3, rng);
    const Vector y = bt::random_matrix(7, 1, rng);
    const double sigma = 0.6, rho = 1.3;
    Matrix Xt(7, 4);
    Xt << X, Vector::Ones(7);
    const Vector prior = blr_prior_variances(3, true, rho);
    const Matrix cov = Xt * prior.asDiagonal() * Xt.transpose() + sigma * sigma * Matrix::Identity(7, 7);
    const Eigen::LLT<Matrix> llt(cov);
    const Vector a = llt.solve(y);
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const double want = -0.5 * (7.0 * std::log(2.0 * std::numbers::pi) + logdet + y.dot(a));
    EXPECT_NEAR(blr_log_evidence(Xt, y, sigma, rho, true).value, want, 1e-10 * std::abs(want));
}

TEST(Blr, EvidenceGradient) {
    std::mt19937_64 rng(9);
    const Matrix X = bt::random_matrix(10, 4, rng);
    const Matrix dX = bt::random_matrix(10, 4, rng);
    const Vector y = bt::random_matrix(10, 1, rng);
    const auto f = [&](const Vector& p) {
        ValueAndGradient v = blr_log_evidence(X, y, std::exp(p(0)), std::exp(p(1)), false);
        return v;
    };
    Vector p(2);
    p << std::log(0.7), std::log(1.2);
    EXPECT_TRUE(grad_check(f, p, 1e-6).passed);
    // the bandwidth entry is the directional derivative along dX
    const double h = 1e-6;
    const double up = blr_log_evidence(X + h * dX, y, 0.7, 1.2, false).value;
    const double down = blr_log_evidence(X - h * dX, y, 0.7, 1.2, false).value;
    const double g = blr_log_evidence(X, y, 0.7, 1.2, false, &dX).gradient(2);
    EXPECT_NEAR(g, (up - down) / (2.0 * h), 1e-6 * std::max(1.0, std::abs(g)));
}

TEST(ShrinkagePredictive, ZeroAlphaGivesNoiseOnly) {
    std::mt19937_64 rng(10);
    const PredictiveDistribution p = shrinkage_predictive(Vector::Zero(4), random_posterior(4, rng), 0.6);
    EXPECT_EQ(p.mean, 0.0);
    EXPECT_DOUBLE_EQ(p.variance, 0.36);
}

TEST(ShrinkagePredictive, ExactEmbeddingGivesLinearMean) {
    std::mt19937_64 rng(11);
    EmbeddingPosterior post = random_posterior(4, rng);
    post.C.setZero();
    const Vector alpha = bt::random_matrix(4, 1, rng);
    const PredictiveDistribution p = shrinkage_predictive(alpha, post, 0.5);
    EXPECT_DOUBLE_EQ(p.mean, alpha.dot(post.M));
    EXPECT_DOUBLE_EQ(p.variance, 0.25);
}

TEST(ShrinkagePredictive, VarianceAtLeastNoise) {
    std::mt19937_64 rng(12);
    for (int t = 0; t < 20; ++t) {
        const PredictiveDistribution p =
            shrinkage_predictive(bt::random_matrix(5, 1, rng), random_posterior(5, rng), 0.3);
        EXPECT_GE(p.variance, 0.09);
    }
}

TEST(ShrinkagePredictive, MatchesMonteCarlo) {
    std::mt19937_64 rng(13);
    const EmbeddingPosterior post = random_posterior(4, rng, 0.5);
    const Vector alpha = bt::random_matrix(4, 1, rng);
    const double sigma = 0.4;
    const bt::MvnSampler mu(post.M, post.C);
    std::normal_distribution<double> noise(0.0, sigma);
    std::vector<double> ys;
    for (int t = 0; t < 100000; ++t) ys.push_back(alpha.dot(mu.draw(rng)) + noise(rng));
    const bt::SampleMoments mc = bt::sample_moments(ys);
    const PredictiveDistribution p = shrinkage_predictive(alpha, post, sigma);
    EXPECT_LT(std::abs(mc.mean - p.mean), 3.0 * mc.mean_se);
    EXPECT_LT(std::abs(mc.variance - p.variance), 3.0 * mc.variance_se);
}

TEST(ShrinkageNll, UnitDensityVarianceGivesZero) {
    EmbeddingPosterior post;
    post.M = Vector::Zero(2);
    post.C = Matrix::Zero(2, 2);
    std::vector<EmbeddingPosterior> posts = {post};
    std::vector<double> y = {0.0};
    const double sigma = std::sqrt(1.0 / (2.0 * std::numbers::pi));
    EXPECT_NEAR(shrinkage_nll_objective(Vector::Zero(2), sigma, posts, y, Matrix::Identity(2, 2), 1.0), 0.0, 1e-15);
}

TEST(ShrinkageNll, UnitVarianceGivesNormalizer) {
    EmbeddingPosterior post;
    post.M = Vector::Zero(2);
    post.C = Matrix::Zero(2, 2);
    std::vector<EmbeddingPosterior> posts = {post};
    std::vector<double> y = {0.0};
    const double v = shrinkage_nll_objective(Vector::Zero(2), 1.0, posts, y, Matrix::Identity(2, 2), 1.0);
    EXPECT_NEAR(v, 0.5 * std::log(2.0 * std::numbers::pi), 1e-15);
    EXPECT_NEAR(v, 0.9189, 1e-4);
}

TEST(ShrinkageNll, MatchesDensityOracle) {
    std::mt19937_64 rng(14);
    for (int t = 0; t < 10; ++t) {
        std::vector<EmbeddingPosterior> posts;
        std::vector<double> y;
        for (int i = 0; i < 6; ++i) {
            posts.push_back(random_posterior(4, rng));
            y.push_back(bt::random_matrix(1, 1, rng)(0, 0));
        }
        const Vector alpha = bt::random_matrix(4, 1, rng);
        const Matrix K = bt::random_spd(4, 0.1, 2.0, rng);
        const double want = bt::shrinkage_nll_oracle(alpha, 0.8, posts, y, K, 1.5);
        EXPECT_NEAR(shrinkage_nll_objective(alpha, 0.8, posts, y, K, 1.5), want, 1e-10 * std::abs(want));
    }
}

TEST(ShrinkageNll, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(15);
    std::vector<EmbeddingPosterior> posts;
    std::vector<double> y;
    for (int i = 0; i < 3; ++i) {
        posts.push_back(random_posterior(4, rng));
        y.push_back(bt::random_matrix(1, 1, rng)(0, 0));
    }
    const Matrix K = bt::random_spd(4, 0.1, 2.0, rng);
    const auto f = [&](const Vector& p) {
        return shrinkage_nll_with_gradient(p.head(4), std::exp(p(4)), posts, y, K, 1.2);
    };
    Vector p(5);
    p << bt::random_matrix(4, 1, rng), std::log(0.6);
    EXPECT_TRUE(grad_check(f, p, 1e-4).passed);
}

TEST(ShrinkageObjective, AgreesWithPerBagPosteriors) {
    std::mt19937_64 rng(16);
    const LandmarkSet lm = LandmarkSet::tied_to(bt::random_matrix(4, 2, rng));
    KernelParams kp;
    const GramMatrices g = build_grams(lm, kp, 1.5);
    NoiseModel noise;
    noise.Sigma = bt::random_spd(4, 0.01, 0.1, rng);
    noise.m0 = Vector::Constant(4, 0.3);
    noise.m0_z = noise.m0;
    std::vector<EmbeddingStats> stats;
    Vector y(5);
    for (int i = 0; i < 5; ++i) {
        stats.push_back(empirical_embedding(bt::random_bag(1 + i % 3, 2, rng), lm.u, kp));
        y(i) = bt::random_matrix(1, 1, rng)(0, 0);
    }
    const ShrinkageObjective obj(stats, y, noise, g, 2.0, false);
    const auto posts = shrinkage_posteriors(stats, noise, g);
    const Vector alpha = bt::random_matrix(4, 1, rng);
    Vector params(5);
    params << alpha, std::log(0.5);
    const std::vector<double> ys(y.data(), y.data() + 5);
    EXPECT_NEAR(obj.evaluate(params).value, shrinkage_nll_objective(alpha, 0.5, posts, ys, g.K_z, 2.0), 1e-10);
    const Matrix means = obj.shrunk_means(1.5);
    for (int i = 0; i < 5; ++i) EXPECT_LT((means.row(i).transpose() - posts[i].M).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ShrinkageObjective, GradientWithLearnedEta) {
    std::mt19937_64 rng(17);
    const LandmarkSet lm = LandmarkSet::tied_to(bt::random_matrix(4, 2, rng));
    KernelParams kp;
    const GramMatrices g = build_grams(lm, kp, 1.0);
    NoiseModel noise;
    noise.Sigma = bt::random_spd(4, 0.01, 0.1, rng);
    noise.m0 = Vector::Constant(4, 0.3);
    noise.m0_z = noise.m0;
    std::vector<EmbeddingStats> stats;
    Vector y(3);
    for (int i = 0; i < 3; ++i) {
        stats.push_back(empirical_embedding(bt::random_bag(2 + i, 2, rng), lm.u, kp));
        y(i) = bt::random_matrix(1, 1, rng)(0, 0);
    }
    const ShrinkageObjective obj(stats, y, noise, g, 1.0, true);
    Vector p(6);
    p << bt::random_matrix(4, 1, rng), std::log(0.5), std::log(0.8);
    const auto f = [&](const Vector& q) { return obj.evaluate(q); };
    EXPECT_TRUE(grad_check(f, p, 1e-4).passed);
}

TEST(BdrPredict, IdenticalDrawsReduceToSingleGaussian) {
    std::mt19937_64 rng(18);
    const EmbeddingPosterior post = random_posterior(3, rng);
    const Vector alpha = bt::random_matrix(3, 1, rng);
    Matrix draws(4, 4);
    for (int r = 0; r < 4; ++r) draws.row(r) << alpha.transpose(), 0.5;
    const PredictiveDistribution mix = bdr_predict(draws, post);
    const PredictiveDistribution one = shrinkage_predictive(alpha, post, 0.5);
    EXPECT_DOUBLE_EQ(mix.mean, one.mean);
    EXPECT_DOUBLE_EQ(mix.variance, one.variance);
    EXPECT_NEAR(mix.log_density(0.3), one.log_density(0.3), 1e-14);
}

TEST(BdrPredict, TwoComponentMoments) {
    const PredictiveDistribution p = PredictiveDistribution::mixture({{-1.0, 1.0}, {1.0, 1.0}});
    EXPECT_EQ(p.mean, 0.0);
    EXPECT_EQ(p.variance, 2.0);
}

TEST(BdrPredict, MixtureBeatsMomentMatchedGaussianOnHeavyTails) {
    const PredictiveDistribution mix = PredictiveDistribution::mixture({{0.0, 0.1}, {0.0, 0.1}, {0.0, 0.1}, {0.0, 10.0}});
    const PredictiveDistribution gauss = PredictiveDistribution::gaussian(mix.mean, mix.variance);
    double mix_nll = 0.0, gauss_nll = 0.0;
    for (double y : {0.0, 0.05, -0.1, 0.2, 6.0}) {
        mix_nll -= mix.log_density(y);
        gauss_nll -= gauss.log_density(y);
    }
    EXPECT_LE(mix_nll, gauss_nll);
}

TEST(BdrPredict, LabelOffsetShiftsEveryComponent) {
    std::mt19937_64 rng(19);
    const EmbeddingPosterior post = random_posterior(3, rng);
    Matrix draws(2, 4);
    draws << bt::random_matrix(1, 3, rng), 0.4, bt::random_matrix(1, 3, rng), 0.6;
    const PredictiveDistribution a = bdr_predict(draws, post);
    const PredictiveDistribution b = bdr_predict(draws, post, 2.0);
    EXPECT_NEAR(b.mean - a.mean, 2.0, 1e-14);
    EXPECT_NEAR(b.variance, a.variance, 1e-14);
}

TEST(Probit, ZeroAlphaIsFairCoin) {
    std::mt19937_64 rng(20);
    EXPECT_EQ(probit_predictive(Vector::Zero(3), random_posterior(3, rng)).prob, 0.5);
}

TEST(Probit, ZeroCovarianceIsPlainProbit) {
    std::mt19937_64 rng(21);
    EmbeddingPosterior post = random_posterior(3, rng);
    post.C.setZero();
    const Vector alpha = bt::random_matrix(3, 1, rng);
    EXPECT_DOUBLE_EQ(probit_predictive(alpha, post).prob, normal_cdf(alpha.dot(post.M)));
}

TEST(Probit, MatchesMonteCarloIntegral) {
    std::mt19937_64 rng(22);
    const EmbeddingPosterior post = random_posterior(3, rng, 1.0);
    const Vector alpha = bt::random_matrix(3, 1, rng);
    const bt::MvnSampler mu(post.M, post.C);
    std::vector<double> ps;
    for (int t = 0; t < 100000; ++t) ps.push_back(0.5 * std::erfc(-alpha.dot(mu.draw(rng)) / std::sqrt(2.0)));
    const bt::SampleMoments mc = bt::sample_moments(ps);
    EXPECT_LT(std::abs(mc.mean - probit_predictive(alpha, post).prob), 3.0 * mc.mean_se);
}

TEST(Probit, ZeroAlphaObjectiveIsNLogTwo) {
    std::mt19937_64 rng(23);
    std::vector<EmbeddingPosterior> posts;
    std::vector<double> y;
    for (int i = 0; i < 7; ++i) {
        posts.push_back(random_posterior(3, rng));
        y.push_back(i % 2);
    }
    const double v = probit_map_objective(Vector::Zero(3), posts, y, 1.0, Matrix::Identity(3, 3)).value;
    EXPECT_NEAR(v, 7.0 * std::log(2.0), 1e-12);
}

TEST(Probit, SeparableScanDecreasesThenPenaltyDominates) {
    std::vector<EmbeddingPosterior> posts;
    std::vector<double> y;
    for (int i = 0; i < 6; ++i) {
        EmbeddingPosterior p;
        p.M = Vector::Constant(1, i < 3 ? -1.0 : 1.0);
        p.C = Matrix::Zero(1, 1);
        posts.push_back(p);
        y.push_back(i < 3 ? 0.0 : 1.0);
    }
    const Matrix K = Matrix::Identity(1, 1);
    std::vector<double> values;
    for (int k = 0; k <= 60; ++k) {
        values.push_back(probit_map_objective(Vector::Constant(1, 0.1 * k), posts, y, 1.0, K).value);
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < values.size(); ++k) {
        if (values[k] < values[best]) best = k;
    }
    ASSERT_GT(best, 0u);
    ASSERT_LT(best, values.size() - 1);
    for (std::size_t k = 1; k <= best; ++k) EXPECT_LT(values[k], values[k - 1]);
    for (std::size_t k = best + 1; k < values.size(); ++k) EXPECT_GT(values[k], values[k - 1]);
}

TEST(Probit, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(24);
    std::vector<EmbeddingPosterior> posts;
    std::vector<double> y;
    for (int i = 0; i < 5; ++i) {
        posts.push_back(random_posterior(3, rng, 0.5));
        y.push_back(i % 2);
    }
    const Matrix K = bt::random_spd(3, 0.2, 1.5, rng);
    const auto f = [&](const Vector& a) { return probit_map_objective(a, posts, y, 1.3, K); };
    EXPECT_TRUE(grad_check(f, bt::random_matrix(3, 1, rng), 1e-4).passed);
}

TEST(PredictiveDistribution, GaussianDensityMatchesOracle) {
    const PredictiveDistribution p = PredictiveDistribution::gaussian(0.3, 2.5);
    EXPECT_NEAR(p.log_density(-1.1), bt::gaussian_log_density(-1.1, 0.3, 2.5), 1e-14);
    EXPECT_THROW(PredictiveDistribution::gaussian(0.0, 0.0), NumericalError);
    EXPECT_THROW(PredictiveDistribution::point(1.0).log_density(1.0), InvalidArgument);
}

TEST(ModelKind, NamesRoundTrip) {
    for (ModelKind k : {ModelKind::Baseline, ModelKind::FreqShrink, ModelKind::BLR, ModelKind::ShrinkMAP,
                        ModelKind::BDR, ModelKind::ProbitShrink, ModelKind::ProbitBLR}) {
        EXPECT_EQ(model_kind_from_string(to_string(k)), k);
    }
    EXPECT_THROW(model_kind_from_string("forest"), InvalidArgument);
}

TEST(RegressionModel, ValidateRejectsBadShapes) {
    RegressionModel m;
    m.kind = ModelKind::BDR;
    m.landmarks = LandmarkSet::tied_to(Matrix::Identity(3, 2));
    m.alpha = Vector::Zero(3);
    m.noise.Sigma = Matrix::Zero(3, 3);
    m.noise.m0 = m.noise.m0_z = Vector::Zero(3);
    EXPECT_THROW(m.validate(), InvalidArgument);
    m.posterior_draws = Matrix::Zero(2, 4);
    EXPECT_NO_THROW(m.validate());
    m.sigma = 0.0;
    EXPECT_THROW(m.validate(), InvalidArgument);
    m.sigma = 1.0;
    m.kind = ModelKind::ShrinkMAP;
    EXPECT_THROW(m.validate(), InvalidArgument);
}

TEST(Predictor, BlrVarianceIgnoresBagSize) {
    std::mt19937_64 rng(25);
    RegressionModel m;
    m.kind = ModelKind::BLR;
    m.landmarks = LandmarkSet::tied_to(bt::random_matrix(3, 2, rng));
    m.alpha = bt::random_matrix(3, 1, rng);
    m.weight_cov = bt::random_spd(4, 0.01, 0.1, rng);
    EmbeddingStats a = stats_of(Vector::Constant(3, 0.4));
    EmbeddingStats b = a;
    a.n = 5;
    b.n = 1000;
    const Predictor pred(m);
    const auto out = pred.predict(std::vector<EmbeddingStats>{a, b});
    EXPECT_EQ(out[0].variance, out[1].variance);
}

TEST(Predictor, ShrinkageExactLimitEqualsBaselineOnEmbedding) {
    std::mt19937_64 rng(26);
    RegressionModel m;
    m.kind = ModelKind::ShrinkMAP;
    m.landmarks = LandmarkSet::tied_to(bt::random_matrix(4, 2, rng));
    m.alpha = bt::random_matrix(4, 1, rng);
    m.sigma = 0.5;
    m.eta = 1.0;
    m.noise.Sigma = Matrix::Zero(4, 4);
    m.noise.m0 = m.noise.m0_z = Vector::Constant(4, 0.2);
    const Bag bag = bt::random_bag(3, 2, rng);
    const EmbeddingStats s = empirical_embedding(bag, m.landmarks.u, m.kernel);
    const PredictiveDistribution p = Predictor(m).predict(bag);
    EXPECT_NEAR(p.mean, m.alpha.dot(s.mu_hat), 1e-7);
    EXPECT_NEAR(p.variance, 0.25, 1e-7);
}
