#include "bagreg/embeddings.hpp"

#include "bagreg/errors.hpp"
#include "bagreg/parallel.hpp"

#include <cmath>

namespace bagreg {

bool BagDataset::has_labels() const {
    for (const auto& b : bags) {
        if (!b.label) return false;
    }
    return !bags.empty();
}

Vector BagDataset::labels() const {
    Vector y(static_cast<Index>(bags.size()));
    for (std::size_t i = 0; i < bags.size(); ++i) {
        if (!bags[i].label) throw InvalidArgument("bag '" + bags[i].id + "' has no label");
        y(static_cast<Index>(i)) = *bags[i].label;
    }
    return y;
}

Matrix BagDataset::stacked_points() const {
    Index total = 0;
    for (const auto& b : bags) total += b.points.rows();
    Matrix all(total, dim());
    Index row = 0;
    for (const auto& b : bags) {
        all.middleRows(row, b.points.rows()) = b.points;
        row += b.points.rows();
    }
    return all;
}

void BagDataset::validate() const {
    const Index p = dim();
    for (const auto& b : bags) {
        if (b.points.rows() < 1) throw InvalidArgument("bag '" + b.id + "' must contain at least one point");
        if (b.points.cols() != p) throw InvalidArgument("bag '" + b.id + "' has inconsistent dimension");
        if (!b.points.allFinite()) throw InvalidArgument("bag '" + b.id + "' contains non-finite points");
        if (b.label && !std::isfinite(*b.label)) throw InvalidArgument("bag '" + b.id + "' has a non-finite label");
    }
}

Matrix feature_map(const Matrix& points, const Matrix& landmarks, double bandwidth) {
    return rbf_gram(points, landmarks, bandwidth);
}

EmbeddingStats empirical_embedding(const Bag& bag, const Matrix& landmarks, const KernelParams& params) {
    params.validate();
    if (bag.points.rows() < 1) throw InvalidArgument("bag must contain at least one point");
    if (bag.points.cols() != landmarks.cols()) throw InvalidArgument("bag and landmark dimensions differ");
    if (!bag.points.allFinite()) throw InvalidArgument("bag '" + bag.id + "' contains non-finite points");
    EmbeddingStats stats;
    stats.mu_hat = feature_map(bag.points, landmarks, params.bandwidth).colwise().mean().transpose();
    stats.n = bag.points.rows();
    return stats;
}

EmbeddingStats empirical_embedding(const Bag& bag, const LandmarkSet& landmarks, const KernelParams& params) {
    return empirical_embedding(bag, landmarks.u, params);
}

Vector embedding_bandwidth_derivative(const Bag& bag, const Matrix& landmarks, const KernelParams& params) {
    params.validate();
    const double b2 = params.bandwidth * params.bandwidth;
    const Matrix sq = squared_distances(bag.points, landmarks);
    const Matrix k = (sq * (-0.5 / b2)).array().exp().matrix();
    // d k / d log b = k * |x - u|^2 / b^2
    return (k.array() * sq.array() / b2).matrix().colwise().mean().transpose();
}

std::vector<EmbeddingStats> embed_dataset(const BagDataset& data, const Matrix& landmarks,
                                          const KernelParams& params) {
    std::vector<EmbeddingStats> out(data.size());
    parallel_for(data.size(), [&](std::size_t i) { out[i] = empirical_embedding(data.bags[i], landmarks, params); });
    return out;
}

NoiseModel pooled_covariance(const BagDataset& data, const LandmarkSet& landmarks, const KernelParams& params,
                             CovarianceDenominator denominator) {
    if (data.empty()) throw InvalidArgument("pooled covariance needs a nonempty dataset");
    params.validate();
    const Index d = landmarks.d();
    const std::size_t n_bags = data.size();
    std::vector<Matrix> covs(n_bags);
    std::vector<Vector> means(n_bags);
    std::vector<Vector> means_z(n_bags);
    parallel_for(n_bags, [&](std::size_t i) {
        const Bag& bag = data.bags[i];
        const Matrix f = feature_map(bag.points, landmarks.u, params.bandwidth);
        const Vector mean = f.colwise().mean().transpose();
        const Index n = f.rows();
        const double denom = denominator == CovarianceDenominator::N ? static_cast<double>(n)
                                                                     : static_cast<double>(n - 1);
        if (n > 1 && denom > 0) {
            const Matrix centered = f.rowwise() - mean.transpose();
            covs[i] = (centered.transpose() * centered) / denom;
        } else {
            covs[i] = Matrix::Zero(d, d);
        }
        means[i] = mean;
        if (!landmarks.tied) {
            means_z[i] = feature_map(bag.points, landmarks.z, params.bandwidth).colwise().mean().transpose();
        }
    });
    NoiseModel noise;
    noise.Sigma = Matrix::Zero(d, d);
    noise.m0 = Vector::Zero(d);
    noise.m0_z = Vector::Zero(landmarks.s());
    for (std::size_t i = 0; i < n_bags; ++i) {
        noise.Sigma += covs[i];
        noise.m0 += means[i];
        if (!landmarks.tied) noise.m0_z += means_z[i];
    }
    const double inv = 1.0 / static_cast<double>(n_bags);
    noise.Sigma *= inv;
    noise.Sigma = 0.5 * (noise.Sigma + noise.Sigma.transpose()).eval();
    noise.m0 *= inv;
    if (landmarks.tied) noise.m0_z = noise.m0;
    else noise.m0_z *= inv;
    return noise;
}

PosteriorFactor posterior_factor(Index n, const NoiseModel& noise, const GramMatrices& grams,
                                 const JitterPolicy& jitter) {
    if (n < 1) throw InvalidArgument("bag size must be at least 1");
    if (noise.Sigma.rows() != grams.R.rows()) throw InvalidArgument("noise model and grams disagree on d");
    PosteriorFactor f;
    f.n = n;
    Matrix a = grams.R + noise.Sigma / static_cast<double>(n);
    f.chol = Cholesky(a, jitter);
    f.G = f.chol.solve(Matrix(grams.R_z.transpose()));
    Matrix c = grams.R_zz - grams.R_z * f.G;
    f.C = 0.5 * (c + c.transpose());
    return f;
}

namespace {

EmbeddingPosterior posterior_from_factor(const PosteriorFactor& f, const EmbeddingStats& stats,
                                         const NoiseModel& noise) {
    EmbeddingPosterior post;
    post.M = f.G.transpose() * (stats.mu_hat - noise.m0) + noise.m0_z;
    post.C = f.C;
    post.n = stats.n;
    return post;
}

}  // namespace

EmbeddingPosterior shrinkage_posterior(const EmbeddingStats& stats, const NoiseModel& noise,
                                       const GramMatrices& grams, const JitterPolicy& jitter) {
    if (stats.mu_hat.size() != grams.R.rows()) throw InvalidArgument("embedding and grams disagree on d");
    return posterior_from_factor(posterior_factor(stats.n, noise, grams, jitter), stats, noise);
}

EmbeddingStats frequentist_shrinkage(const EmbeddingStats& stats, const NoiseModel& noise,
                                     const GramMatrices& grams, const Vector& shrink_to,
                                     const JitterPolicy& jitter) {
    if (stats.n < 1) throw InvalidArgument("bag size must be at least 1");
    if (shrink_to.size() != stats.mu_hat.size()) throw InvalidArgument("shrinkage target has wrong length");
    const Matrix a = grams.R + noise.Sigma / static_cast<double>(stats.n);
    const Cholesky chol(a, jitter);
    EmbeddingStats out;
    out.mu_hat = grams.R * chol.solve(Vector(stats.mu_hat - shrink_to)) + shrink_to;
    out.n = stats.n;
    return out;
}

std::vector<EmbeddingPosterior> shrinkage_posteriors(const std::vector<EmbeddingStats>& stats,
                                                     const NoiseModel& noise, const GramMatrices& grams,
                                                     const JitterPolicy& jitter) {
    std::map<Index, PosteriorFactor> factors;
    for (const auto& s : stats) {
        if (!factors.contains(s.n)) factors.emplace(s.n, posterior_factor(s.n, noise, grams, jitter));
    }
    std::vector<EmbeddingPosterior> out;
    out.reserve(stats.size());
    for (const auto& s : stats) out.push_back(posterior_from_factor(factors.at(s.n), s, noise));
    return out;
}

}  // namespace bagreg
