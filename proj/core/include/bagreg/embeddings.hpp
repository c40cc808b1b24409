#pragma once

#include "bagreg/kernels.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace bagreg {

/// A set of i.i.d. sample points (rows) sharing one label.
struct Bag {
    std::string id;
    Matrix points;  ///< N x p
    std::optional<double> label;

    Index size() const { return points.rows(); }
};

struct BagDataset {
    std::vector<Bag> bags;

    std::size_t size() const { return bags.size(); }
    bool empty() const { return bags.empty(); }
    /// Point dimension p of the first bag (0 for an empty dataset).
    Index dim() const { return bags.empty() ? 0 : bags.front().points.cols(); }
    bool has_labels() const;
    Vector labels() const;
    /// All points stacked row-wise.
    Matrix stacked_points() const;
    /// Throws InvalidArgument for empty bags, non-finite points or inconsistent p.
    void validate() const;
};

/// Empirical embedding evaluated at the observation landmarks.
struct EmbeddingStats {
    Vector mu_hat;  ///< d-vector, mean of k(x_j, u_l) over the bag
    Index n = 0;    ///< bag size N_i
};

/// Gaussian posterior of the true embedding evaluated at the regression landmarks z.
struct EmbeddingPosterior {
    Vector M;  ///< s-vector
    Matrix C;  ///< s x s
    Index n = 0;
};

struct NoiseModel {
    Matrix Sigma;  ///< d x d pooled feature covariance
    Vector m0;     ///< prior mean at u
    Vector m0_z;   ///< prior mean at z (equals m0 for tied landmarks)
};

enum class CovarianceDenominator { N, NMinusOne };

/// Explicit RBF featurization of each point: N x d matrix of k(x_j, u_l).
Matrix feature_map(const Matrix& points, const Matrix& landmarks, double bandwidth);

EmbeddingStats empirical_embedding(const Bag& bag, const Matrix& landmarks, const KernelParams& params);
EmbeddingStats empirical_embedding(const Bag& bag, const LandmarkSet& landmarks, const KernelParams& params);

/// Derivative of the empirical embedding with respect to log(bandwidth).
Vector embedding_bandwidth_derivative(const Bag& bag, const Matrix& landmarks, const KernelParams& params);

/// Empirical embeddings of every bag (parallel over bags).
std::vector<EmbeddingStats> embed_dataset(const BagDataset& data, const Matrix& landmarks,
                                          const KernelParams& params);

/// Pooled covariance of feature vectors phi(x) = k(x, u) across bags and the prior mean m0.
///
/// Each bag contributes its empirical covariance (singleton bags contribute zero);
/// Sigma is the unweighted average over bags. m0 is the average empirical embedding.
NoiseModel pooled_covariance(const BagDataset& data, const LandmarkSet& landmarks, const KernelParams& params,
                             CovarianceDenominator denominator = CovarianceDenominator::N);

/// Conjugate posterior of mu(z) given the empirical embedding:
///   M = R_z (R + Sigma/N)^{-1} (mu_hat - m0) + m0_z
///   C = R_zz - R_z (R + Sigma/N)^{-1} R_z^T
EmbeddingPosterior shrinkage_posterior(const EmbeddingStats& stats, const NoiseModel& noise,
                                       const GramMatrices& grams, const JitterPolicy& jitter = {});

/// Point-estimate shrinkage at u: R (R + Sigma/N)^{-1} (mu_hat - t) + t.
EmbeddingStats frequentist_shrinkage(const EmbeddingStats& stats, const NoiseModel& noise,
                                     const GramMatrices& grams, const Vector& shrink_to,
                                     const JitterPolicy& jitter = {});

/// Shrinkage posterior factors for one bag size N, shared by every bag of that size.
struct PosteriorFactor {
    Index n = 0;
    Cholesky chol;  ///< of R + Sigma/N
    Matrix G;       ///< (R + Sigma/N)^{-1} R_z^T, d x s
    Matrix C;       ///< posterior covariance at z, s x s
};

PosteriorFactor posterior_factor(Index n, const NoiseModel& noise, const GramMatrices& grams,
                                 const JitterPolicy& jitter = {});

/// Posterior for every bag, factoring R + Sigma/N once per distinct bag size.
std::vector<EmbeddingPosterior> shrinkage_posteriors(const std::vector<EmbeddingStats>& stats,
                                                     const NoiseModel& noise, const GramMatrices& grams,
                                                     const JitterPolicy& jitter = {});

}  // namespace bagreg
