#pragma once

// Independent reference implementations used as test oracles. None of these call into
// the library's numerical routines.

#include "bagreg/embeddings.hpp"
#include "bagreg/models.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace bagreg::testing {

/// Scalar-loop RBF kernel.
double naive_rbf(const Vector& x, const Vector& y, double bandwidth);

/// Double-loop mean of k(x_j, u_l) over the points of a bag.
Vector double_loop_embedding(const Matrix& points, const Matrix& landmarks, double bandwidth);

/// int k(x, z) k(z, y) exp(-|z|^2 / (2 l^2)) dz by tensor-product Gauss-Legendre
/// quadrature over a box wide enough for the integrand (p = 1 or 2).
double quadrature_conv_kernel(const Vector& x, const Vector& y, double bandwidth, double conv_scale);

/// Textbook covariance with denominator n (two-pass).
Matrix textbook_covariance(const Matrix& rows);

/// Gaussian log density, written out term by term.
double gaussian_log_density(double y, double mean, double variance);

/// Sum over bags of the Gaussian NLL under (alpha^T M_i, alpha^T C_i alpha + sigma^2), plus
/// alpha^T K alpha / (2 rho^2).
double shrinkage_nll_oracle(const Vector& alpha, double sigma, const std::vector<EmbeddingPosterior>& posts,
                            const std::vector<double>& labels, const Matrix& K, double rho);

/// Draws from N(mean, cov) via an eigendecomposition (tolerates PSD covariances).
class MvnSampler {
public:
    MvnSampler(Vector mean, const Matrix& cov);
    Vector draw(std::mt19937_64& rng) const;

private:
    Vector mean_;
    Matrix factor_;
};

/// Random symmetric positive definite matrix with eigenvalues in [lo, hi].
Matrix random_spd(Index n, double lo, double hi, std::mt19937_64& rng);

/// Matrix of iid N(0, scale^2) entries.
Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0);

/// Random bag with n points in p dimensions.
Bag random_bag(Index n, Index p, std::mt19937_64& rng, double scale = 1.0);

/// Mean and standard error of a sample.
struct SampleMoments {
    double mean = 0.0;
    double variance = 0.0;
    double mean_se = 0.0;      ///< sd / sqrt(n)
    double variance_se = 0.0;  ///< sqrt((m4 - var^2) / n)
};
SampleMoments sample_moments(const std::vector<double>& xs);

}  // namespace bagreg::testing
