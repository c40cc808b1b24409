#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace bagreg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Which covariance function the embedding prior uses: the RBF kernel itself,
/// or its self-convolution against an (unnormalized) Gaussian measure.
enum class RChoice { RK, RConv };

struct KernelParams {
    double bandwidth = 1.0;   ///< length-scale of the RBF kernel k
    double conv_scale = 1.0;  ///< length-scale of the Gaussian measure; ignored for RK
    RChoice r_choice = RChoice::RK;

    /// Throws InvalidArgument unless bandwidth > 0 and (for RConv) conv_scale > 0.
    void validate() const;
};

/// exp(-|x - y|^2 / (2 bandwidth^2)).
double rbf_kernel(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y,
                  const KernelParams& params);

/// Closed form of  r(x, y) = \int k(x, z) k(z, y) exp(-|z|^2 / (2 l^2)) dz.
///
/// With a = 2/b^2 + 1/l^2 (b the RBF bandwidth, l = conv_scale):
///   r(x, y) = (2 pi / a)^{p/2} exp(-(|x|^2 + |y|^2) / (2 b^2) + |x + y|^2 / (2 a b^4)).
double conv_kernel(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y,
                   const KernelParams& params);

/// r(x, y) under params.r_choice.
double prior_kernel(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y,
                    const KernelParams& params);

/// Pairwise squared distances between the rows of a and b, via |a|^2 + |b|^2 - 2 a.b,
/// clamped at zero.
Matrix squared_distances(const Matrix& a, const Matrix& b);

/// k(a_i, b_j) for all row pairs.
Matrix rbf_gram(const Matrix& a, const Matrix& b, double bandwidth);

/// eta * r(a_s, b_t). Rows of a and b are points.
Matrix gram(const Matrix& a, const Matrix& b, const KernelParams& params, double eta = 1.0);

/// Symmetric variant of gram(a, a, ...): exactly symmetric, upper triangle mirrored.
Matrix gram(const Matrix& a, const KernelParams& params, double eta = 1.0);

/// Diagonal jitter schedule for Cholesky factorizations.
///
/// A plain factorization is attempted first. On failure, initial * mean(diag) is added
/// to the diagonal and multiplied by growth until it exceeds max * mean(diag).
struct JitterPolicy {
    double initial = 1e-8;
    double max = 1e-4;
    double growth = 10.0;
    bool enabled = true;

    static JitterPolicy none() {
        JitterPolicy p;
        p.enabled = false;
        return p;
    }
};

/// Cholesky factor of a symmetric positive (semi)definite matrix with jitter fallback.
class Cholesky {
public:
    Cholesky() = default;
    explicit Cholesky(const Matrix& m, const JitterPolicy& policy = {});

    Matrix solve(const Matrix& b) const { return llt_.solve(b); }
    Vector solve(const Vector& b) const { return llt_.solve(b); }

    /// log det of the (jittered) matrix.
    double log_det() const;
    /// Absolute jitter that was added to the diagonal (0 if none was needed).
    double jitter() const { return jitter_; }
    Index size() const { return llt_.rows(); }
    Matrix lower() const { return llt_.matrixL(); }
    const Eigen::LLT<Matrix>& llt() const { return llt_; }

private:
    Eigen::LLT<Matrix> llt_;
    double jitter_ = 0.0;
};

/// M^{-1} B through a jittered Cholesky factorization of M.
Matrix chol_solve(const Matrix& m, const Matrix& b, const JitterPolicy& policy = {});

/// Observation landmarks u (d x p) and regression landmarks z (s x p).
struct LandmarkSet {
    Matrix u;
    Matrix z;
    bool tied = true;

    static LandmarkSet tied_to(Matrix u);
    Index d() const { return u.rows(); }
    Index s() const { return z.rows(); }
    Index dim() const { return u.cols(); }
    void validate() const;
};

struct KMeansOptions {
    int max_iterations = 100;
    double relative_tolerance = 1e-6;
};

struct KMeansResult {
    Matrix centers;
    std::vector<int> assignment;
    /// Within-cluster SSE after each assignment step.
    std::vector<double> sse_history;
    int iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding. An empty cluster is re-seeded at the
/// point farthest from its current center.
KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed, const KMeansOptions& options = {});

/// Tied landmarks from k-means centers.
LandmarkSet kmeans_landmarks(const Matrix& points, int d, std::uint64_t seed,
                             const KMeansOptions& options = {});

/// d distinct row indices of an n-row matrix, uniformly without replacement.
std::vector<Index> sample_indices(Index n, Index d, std::uint64_t seed);

/// Tied landmarks sampled without replacement from the rows of points.
LandmarkSet sample_landmarks(const Matrix& points, int d, std::uint64_t seed);

/// Median pairwise Euclidean distance over a random subsample of at most max_points rows.
double median_heuristic(const Matrix& points, Index max_points, std::uint64_t seed);

/// Prior covariance matrices evaluated at the landmarks.
struct GramMatrices {
    Matrix R;     ///< d x d, eta r(u_s, u_t)
    Matrix R_z;   ///< s x d, eta r(z_s, u_t)
    Matrix R_zz;  ///< s x s, eta r(z_s, z_t)
    Matrix K_z;   ///< s x s, k(z_s, z_t)
    double eta = 1.0;
    bool tied = true;

    /// Same matrices with eta replaced; R-type matrices rescale exactly.
    GramMatrices with_eta(double new_eta) const;
};

GramMatrices build_grams(const LandmarkSet& landmarks, const KernelParams& params, double eta);

}  // namespace bagreg
