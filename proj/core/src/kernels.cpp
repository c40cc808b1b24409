#include "bagreg/kernels.hpp"

#include "bagreg/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace bagreg {

namespace {

void require_finite(const Eigen::Ref<const Vector>& v, const char* what) {
    if (!v.allFinite()) throw InvalidArgument(std::string(what) + " contains non-finite values");
}

void require_same_dim(Index a, Index b) {
    if (a != b) {
        throw InvalidArgument("dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
    }
}

}  // namespace

void KernelParams::validate() const {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
        throw InvalidArgument("kernel bandwidth must be positive and finite");
    }
    if (r_choice == RChoice::RConv && (!(conv_scale > 0.0) || !std::isfinite(conv_scale))) {
        throw InvalidArgument("convolution scale must be positive and finite");
    }
}

double rbf_kernel(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y,
                  const KernelParams& params) {
    params.validate();
    require_same_dim(x.size(), y.size());
    require_finite(x, "x");
    require_finite(y, "y");
    const double sq = (x - y).squaredNorm();
    return std::exp(-sq / (2.0 * params.bandwidth * params.bandwidth));
}

double conv_kernel(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y,
                   const KernelParams& params) {
    KernelParams p = params;
    p.r_choice = RChoice::RConv;
    p.validate();
    require_same_dim(x.size(), y.size());
    require_finite(x, "x");
    require_finite(y, "y");
    const double b2 = params.bandwidth * params.bandwidth;
    const double a = 2.0 / b2 + 1.0 / (params.conv_scale * params.conv_scale);
    const double dim = static_cast<double>(x.size());
    const double log_norm = 0.5 * dim * std::log(2.0 * std::numbers::pi / a);
    const double expo = -(x.squaredNorm() + y.squaredNorm()) / (2.0 * b2) +
                        (x + y).squaredNorm() / (2.0 * a * b2 * b2);
    return std::exp(log_norm + expo);
}

double prior_kernel(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y,
                    const KernelParams& params) {
    return params.r_choice == RChoice::RK ? rbf_kernel(x, y, params) : conv_kernel(x, y, params);
}

Matrix squared_distances(const Matrix& a, const Matrix& b) {
    require_same_dim(a.cols(), b.cols());
    const Vector an = a.rowwise().squaredNorm();
    const Vector bn = b.rowwise().squaredNorm();
    Matrix sq = -2.0 * (a * b.transpose());
    sq.colwise() += an;
    sq.rowwise() += bn.transpose();
    return sq.cwiseMax(0.0);
}

Matrix rbf_gram(const Matrix& a, const Matrix& b, double bandwidth) {
    if (!(bandwidth > 0.0)) throw InvalidArgument("kernel bandwidth must be positive");
    return (squared_distances(a, b) * (-0.5 / (bandwidth * bandwidth))).array().exp().matrix();
}

namespace {

Matrix conv_gram(const Matrix& a, const Matrix& b, const KernelParams& params) {
    const double b2 = params.bandwidth * params.bandwidth;
    const double alpha = 2.0 / b2 + 1.0 / (params.conv_scale * params.conv_scale);
    const double dim = static_cast<double>(a.cols());
    const double log_norm = 0.5 * dim * std::log(2.0 * std::numbers::pi / alpha);
    // exponent = -c1 (|x|^2 + |y|^2) + c2 x.y
    const double c2 = 1.0 / (alpha * b2 * b2);
    const double c1 = 1.0 / (2.0 * b2) - c2 / 2.0;
    const Vector an = a.rowwise().squaredNorm();
    const Vector bn = b.rowwise().squaredNorm();
    Matrix e = c2 * (a * b.transpose());
    e.colwise() -= c1 * an;
    e.rowwise() -= c1 * bn.transpose();
    return (e.array() + log_norm).exp().matrix();
}

}  // namespace

Matrix gram(const Matrix& a, const Matrix& b, const KernelParams& params, double eta) {
    params.validate();
    require_same_dim(a.cols(), b.cols());
    if (!(eta > 0.0)) throw InvalidArgument("eta must be positive");
    if (!a.allFinite() || !b.allFinite()) throw InvalidArgument("gram inputs must be finite");
    Matrix g = params.r_choice == RChoice::RK ? rbf_gram(a, b, params.bandwidth) : conv_gram(a, b, params);
    if (eta != 1.0) g *= eta;
    return g;
}

Matrix gram(const Matrix& a, const KernelParams& params, double eta) {
    Matrix g = gram(a, a, params, eta);
    for (Index j = 0; j < g.cols(); ++j) {
        for (Index i = j + 1; i < g.rows(); ++i) g(i, j) = g(j, i);
    }
    return g;
}

// --- Cholesky ----------------------------------------------------------------

namespace {

bool factor_ok(const Eigen::LLT<Matrix>& llt, double mean_diag) {
    if (llt.info() != Eigen::Success) return false;
    const auto diag = llt.matrixLLT().diagonal();
    if (!diag.allFinite()) return false;
    const double min_pivot = diag.minCoeff();
    return min_pivot > 0.0 && min_pivot * min_pivot > 1e-14 * mean_diag;
}

std::string condition_report(const Matrix& m) {
    std::ostringstream os;
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    if (es.info() == Eigen::Success && m.rows() > 0) {
        const double lo = es.eigenvalues().minCoeff();
        const double hi = es.eigenvalues().maxCoeff();
        os << "min eigenvalue " << lo << ", max eigenvalue " << hi;
        if (lo > 0) os << ", condition estimate " << hi / lo;
        else os << ", condition estimate inf";
    } else {
        os << "eigenvalue diagnostics unavailable";
    }
    return os.str();
}

}  // namespace

Cholesky::Cholesky(const Matrix& m, const JitterPolicy& policy) {
    if (m.rows() != m.cols()) throw InvalidArgument("Cholesky requires a square matrix");
    if (!m.allFinite()) throw NumericalError("Cholesky input contains non-finite values");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw InvalidArgument("Cholesky requires a symmetric matrix");
    }
    const Index n = m.rows();
    double mean_diag = n > 0 ? m.diagonal().mean() : 1.0;
    if (!(mean_diag > 0.0)) mean_diag = 1.0;

    llt_.compute(m);
    if (factor_ok(llt_, mean_diag)) return;
    if (policy.enabled) {
        for (double rel = policy.initial; rel <= policy.max * (1.0 + 1e-12); rel *= policy.growth) {
            const double jitter = rel * mean_diag;
            Matrix jittered = m;
            jittered.diagonal().array() += jitter;
            llt_.compute(jittered);
            if (factor_ok(llt_, mean_diag)) {
                jitter_ = jitter;
                return;
            }
        }
    }
    throw NumericalError("Cholesky factorization failed" +
                         std::string(policy.enabled ? " after maximum jitter" : " (jitter disabled)") +
                         ": " + condition_report(m));
}

double Cholesky::log_det() const {
    return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

Matrix chol_solve(const Matrix& m, const Matrix& b, const JitterPolicy& policy) {
    if (b.rows() != m.rows()) throw InvalidArgument("chol_solve: right-hand side has wrong row count");
    return Cholesky(m, policy).solve(b);
}

// --- landmarks ---------------------------------------------------------------

LandmarkSet LandmarkSet::tied_to(Matrix u) {
    LandmarkSet set;
    set.z = u;
    set.u = std::move(u);
    set.tied = true;
    return set;
}

void LandmarkSet::validate() const {
    if (u.rows() < 1 || z.rows() < 1) throw InvalidArgument("landmark sets must be nonempty");
    if (u.cols() != z.cols()) throw InvalidArgument("u and z landmarks have different dimension");
    if (!u.allFinite() || !z.allFinite()) throw InvalidArgument("landmarks must be finite");
    if (tied && (u.rows() != z.rows() || u != z)) throw InvalidArgument("tied landmarks require z == u");
    std::set<std::vector<double>> seen;
    for (Index i = 0; i < u.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(u.cols()));
        for (Index j = 0; j < u.cols(); ++j) row[static_cast<std::size_t>(j)] = u(i, j);
        if (!seen.insert(row).second) throw InvalidArgument("duplicate landmark row " + std::to_string(i));
    }
}

namespace {

double assign(const Matrix& points, const Matrix& centers, std::vector<int>& assignment, Vector& dist) {
    const Matrix sq = squared_distances(points, centers);
    double sse = 0.0;
    for (Index i = 0; i < points.rows(); ++i) {
        Index best = 0;
        dist(i) = sq.row(i).minCoeff(&best);
        assignment[static_cast<std::size_t>(i)] = static_cast<int>(best);
        sse += dist(i);
    }
    return sse;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed, const KMeansOptions& options) {
    const Index n = points.rows();
    if (k < 1 || n < k) throw InvalidArgument("k-means requires 1 <= k <= number of points");
    if (!points.allFinite()) throw InvalidArgument("k-means points must be finite");

    std::mt19937_64 rng(seed);
    KMeansResult result;
    result.centers.resize(k, points.cols());

    // k-means++ seeding
    std::uniform_int_distribution<Index> first(0, n - 1);
    result.centers.row(0) = points.row(first(rng));
    Vector closest = (points.rowwise() - result.centers.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < k; ++c) {
        const double total = closest.sum();
        Index pick = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng);
            for (pick = 0; pick < n - 1; ++pick) {
                target -= closest(pick);
                if (target <= 0.0) break;
            }
        } else {
            pick = first(rng);
        }
        result.centers.row(c) = points.row(pick);
        closest = closest.cwiseMin((points.rowwise() - result.centers.row(c)).rowwise().squaredNorm());
    }

    result.assignment.assign(static_cast<std::size_t>(n), 0);
    Vector dist(n);
    double prev = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        const double sse = assign(points, result.centers, result.assignment, dist);
        result.sse_history.push_back(sse);
        result.iterations = iter + 1;
        if (std::isfinite(prev) && prev - sse <= options.relative_tolerance * std::max(prev, 1e-300)) break;
        prev = sse;

        Matrix sums = Matrix::Zero(k, points.cols());
        std::vector<Index> counts(static_cast<std::size_t>(k), 0);
        for (Index i = 0; i < n; ++i) {
            const int c = result.assignment[static_cast<std::size_t>(i)];
            sums.row(c) += points.row(i);
            ++counts[static_cast<std::size_t>(c)];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                result.centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
            } else {
                Index far = 0;
                dist.maxCoeff(&far);
                result.centers.row(c) = points.row(far);
                dist(far) = 0.0;
            }
        }
    }
    return result;
}

LandmarkSet kmeans_landmarks(const Matrix& points, int d, std::uint64_t seed, const KMeansOptions& options) {
    return LandmarkSet::tied_to(kmeans(points, d, seed, options).centers);
}

std::vector<Index> sample_indices(Index n, Index d, std::uint64_t seed) {
    if (d < 1 || d > n) throw InvalidArgument("cannot sample " + std::to_string(d) + " of " + std::to_string(n) + " points");
    std::vector<Index> idx(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    std::mt19937_64 rng(seed);
    for (Index i = 0; i < d; ++i) {
        std::uniform_int_distribution<Index> pick(i, n - 1);
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
    }
    idx.resize(static_cast<std::size_t>(d));
    return idx;
}

LandmarkSet sample_landmarks(const Matrix& points, int d, std::uint64_t seed) {
    const auto idx = sample_indices(points.rows(), d, seed);
    Matrix u(d, points.cols());
    for (Index i = 0; i < d; ++i) u.row(i) = points.row(idx[static_cast<std::size_t>(i)]);
    return LandmarkSet::tied_to(std::move(u));
}

double median_heuristic(const Matrix& points, Index max_points, std::uint64_t seed) {
    if (points.rows() < 2) throw InvalidArgument("median heuristic needs at least two points");
    Matrix sub;
    if (points.rows() > max_points) {
        const auto idx = sample_indices(points.rows(), max_points, seed);
        sub.resize(max_points, points.cols());
        for (Index i = 0; i < max_points; ++i) sub.row(i) = points.row(idx[static_cast<std::size_t>(i)]);
    } else {
        sub = points;
    }
    const Matrix sq = squared_distances(sub, sub);
    std::vector<double> d;
    d.reserve(static_cast<std::size_t>(sub.rows() * (sub.rows() - 1) / 2));
    for (Index j = 0; j < sub.rows(); ++j) {
        for (Index i = j + 1; i < sub.rows(); ++i) d.push_back(std::sqrt(sq(i, j)));
    }
    auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    const double med = *mid;
    if (!(med > 0.0)) throw InvalidArgument("median pairwise distance is zero");
    return med;
}

// --- grams -------------------------------------------------------------------

GramMatrices build_grams(const LandmarkSet& landmarks, const KernelParams& params, double eta) {
    params.validate();
    if (!(eta > 0.0)) throw InvalidArgument("eta must be positive");
    GramMatrices g;
    g.eta = eta;
    g.tied = landmarks.tied;
    g.R = gram(landmarks.u, params, eta);
    if (landmarks.tied) {
        g.R_z = g.R;
        g.R_zz = g.R;
    } else {
        g.R_z = gram(landmarks.z, landmarks.u, params, eta);
        g.R_zz = gram(landmarks.z, params, eta);
    }
    KernelParams k = params;
    k.r_choice = RChoice::RK;
    g.K_z = gram(landmarks.z, k, 1.0);
    return g;
}

GramMatrices GramMatrices::with_eta(double new_eta) const {
    if (!(new_eta > 0.0)) throw InvalidArgument("eta must be positive");
    GramMatrices g = *this;
    const double f = new_eta / eta;
    g.R *= f;
    if (tied) {
        g.R_z = g.R;
        g.R_zz = g.R;
    } else {
        g.R_z *= f;
        g.R_zz *= f;
    }
    g.eta = new_eta;
    return g;
}

}  // namespace bagreg
