#include "bagreg/datagen.hpp"

#include "bagreg/errors.hpp"
#include "bagreg/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace bagreg {

namespace {

constexpr int kGaussOrder = 8;

// 8-point Gauss-Legendre on [-1, 1]
constexpr std::array<double, kGaussOrder> kGlNodes{
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, kGaussOrder> kGlWeights{
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

/// log density of x = G / y with G ~ Gamma(shape y/2, scale theta).
double scaled_gamma_log_density(double x, double y, double theta) {
    const double k = 0.5 * y;
    return std::log(y) + (k - 1.0) * std::log(y * x) - y * x / theta - std::lgamma(k) - k * std::log(theta);
}

}  // namespace

BayesOptimalPredictor::BayesOptimalPredictor(BayesOptimalOptions options) : options_(options) {
    if (!(options_.noise_sd >= 0.0)) throw InvalidArgument("noise sd must be >= 0");
    if (!(options_.label_lo > 0.0 && options_.label_hi > options_.label_lo)) {
        throw InvalidArgument("label range must satisfy 0 < lo < hi");
    }
    if (options_.grid_points < 2 || options_.label_nodes < 2 || options_.quad_panels < 1) {
        throw InvalidArgument("oracle grid sizes are too small");
    }
    theta_ = options_.convention == GammaConvention::Rate ? 2.0 : 0.5;
    grid_ = Vector::LinSpaced(options_.grid_points, options_.label_lo, options_.label_hi);
    if (options_.noise_sd == 0.0) return;

    const double sigma = options_.noise_sd;
    const double lo = options_.label_lo;
    const double hi = options_.label_hi;

    // Chebyshev-Lobatto nodes and the barycentric interpolation matrix onto the grid
    const Index m = options_.label_nodes;
    nodes_.resize(m);
    Vector bary(m);
    for (Index j = 0; j < m; ++j) {
        const double c = std::cos(std::numbers::pi * static_cast<double>(j) / static_cast<double>(m - 1));
        nodes_(j) = 0.5 * (lo + hi) + 0.5 * (hi - lo) * c;
        bary(j) = ((j % 2 == 0) ? 1.0 : -1.0) * ((j == 0 || j == m - 1) ? 0.5 : 1.0);
    }
    interp_ = Matrix::Zero(grid_.size(), m);
    for (Index g = 0; g < grid_.size(); ++g) {
        const double t = grid_(g);
        Index exact = -1;
        double total = 0.0;
        for (Index j = 0; j < m; ++j) {
            const double diff = t - nodes_(j);
            if (std::abs(diff) < 1e-14 * (hi - lo)) {
                exact = j;
                break;
            }
            interp_(g, j) = bary(j) / diff;
            total += interp_(g, j);
        }
        if (exact >= 0) {
            interp_.row(g).setZero();
            interp_(g, exact) = 1.0;
        } else {
            interp_.row(g) /= total;
        }
    }

    // composite Gauss-Legendre over the noiseless coordinate u in (0, u_max]
    const double k_max = 0.5 * hi;
    const double u_max = theta_ * (k_max + 12.0 * std::sqrt(k_max) + 12.0) / lo;
    const Index panels = std::max<Index>(options_.quad_panels, static_cast<Index>(std::ceil(20.0 * u_max / sigma)));
    const double width = u_max / static_cast<double>(panels);
    quad_u_.resize(panels * kGaussOrder);
    quad_w_.resize(panels * kGaussOrder);
    for (Index p = 0; p < panels; ++p) {
        const double mid = (static_cast<double>(p) + 0.5) * width;
        for (int q = 0; q < kGaussOrder; ++q) {
            quad_u_(p * kGaussOrder + q) = mid + 0.5 * width * kGlNodes[static_cast<std::size_t>(q)];
            quad_w_(p * kGaussOrder + q) = 0.5 * width * kGlWeights[static_cast<std::size_t>(q)];
        }
    }

    // table of log p(x | node) on a padded uniform x grid
    x_lo_ = -8.0 * sigma;
    const double x_hi = u_max + 8.0 * sigma;
    x_cells_ = std::max<Index>(2048, static_cast<Index>(std::ceil((x_hi - x_lo_) / (sigma / 16.0))));
    x_step_ = (x_hi - x_lo_) / static_cast<double>(x_cells_);
    const Index rows = x_cells_ + 3;  // row i holds x_lo + (i - 1) step

    Matrix weighted(quad_u_.size(), m);  // gamma density times quadrature weight
    for (Index j = 0; j < m; ++j) {
        for (Index q = 0; q < quad_u_.size(); ++q) {
            weighted(q, j) = std::exp(scaled_gamma_log_density(quad_u_(q), nodes_(j), theta_)) * quad_w_(q);
        }
    }
    table_.resize(rows, m);
    const double norm = 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi));
    constexpr Index kBlock = 256;
    const std::size_t n_blocks = static_cast<std::size_t>((rows + kBlock - 1) / kBlock);
    parallel_for(n_blocks, [&](std::size_t b) {
        const Index start = static_cast<Index>(b) * kBlock;
        const Index len = std::min(kBlock, rows - start);
        Matrix phi(len, quad_u_.size());
        for (Index r = 0; r < len; ++r) {
            const double x = x_lo_ + static_cast<double>(start + r - 1) * x_step_;
            for (Index q = 0; q < quad_u_.size(); ++q) {
                const double z = (x - quad_u_(q)) / sigma;
                phi(r, q) = norm * std::exp(-0.5 * z * z);
            }
        }
        const Matrix dens = phi * weighted;
        table_.middleRows(start, len) = dens.array().max(1e-300).log().matrix();
    });
}

double BayesOptimalPredictor::coordinate_log_density(double x, double y) const {
    if (options_.noise_sd == 0.0) {
        if (!(x > 0.0)) throw InvalidArgument("noise-free coordinates must be positive");
        return scaled_gamma_log_density(x, y, theta_);
    }
    const double sigma = options_.noise_sd;
    // log-sum-exp over quadrature nodes for robustness far in the tails
    double hi = -std::numeric_limits<double>::infinity();
    Vector terms(quad_u_.size());
    for (Index q = 0; q < quad_u_.size(); ++q) {
        const double z = (x - quad_u_(q)) / sigma;
        terms(q) = scaled_gamma_log_density(quad_u_(q), y, theta_) + std::log(quad_w_(q)) - 0.5 * z * z;
        hi = std::max(hi, terms(q));
    }
    const double acc = (terms.array() - hi).exp().sum();
    return hi + std::log(acc) - std::log(sigma * std::sqrt(2.0 * std::numbers::pi));
}

Vector BayesOptimalPredictor::log_likelihood(const Bag& bag) const {
    if (options_.noise_sd > 0.0) return noisy_log_likelihood(bag);
    double count = 0.0;
    double sum_x = 0.0;
    double sum_log = 0.0;
    for (Index r = 0; r < bag.points.rows(); ++r) {
        for (Index c = 0; c < bag.points.cols(); ++c) {
            const double x = bag.points(r, c);
            if (!(x > 0.0) || !std::isfinite(x)) {
                throw InvalidArgument("bag '" + bag.id + "' has a non-positive coordinate, outside the noise-free support");
            }
            count += 1.0;
            sum_x += x;
            sum_log += std::log(x);
        }
    }
    Vector ll(grid_.size());
    for (Index g = 0; g < grid_.size(); ++g) {
        const double y = grid_(g);
        const double k = 0.5 * y;
        ll(g) = count * (std::log(y) - std::lgamma(k) - k * std::log(theta_) + (k - 1.0) * std::log(y)) +
                (k - 1.0) * sum_log - y * sum_x / theta_;
    }
    return ll;
}

Vector BayesOptimalPredictor::noisy_log_likelihood(const Bag& bag) const {
    const Index m = nodes_.size();
    Vector weights = Vector::Zero(table_.rows());
    Vector outside = Vector::Zero(m);
    for (Index r = 0; r < bag.points.rows(); ++r) {
        for (Index c = 0; c < bag.points.cols(); ++c) {
            const double x = bag.points(r, c);
            if (!std::isfinite(x)) throw InvalidArgument("bag '" + bag.id + "' contains non-finite points");
            const double pos = (x - x_lo_) / x_step_;
            if (pos < 0.0 || pos > static_cast<double>(x_cells_)) {
                for (Index j = 0; j < m; ++j) outside(j) += coordinate_log_density(x, nodes_(j));
                continue;
            }
            const Index i = std::min<Index>(static_cast<Index>(pos), x_cells_ - 1);
            const double t = pos - static_cast<double>(i);
            // cubic Lagrange through rows i .. i + 3 (x offsets -1, 0, 1, 2)
            weights(i) += -t * (t - 1.0) * (t - 2.0) / 6.0;
            weights(i + 1) += (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
            weights(i + 2) += -(t + 1.0) * t * (t - 2.0) / 2.0;
            weights(i + 3) += (t + 1.0) * t * (t - 1.0) / 6.0;
        }
    }
    const Vector at_nodes = table_.transpose() * weights + outside;
    return interp_ * at_nodes;
}

PredictiveDistribution BayesOptimalPredictor::posterior(const Vector& loglik) const {
    const Index g = grid_.size();
    const double h = (options_.label_hi - options_.label_lo) / static_cast<double>(g - 1);
    const double top = loglik.maxCoeff();
    Vector dens = (loglik.array() - top).exp().matrix();
    auto trapz = [&](const Vector& f) { return h * (f.sum() - 0.5 * (f(0) + f(g - 1))); };
    dens /= trapz(dens);
    const double mean = trapz(Vector(dens.cwiseProduct(grid_)));
    const double var = trapz(Vector(dens.array() * (grid_.array() - mean).square()));

    PredictiveDistribution p;
    p.kind = PredictiveKind::Grid;
    p.mean = mean;
    p.variance = std::max(var, 1e-300);
    p.grid_lo = options_.label_lo;
    p.grid_hi = options_.label_hi;
    p.grid_density = std::move(dens);
    return p;
}

PredictiveDistribution BayesOptimalPredictor::predict(const Bag& bag) const {
    if (bag.points.rows() == 0) return posterior(Vector::Zero(grid_.size()));
    return posterior(log_likelihood(bag));
}

std::vector<PredictiveDistribution> BayesOptimalPredictor::predict(const BagDataset& data) const {
    std::vector<PredictiveDistribution> out(data.size());
    parallel_for(data.size(), [&](std::size_t i) { out[i] = predict(data.bags[i]); });
    return out;
}

PredictiveDistribution bayes_optimal_predict(const Bag& bag, const BayesOptimalOptions& options) {
    return BayesOptimalPredictor(options).predict(bag);
}

}  // namespace bagreg
