#pragma once

#include "bagreg/models.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <variant>

namespace bagreg {

struct FixedBagSize {
    Index n = 1000;
};

/// s5 percent of bags with N = 5, 25% with 20, 25% with 100, the rest with 1000.
struct MixedBagSizes {
    double s5 = 0.0;
};

/// How the second gamma parameter (1/2) is read.
enum class GammaConvention { Rate, Scale };

enum class Split { Train, Early, Val, Test };
inline constexpr std::array<Split, 4> kAllSplits{Split::Train, Split::Early, Split::Val, Split::Test};
std::string to_string(Split split);

struct GammaConfig {
    std::size_t n_train = 1000;
    std::size_t n_early = 500;
    std::size_t n_val = 500;
    std::size_t n_test = 1000;
    Index dim = 5;
    std::variant<FixedBagSize, MixedBagSizes> bag_size = FixedBagSize{};
    double noise_sd = 0.0;
    std::uint64_t seed = 0;
    GammaConvention convention = GammaConvention::Rate;
    double label_lo = 4.0;
    double label_hi = 8.0;

    std::size_t count(Split split) const;
    void validate() const;
};

struct GammaSplits {
    BagDataset train;
    BagDataset early;
    BagDataset val;
    BagDataset test;

    const BagDataset& get(Split split) const;
    BagDataset& get(Split split);
};

/// Seed of the independent random stream used for one split.
std::uint64_t split_seed(std::uint64_t seed, Split split);

/// Bag sizes for n bags. Mixed sizes use exact proportions (largest-remainder rounding),
/// then a seeded shuffle.
std::vector<Index> bag_sizes(const GammaConfig& config, std::size_t n, std::uint64_t seed);

/// y ~ Uniform(lo, hi); each coordinate (1/y) Gamma(y/2, 1/2) + Normal(0, noise_sd^2).
BagDataset gamma_generate_split(const GammaConfig& config, Split split);
GammaSplits gamma_generate(const GammaConfig& config);

// --- Bayes-optimal oracle ----------------------------------------------------

struct BayesOptimalOptions {
    double noise_sd = 0.0;
    GammaConvention convention = GammaConvention::Rate;
    double label_lo = 4.0;
    double label_hi = 8.0;
    Index grid_points = 2048;  ///< uniform label grid, trapezoid rule
    Index label_nodes = 64;    ///< Chebyshev nodes for the noisy likelihood
    Index quad_panels = 400;   ///< Gauss-Legendre panels over the noiseless coordinate
};

/// True posterior over the label under the generating process, tabulated on a grid.
///
/// With noise the per-coordinate density is a gamma/normal convolution; its log is
/// tabulated over x at Chebyshev label nodes and interpolated in both directions.
class BayesOptimalPredictor {
public:
    explicit BayesOptimalPredictor(BayesOptimalOptions options = {});

    /// A bag with zero rows gives the prior.
    PredictiveDistribution predict(const Bag& bag) const;
    std::vector<PredictiveDistribution> predict(const BagDataset& data) const;

    /// log p(x | y) for one coordinate, by direct quadrature.
    double coordinate_log_density(double x, double y) const;

    const Vector& label_grid() const { return grid_; }
    const BayesOptimalOptions& options() const { return options_; }

private:
    Vector log_likelihood(const Bag& bag) const;
    Vector noisy_log_likelihood(const Bag& bag) const;
    PredictiveDistribution posterior(const Vector& loglik) const;

    BayesOptimalOptions options_;
    Vector grid_;
    double theta_ = 2.0;  ///< gamma scale
    // noisy case
    Vector nodes_;         ///< Chebyshev label nodes
    Matrix interp_;        ///< grid_points x label_nodes barycentric interpolation matrix
    Vector quad_u_, quad_w_;
    double x_lo_ = 0.0, x_step_ = 1.0;
    Index x_cells_ = 0;
    Matrix table_;         ///< (x_cells + 1) x label_nodes, log p(x | node)
};

/// One-off convenience wrapper; construct a BayesOptimalPredictor to reuse the table.
PredictiveDistribution bayes_optimal_predict(const Bag& bag, const BayesOptimalOptions& options);

}  // namespace bagreg
