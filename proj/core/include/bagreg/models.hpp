#pragma once

#include "bagreg/embeddings.hpp"
#include "bagreg/inference.hpp"

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bagreg {

enum class ModelKind {
    Baseline,      ///< RBF network: beta^T mu_hat + b, trained on MSE
    FreqShrink,    ///< RBF network on frequentist-shrunk embeddings
    BLR,           ///< conjugate Bayesian linear regression on mu_hat
    ShrinkMAP,     ///< Bayesian mean shrinkage pooling, MAP weights
    BDR,           ///< shrinkage pooling with HMC over the weights
    ProbitShrink,  ///< probit classifier on the shrinkage posterior
    ProbitBLR,     ///< probit classifier on mu_hat with a Laplace posterior
};

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view name);

/// True for kinds whose embeddings go through the shrinkage posterior.
bool uses_shrinkage_posterior(ModelKind kind);

// --- predictive distributions ------------------------------------------------

enum class PredictiveKind { Point, Gaussian, Bernoulli, MixtureOfGaussians, Grid };

struct GaussianComponent {
    double mean = 0.0;
    double variance = 1.0;
};

struct PredictiveDistribution {
    PredictiveKind kind = PredictiveKind::Point;
    double mean = 0.0;
    double variance = 0.0;
    std::vector<GaussianComponent> components;  ///< equally weighted (mixtures only)
    double prob = 0.5;                          ///< P(y = 1) (Bernoulli only)
    double grid_lo = 0.0;                       ///< tabulated density support (Grid only)
    double grid_hi = 0.0;
    Vector grid_density;  ///< density at grid_lo + k (grid_hi - grid_lo) / (G - 1)

    static PredictiveDistribution point(double mean);
    static PredictiveDistribution gaussian(double mean, double variance);
    static PredictiveDistribution bernoulli(double prob);
    /// Mixture with mean and variance set to the mixture moments.
    static PredictiveDistribution mixture(std::vector<GaussianComponent> components);

    bool is_probabilistic() const { return kind != PredictiveKind::Point; }
    double sd() const;
    /// log p(y); log-mean-exp over mixture components; Bernoulli expects y in {0, 1}.
    double log_density(double y) const;
};

// --- fitted model ------------------------------------------------------------

struct RegressionModel {
    ModelKind kind = ModelKind::ShrinkMAP;
    /// alpha (shrinkage kinds) or beta without intercept (Baseline, FreqShrink, BLR, ProbitBLR)
    Vector alpha;
    double intercept = 0.0;
    /// Added to every predicted mean; fits centre the labels on the training mean.
    double label_offset = 0.0;
    double sigma = 1.0;
    double rho = 1.0;
    double eta = 1.0;
    KernelParams kernel;
    LandmarkSet landmarks;
    NoiseModel noise;
    /// Posterior covariance of [beta, intercept] (BLR, ProbitBLR).
    Matrix weight_cov;
    /// BDR only: one draw per row, [alpha (s), sigma].
    Matrix posterior_draws;
    /// Free-form training record (seeds, data source, tuned settings); not used for prediction.
    std::map<std::string, std::string> metadata;

    void validate() const;
};

/// beta^T mu_hat + b.
double baseline_predict(const RegressionModel& model, const EmbeddingStats& stats);

/// Mean squared error over the batch plus lambda |beta|^2 with lambda = 1 / (2 rho^2 n_train).
/// Gradient is with respect to [beta, b].
ValueAndGradient baseline_loss(const Vector& beta, double intercept, std::span<const EmbeddingStats> batch,
                               std::span<const double> labels, double rho, std::size_t n_train);

// --- Bayesian linear regression ---------------------------------------------

/// Rows [mu_hat^T, 1] (or mu_hat^T without an intercept column).
Matrix blr_design(std::span<const EmbeddingStats> stats, bool intercept);

/// Prior variances: rho^2 for features, (intercept_ratio * rho)^2 for the intercept column.
Vector blr_prior_variances(Index n_features, bool intercept, double rho, double intercept_ratio = 10.0);

struct BlrPosterior {
    Vector mean;
    Matrix cov;
};

/// N(m, S) with S^{-1} = diag(1/prior_var) + X^T X / sigma^2, m = S X^T y / sigma^2.
BlrPosterior blr_posterior(const Matrix& X, const Vector& y, double sigma, const Vector& prior_var);

/// log p(y | X, sigma, rho) with beta integrated out. Gradient entries are with respect to
/// (log sigma, log rho) and, when dX_dlogb is given, log bandwidth.
ValueAndGradient blr_log_evidence(const Matrix& X, const Vector& y, double sigma, double rho, bool intercept,
                                  const Matrix* dX_dlogb = nullptr, double intercept_ratio = 10.0);

/// Gaussian with mean m^T x + offset and variance sigma^2 + x^T S x.
PredictiveDistribution blr_predict(const RegressionModel& model, const EmbeddingStats& stats);

// --- shrinkage pooling -------------------------------------------------------

/// y | x, alpha ~ N(alpha^T M, alpha^T C alpha + sigma^2).
PredictiveDistribution shrinkage_predictive(const Vector& alpha, const EmbeddingPosterior& post, double sigma);

/// 1/2 sum_i { log(2 pi nu_i) + (y_i - xi_i)^2 / nu_i } + alpha^T K_z alpha / (2 rho^2).
double shrinkage_nll_objective(const Vector& alpha, double sigma, std::span<const EmbeddingPosterior> posts,
                               std::span<const double> labels, const Matrix& K_z, double rho);

/// Gradient of shrinkage_nll_objective with respect to [alpha, log sigma].
ValueAndGradient shrinkage_nll_with_gradient(const Vector& alpha, double sigma,
                                             std::span<const EmbeddingPosterior> posts,
                                             std::span<const double> labels, const Matrix& K_z, double rho);

/// Penalized shrinkage NLL over the parameter vector [alpha (s), log sigma, log eta?].
///
/// Bags are grouped by size so R + Sigma/N is factored once per distinct N. When eta is
/// learned the factors are rebuilt on every evaluation.
class ShrinkageObjective {
public:
    ShrinkageObjective(std::vector<EmbeddingStats> stats, Vector labels, NoiseModel noise, const GramMatrices& grams,
                       double rho, bool learn_eta, JitterPolicy jitter = {});

    Index num_params() const { return s_ + (learn_eta_ ? 2 : 1); }
    Index s() const { return s_; }
    std::size_t num_bags() const { return deltas_.size(); }
    bool learns_eta() const { return learn_eta_; }
    double fixed_eta() const { return eta_; }
    double rho() const { return rho_; }
    const Matrix& K_z() const { return K_z_; }
    const Vector& labels() const { return labels_; }

    /// Shrunk embeddings at the landmarks, one row per bag, at shrinkage strength eta.
    Matrix shrunk_means(double eta) const;

    /// Full objective including the Gaussian normalizer and the RKHS penalty.
    ValueAndGradient evaluate(const Vector& params) const;

    /// data_weight * sum over `batch` of per-bag NLL terms, plus the penalty if requested.
    ValueAndGradient evaluate(const Vector& params, std::span<const std::size_t> batch, double data_weight,
                              bool include_penalty = true) const;

private:
    struct Factor {
        Index n = 0;
        Cholesky chol;
        Matrix G;
        Matrix C;
    };
    Factor make_factor(Index n, double eta) const;

    Index s_ = 0;
    bool learn_eta_ = false;
    double eta_ = 1.0;
    double rho_ = 1.0;
    JitterPolicy jitter_;
    Matrix R_unit_, R_z_unit_, R_zz_unit_, K_z_;
    Matrix Sigma_;
    Vector m0_z_;
    std::vector<Vector> deltas_;     ///< mu_hat - m0
    std::vector<std::size_t> group_; ///< index into sizes_
    std::vector<Index> sizes_;
    Vector labels_;
    std::vector<Factor> cached_;     ///< only when eta is fixed
};

/// Mixture over posterior draws of (alpha, sigma). Draw rows are [alpha, sigma].
PredictiveDistribution bdr_predict(const Matrix& draws, const EmbeddingPosterior& post, double label_offset = 0.0);

// --- probit classification ---------------------------------------------------

/// P(y = 1) = Phi(alpha^T M / sqrt(1 + alpha^T C alpha)).
PredictiveDistribution probit_predictive(const Vector& alpha, const EmbeddingPosterior& post);

/// Negative Bernoulli log-likelihood under probit_predictive plus alpha^T K_z alpha / (2 rho^2).
/// Probabilities are clamped to [1e-12, 1 - 1e-12] before the log.
ValueAndGradient probit_map_objective(const Vector& alpha, std::span<const EmbeddingPosterior> posts,
                                      std::span<const double> labels, double rho, const Matrix& K_z);

/// Same objective with an arbitrary prior precision: penalty 1/2 alpha^T P alpha.
ValueAndGradient probit_objective(const Vector& alpha, std::span<const EmbeddingPosterior> posts,
                                  std::span<const double> labels, const Matrix& prior_precision,
                                  std::span<const std::size_t> batch = {}, double data_weight = 1.0);

/// Standard normal CDF.
double normal_cdf(double x);

// --- prediction --------------------------------------------------------------

/// Binds a fitted model to its kernel matrices and produces predictive distributions.
class Predictor {
public:
    explicit Predictor(RegressionModel model, JitterPolicy jitter = {});

    const RegressionModel& model() const { return model_; }

    PredictiveDistribution predict(const Bag& bag) const;
    std::vector<PredictiveDistribution> predict(const BagDataset& data) const;
    /// Predictions from precomputed empirical embeddings at model().landmarks.u.
    std::vector<PredictiveDistribution> predict(const std::vector<EmbeddingStats>& stats) const;

private:
    PredictiveDistribution predict_one(const EmbeddingStats& stats, const EmbeddingPosterior* post) const;

    RegressionModel model_;
    GramMatrices grams_;
    JitterPolicy jitter_;
};

}  // namespace bagreg
