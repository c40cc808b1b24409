#pragma once

#include "bagreg/models.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace bagreg {

/// Empirical embeddings and labels of one split at a fixed landmark set and bandwidth.
struct EmbeddedSplit {
    std::vector<EmbeddingStats> stats;
    Vector labels;

    static EmbeddedSplit from(const BagDataset& data, const LandmarkSet& landmarks, const KernelParams& kernel);
    std::size_t size() const { return stats.size(); }
};

/// Everything fixed across the models fitted on one featurization.
struct FitContext {
    LandmarkSet landmarks;
    KernelParams kernel;
    NoiseModel noise;  ///< pooled on the training split
    JitterPolicy jitter;
};

struct TrainSettings {
    AdamSettings adam;
    int batch_size = 64;
    int max_epochs = 1000;
    int patience = 30;  ///< evaluations (one per epoch) without improvement
    /// Start Adam from the closed-form ridge solution instead of zero weights.
    bool warm_start = true;
    std::uint64_t seed = 0;
};

struct FitDiagnostics {
    int epochs = 0;
    long steps = 0;
    bool early_stopped = false;
    bool diverged = false;
    bool converged = true;
    std::string message;
    double best_val = 0.0;
    std::vector<double> val_history;
    // sampler only
    double accept_rate = 0.0;
    int divergences = 0;
    Vector rhat;
};

struct FitResult {
    RegressionModel model;
    FitDiagnostics diagnostics;
};

/// Minibatch Adam with per-epoch validation and best-iterate selection.
///
/// `batch_objective(params, batch)` returns the training loss on the batch;
/// `val_metric(params)` is evaluated once before training and after every epoch.
struct AdamRun {
    Vector best_params;
    FitDiagnostics diagnostics;
};
AdamRun run_adam(const Vector& init, std::size_t n_train,
                 const std::function<ValueAndGradient(const Vector&, std::span<const std::size_t>)>& batch_objective,
                 const std::function<double(const Vector&)>& val_metric, const TrainSettings& settings);

FitResult fit_baseline(const EmbeddedSplit& train, const EmbeddedSplit& early, const FitContext& ctx, double rho,
                       const TrainSettings& settings);

/// Baseline network on embeddings shrunk towards m0 with strength eta.
FitResult fit_freq_shrinkage(const EmbeddedSplit& train, const EmbeddedSplit& early, const FitContext& ctx,
                             double rho, double eta, const TrainSettings& settings);

struct BlrOptions {
    double sigma_init = 0.5;
    double rho_init = 1.0;
    double step_size = 0.05;
    int max_iterations = 3000;
    bool intercept = true;
    /// When set, log bandwidth is learned as well: the callback re-featurizes the
    /// training split at a bandwidth and returns (design, d design / d log bandwidth).
    std::function<std::pair<Matrix, Matrix>(double bandwidth)> refeaturize;
};

/// Evidence maximization over (log sigma, log rho[, log bandwidth]), then the conjugate posterior.
FitResult fit_blr(const EmbeddedSplit& train, const FitContext& ctx, const BlrOptions& options);

struct ShrinkOptions {
    double rho = 1.0;
    double eta = 1.0;  ///< initial value when learned
    bool learn_eta = true;
    double sigma_init = 0.5;
};

FitResult fit_shrinkmap(const EmbeddedSplit& train, const EmbeddedSplit& early, const FitContext& ctx,
                        const ShrinkOptions& options, const TrainSettings& settings);

struct BdrOptions {
    HMCConfig hmc;
    int chains = 4;
    bool sample_eta = false;
    /// Half-normal prior scale for sigma; 0 means the training label sd.
    double sigma_prior_scale = 0.0;
    /// sd of the normal prior on log eta around the starting value (sample_eta only).
    double log_eta_prior_sd = 1.0;
};

/// HMC over (whitened alpha, log sigma[, log eta]) started from a fitted shrinkage model.
FitResult fit_bdr(const EmbeddedSplit& train, const FitContext& ctx, const RegressionModel& start,
                  const BdrOptions& options);

/// Log posterior density used by fit_bdr over [theta (s), log sigma, log eta?], where
/// alpha = rho L^{-T} theta with K_z = L L^T.
class BdrPosterior {
public:
    BdrPosterior(const ShrinkageObjective& objective, double sigma_prior_scale, double log_eta_center = 0.0,
                 double log_eta_prior_sd = 1.0, JitterPolicy jitter = {});

    ValueAndGradient operator()(const Vector& params) const;
    Index dim() const { return objective_.num_params(); }

    Vector to_alpha(const Vector& theta) const;
    Vector to_theta(const Vector& alpha) const;

private:
    const ShrinkageObjective& objective_;
    double sigma_scale_;
    double log_eta_center_;
    double log_eta_sd_;
    Cholesky k_chol_;
};

FitResult fit_probit_shrink(const EmbeddedSplit& train, const EmbeddedSplit& early, const FitContext& ctx,
                            double rho, double eta, const TrainSettings& settings);

/// MAP by Adam, then a Laplace approximation to the weight posterior.
FitResult fit_probit_blr(const EmbeddedSplit& train, const EmbeddedSplit& early, const FitContext& ctx, double rho,
                         const TrainSettings& settings);

/// Standard deviation of a vector (denominator n), or 1 if it is zero.
double label_scale(const Vector& labels);

}  // namespace bagreg
