#pragma once

#include "bagreg/kernels.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace bagreg {

struct ValueAndGradient {
    double value = 0.0;
    Vector gradient;
};

/// f(theta) -> (value, d value / d theta).
using DifferentiableFunction = std::function<ValueAndGradient(const Vector&)>;

// --- Adam --------------------------------------------------------------------

struct AdamSettings {
    double step_size = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct OptimizerState {
    long step = 0;
    Vector params;
    Vector first_moment;
    Vector second_moment;
    double step_size = 1e-3;
    double best_val_metric = 0.0;
    int patience_left = 0;

    static OptimizerState init(Vector params, double step_size, int patience = 30);
};

/// One bias-corrected Adam update. Throws NonFiniteGradient on NaN/inf entries.
OptimizerState adam_step(OptimizerState state, const Vector& gradient, const AdamSettings& settings = {});

// --- gradient checking -------------------------------------------------------

struct GradCheckReport {
    Vector analytic;
    Vector numeric;
    double max_relative_error = 0.0;
    Index worst_index = -1;
    std::vector<Index> nonfinite;  ///< coordinates whose perturbed objective was not finite
    bool passed = false;
};

/// Central differences with h_j = 1e-5 * max(1, |theta_j|).
/// Relative error per coordinate is |a - f| / max(|a|, |f|, abs_floor).
GradCheckReport grad_check(const DifferentiableFunction& objective, const Vector& params, double rtol,
                           double abs_floor = 1e-6);

// --- early stopping ----------------------------------------------------------

struct EarlyStopDecision {
    enum class Action { Continue, Stop };
    Action action = Action::Continue;
    std::size_t best_index = 0;
};

/// Stop once `patience` evaluations have passed without beating the best (lowest) value.
EarlyStopDecision early_stopper(std::span<const double> history, int patience);

// --- Hamiltonian Monte Carlo -------------------------------------------------

struct HMCConfig {
    int n_warmup = 1000;
    int n_samples = 1000;
    int leapfrog_steps = 16;
    double target_accept = 0.8;
    double init_step = 0.1;
    std::uint64_t seed = 0;
    /// Path length is drawn uniformly from leapfrog_steps * [1 - jitter, 1 + jitter].
    double path_jitter = 0.2;
    double divergence_threshold = 1000.0;
    bool adapt_step_size = true;

    void validate() const;
};

struct Chain {
    Matrix draws;  ///< n_samples x dim
    Vector log_posts;
    double accept_rate = 0.0;
    int divergences = 0;
    double step_size = 0.0;
};

/// Leapfrog integration of (position, momentum) for `steps` steps with unit mass.
/// `log_post` returns the log density and its gradient. Returns false if the
/// trajectory produced a non-finite value.
bool leapfrog(const DifferentiableFunction& log_post, Vector& position, Vector& momentum, ValueAndGradient& current,
              double step_size, int steps);

/// Single-chain HMC with dual-averaging step-size adaptation during warmup.
/// Throws NumericalError if warmup rejects every proposal or no proposal is ever accepted.
Chain hmc_sample(const DifferentiableFunction& log_post, const Vector& init, const HMCConfig& config);

/// Independent chains seeded from config.seed + chain index.
std::vector<Chain> hmc_sample_chains(const DifferentiableFunction& log_post, const Vector& init,
                                     const HMCConfig& config, int n_chains);

/// Effective sample size of one scalar series (Geyer initial monotone sequence).
double effective_sample_size(std::span<const double> series);

/// Split-Rhat per parameter across chains.
Vector split_rhat(const std::vector<Chain>& chains);

/// Stack the draws of several chains.
Matrix concatenate_draws(const std::vector<Chain>& chains);

/// CSV with header `chain,draw,log_post,<names...>`, one row per draw.
void write_chains_csv(const std::string& path, const std::vector<Chain>& chains,
                      const std::vector<std::string>& names);

}  // namespace bagreg
