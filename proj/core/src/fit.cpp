#include "bagreg/fit.hpp"

#include "bagreg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

namespace bagreg {

namespace {

double mean_of(const Vector& v) { return v.size() == 0 ? 0.0 : v.mean(); }

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

void require_split(const EmbeddedSplit& split, const char* name) {
    if (split.stats.empty()) throw InvalidArgument(std::string(name) + " split is empty");
    if (split.labels.size() != static_cast<Index>(split.stats.size())) {
        throw InvalidArgument(std::string(name) + " split has mismatched labels");
    }
}

RegressionModel base_model(ModelKind kind, const FitContext& ctx) {
    RegressionModel m;
    m.kind = kind;
    m.kernel = ctx.kernel;
    m.landmarks = ctx.landmarks;
    return m;
}

}  // namespace

double label_scale(const Vector& labels) {
    if (labels.size() == 0) return 1.0;
    const double sd = std::sqrt((labels.array() - labels.mean()).square().mean());
    return sd > 0.0 ? sd : 1.0;
}

EmbeddedSplit EmbeddedSplit::from(const BagDataset& data, const LandmarkSet& landmarks, const KernelParams& kernel) {
    EmbeddedSplit split;
    split.stats = embed_dataset(data, landmarks.u, kernel);
    split.labels = data.has_labels() ? data.labels() : Vector();
    return split;
}

AdamRun run_adam(const Vector& init, std::size_t n_train,
                 const std::function<ValueAndGradient(const Vector&, std::span<const std::size_t>)>& batch_objective,
                 const std::function<double(const Vector&)>& val_metric, const TrainSettings& settings) {
    if (n_train == 0) throw InvalidArgument("cannot train on an empty split");
    if (settings.batch_size < 1 || settings.max_epochs < 0) throw InvalidArgument("invalid training settings");
    AdamRun run;
    run.best_params = init;
    OptimizerState state = OptimizerState::init(init, settings.adam.step_size, settings.patience);
    FitDiagnostics& diag = run.diagnostics;

    double v0 = val_metric(init);
    if (!std::isfinite(v0)) throw NumericalError("validation metric is not finite at the initial point");
    diag.val_history.push_back(v0);
    state.best_val_metric = v0;

    std::mt19937_64 rng(settings.seed);
    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t bs = static_cast<std::size_t>(settings.batch_size);

    for (int epoch = 0; epoch < settings.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < n_train; start += bs) {
            const std::size_t len = std::min(bs, n_train - start);
            const std::span<const std::size_t> batch(order.data() + start, len);
            const ValueAndGradient vg = batch_objective(state.params, batch);
            try {
                if (!std::isfinite(vg.value)) throw NumericalError("training loss became non-finite");
                state = adam_step(std::move(state), vg.gradient, settings.adam);
            } catch (const Error& e) {
                diag.diverged = true;
                diag.converged = false;
                diag.message = std::string("stopped at epoch ") + std::to_string(epoch) + ": " + e.what();
                diag.best_val = state.best_val_metric;
                diag.steps = state.step;
                return run;
            }
        }
        ++diag.epochs;
        const double v = val_metric(state.params);
        if (!std::isfinite(v)) {
            diag.diverged = true;
            diag.converged = false;
            diag.message = "validation metric became non-finite at epoch " + std::to_string(epoch);
            break;
        }
        diag.val_history.push_back(v);
        if (v < state.best_val_metric) {
            state.best_val_metric = v;
            state.patience_left = settings.patience;
            run.best_params = state.params;
        } else {
            --state.patience_left;
        }
        if (early_stopper(diag.val_history, settings.patience).action == EarlyStopDecision::Action::Stop) {
            diag.early_stopped = true;
            break;
        }
    }
    if (!diag.early_stopped && !diag.diverged) {
        diag.converged = false;
        diag.message = "reached the epoch limit before early stopping";
    }
    diag.best_val = state.best_val_metric;
    diag.steps = state.step;
    return run;
}

// --- baseline ----------------------------------------------------------------

namespace {

// Minimizer of the full-batch baseline loss: ridge on centered features, intercept unpenalized.
Vector baseline_ridge(const std::vector<EmbeddingStats>& stats, const std::vector<double>& y, double rho) {
    const Index n = static_cast<Index>(stats.size());
    const Index d = stats.front().mu_hat.size();
    Matrix X(n, d);
    for (Index i = 0; i < n; ++i) X.row(i) = stats[static_cast<std::size_t>(i)].mu_hat.transpose();
    const Vector x_bar = X.colwise().mean().transpose();
    X.rowwise() -= x_bar.transpose();
    const Eigen::Map<const Vector> yv(y.data(), n);
    const double y_bar = yv.mean();
    Matrix a = X.transpose() * X;
    a.diagonal().array() += 1.0 / (2.0 * rho * rho);
    Vector out(d + 1);
    out.head(d) = Cholesky(a).solve(Vector(X.transpose() * (yv.array() - y_bar).matrix()));
    out(d) = y_bar - out.head(d).dot(x_bar);
    return out;
}

FitResult fit_network(ModelKind kind, const std::vector<EmbeddingStats>& train_stats, const Vector& train_labels,
                      const std::vector<EmbeddingStats>& early_stats, const Vector& early_labels,
                      const FitContext& ctx, double rho, const TrainSettings& settings) {
    const double offset = mean_of(train_labels);
    const std::vector<double> y = to_std((train_labels.array() - offset).matrix());
    const Index d = ctx.landmarks.d();
    const std::size_t n = train_stats.size();

    auto batch_objective = [&](const Vector& params, std::span<const std::size_t> batch) {
        std::vector<EmbeddingStats> sb;
        std::vector<double> yb;
        sb.reserve(batch.size());
        yb.reserve(batch.size());
        for (std::size_t i : batch) {
            sb.push_back(train_stats[i]);
            yb.push_back(y[i]);
        }
        return baseline_loss(params.head(d), params(d), sb, yb, rho, n);
    };
    auto val_metric = [&](const Vector& params) {
        const Vector beta = params.head(d);
        double acc = 0.0;
        for (std::size_t i = 0; i < early_stats.size(); ++i) {
            const double r = beta.dot(early_stats[i].mu_hat) + params(d) + offset - early_labels(static_cast<Index>(i));
            acc += r * r;
        }
        return acc / static_cast<double>(early_stats.size());
    };
    Vector init = Vector::Zero(d + 1);
    if (settings.warm_start) init = baseline_ridge(train_stats, y, rho);
    AdamRun run = run_adam(init, n, batch_objective, val_metric, settings);

    FitResult out;
    out.model = base_model(kind, ctx);
    out.model.alpha = run.best_params.head(d);
    out.model.intercept = run.best_params(d);
    out.model.label_offset = offset;
    out.model.rho = rho;
    out.diagnostics = std::move(run.diagnostics);
    return out;
}

}  // namespace

FitResult fit_baseline(const EmbeddedSplit& train, const EmbeddedSplit& early, const FitContext& ctx, double rho,
                       const TrainSettings& settings) {
    require_split(train, "training");
    require_split(early, "early-stopping");
    return fit_network(ModelKind::Baseline, train.stats, train.labels, early.stats, early.labels, ctx, rho, settings);
}

FitResult fit_freq_shrinkage(const EmbeddedSplit& train, const EmbeddedSplit& early, const FitContext& ctx,
                             double rho, double eta, const TrainSettings& settings) {
    require_split(train, "training");
    require_split(early, "early-stopping");
    const GramMatrices grams = build_grams(ctx.landmarks, ctx.kernel, eta);
    auto shrink_all = [&](const std::vector<EmbeddingStats>& in) {
        std::vector<EmbeddingStats> out(in.size());
        for (std::size_t i = 0; i < in.size(); ++i) {
            out[i] = frequentist_shrinkage(in[i], ctx.noise, grams, ctx.noise.m0, ctx.jitter);
        }
        return out;
    };
    FitResult res = fit_network(ModelKind::FreqShrink, shrink_all(train.stats), train.labels, shrink_all(early.stats),
                                early.labels, ctx, rho, settings);
    res.model.eta = eta;
    res.model.noise = ctx.noise;
    return res;
}

// --- BLR ---------------------------------------------------------------------

FitResult fit_blr(const EmbeddedSplit& train, const FitContext& ctx, const BlrOptions& options) {
    require_split(train, "training");
    if (!(options.sigma_init > 0.0) || !(options.rho_init > 0.0)) throw InvalidArgument("BLR init must be positive");
    const double offset = mean_of(train.labels);
    const Vector y = (train.labels.array() - offset).matrix();
    const bool learn_b = static_cast<bool>(options.refeaturize);

    Matrix X = blr_design(train.stats, options.intercept);
    Matrix dX;
    double bandwidth = ctx.kernel.bandwidth;

    Vector params(learn_b ? 3 : 2);
    params(0) = std::log(options.sigma_init);
    params(1) = std::log(options.rho_init);
    if (learn_b) params(2) = std::log(bandwidth);

    auto evidence = [&](const Vector& p) {
        if (learn_b) {
            const double b = std::exp(p(2));
            if (b != bandwidth || dX.size() == 0) {
                auto [x_new, dx_new] = options.refeaturize(b);
                X = std::move(x_new);
                dX = std::move(dx_new);
                bandwidth = b;
            }
        }
        return blr_log_evidence(X, y, std::exp(p(0)), std::exp(p(1)), options.intercept, learn_b ? &dX : nullptr);
    };

    OptimizerState state = OptimizerState::init(params, options.step_size);
    Vector best = params;
    double best_val = -std::numeric_limits<double>::infinity();
    int since_best = 0;
    FitDiagnostics diag;
    diag.converged = false;
    for (int it = 0; it < options.max_iterations; ++it) {
        ValueAndGradient vg;
        try {
            vg = evidence(state.params);
        } catch (const NumericalError& e) {
            diag.diverged = true;
            diag.message = e.what();
            break;
        }
        if (!std::isfinite(vg.value)) {
            diag.diverged = true;
            diag.message = "evidence became non-finite";
            break;
        }
        if (!std::isfinite(best_val) || vg.value > best_val + 1e-10 * std::abs(best_val)) {
            best_val = vg.value;
            best = state.params;
            since_best = 0;
        } else if (++since_best >= 200) {
            diag.converged = true;
            break;
        }
        diag.val_history.push_back(-vg.value);
        state = adam_step(std::move(state), Vector(-vg.gradient), AdamSettings{options.step_size});
        ++diag.steps;
    }
    if (!diag.converged && diag.message.empty()) diag.message = "evidence ascent hit the iteration limit";
    if (!std::isfinite(best_val)) throw NumericalError("BLR evidence was never finite");
    diag.best_val = -best_val;

    KernelParams kernel = ctx.kernel;
    if (learn_b) {
        kernel.bandwidth = std::exp(best(2));
        if (bandwidth != kernel.bandwidth) X = options.refeaturize(kernel.bandwidth).first;
    }
    const double sigma = std::exp(best(0));
    const double rho = std::exp(best(1));
    const BlrPosterior post = blr_posterior(X, y, sigma, blr_prior_variances(ctx.landmarks.d(), options.intercept, rho));

    FitResult out;
    out.model = base_model(ModelKind::BLR, ctx);
    out.model.kernel = kernel;
    const Index d = ctx.landmarks.d();
    out.model.alpha = post.mean.head(d);
    out.model.intercept = options.intercept ? post.mean(d) : 0.0;
    out.model.weight_cov = post.cov;
    out.model.sigma = sigma;
    out.model.rho = rho;
    out.model.label_offset = offset;
    out.diagnostics = std::move(diag);
    return out;
}

// --- shrinkage MAP -----------------------------------------------------------

FitResult fit_shrinkmap(const EmbeddedSplit& train, const EmbeddedSplit& early, const FitContext& ctx,
                        const ShrinkOptions& options, const TrainSettings& settings) {
    require_split(train, "training");
    require_split(early, "early-stopping");
    if (!(options.rho > 0.0) || !(options.eta > 0.0) || !(options.sigma_init > 0.0)) {
        throw InvalidArgument("shrinkage hyperparameters must be positive");
    }
    const double offset = mean_of(train.labels);
    const GramMatrices grams = build_grams(ctx.landmarks, ctx.kernel, options.eta);
    const ShrinkageObjective objective(train.stats, (train.labels.array() - offset).matrix(), ctx.noise, grams,
                                       options.rho, options.learn_eta, ctx.jitter);
    const ShrinkageObjective early_objective(early.stats, (early.labels.array() - offset).matrix(), ctx.noise, grams,
                                             options.rho, options.learn_eta, ctx.jitter);
    const std::size_t n = train.size();
    const double n_d = static_cast<double>(n);

    std::vector<std::size_t> early_all(early.size());
    std::iota(early_all.begin(), early_all.end(), std::size_t{0});
    const double early_w = 1.0 / static_cast<double>(early.size());

    // Adam runs on whitened weights theta with alpha = rho U^{-1} theta (K_z = U^T U), the
    // parametrization BDR samples in; the objective is unchanged.
    const Index s = objective.s();
    const Cholesky k_chol(objective.K_z(), ctx.jitter);
    const auto& llt = k_chol.llt();
    auto to_alpha = [&](const Vector& params) {
        Vector out = params;
        out.head(s) = options.rho * llt.matrixU().solve(Vector(params.head(s)));
        return out;
    };

    auto batch_objective = [&](const Vector& params, std::span<const std::size_t> batch) {
        ValueAndGradient vg = objective.evaluate(to_alpha(params), batch, n_d / static_cast<double>(batch.size()), true);
        vg.gradient.head(s) = options.rho * llt.matrixL().solve(Vector(vg.gradient.head(s)));
        return vg;
    };
    auto val_metric = [&](const Vector& params) {
        try {
            return early_objective.evaluate(to_alpha(params), early_all, early_w, false).value;
        } catch (const NumericalError&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    Vector init = Vector::Zero(objective.num_params());
    double sigma0 = options.sigma_init;
    if (settings.warm_start) {
        // homoscedastic MAP at the initial eta, refitting the noise level once from its residuals
        const Matrix m = objective.shrunk_means(options.eta);
        const Matrix mtm = m.transpose() * m;
        const Vector mty = m.transpose() * objective.labels();
        Vector alpha0;
        for (int pass = 0; pass < 2; ++pass) {
            const Matrix a = mtm + (sigma0 * sigma0 / (options.rho * options.rho)) * objective.K_z();
            alpha0 = Cholesky(a, ctx.jitter).solve(mty);
            const double rms = std::sqrt((objective.labels() - m * alpha0).squaredNorm() / n_d);
            if (rms > 0.0) sigma0 = rms;
        }
        init.head(s) = Vector(llt.matrixU() * alpha0) / options.rho;
    }
    init(s) = std::log(sigma0);
    if (options.learn_eta) init(s + 1) = std::log(options.eta);
    AdamRun run = run_adam(init, n, batch_objective, val_metric, settings);
    run.best_params = to_alpha(run.best_params);

    FitResult out;
    out.model = base_model(ModelKind::ShrinkMAP, ctx);
    out.model.alpha = run.best_params.head(objective.s());
    out.model.sigma = std::exp(run.best_params(objective.s()));
    out.model.eta = options.learn_eta ? std::exp(run.best_params(objective.s() + 1)) : options.eta;
    out.model.rho = options.rho;
    out.model.noise = ctx.noise;
    out.model.label_offset = offset;
    out.diagnostics = std::move(run.diagnostics);
    return out;
}

// --- BDR ---------------------------------------------------------------------

BdrPosterior::BdrPosterior(const ShrinkageObjective& objective, double sigma_prior_scale, double log_eta_center,
                           double log_eta_prior_sd, JitterPolicy jitter)
    : objective_(objective),
      sigma_scale_(sigma_prior_scale),
      log_eta_center_(log_eta_center),
      log_eta_sd_(log_eta_prior_sd),
      k_chol_(objective.K_z(), jitter) {
    if (!(sigma_prior_scale > 0.0)) throw InvalidArgument("sigma prior scale must be positive");
    if (!(log_eta_prior_sd > 0.0)) throw InvalidArgument("log eta prior sd must be positive");
}

Vector BdrPosterior::to_alpha(const Vector& theta) const {
    return objective_.rho() * k_chol_.llt().matrixU().solve(theta);
}

Vector BdrPosterior::to_theta(const Vector& alpha) const {
    return Vector(k_chol_.llt().matrixU() * alpha) / objective_.rho();
}

ValueAndGradient BdrPosterior::operator()(const Vector& params) const {
    const Index s = objective_.s();
    Vector inner = params;
    inner.head(s) = to_alpha(params.head(s));
    std::vector<std::size_t> all(objective_.num_bags());
    std::iota(all.begin(), all.end(), std::size_t{0});
    ValueAndGradient nll;
    try {
        nll = objective_.evaluate(inner, all, 1.0, false);
    } catch (const NumericalError&) {
        return {-std::numeric_limits<double>::infinity(), Vector::Zero(params.size())};
    }

    ValueAndGradient out;
    out.gradient = -nll.gradient;
    // chain rule through alpha = rho U^{-1} theta  (U = L^T)
    out.gradient.head(s) = -objective_.rho() * k_chol_.llt().matrixL().solve(nll.gradient.head(s));
    double lp = -nll.value;

    const Vector theta = params.head(s);
    lp -= 0.5 * theta.squaredNorm();
    out.gradient.head(s) -= theta;

    // half-normal prior on sigma plus the log-sigma Jacobian
    const double log_sigma = params(s);
    const double s2 = std::exp(2.0 * log_sigma);
    const double scale2 = sigma_scale_ * sigma_scale_;
    lp += -0.5 * s2 / scale2 + log_sigma;
    out.gradient(s) += -s2 / scale2 + 1.0;

    if (objective_.learns_eta()) {
        const double z = (params(s + 1) - log_eta_center_) / log_eta_sd_;
        lp -= 0.5 * z * z;
        out.gradient(s + 1) -= z / log_eta_sd_;
    }
    out.value = lp;
    return out;
}

FitResult fit_bdr(const EmbeddedSplit& train, const FitContext& ctx, const RegressionModel& start,
                  const BdrOptions& options) {
    require_split(train, "training");
    if (start.kind != ModelKind::ShrinkMAP && start.kind != ModelKind::BDR) {
        throw InvalidArgument("BDR must start from a shrinkage model");
    }
    const double offset = start.label_offset;
    const Vector y = (train.labels.array() - offset).matrix();
    const GramMatrices grams = build_grams(ctx.landmarks, ctx.kernel, start.eta);
    const ShrinkageObjective objective(train.stats, y, ctx.noise, grams, start.rho, options.sample_eta, ctx.jitter);
    const double scale = options.sigma_prior_scale > 0.0 ? options.sigma_prior_scale : label_scale(y);
    const BdrPosterior posterior(objective, scale, std::log(start.eta), options.log_eta_prior_sd, ctx.jitter);

    Vector init(objective.num_params());
    init.head(objective.s()) = posterior.to_theta(start.alpha);
    init(objective.s()) = std::log(start.sigma);
    if (options.sample_eta) init(objective.s() + 1) = std::log(start.eta);

    const DifferentiableFunction log_post = [&](const Vector& p) { return posterior(p); };
    const std::vector<Chain> chains = hmc_sample_chains(log_post, init, options.hmc, options.chains);
    const Matrix raw = concatenate_draws(chains);

    FitResult out;
    out.model = base_model(ModelKind::BDR, ctx);
    out.model.rho = start.rho;
    out.model.eta = start.eta;
    out.model.noise = ctx.noise;
    out.model.label_offset = offset;
    out.model.posterior_draws.resize(raw.rows(), objective.s() + 1);
    for (Index t = 0; t < raw.rows(); ++t) {
        out.model.posterior_draws.row(t).head(objective.s()) = posterior.to_alpha(raw.row(t).head(objective.s()).transpose()).transpose();
        out.model.posterior_draws(t, objective.s()) = std::exp(raw(t, objective.s()));
    }
    if (options.sample_eta) {
        std::vector<double> log_etas(static_cast<std::size_t>(raw.rows()));
        for (Index t = 0; t < raw.rows(); ++t) log_etas[static_cast<std::size_t>(t)] = raw(t, objective.s() + 1);
        const auto mid = log_etas.begin() + static_cast<std::ptrdiff_t>(log_etas.size() / 2);
        std::nth_element(log_etas.begin(), mid, log_etas.end());
        out.model.eta = std::exp(*mid);
    }
    out.model.alpha = out.model.posterior_draws.leftCols(objective.s()).colwise().mean().transpose();
    out.model.sigma = out.model.posterior_draws.col(objective.s()).mean();

    FitDiagnostics& diag = out.diagnostics;
    diag.steps = static_cast<long>(chains.size()) * (options.hmc.n_warmup + options.hmc.n_samples);
    double acc = 0.0;
    for (const auto& c : chains) {
        acc += c.accept_rate;
        diag.divergences += c.divergences;
    }
    diag.accept_rate = acc / static_cast<double>(chains.size());
    if (options.hmc.n_samples >= 4) diag.rhat = split_rhat(chains);
    const double div_frac = static_cast<double>(diag.divergences) / static_cast<double>(raw.rows());
    if (div_frac > 0.01) {
        diag.message = std::to_string(diag.divergences) + " divergent transitions after warmup";
    }
    return out;
}

// --- probit ------------------------------------------------------------------

namespace {

double bernoulli_nll(double prob, double y) {
    const double p = std::clamp(prob, 1e-12, 1.0 - 1e-12);
    return -(y * std::log(p) + (1.0 - y) * std::log1p(-p));
}

}  // namespace

FitResult fit_probit_shrink(const EmbeddedSplit& train, const EmbeddedSplit& early, const FitContext& ctx,
                            double rho, double eta, const TrainSettings& settings) {
    require_split(train, "training");
    require_split(early, "early-stopping");
    const GramMatrices grams = build_grams(ctx.landmarks, ctx.kernel, eta);
    const auto posts = shrinkage_posteriors(train.stats, ctx.noise, grams, ctx.jitter);
    const auto early_posts = shrinkage_posteriors(early.stats, ctx.noise, grams, ctx.jitter);
    const std::vector<double> y = to_std(train.labels);
    const Matrix precision = grams.K_z / (rho * rho);
    const double n_d = static_cast<double>(train.size());

    auto batch_objective = [&](const Vector& alpha, std::span<const std::size_t> batch) {
        return probit_objective(alpha, posts, y, precision, batch, n_d / static_cast<double>(batch.size()));
    };
    auto val_metric = [&](const Vector& alpha) {
        double acc = 0.0;
        for (std::size_t i = 0; i < early_posts.size(); ++i) {
            acc += bernoulli_nll(probit_predictive(alpha, early_posts[i]).prob, early.labels(static_cast<Index>(i)));
        }
        return acc / static_cast<double>(early_posts.size());
    };
    AdamRun run = run_adam(Vector::Zero(ctx.landmarks.s()), train.size(), batch_objective, val_metric, settings);

    FitResult out;
    out.model = base_model(ModelKind::ProbitShrink, ctx);
    out.model.alpha = run.best_params;
    out.model.rho = rho;
    out.model.eta = eta;
    out.model.noise = ctx.noise;
    out.diagnostics = std::move(run.diagnostics);
    return out;
}

FitResult fit_probit_blr(const EmbeddedSplit& train, const EmbeddedSplit& early, const FitContext& ctx, double rho,
                         const TrainSettings& settings) {
    require_split(train, "training");
    require_split(early, "early-stopping");
    const Index d = ctx.landmarks.d();
    auto as_points = [&](const std::vector<EmbeddingStats>& stats) {
        std::vector<EmbeddingPosterior> out(stats.size());
        for (std::size_t i = 0; i < stats.size(); ++i) {
            out[i].M.resize(d + 1);
            out[i].M.head(d) = stats[i].mu_hat;
            out[i].M(d) = 1.0;
            out[i].C = Matrix::Zero(d + 1, d + 1);
            out[i].n = stats[i].n;
        }
        return out;
    };
    const auto xs = as_points(train.stats);
    const auto early_xs = as_points(early.stats);
    const std::vector<double> y = to_std(train.labels);
    const Vector prior_var = blr_prior_variances(d, true, rho);
    const Matrix precision = prior_var.cwiseInverse().asDiagonal();
    const double n_d = static_cast<double>(train.size());

    auto batch_objective = [&](const Vector& w, std::span<const std::size_t> batch) {
        return probit_objective(w, xs, y, precision, batch, n_d / static_cast<double>(batch.size()));
    };
    auto val_metric = [&](const Vector& w) {
        double acc = 0.0;
        for (std::size_t i = 0; i < early_xs.size(); ++i) {
            acc += bernoulli_nll(normal_cdf(w.dot(early_xs[i].M)), early.labels(static_cast<Index>(i)));
        }
        return acc / static_cast<double>(early_xs.size());
    };
    AdamRun run = run_adam(Vector::Zero(d + 1), train.size(), batch_objective, val_metric, settings);
    const Vector& w = run.best_params;

    // Laplace: H = P + sum_i lambda_i (lambda_i + s_i t_i) x_i x_i^T
    Matrix hessian = precision;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double t = w.dot(xs[i].M);
        const double sgn = 2.0 * y[i] - 1.0;
        const double cdf = std::max(normal_cdf(sgn * t), 1e-300);
        const double pdf = std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
        const double lambda = pdf / cdf;
        const double weight = std::max(lambda * (lambda + sgn * t), 0.0);
        hessian.noalias() += weight * xs[i].M * xs[i].M.transpose();
    }
    const Cholesky chol(hessian, ctx.jitter);
    Matrix cov = chol.solve(Matrix(Matrix::Identity(d + 1, d + 1)));

    FitResult out;
    out.model = base_model(ModelKind::ProbitBLR, ctx);
    out.model.alpha = w.head(d);
    out.model.intercept = w(d);
    out.model.weight_cov = 0.5 * (cov + cov.transpose());
    out.model.rho = rho;
    out.diagnostics = std::move(run.diagnostics);
    return out;
}

}  // namespace bagreg
