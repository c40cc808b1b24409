#include "bagreg/experiment.hpp"

#include "bagreg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace bagreg {

void TuningGrid::validate() const {
    if (bandwidth_factors.empty() || landmark_counts.empty() || rhos.empty() || step_sizes.empty() || etas.empty()) {
        throw InvalidArgument("every tuning grid axis needs at least one value");
    }
    auto positive = [](const std::vector<double>& v) { return std::all_of(v.begin(), v.end(), [](double x) { return x > 0.0; }); };
    if (!positive(bandwidth_factors) || !positive(rhos) || !positive(step_sizes) || !positive(etas)) {
        throw InvalidArgument("tuning grid values must be positive");
    }
    for (int d : landmark_counts) {
        if (d < 1) throw InvalidArgument("landmark counts must be positive");
    }
}

bool tunes_on_nll(ModelKind kind) { return kind != ModelKind::Baseline && kind != ModelKind::FreqShrink; }

// --- feature cache -------------------------------------------------------------

FeatureCache::FeatureCache(const BagDataset& train, const BagDataset& early, const BagDataset& val,
                           const ExperimentConfig& config)
    : train_(train), early_(early), val_(val), config_(config) {
    if (train.empty() || early.empty() || val.empty()) throw InvalidArgument("train, early and val splits are required");
    if (!train.has_labels() || !early.has_labels() || !val.has_labels()) {
        throw InvalidArgument("train, early and val splits must be labeled");
    }
    train.validate();
    early.validate();
    val.validate();
    if (early.dim() != train.dim() || val.dim() != train.dim()) throw InvalidArgument("splits differ in dimension");
    train_points_ = train.stacked_points();
    median_ = median_heuristic(train_points_, config.median_points, config.seed ^ 0x6d656469ULL);
    if (!(median_ > 0.0)) throw DataError("median pairwise distance of the training points is zero");
}

const LandmarkSet& FeatureCache::landmarks(int d) {
    auto it = landmarks_.find(d);
    if (it != landmarks_.end()) return it->second;
    const std::uint64_t seed = config_.seed ^ (0x6c616e64ULL + static_cast<std::uint64_t>(d));
    LandmarkSet lm;
    if (config_.landmark_method == LandmarkMethod::Sample) {
        lm = sample_landmarks(train_points_, d, seed);
    } else {
        const Index n = train_points_.rows();
        const Index keep = std::min(n, std::max<Index>(config_.kmeans_subsample, d));
        Matrix sub(keep, train_points_.cols());
        if (keep == n) {
            sub = train_points_;
        } else {
            const auto idx = sample_indices(n, keep, seed ^ 0x73756273ULL);
            for (Index i = 0; i < keep; ++i) sub.row(i) = train_points_.row(idx[static_cast<std::size_t>(i)]);
        }
        lm = kmeans_landmarks(sub, d, seed);
    }
    return landmarks_.emplace(d, std::move(lm)).first->second;
}

FeatureCache::Entry& FeatureCache::get(int d, double bandwidth, bool need_noise) {
    const auto key = std::make_pair(d, bandwidth);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        Entry e;
        e.context.landmarks = landmarks(d);
        e.context.kernel.bandwidth = bandwidth;
        e.context.kernel.conv_scale = config_.conv_scale;
        e.context.kernel.r_choice = config_.r_choice;
        e.context.jitter = config_.jitter;
        e.train = EmbeddedSplit::from(train_, e.context.landmarks, e.context.kernel);
        e.early = EmbeddedSplit::from(early_, e.context.landmarks, e.context.kernel);
        e.val = EmbeddedSplit::from(val_, e.context.landmarks, e.context.kernel);
        it = entries_.emplace(key, std::move(e)).first;
    }
    Entry& e = it->second;
    if (need_noise && !e.has_noise) {
        e.context.noise = pooled_covariance(train_, e.context.landmarks, e.context.kernel);
        e.has_noise = true;
    }
    return e;
}

// --- tuning --------------------------------------------------------------------

TrainedModel fit_one(ModelKind kind, FeatureCache::Entry& entry, double rho, double step_size, double eta,
                     const ExperimentConfig& config) {
    TrainSettings ts = config.train;
    ts.adam.step_size = step_size;
    ts.seed = config.train.seed + config.seed;
    const double y_scale = label_scale(entry.train.labels);
    FitResult fit;
    switch (kind) {
        case ModelKind::Baseline:
            fit = fit_baseline(entry.train, entry.early, entry.context, rho, ts);
            break;
        case ModelKind::FreqShrink:
            fit = fit_freq_shrinkage(entry.train, entry.early, entry.context, rho, eta, ts);
            break;
        case ModelKind::BLR: {
            BlrOptions o;
            o.sigma_init = 0.5 * y_scale;
            o.rho_init = rho;
            fit = fit_blr(entry.train, entry.context, o);
            break;
        }
        case ModelKind::ShrinkMAP: {
            ShrinkOptions o;
            o.rho = rho;
            o.eta = eta;
            o.learn_eta = config.learn_eta;
            o.sigma_init = y_scale;
            fit = fit_shrinkmap(entry.train, entry.early, entry.context, o, ts);
            break;
        }
        case ModelKind::ProbitShrink:
            fit = fit_probit_shrink(entry.train, entry.early, entry.context, rho, eta, ts);
            break;
        case ModelKind::ProbitBLR:
            fit = fit_probit_blr(entry.train, entry.early, entry.context, rho, ts);
            break;
        case ModelKind::BDR:
            throw InvalidArgument("BDR is fitted from a tuned shrinkage model");
    }
    TrainedModel out;
    out.model = std::move(fit.model);
    out.diagnostics = std::move(fit.diagnostics);
    out.best.kind = kind;
    out.best.landmarks = static_cast<int>(entry.context.landmarks.d());
    out.best.bandwidth = out.model.kernel.bandwidth;
    out.best.rho = out.model.rho;
    out.best.step_size = step_size;
    out.best.eta = out.model.eta;
    out.best.epochs = out.diagnostics.epochs;
    out.best.status = out.diagnostics.diverged ? out.diagnostics.message : "ok";
    return out;
}

namespace {

void score(TrainedModel& tm, const FeatureCache::Entry& entry, const JitterPolicy& jitter) {
    const Predictor predictor(tm.model, jitter);
    const auto preds = predictor.predict(entry.val.stats);
    tm.best.val_mse = mse(preds, entry.val.labels);
    if (!preds.empty() && preds.front().is_probabilistic()) tm.best.val_nll = nll(preds, entry.val.labels);
}

double metric_of(const TuningRow& row) {
    if (row.status != "ok") return std::numeric_limits<double>::infinity();
    const double m = tunes_on_nll(row.kind) ? row.val_nll.value_or(std::numeric_limits<double>::infinity()) : row.val_mse;
    return std::isfinite(m) ? m : std::numeric_limits<double>::infinity();
}

TrainedModel tune(ModelKind kind, FeatureCache& cache, const ExperimentConfig& config) {
    const TuningGrid& g = config.grid;
    const bool need_noise = kind == ModelKind::FreqShrink || uses_shrinkage_posterior(kind);
    const bool uses_rho = kind != ModelKind::BLR;
    const bool uses_step = kind != ModelKind::BLR;
    const bool uses_eta = kind == ModelKind::FreqShrink || kind == ModelKind::ShrinkMAP || kind == ModelKind::ProbitShrink;
    const std::vector<double> one{1.0};

    std::optional<TrainedModel> best;
    std::vector<TuningRow> log;
    for (int d : g.landmark_counts) {
        for (double factor : g.bandwidth_factors) {
            const double bw = factor * cache.median_distance();
            FeatureCache::Entry& entry = cache.get(d, bw, need_noise);
            for (double rho : uses_rho ? g.rhos : one) {
                for (double step : uses_step ? g.step_sizes : one) {
                    for (double eta : uses_eta ? g.etas : one) {
                        TrainedModel tm;
                        try {
                            tm = fit_one(kind, entry, rho, step, eta, config);
                            score(tm, entry, config.jitter);
                        } catch (const Error& e) {
                            tm.best.kind = kind;
                            tm.best.landmarks = d;
                            tm.best.bandwidth = bw;
                            tm.best.rho = rho;
                            tm.best.step_size = step;
                            tm.best.eta = eta;
                            tm.best.status = e.what();
                        }
                        log.push_back(tm.best);
                        if (metric_of(tm.best) < (best ? metric_of(best->best) : std::numeric_limits<double>::infinity())) {
                            best = std::move(tm);
                        }
                    }
                }
            }
        }
    }
    if (!best) {
        std::string why = log.empty() ? "empty grid" : log.back().status;
        throw NumericalError("no grid point produced a usable " + to_string(kind) + " model (last: " + why + ")");
    }
    best->log = std::move(log);
    return std::move(*best);
}

}  // namespace

std::map<ModelKind, TrainedModel> train_models(const BagDataset& train, const BagDataset& early, const BagDataset& val,
                                               const ExperimentConfig& config) {
    config.grid.validate();
    if (config.models.empty()) throw InvalidArgument("no models requested");
    FeatureCache cache(train, early, val, config);
    std::map<ModelKind, TrainedModel> out;
    const bool want_bdr = std::find(config.models.begin(), config.models.end(), ModelKind::BDR) != config.models.end();
    for (ModelKind kind : config.models) {
        if (kind == ModelKind::BDR || out.contains(kind)) continue;
        out.emplace(kind, tune(kind, cache, config));
    }
    if (want_bdr) {
        if (!out.contains(ModelKind::ShrinkMAP)) out.emplace(ModelKind::ShrinkMAP, tune(ModelKind::ShrinkMAP, cache, config));
        const TrainedModel& start = out.at(ModelKind::ShrinkMAP);
        FeatureCache::Entry& entry = cache.get(start.best.landmarks, start.model.kernel.bandwidth, true);
        BdrOptions opts = config.bdr;
        opts.hmc.seed = config.bdr.hmc.seed + config.seed;
        const FitResult fit = fit_bdr(entry.train, entry.context, start.model, opts);
        TrainedModel tm;
        tm.model = fit.model;
        tm.diagnostics = fit.diagnostics;
        tm.best = start.best;
        tm.best.kind = ModelKind::BDR;
        tm.best.eta = fit.model.eta;
        tm.best.epochs = 0;
        tm.best.val_nll.reset();
        tm.best.status = fit.diagnostics.message.empty() ? "ok" : fit.diagnostics.message;
        score(tm, entry, config.jitter);
        tm.log.push_back(tm.best);
        out.emplace(ModelKind::BDR, std::move(tm));
    }
    return out;
}

std::string tuning_log_csv(const std::vector<TuningRow>& rows) {
    std::ostringstream out;
    out.precision(17);
    out << "model,landmarks,bandwidth,rho,step_size,eta,val_mse,val_nll,epochs,status\n";
    for (const auto& r : rows) {
        std::string status = r.status;
        std::replace(status.begin(), status.end(), ',', ';');
        std::replace(status.begin(), status.end(), '\n', ' ');
        out << to_string(r.kind) << ',' << r.landmarks << ',' << r.bandwidth << ',' << r.rho << ',' << r.step_size
            << ',' << r.eta << ',' << r.val_mse << ',';
        if (r.val_nll) out << *r.val_nll;
        out << ',' << r.epochs << ',' << status << '\n';
    }
    return out.str();
}

SeedOutcome run_gamma_seed(const GammaConfig& data_config, const ExperimentConfig& config, bool include_oracle,
                           const BayesOptimalPredictor* oracle) {
    const GammaSplits splits = gamma_generate(data_config);
    ExperimentConfig cfg = config;
    cfg.seed = data_config.seed;
    SeedOutcome out;
    out.seed = data_config.seed;
    out.models = train_models(splits.train, splits.early, splits.val, cfg);
    const Vector y_test = splits.test.labels();
    for (const auto& [kind, tm] : out.models) {
        const Predictor predictor(tm.model, cfg.jitter);
        auto preds = predictor.predict(splits.test);
        out.reports.push_back(make_report(to_string(kind), "test", data_config.seed, preds, y_test));
        out.test_predictions.emplace(to_string(kind), std::move(preds));
    }
    if (include_oracle) {
        std::optional<BayesOptimalPredictor> local;
        if (!oracle) {
            BayesOptimalOptions o;
            o.noise_sd = data_config.noise_sd;
            o.convention = data_config.convention;
            o.label_lo = data_config.label_lo;
            o.label_hi = data_config.label_hi;
            local.emplace(o);
            oracle = &*local;
        }
        auto preds = oracle->predict(splits.test);
        out.reports.push_back(make_report("bayes-optimal", "test", data_config.seed, preds, y_test));
        out.test_predictions.emplace("bayes-optimal", std::move(preds));
    }
    return out;
}

}  // namespace bagreg
