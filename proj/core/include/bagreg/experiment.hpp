#pragma once

#include "bagreg/datagen.hpp"
#include "bagreg/eval.hpp"
#include "bagreg/fit.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace bagreg {

enum class LandmarkMethod { KMeans, Sample };

/// Hyperparameter grid searched on the validation split.
struct TuningGrid {
    std::vector<double> bandwidth_factors{0.25, 0.5, 1.0, 2.0, 4.0};  ///< times the median heuristic
    std::vector<int> landmark_counts{30, 50, 100};
    std::vector<double> rhos{0.1, 1.0, 10.0};
    std::vector<double> step_sizes{1e-3, 3e-3, 1e-2};
    std::vector<double> etas{0.1, 1.0, 10.0};

    void validate() const;
};

struct ExperimentConfig {
    std::vector<ModelKind> models{ModelKind::Baseline, ModelKind::BLR, ModelKind::ShrinkMAP, ModelKind::BDR};
    RChoice r_choice = RChoice::RK;
    double conv_scale = 1.0;
    LandmarkMethod landmark_method = LandmarkMethod::KMeans;
    TuningGrid grid;
    TrainSettings train;
    BdrOptions bdr;
    bool learn_eta = true;
    std::uint64_t seed = 0;
    Index kmeans_subsample = 20000;
    Index median_points = 2000;
    JitterPolicy jitter;
};

/// One evaluated grid point.
struct TuningRow {
    ModelKind kind = ModelKind::Baseline;
    int landmarks = 0;
    double bandwidth = 0.0;
    double rho = 0.0;
    double step_size = 0.0;
    double eta = 0.0;
    double val_mse = 0.0;
    std::optional<double> val_nll;
    int epochs = 0;
    std::string status;  ///< "ok" or the failure message
};

struct TrainedModel {
    RegressionModel model;
    FitDiagnostics diagnostics;
    TuningRow best;
    std::vector<TuningRow> log;
};

/// True for kinds tuned on validation NLL rather than MSE.
bool tunes_on_nll(ModelKind kind);

/// Featurizations shared by every model fitted on one set of splits.
class FeatureCache {
public:
    FeatureCache(const BagDataset& train, const BagDataset& early, const BagDataset& val, const ExperimentConfig& config);

    double median_distance() const { return median_; }
    const LandmarkSet& landmarks(int d);

    struct Entry {
        FitContext context;
        EmbeddedSplit train, early, val;
        bool has_noise = false;
    };
    /// Embeddings at (d, bandwidth); the pooled covariance is computed on first request.
    Entry& get(int d, double bandwidth, bool need_noise);

private:
    const BagDataset& train_;
    const BagDataset& early_;
    const BagDataset& val_;
    const ExperimentConfig& config_;
    Matrix train_points_;
    double median_ = 1.0;
    std::map<int, LandmarkSet> landmarks_;
    std::map<std::pair<int, double>, Entry> entries_;
};

/// Grid-tunes every requested model on the validation split (early stopping on `early`).
/// BDR starts from, and reuses the hyperparameters of, the best shrinkage model.
std::map<ModelKind, TrainedModel> train_models(const BagDataset& train, const BagDataset& early,
                                               const BagDataset& val, const ExperimentConfig& config);

/// Single grid point; throws on failure.
TrainedModel fit_one(ModelKind kind, FeatureCache::Entry& entry, double rho, double step_size, double eta,
                     const ExperimentConfig& config);

std::string tuning_log_csv(const std::vector<TuningRow>& rows);

/// Train on a generated dataset and evaluate on its test split.
struct SeedOutcome {
    std::uint64_t seed = 0;
    std::map<ModelKind, TrainedModel> models;
    std::vector<MetricReport> reports;  ///< one per model, plus the oracle when requested
    std::map<std::string, std::vector<PredictiveDistribution>> test_predictions;
};

SeedOutcome run_gamma_seed(const GammaConfig& data_config, const ExperimentConfig& config, bool include_oracle,
                           const BayesOptimalPredictor* oracle = nullptr);

}  // namespace bagreg
