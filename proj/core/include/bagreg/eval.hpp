#pragma once

#include "bagreg/models.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bagreg {

double mse(std::span<const double> predictions, std::span<const double> labels);
double mse(const std::vector<PredictiveDistribution>& predictions, const Vector& labels);

/// Mean negative log predictive density. Throws InvalidArgument for point predictions.
double nll(const std::vector<PredictiveDistribution>& predictions, const Vector& labels);

/// Fraction of Bernoulli predictions on the wrong side of 1/2.
double classification_error(const std::vector<PredictiveDistribution>& predictions, const Vector& labels);

/// NLL of the uniform density on (lo, hi): log(hi - lo).
double uniform_nll(double lo, double hi);

struct MetricReport {
    std::string model;
    std::string split;
    double mse = 0.0;
    double rmse = 0.0;
    std::optional<double> nll;  ///< absent for point predictors
    std::size_t n_bags = 0;
    std::uint64_t seed = 0;
};

MetricReport make_report(const std::string& model, const std::string& split, std::uint64_t seed,
                         const std::vector<PredictiveDistribution>& predictions, const Vector& labels);

struct MetricSummary {
    std::string model;
    std::size_t runs = 0;
    double mse_mean = 0.0;
    double mse_sd = 0.0;
    double rmse_mean = 0.0;
    double rmse_sd = 0.0;
    std::optional<double> nll_mean;
    std::optional<double> nll_sd;
    int mse_wins = 0;  ///< seeds on which this model had the lowest MSE
    int nll_wins = 0;  ///< seeds on which this model had the lowest NLL
};

struct AggregateSummary {
    std::string split;
    std::vector<MetricSummary> models;  ///< in order of first appearance
};

/// Mean and sample sd per model over runs, plus per-seed win counts.
AggregateSummary aggregate(const std::vector<MetricReport>& runs);

enum class Metric { MSE, NLL };

/// Number of seeds on which model a has a strictly lower metric than model b.
int pairwise_wins(const std::vector<MetricReport>& runs, const std::string& a, const std::string& b, Metric metric);

std::string report_to_json(const MetricReport& report);
std::string summary_to_json(const AggregateSummary& summary);

/// CSV with header id,n,y_true,y_pred,y_sd. Empty y_true for unlabeled bags, empty y_sd
/// for point predictions.
void dump_predictions(std::ostream& out, const BagDataset& data, const std::vector<PredictiveDistribution>& preds);
void dump_predictions(const std::string& path, const BagDataset& data,
                      const std::vector<PredictiveDistribution>& preds);

}  // namespace bagreg
