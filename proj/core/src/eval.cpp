#include "bagreg/eval.hpp"

#include "bagreg/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>

namespace bagreg {

namespace {

std::string num(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return {buf, res.ptr};
}

void mean_sd(const std::vector<double>& xs, double& mean, double& sd) {
    mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    sd = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
}

}  // namespace

double mse(std::span<const double> predictions, std::span<const double> labels) {
    if (predictions.size() != labels.size()) throw InvalidArgument("prediction and label counts differ");
    if (predictions.empty()) throw InvalidArgument("mse needs at least one prediction");
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double r = predictions[i] - labels[i];
        acc += r * r;
    }
    return acc / static_cast<double>(predictions.size());
}

double mse(const std::vector<PredictiveDistribution>& predictions, const Vector& labels) {
    std::vector<double> means(predictions.size());
    for (std::size_t i = 0; i < predictions.size(); ++i) means[i] = predictions[i].mean;
    return mse(means, std::span<const double>(labels.data(), static_cast<std::size_t>(labels.size())));
}

double nll(const std::vector<PredictiveDistribution>& predictions, const Vector& labels) {
    if (predictions.size() != static_cast<std::size_t>(labels.size())) {
        throw InvalidArgument("prediction and label counts differ");
    }
    if (predictions.empty()) throw InvalidArgument("nll needs at least one prediction");
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        acc -= predictions[i].log_density(labels(static_cast<Index>(i)));
    }
    return acc / static_cast<double>(predictions.size());
}

double classification_error(const std::vector<PredictiveDistribution>& predictions, const Vector& labels) {
    if (predictions.size() != static_cast<std::size_t>(labels.size()) || predictions.empty()) {
        throw InvalidArgument("prediction and label counts differ");
    }
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i].kind != PredictiveKind::Bernoulli) throw InvalidArgument("expected Bernoulli predictions");
        const bool guess = predictions[i].prob > 0.5;
        const bool truth = labels(static_cast<Index>(i)) > 0.5;
        wrong += guess != truth;
    }
    return static_cast<double>(wrong) / static_cast<double>(predictions.size());
}

double uniform_nll(double lo, double hi) {
    if (!(hi > lo)) throw InvalidArgument("uniform range must satisfy lo < hi");
    return std::log(hi - lo);
}

MetricReport make_report(const std::string& model, const std::string& split, std::uint64_t seed,
                         const std::vector<PredictiveDistribution>& predictions, const Vector& labels) {
    MetricReport r;
    r.model = model;
    r.split = split;
    r.seed = seed;
    r.n_bags = predictions.size();
    r.mse = mse(predictions, labels);
    r.rmse = std::sqrt(r.mse);
    const bool probabilistic = std::all_of(predictions.begin(), predictions.end(),
                                           [](const PredictiveDistribution& p) { return p.is_probabilistic(); });
    if (probabilistic) r.nll = nll(predictions, labels);
    return r;
}

AggregateSummary aggregate(const std::vector<MetricReport>& runs) {
    if (runs.size() < 2) throw InvalidArgument("aggregation needs at least two runs");
    AggregateSummary out;
    out.split = runs.front().split;
    std::vector<std::string> order;
    std::map<std::string, std::vector<const MetricReport*>> by_model;
    for (const auto& r : runs) {
        if (r.split != out.split) throw InvalidArgument("cannot aggregate runs from different splits");
        if (!by_model.contains(r.model)) order.push_back(r.model);
        by_model[r.model].push_back(&r);
    }
    // per-seed winners
    std::map<std::uint64_t, std::vector<const MetricReport*>> by_seed;
    for (const auto& r : runs) by_seed[r.seed].push_back(&r);
    std::map<std::string, int> mse_wins;
    std::map<std::string, int> nll_wins;
    for (const auto& [seed, group] : by_seed) {
        const MetricReport* best_mse = nullptr;
        const MetricReport* best_nll = nullptr;
        for (const auto* r : group) {
            if (!best_mse || r->mse < best_mse->mse) best_mse = r;
            if (r->nll && (!best_nll || *r->nll < *best_nll->nll)) best_nll = r;
        }
        if (best_mse) ++mse_wins[best_mse->model];
        if (best_nll) ++nll_wins[best_nll->model];
    }
    for (const auto& name : order) {
        const auto& rs = by_model[name];
        MetricSummary s;
        s.model = name;
        s.runs = rs.size();
        std::vector<double> m, rm, nl;
        for (const auto* r : rs) {
            m.push_back(r->mse);
            rm.push_back(r->rmse);
            if (r->nll) nl.push_back(*r->nll);
        }
        mean_sd(m, s.mse_mean, s.mse_sd);
        mean_sd(rm, s.rmse_mean, s.rmse_sd);
        if (nl.size() == rs.size()) {
            double a = 0.0, b = 0.0;
            mean_sd(nl, a, b);
            s.nll_mean = a;
            s.nll_sd = b;
        }
        s.mse_wins = mse_wins[name];
        s.nll_wins = nll_wins[name];
        out.models.push_back(std::move(s));
    }
    return out;
}

int pairwise_wins(const std::vector<MetricReport>& runs, const std::string& a, const std::string& b, Metric metric) {
    std::map<std::uint64_t, std::pair<const MetricReport*, const MetricReport*>> by_seed;
    for (const auto& r : runs) {
        if (r.model == a) by_seed[r.seed].first = &r;
        if (r.model == b) by_seed[r.seed].second = &r;
    }
    int wins = 0;
    for (const auto& [seed, pair] : by_seed) {
        const auto [ra, rb] = pair;
        if (!ra || !rb) continue;
        if (metric == Metric::MSE) {
            wins += ra->mse < rb->mse;
        } else if (ra->nll && rb->nll) {
            wins += *ra->nll < *rb->nll;
        }
    }
    return wins;
}

std::string report_to_json(const MetricReport& r) {
    nlohmann::json j{{"model", r.model}, {"split", r.split}, {"seed", r.seed}, {"n_bags", r.n_bags},
                     {"mse", r.mse},     {"rmse", r.rmse}};
    j["nll"] = r.nll ? nlohmann::json(*r.nll) : nlohmann::json(nullptr);
    return j.dump(2);
}

std::string summary_to_json(const AggregateSummary& summary) {
    nlohmann::json models = nlohmann::json::array();
    for (const auto& s : summary.models) {
        nlohmann::json m{{"model", s.model},         {"runs", s.runs},         {"mse_mean", s.mse_mean},
                         {"mse_sd", s.mse_sd},       {"rmse_mean", s.rmse_mean}, {"rmse_sd", s.rmse_sd},
                         {"mse_wins", s.mse_wins},   {"nll_wins", s.nll_wins}};
        m["nll_mean"] = s.nll_mean ? nlohmann::json(*s.nll_mean) : nlohmann::json(nullptr);
        m["nll_sd"] = s.nll_sd ? nlohmann::json(*s.nll_sd) : nlohmann::json(nullptr);
        models.push_back(std::move(m));
    }
    return nlohmann::json{{"split", summary.split}, {"models", std::move(models)}}.dump(2);
}

void dump_predictions(std::ostream& out, const BagDataset& data, const std::vector<PredictiveDistribution>& preds) {
    if (preds.size() != data.size()) throw InvalidArgument("one prediction per bag is required");
    out << "id,n,y_true,y_pred,y_sd\n";
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const Bag& bag = data.bags[i];
        std::string id = bag.id;
        if (id.find_first_of(",\"\n") != std::string::npos) {
            std::string quoted = "\"";
            for (char c : id) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
            id = quoted + "\"";
        }
        out << id << ',' << bag.points.rows() << ',';
        if (bag.label) out << num(*bag.label);
        out << ',' << num(preds[i].mean) << ',';
        if (preds[i].is_probabilistic()) out << num(preds[i].sd());
        out << '\n';
    }
}

void dump_predictions(const std::string& path, const BagDataset& data,
                      const std::vector<PredictiveDistribution>& preds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    dump_predictions(out, data, preds);
}

}  // namespace bagreg
