#include "bagreg/models.hpp"

#include "bagreg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>

namespace bagreg {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2 pi)
constexpr double kProbClamp = 1e-12;

}  // namespace

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::Baseline: return "baseline";
        case ModelKind::FreqShrink: return "freq-shrinkage";
        case ModelKind::BLR: return "blr";
        case ModelKind::ShrinkMAP: return "shrinkage";
        case ModelKind::BDR: return "bdr";
        case ModelKind::ProbitShrink: return "probit-shrinkage";
        case ModelKind::ProbitBLR: return "probit-blr";
    }
    return "unknown";
}

ModelKind model_kind_from_string(std::string_view name) {
    for (ModelKind k : {ModelKind::Baseline, ModelKind::FreqShrink, ModelKind::BLR, ModelKind::ShrinkMAP,
                        ModelKind::BDR, ModelKind::ProbitShrink, ModelKind::ProbitBLR}) {
        if (to_string(k) == name) return k;
    }
    throw InvalidArgument("unknown model kind '" + std::string(name) + "'");
}

bool uses_shrinkage_posterior(ModelKind kind) {
    return kind == ModelKind::ShrinkMAP || kind == ModelKind::BDR || kind == ModelKind::ProbitShrink;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// --- PredictiveDistribution --------------------------------------------------

PredictiveDistribution PredictiveDistribution::point(double mean) {
    PredictiveDistribution p;
    p.kind = PredictiveKind::Point;
    p.mean = mean;
    return p;
}

PredictiveDistribution PredictiveDistribution::gaussian(double mean, double variance) {
    if (!(variance > 0.0)) throw NumericalError("predictive variance must be positive");
    PredictiveDistribution p;
    p.kind = PredictiveKind::Gaussian;
    p.mean = mean;
    p.variance = variance;
    return p;
}

PredictiveDistribution PredictiveDistribution::bernoulli(double prob) {
    PredictiveDistribution p;
    p.kind = PredictiveKind::Bernoulli;
    p.prob = std::clamp(prob, 0.0, 1.0);
    p.mean = p.prob;
    p.variance = p.prob * (1.0 - p.prob);
    return p;
}

PredictiveDistribution PredictiveDistribution::mixture(std::vector<GaussianComponent> components) {
    if (components.empty()) throw InvalidArgument("mixture needs at least one component");
    PredictiveDistribution p;
    p.kind = PredictiveKind::MixtureOfGaussians;
    double m = 0.0;
    double second = 0.0;
    for (const auto& c : components) {
        if (!(c.variance > 0.0)) throw NumericalError("mixture component variance must be positive");
        m += c.mean;
        second += c.variance + c.mean * c.mean;
    }
    const double k = static_cast<double>(components.size());
    p.mean = m / k;
    p.variance = std::max(second / k - p.mean * p.mean, 0.0);
    // guard the degenerate all-identical case against round-off
    if (components.size() == 1 || p.variance <= 0.0) {
        double v = 0.0;
        for (const auto& c : components) v += c.variance;
        p.variance = std::max(p.variance, v / k);
    }
    p.components = std::move(components);
    return p;
}

double PredictiveDistribution::sd() const { return std::sqrt(variance); }

double PredictiveDistribution::log_density(double y) const {
    switch (kind) {
        case PredictiveKind::Point:
            throw InvalidArgument("point predictions have no density");
        case PredictiveKind::Gaussian:
            return -0.5 * (kLog2Pi + std::log(variance) + (y - mean) * (y - mean) / variance);
        case PredictiveKind::MixtureOfGaussians: {
            double hi = -std::numeric_limits<double>::infinity();
            std::vector<double> logs;
            logs.reserve(components.size());
            for (const auto& c : components) {
                const double l = -0.5 * (kLog2Pi + std::log(c.variance) + (y - c.mean) * (y - c.mean) / c.variance);
                logs.push_back(l);
                hi = std::max(hi, l);
            }
            double acc = 0.0;
            for (double l : logs) acc += std::exp(l - hi);
            return hi + std::log(acc / static_cast<double>(components.size()));
        }
        case PredictiveKind::Bernoulli: {
            const double p = std::clamp(prob, kProbClamp, 1.0 - kProbClamp);
            return y > 0.5 ? std::log(p) : std::log1p(-p);
        }
        case PredictiveKind::Grid: {
            const Index g = grid_density.size();
            if (g < 2 || y < grid_lo || y > grid_hi) return std::log(1e-300);
            const double pos = (y - grid_lo) / (grid_hi - grid_lo) * static_cast<double>(g - 1);
            const Index k = std::min<Index>(static_cast<Index>(pos), g - 2);
            const double w = pos - static_cast<double>(k);
            const double dens = (1.0 - w) * grid_density(k) + w * grid_density(k + 1);
            return std::log(std::max(dens, 1e-300));
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

// --- RegressionModel ----------------------------------------------------------

void RegressionModel::validate() const {
    if (!(sigma > 0.0) || !(rho > 0.0) || !(eta > 0.0)) throw InvalidArgument("sigma, rho and eta must be positive");
    kernel.validate();
    landmarks.validate();
    const bool shrink = uses_shrinkage_posterior(kind);
    const Index expected = shrink ? landmarks.s() : landmarks.d();
    if (alpha.size() != expected) {
        throw InvalidArgument("weight vector has length " + std::to_string(alpha.size()) + ", expected " +
                              std::to_string(expected));
    }
    if (kind == ModelKind::BDR) {
        if (posterior_draws.rows() == 0) throw InvalidArgument("BDR model has no posterior draws");
        if (posterior_draws.cols() != landmarks.s() + 1) throw InvalidArgument("BDR draws have wrong width");
    } else if (posterior_draws.size() != 0) {
        throw InvalidArgument("only BDR models carry posterior draws");
    }
    if (shrink || kind == ModelKind::FreqShrink) {
        if (noise.Sigma.rows() != landmarks.d() || noise.m0.size() != landmarks.d() ||
            noise.m0_z.size() != landmarks.s()) {
            throw InvalidArgument("noise model does not match the landmarks");
        }
    }
    if (kind == ModelKind::BLR || kind == ModelKind::ProbitBLR) {
        const Index n = weight_cov.rows();
        if (weight_cov.cols() != n || (n != landmarks.d() && n != landmarks.d() + 1)) {
            throw InvalidArgument("weight covariance has wrong shape");
        }
    }
}

// --- baseline ----------------------------------------------------------------

double baseline_predict(const RegressionModel& model, const EmbeddingStats& stats) {
    if (stats.mu_hat.size() != model.alpha.size()) throw InvalidArgument("embedding length does not match beta");
    return model.alpha.dot(stats.mu_hat) + model.intercept;
}

ValueAndGradient baseline_loss(const Vector& beta, double intercept, std::span<const EmbeddingStats> batch,
                               std::span<const double> labels, double rho, std::size_t n_train) {
    if (batch.empty() || batch.size() != labels.size()) throw InvalidArgument("baseline_loss needs a nonempty batch");
    if (n_train == 0 || !(rho > 0.0)) throw InvalidArgument("baseline_loss needs rho > 0 and n_train > 0");
    const double lambda = 1.0 / (2.0 * rho * rho * static_cast<double>(n_train));
    const Index d = beta.size();
    ValueAndGradient out;
    out.gradient = Vector::Zero(d + 1);
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double sse = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (batch[i].mu_hat.size() != d) throw InvalidArgument("embedding length does not match beta");
        const double r = beta.dot(batch[i].mu_hat) + intercept - labels[i];
        sse += r * r;
        out.gradient.head(d) += (2.0 * inv_b * r) * batch[i].mu_hat;
        out.gradient(d) += 2.0 * inv_b * r;
    }
    out.value = sse * inv_b + lambda * beta.squaredNorm();
    out.gradient.head(d) += 2.0 * lambda * beta;
    return out;
}

// --- BLR ---------------------------------------------------------------------

Matrix blr_design(std::span<const EmbeddingStats> stats, bool intercept) {
    if (stats.empty()) throw InvalidArgument("BLR needs at least one bag");
    const Index d = stats.front().mu_hat.size();
    Matrix X(static_cast<Index>(stats.size()), d + (intercept ? 1 : 0));
    for (std::size_t i = 0; i < stats.size(); ++i) {
        X.row(static_cast<Index>(i)).head(d) = stats[i].mu_hat.transpose();
        if (intercept) X(static_cast<Index>(i), d) = 1.0;
    }
    return X;
}

Vector blr_prior_variances(Index n_features, bool intercept, double rho, double intercept_ratio) {
    Vector v = Vector::Constant(n_features + (intercept ? 1 : 0), rho * rho);
    if (intercept) v(n_features) = (intercept_ratio * rho) * (intercept_ratio * rho);
    return v;
}

BlrPosterior blr_posterior(const Matrix& X, const Vector& y, double sigma, const Vector& prior_var) {
    if (X.rows() != y.size() || X.cols() != prior_var.size()) throw InvalidArgument("BLR shapes disagree");
    if (!(sigma > 0.0) || (prior_var.array() <= 0.0).any()) throw InvalidArgument("BLR variances must be positive");
    const double s2 = sigma * sigma;
    Matrix precision = X.transpose() * X / s2;
    precision.diagonal() += prior_var.cwiseInverse();
    const Cholesky chol(precision);
    BlrPosterior post;
    post.cov = chol.solve(Matrix(Matrix::Identity(X.cols(), X.cols())));
    post.cov = 0.5 * (post.cov + post.cov.transpose()).eval();
    post.mean = chol.solve(Vector(X.transpose() * y / s2));
    return post;
}

ValueAndGradient blr_log_evidence(const Matrix& X, const Vector& y, double sigma, double rho, bool intercept,
                                  const Matrix* dX_dlogb, double intercept_ratio) {
    const Index n = X.rows();
    const Index k = X.cols();
    const Vector prior_var = blr_prior_variances(k - (intercept ? 1 : 0), intercept, rho, intercept_ratio);
    const double s2 = sigma * sigma;
    const Matrix gram = X.transpose() * X;
    const Vector h = X.transpose() * y;
    Matrix precision = gram / s2;
    precision.diagonal() += prior_var.cwiseInverse();
    const Cholesky chol(precision);
    const Matrix S = chol.solve(Matrix(Matrix::Identity(k, k)));
    const Vector m = chol.solve(Vector(h / s2));
    const Vector resid = y - X * m;
    const double r2 = resid.squaredNorm();
    const double nd = static_cast<double>(n);

    ValueAndGradient out;
    out.value = -0.5 * nd * (kLog2Pi + std::log(s2)) - 0.5 * prior_var.array().log().sum() - 0.5 * chol.log_det() -
                r2 / (2.0 * s2) - 0.5 * (m.array().square() / prior_var.array()).sum();
    out.gradient = Vector::Zero(dX_dlogb ? 3 : 2);
    out.gradient(0) = -nd + (S.cwiseProduct(gram)).sum() / s2 + r2 / s2;
    out.gradient(1) = ((S.diagonal().array() + m.array().square()) / prior_var.array() - 1.0).sum();
    if (dX_dlogb) {
        if (dX_dlogb->rows() != n || dX_dlogb->cols() != k) throw InvalidArgument("design derivative has wrong shape");
        const Vector a = resid / s2;
        out.gradient(2) = a.dot(*dX_dlogb * m) - S.cwiseProduct(X.transpose() * *dX_dlogb).sum() / s2;
    }
    return out;
}

PredictiveDistribution blr_predict(const RegressionModel& model, const EmbeddingStats& stats) {
    const Index d = model.alpha.size();
    if (stats.mu_hat.size() != d) throw InvalidArgument("embedding length does not match beta");
    const bool intercept = model.weight_cov.rows() == d + 1;
    Vector x(d + (intercept ? 1 : 0));
    x.head(d) = stats.mu_hat;
    if (intercept) x(d) = 1.0;
    const double mean = model.alpha.dot(stats.mu_hat) + (intercept ? model.intercept : 0.0) + model.label_offset;
    const double var = model.sigma * model.sigma + x.dot(model.weight_cov * x);
    return PredictiveDistribution::gaussian(mean, var);
}

// --- shrinkage ----------------------------------------------------------------

PredictiveDistribution shrinkage_predictive(const Vector& alpha, const EmbeddingPosterior& post, double sigma) {
    if (alpha.size() != post.M.size()) throw InvalidArgument("alpha length does not match the posterior");
    const double quad = std::max(alpha.dot(post.C * alpha), 0.0);
    return PredictiveDistribution::gaussian(alpha.dot(post.M), quad + sigma * sigma);
}

ValueAndGradient shrinkage_nll_with_gradient(const Vector& alpha, double sigma,
                                             std::span<const EmbeddingPosterior> posts,
                                             std::span<const double> labels, const Matrix& K_z, double rho) {
    if (posts.size() != labels.size()) throw InvalidArgument("posterior and label counts differ");
    const Index s = alpha.size();
    const double s2 = sigma * sigma;
    ValueAndGradient out;
    out.gradient = Vector::Zero(s + 1);
    double value = 0.0;
    for (std::size_t i = 0; i < posts.size(); ++i) {
        const Vector c_alpha = posts[i].C * alpha;
        const double xi = alpha.dot(posts[i].M);
        const double nu = std::max(alpha.dot(c_alpha), 0.0) + s2;
        const double r = labels[i] - xi;
        value += 0.5 * (kLog2Pi + std::log(nu) + r * r / nu);
        const double a = -r / nu;
        const double b = 0.5 * (1.0 / nu - r * r / (nu * nu));
        out.gradient.head(s) += a * posts[i].M + 2.0 * b * c_alpha;
        out.gradient(s) += b * 2.0 * s2;
    }
    const Vector k_alpha = K_z * alpha;
    value += alpha.dot(k_alpha) / (2.0 * rho * rho);
    out.gradient.head(s) += k_alpha / (rho * rho);
    out.value = value;
    return out;
}

double shrinkage_nll_objective(const Vector& alpha, double sigma, std::span<const EmbeddingPosterior> posts,
                               std::span<const double> labels, const Matrix& K_z, double rho) {
    return shrinkage_nll_with_gradient(alpha, sigma, posts, labels, K_z, rho).value;
}

ShrinkageObjective::ShrinkageObjective(std::vector<EmbeddingStats> stats, Vector labels, NoiseModel noise,
                                       const GramMatrices& grams, double rho, bool learn_eta, JitterPolicy jitter)
    : s_(grams.K_z.rows()),
      learn_eta_(learn_eta),
      eta_(grams.eta),
      rho_(rho),
      jitter_(jitter),
      R_unit_(grams.R / grams.eta),
      R_z_unit_(grams.R_z / grams.eta),
      R_zz_unit_(grams.R_zz / grams.eta),
      K_z_(grams.K_z),
      Sigma_(std::move(noise.Sigma)),
      m0_z_(std::move(noise.m0_z)),
      labels_(std::move(labels)) {
    if (stats.size() != static_cast<std::size_t>(labels_.size())) throw InvalidArgument("stats and labels differ in count");
    if (!(rho > 0.0)) throw InvalidArgument("rho must be positive");
    std::map<Index, std::size_t> group_of;
    deltas_.reserve(stats.size());
    group_.reserve(stats.size());
    for (auto& st : stats) {
        if (st.mu_hat.size() != R_unit_.rows()) throw InvalidArgument("embedding length does not match the grams");
        auto [it, inserted] = group_of.try_emplace(st.n, sizes_.size());
        if (inserted) sizes_.push_back(st.n);
        group_.push_back(it->second);
        deltas_.push_back(st.mu_hat - noise.m0);
    }
    if (!learn_eta_) {
        cached_.reserve(sizes_.size());
        for (Index n : sizes_) cached_.push_back(make_factor(n, eta_));
    }
}

ShrinkageObjective::Factor ShrinkageObjective::make_factor(Index n, double eta) const {
    Factor f;
    f.n = n;
    const Matrix a = eta * R_unit_ + Sigma_ / static_cast<double>(n);
    f.chol = Cholesky(a, jitter_);
    f.G = f.chol.solve(Matrix(eta * R_z_unit_.transpose()));
    const Matrix c = eta * R_zz_unit_ - eta * R_z_unit_ * f.G;
    f.C = 0.5 * (c + c.transpose());
    return f;
}

Matrix ShrinkageObjective::shrunk_means(double eta) const {
    if (!(eta > 0.0)) throw InvalidArgument("eta must be positive");
    Matrix out(static_cast<Index>(deltas_.size()), s_);
    std::vector<Factor> factors(sizes_.size());
    for (std::size_t g = 0; g < sizes_.size(); ++g) factors[g] = make_factor(sizes_[g], eta);
    for (std::size_t i = 0; i < deltas_.size(); ++i) {
        out.row(static_cast<Index>(i)) = (factors[group_[i]].G.transpose() * deltas_[i] + m0_z_).transpose();
    }
    return out;
}

ValueAndGradient ShrinkageObjective::evaluate(const Vector& params) const {
    std::vector<std::size_t> all(deltas_.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return evaluate(params, all, 1.0, true);
}

ValueAndGradient ShrinkageObjective::evaluate(const Vector& params, std::span<const std::size_t> batch,
                                              double data_weight, bool include_penalty) const {
    if (params.size() != num_params()) throw InvalidArgument("shrinkage objective: wrong parameter count");
    const Vector alpha = params.head(s_);
    const double log_sigma = params(s_);
    const double s2 = std::exp(2.0 * log_sigma);
    const double eta = learn_eta_ ? std::exp(params(s_ + 1)) : eta_;

    const std::size_t n_groups = sizes_.size();
    std::vector<Factor> local;
    std::vector<const Factor*> factors(n_groups, nullptr);
    if (learn_eta_) local.resize(n_groups);
    for (std::size_t i : batch) {
        const std::size_t g = group_.at(i);
        if (factors[g]) continue;
        if (learn_eta_) {
            local[g] = make_factor(sizes_[g], eta);
            factors[g] = &local[g];
        } else {
            factors[g] = &cached_[g];
        }
    }

    const Index d = R_unit_.rows();
    std::vector<Vector> v(n_groups);
    std::vector<double> q(n_groups, 0.0);
    std::vector<Vector> acc_delta(n_groups);
    std::vector<double> acc_a(n_groups, 0.0);
    std::vector<double> acc_b(n_groups, 0.0);
    for (std::size_t g = 0; g < n_groups; ++g) {
        if (!factors[g]) continue;
        v[g] = factors[g]->G * alpha;
        q[g] = std::max(alpha.dot(factors[g]->C * alpha), 0.0);
        acc_delta[g] = Vector::Zero(d);
    }

    const double alpha_m0 = alpha.dot(m0_z_);
    double value = 0.0;
    for (std::size_t i : batch) {
        const std::size_t g = group_[i];
        const double xi = v[g].dot(deltas_[i]) + alpha_m0;
        const double nu = q[g] + s2;
        const double r = labels_(static_cast<Index>(i)) - xi;
        value += data_weight * 0.5 * (kLog2Pi + std::log(nu) + r * r / nu);
        const double a = -r / nu;
        const double b = 0.5 * (1.0 / nu - r * r / (nu * nu));
        acc_delta[g] += (data_weight * a) * deltas_[i];
        acc_a[g] += data_weight * a;
        acc_b[g] += data_weight * b;
    }

    ValueAndGradient out;
    out.gradient = Vector::Zero(num_params());
    auto g_alpha = out.gradient.head(s_);
    double total_a = 0.0;
    for (std::size_t g = 0; g < n_groups; ++g) {
        if (!factors[g]) continue;
        const Factor& f = *factors[g];
        g_alpha += f.G.transpose() * acc_delta[g];
        g_alpha += (2.0 * acc_b[g]) * (f.C * alpha);
        total_a += acc_a[g];
        out.gradient(s_) += acc_b[g] * 2.0 * s2;
        if (learn_eta_) {
            const Matrix R = eta * R_unit_;
            const Matrix R_z = eta * R_z_unit_;
            const Vector rz_alpha = R_z.transpose() * alpha;
            const Vector r_v = R * v[g];
            const Vector w = f.chol.solve(Vector(rz_alpha - r_v));
            const double dq = eta * alpha.dot(R_zz_unit_ * alpha) - 2.0 * rz_alpha.dot(v[g]) + v[g].dot(r_v);
            out.gradient(s_ + 1) += w.dot(acc_delta[g]) + acc_b[g] * dq;
        }
    }
    g_alpha += total_a * m0_z_;

    if (include_penalty) {
        const Vector k_alpha = K_z_ * alpha;
        value += alpha.dot(k_alpha) / (2.0 * rho_ * rho_);
        g_alpha += k_alpha / (rho_ * rho_);
    }
    out.value = value;
    return out;
}

PredictiveDistribution bdr_predict(const Matrix& draws, const EmbeddingPosterior& post, double label_offset) {
    const Index s = post.M.size();
    if (draws.rows() == 0 || draws.cols() != s + 1) throw InvalidArgument("BDR draws have the wrong shape");
    std::vector<GaussianComponent> comps(static_cast<std::size_t>(draws.rows()));
    const Vector means = draws.leftCols(s) * post.M;
    const Matrix ca = draws.leftCols(s) * post.C;  // rows: alpha_t^T C
    for (Index t = 0; t < draws.rows(); ++t) {
        const double quad = std::max(ca.row(t).dot(draws.row(t).head(s)), 0.0);
        const double sig = draws(t, s);
        comps[static_cast<std::size_t>(t)] = {means(t) + label_offset, quad + sig * sig};
    }
    return PredictiveDistribution::mixture(std::move(comps));
}

// --- probit ------------------------------------------------------------------

PredictiveDistribution probit_predictive(const Vector& alpha, const EmbeddingPosterior& post) {
    if (alpha.size() != post.M.size()) throw InvalidArgument("alpha length does not match the posterior");
    const double quad = std::max(alpha.dot(post.C * alpha), 0.0);
    return PredictiveDistribution::bernoulli(normal_cdf(alpha.dot(post.M) / std::sqrt(1.0 + quad)));
}

ValueAndGradient probit_objective(const Vector& alpha, std::span<const EmbeddingPosterior> posts,
                                  std::span<const double> labels, const Matrix& prior_precision,
                                  std::span<const std::size_t> batch, double data_weight) {
    if (posts.size() != labels.size()) throw InvalidArgument("posterior and label counts differ");
    std::vector<std::size_t> all;
    if (batch.empty()) {
        all.resize(posts.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        batch = all;
    }
    const Index s = alpha.size();
    ValueAndGradient out;
    out.gradient = Vector::Zero(s);
    double value = 0.0;
    for (std::size_t i : batch) {
        const auto& post = posts[i];
        const double y = labels[i];
        if (y != 0.0 && y != 1.0) throw InvalidArgument("probit labels must be 0 or 1");
        const Vector c_alpha = post.C * alpha;
        const double quad = std::max(alpha.dot(c_alpha), 0.0);
        const double scale = std::sqrt(1.0 + quad);
        const double am = alpha.dot(post.M);
        const double t = am / scale;
        const double p_raw = normal_cdf(t);
        const double p = std::clamp(p_raw, kProbClamp, 1.0 - kProbClamp);
        value -= data_weight * (y * std::log(p) + (1.0 - y) * std::log1p(-p));
        if (p_raw <= kProbClamp || p_raw >= 1.0 - kProbClamp) continue;
        const double pdf = std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
        const double dvalue_dt = -(y * pdf / p - (1.0 - y) * pdf / (1.0 - p));
        const Vector dt = post.M / scale - (am / (scale * scale * scale)) * c_alpha;
        out.gradient += (data_weight * dvalue_dt) * dt;
    }
    const Vector p_alpha = prior_precision * alpha;
    value += 0.5 * alpha.dot(p_alpha);
    out.gradient += p_alpha;
    out.value = value;
    return out;
}

ValueAndGradient probit_map_objective(const Vector& alpha, std::span<const EmbeddingPosterior> posts,
                                      std::span<const double> labels, double rho, const Matrix& K_z) {
    return probit_objective(alpha, posts, labels, K_z / (rho * rho));
}

// --- Predictor ---------------------------------------------------------------

Predictor::Predictor(RegressionModel model, JitterPolicy jitter) : model_(std::move(model)), jitter_(jitter) {
    model_.validate();
    if (uses_shrinkage_posterior(model_.kind) || model_.kind == ModelKind::FreqShrink) {
        grams_ = build_grams(model_.landmarks, model_.kernel, model_.eta);
    }
}

PredictiveDistribution Predictor::predict_one(const EmbeddingStats& stats, const EmbeddingPosterior* post) const {
    const RegressionModel& m = model_;
    switch (m.kind) {
        case ModelKind::Baseline:
            return PredictiveDistribution::point(baseline_predict(m, stats) + m.label_offset);
        case ModelKind::FreqShrink: {
            const EmbeddingStats shrunk = frequentist_shrinkage(stats, m.noise, grams_, m.noise.m0, jitter_);
            return PredictiveDistribution::point(baseline_predict(m, shrunk) + m.label_offset);
        }
        case ModelKind::BLR:
            return blr_predict(m, stats);
        case ModelKind::ShrinkMAP: {
            PredictiveDistribution p = shrinkage_predictive(m.alpha, *post, m.sigma);
            p.mean += m.label_offset;
            return p;
        }
        case ModelKind::BDR:
            return bdr_predict(m.posterior_draws, *post, m.label_offset);
        case ModelKind::ProbitShrink:
            return probit_predictive(m.alpha, *post);
        case ModelKind::ProbitBLR: {
            const Index d = m.alpha.size();
            const bool intercept = m.weight_cov.rows() == d + 1;
            Vector x(m.weight_cov.rows());
            x.head(d) = stats.mu_hat;
            if (intercept) x(d) = 1.0;
            const double score = m.alpha.dot(stats.mu_hat) + (intercept ? m.intercept : 0.0);
            const double quad = std::max(x.dot(m.weight_cov * x), 0.0);
            return PredictiveDistribution::bernoulli(normal_cdf(score / std::sqrt(1.0 + quad)));
        }
    }
    throw InvalidArgument("unsupported model kind");
}

std::vector<PredictiveDistribution> Predictor::predict(const std::vector<EmbeddingStats>& stats) const {
    std::vector<PredictiveDistribution> out;
    out.reserve(stats.size());
    if (uses_shrinkage_posterior(model_.kind)) {
        const auto posts = shrinkage_posteriors(stats, model_.noise, grams_, jitter_);
        for (std::size_t i = 0; i < stats.size(); ++i) out.push_back(predict_one(stats[i], &posts[i]));
    } else {
        for (const auto& st : stats) out.push_back(predict_one(st, nullptr));
    }
    return out;
}

std::vector<PredictiveDistribution> Predictor::predict(const BagDataset& data) const {
    if (data.dim() != model_.landmarks.dim() && !data.empty()) {
        throw InvalidArgument("dataset dimension " + std::to_string(data.dim()) + " does not match model dimension " +
                              std::to_string(model_.landmarks.dim()));
    }
    return predict(embed_dataset(data, model_.landmarks.u, model_.kernel));
}

PredictiveDistribution Predictor::predict(const Bag& bag) const {
    BagDataset one;
    one.bags.push_back(bag);
    return predict(one).front();
}

}  // namespace bagreg
