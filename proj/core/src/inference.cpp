#include "bagreg/inference.hpp"

#include "bagreg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>

namespace bagreg {

OptimizerState OptimizerState::init(Vector params, double step_size, int patience) {
    OptimizerState s;
    s.first_moment = Vector::Zero(params.size());
    s.second_moment = Vector::Zero(params.size());
    s.params = std::move(params);
    s.step_size = step_size;
    s.best_val_metric = std::numeric_limits<double>::infinity();
    s.patience_left = patience;
    return s;
}

OptimizerState adam_step(OptimizerState state, const Vector& gradient, const AdamSettings& settings) {
    if (gradient.size() != state.params.size()) throw InvalidArgument("gradient has wrong length");
    for (Index i = 0; i < gradient.size(); ++i) {
        if (!std::isfinite(gradient(i))) throw NonFiniteGradient(i);
    }
    ++state.step;
    state.first_moment = settings.beta1 * state.first_moment + (1.0 - settings.beta1) * gradient;
    state.second_moment =
        settings.beta2 * state.second_moment + (1.0 - settings.beta2) * gradient.cwiseAbs2();
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(settings.beta1, t);
    const double c2 = 1.0 - std::pow(settings.beta2, t);
    const Vector m_hat = state.first_moment / c1;
    const Vector v_hat = state.second_moment / c2;
    state.params.array() -= state.step_size * m_hat.array() / (v_hat.array().sqrt() + settings.epsilon);
    return state;
}

GradCheckReport grad_check(const DifferentiableFunction& objective, const Vector& params, double rtol,
                           double abs_floor) {
    GradCheckReport report;
    const ValueAndGradient base = objective(params);
    report.analytic = base.gradient;
    report.numeric = Vector::Zero(params.size());
    if (base.gradient.size() != params.size()) throw InvalidArgument("objective gradient has wrong length");
    Vector theta = params;
    for (Index j = 0; j < params.size(); ++j) {
        const double h = 1e-5 * std::max(1.0, std::abs(params(j)));
        theta(j) = params(j) + h;
        const double up = objective(theta).value;
        theta(j) = params(j) - h;
        const double down = objective(theta).value;
        theta(j) = params(j);
        if (!std::isfinite(up) || !std::isfinite(down)) {
            report.nonfinite.push_back(j);
            report.numeric(j) = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        report.numeric(j) = (up - down) / (2.0 * h);
        const double a = report.analytic(j);
        const double f = report.numeric(j);
        const double err = std::abs(a - f) / std::max({std::abs(a), std::abs(f), abs_floor});
        if (err > report.max_relative_error || report.worst_index < 0) {
            report.max_relative_error = std::max(report.max_relative_error, err);
            report.worst_index = j;
        }
    }
    report.passed = report.nonfinite.empty() && report.max_relative_error <= rtol;
    return report;
}

EarlyStopDecision early_stopper(std::span<const double> history, int patience) {
    if (history.empty()) throw InvalidArgument("early stopping needs a nonempty history");
    EarlyStopDecision decision;
    decision.best_index = static_cast<std::size_t>(std::min_element(history.begin(), history.end()) - history.begin());
    const std::size_t since_best = history.size() - 1 - decision.best_index;
    decision.action = since_best >= static_cast<std::size_t>(std::max(patience, 0))
                          ? EarlyStopDecision::Action::Stop
                          : EarlyStopDecision::Action::Continue;
    return decision;
}

// --- HMC ---------------------------------------------------------------------

void HMCConfig::validate() const {
    if (n_warmup < 1) throw InvalidArgument("HMC needs at least one warmup iteration");
    if (n_samples < 1) throw InvalidArgument("HMC needs at least one sample");
    if (leapfrog_steps < 1) throw InvalidArgument("leapfrog_steps must be positive");
    if (!(target_accept > 0.0 && target_accept < 1.0)) throw InvalidArgument("target_accept must lie in (0, 1)");
    if (!(init_step > 0.0)) throw InvalidArgument("init_step must be positive");
    if (!(path_jitter >= 0.0 && path_jitter < 1.0)) throw InvalidArgument("path_jitter must lie in [0, 1)");
}

bool leapfrog(const DifferentiableFunction& log_post, Vector& position, Vector& momentum, ValueAndGradient& current,
              double step_size, int steps) {
    momentum += 0.5 * step_size * current.gradient;
    for (int l = 0; l < steps; ++l) {
        position += step_size * momentum;
        current = log_post(position);
        if (!std::isfinite(current.value) || !current.gradient.allFinite()) return false;
        const double w = (l + 1 == steps) ? 0.5 : 1.0;
        momentum += w * step_size * current.gradient;
    }
    return momentum.allFinite();
}

namespace {

struct DualAveraging {
    double mu;
    double target;
    double h_bar = 0.0;
    double log_eps_bar = 0.0;
    double gamma = 0.05;
    double t0 = 10.0;
    double kappa = 0.75;
    int m = 0;

    DualAveraging(double eps0, double target_accept) : mu(std::log(10.0 * eps0)), target(target_accept) {}

    double update(double accept_stat) {
        ++m;
        const double md = static_cast<double>(m);
        h_bar = (1.0 - 1.0 / (md + t0)) * h_bar + (target - accept_stat) / (md + t0);
        const double log_eps = mu - std::sqrt(md) / gamma * h_bar;
        const double w = std::pow(md, -kappa);
        log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
        return std::exp(log_eps);
    }

    double final_step() const { return std::exp(log_eps_bar); }
};

}  // namespace

Chain hmc_sample(const DifferentiableFunction& log_post, const Vector& init, const HMCConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    Vector position = init;
    ValueAndGradient current = log_post(position);
    if (!std::isfinite(current.value) || !current.gradient.allFinite()) {
        throw NumericalError("HMC: log posterior is not finite at the initial point");
    }
    const Index dim = init.size();
    Chain chain;
    chain.draws.resize(config.n_samples, dim);
    chain.log_posts.resize(config.n_samples);

    double eps = config.init_step;
    DualAveraging adapt(eps, config.target_accept);
    long warmup_accepts = 0;
    long sample_accepts = 0;
    const int total = config.n_warmup + config.n_samples;
    Vector momentum(dim);
    for (int iter = 0; iter < total; ++iter) {
        const bool warmup = iter < config.n_warmup;
        for (Index i = 0; i < dim; ++i) momentum(i) = normal(rng);
        const double h0 = -current.value + 0.5 * momentum.squaredNorm();
        const double jitter = config.path_jitter * (2.0 * unif(rng) - 1.0);
        const int steps = std::max(1, static_cast<int>(std::lround(config.leapfrog_steps * (1.0 + jitter))));

        Vector proposal = position;
        Vector p = momentum;
        ValueAndGradient next = current;
        const bool ok = leapfrog(log_post, proposal, p, next, eps, steps);
        const double h1 = ok ? -next.value + 0.5 * p.squaredNorm() : std::numeric_limits<double>::infinity();
        const double delta = h1 - h0;
        const bool divergent = !ok || !std::isfinite(delta) || delta > config.divergence_threshold;
        const double accept_prob = divergent ? 0.0 : std::min(1.0, std::exp(-delta));
        if (unif(rng) < accept_prob) {
            position = std::move(proposal);
            current = std::move(next);
            (warmup ? warmup_accepts : sample_accepts) += 1;
        }
        if (divergent && !warmup) ++chain.divergences;

        if (warmup) {
            if (config.adapt_step_size) {
                eps = adapt.update(accept_prob);
                if (iter + 1 == config.n_warmup) eps = adapt.final_step();
            }
        } else {
            const int k = iter - config.n_warmup;
            chain.draws.row(k) = position.transpose();
            chain.log_posts(k) = current.value;
        }
    }
    if (warmup_accepts == 0) {
        throw NumericalError("HMC warmup rejected every proposal; try a smaller init_step");
    }
    if (sample_accepts == 0) {
        throw NumericalError("HMC accepted no proposals after warmup");
    }
    chain.accept_rate = static_cast<double>(sample_accepts) / config.n_samples;
    chain.step_size = eps;
    return chain;
}

std::vector<Chain> hmc_sample_chains(const DifferentiableFunction& log_post, const Vector& init,
                                     const HMCConfig& config, int n_chains) {
    if (n_chains < 1) throw InvalidArgument("need at least one chain");
    std::vector<Chain> chains;
    chains.reserve(static_cast<std::size_t>(n_chains));
    for (int c = 0; c < n_chains; ++c) {
        HMCConfig cfg = config;
        cfg.seed = config.seed + static_cast<std::uint64_t>(c) * 0x9E3779B97F4A7C15ULL;
        chains.push_back(hmc_sample(log_post, init, cfg));
    }
    return chains;
}

double effective_sample_size(std::span<const double> series) {
    const std::size_t n = series.size();
    if (n < 4) return static_cast<double>(n);
    double mean = 0.0;
    for (double x : series) mean += x;
    mean /= static_cast<double>(n);
    auto autocov = [&](std::size_t lag) {
        double acc = 0.0;
        for (std::size_t i = 0; i + lag < n; ++i) acc += (series[i] - mean) * (series[i + lag] - mean);
        return acc / static_cast<double>(n);
    };
    const double c0 = autocov(0);
    if (!(c0 > 0.0)) return static_cast<double>(n);
    // Geyer: sum consecutive pairs while positive, enforcing monotonicity.
    double sum_pairs = 0.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
        double pair = (autocov(2 * k) + autocov(2 * k + 1)) / c0;
        if (pair <= 0.0) break;
        pair = std::min(pair, prev_pair);
        prev_pair = pair;
        sum_pairs += pair;
    }
    const double tau = -1.0 + 2.0 * sum_pairs;
    return static_cast<double>(n) / std::max(tau, 1.0 / std::log10(static_cast<double>(n) + 10.0));
}

Vector split_rhat(const std::vector<Chain>& chains) {
    if (chains.empty()) throw InvalidArgument("split_rhat needs at least one chain");
    const Index dim = chains.front().draws.cols();
    const Index half = chains.front().draws.rows() / 2;
    if (half < 2) throw InvalidArgument("chains too short for split-Rhat");
    Vector rhat(dim);
    for (Index j = 0; j < dim; ++j) {
        std::vector<Vector> parts;
        for (const auto& c : chains) {
            parts.push_back(c.draws.col(j).head(half));
            parts.push_back(c.draws.col(j).segment(half, half));
        }
        const double m = static_cast<double>(parts.size());
        const double nn = static_cast<double>(half);
        Vector means(parts.size());
        double w = 0.0;
        for (std::size_t k = 0; k < parts.size(); ++k) {
            means(static_cast<Index>(k)) = parts[k].mean();
            w += (parts[k].array() - means(static_cast<Index>(k))).square().sum() / (nn - 1.0);
        }
        w /= m;
        const double b = nn * (means.array() - means.mean()).square().sum() / (m - 1.0);
        const double var_plus = (nn - 1.0) / nn * w + b / nn;
        rhat(j) = w > 0.0 ? std::sqrt(var_plus / w) : 1.0;
    }
    return rhat;
}

Matrix concatenate_draws(const std::vector<Chain>& chains) {
    Index rows = 0;
    for (const auto& c : chains) rows += c.draws.rows();
    Matrix all(rows, chains.empty() ? 0 : chains.front().draws.cols());
    Index r = 0;
    for (const auto& c : chains) {
        all.middleRows(r, c.draws.rows()) = c.draws;
        r += c.draws.rows();
    }
    return all;
}

void write_chains_csv(const std::string& path, const std::vector<Chain>& chains,
                      const std::vector<std::string>& names) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << "chain,draw,log_post";
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    out << std::setprecision(17);
    for (std::size_t c = 0; c < chains.size(); ++c) {
        const auto& ch = chains[c];
        if (static_cast<std::size_t>(ch.draws.cols()) != names.size()) {
            throw InvalidArgument("parameter name count does not match chain dimension");
        }
        for (Index i = 0; i < ch.draws.rows(); ++i) {
            out << c << ',' << i << ',' << ch.log_posts(i);
            for (Index j = 0; j < ch.draws.cols(); ++j) out << ',' << ch.draws(i, j);
            out << '\n';
        }
    }
}

}  // namespace bagreg
