#include "cli.hpp"

#include "bagreg/dataset_io.hpp"
#include "bagreg/errors.hpp"
#include "bagreg/experiment.hpp"
#include "bagreg/serialization.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace bagreg::cli {

namespace {

struct GenerateArgs {
    std::size_t n_train = 1000, n_early = 500, n_val = 500, n_test = 1000;
    Index dim = 5;
    Index fixed_bag_size = 0;
    double s5 = -1.0;
    double noise_sd = 0.0;
    std::uint64_t seed = 0;
    std::string convention = "rate";
    std::string out_dir;
};

struct TrainArgs {
    std::string data_dir;
    std::string model = "shrinkage";
    std::string r_choice = "k";
    double conv_scale = 1.0;
    std::string landmarks = "kmeans";
    std::vector<double> bandwidth_factors;
    std::vector<int> landmark_counts;
    std::vector<double> rhos, step_sizes, etas;
    int max_epochs = 1000;
    int batch_size = 64;
    int patience = 30;
    bool no_warm_start = false;
    int chains = 4;
    int warmup = 1000;
    int samples = 1000;
    int leapfrog = 16;
    double target_accept = 0.8;
    bool sample_eta = false;
    bool fixed_eta = false;
    std::uint64_t seed = 0;
    std::string out;
    std::string tuning_log;
};

struct EvaluateArgs {
    std::string model_file;
    bool oracle = false;
    std::string data_dir;
    std::string split = "test";
    std::string data;
    std::string report;
    std::string predictions;
    int multi_seed = 0;
    bool with_oracle = false;
    std::string summary;
};

struct PredictArgs {
    std::string model_file;
    std::string data;
    std::string out;
};

GammaConfig gamma_config(const GenerateArgs& a) {
    GammaConfig c;
    c.n_train = a.n_train;
    c.n_early = a.n_early;
    c.n_val = a.n_val;
    c.n_test = a.n_test;
    c.dim = a.dim;
    c.noise_sd = a.noise_sd;
    c.seed = a.seed;
    if (a.convention != "rate" && a.convention != "scale") throw InvalidArgument("--convention must be rate or scale");
    c.convention = a.convention == "rate" ? GammaConvention::Rate : GammaConvention::Scale;
    if (a.s5 >= 0.0) {
        c.bag_size = MixedBagSizes{a.s5};
    } else {
        c.bag_size = FixedBagSize{a.fixed_bag_size > 0 ? a.fixed_bag_size : 1000};
    }
    c.validate();
    return c;
}

ExperimentConfig experiment_config(const TrainArgs& a) {
    ExperimentConfig c;
    c.models = {model_kind_from_string(a.model)};
    if (a.r_choice != "k" && a.r_choice != "conv") throw InvalidArgument("--r-choice must be k or conv");
    c.r_choice = a.r_choice == "k" ? RChoice::RK : RChoice::RConv;
    c.conv_scale = a.conv_scale;
    if (a.landmarks != "kmeans" && a.landmarks != "sample") throw InvalidArgument("--landmarks must be kmeans or sample");
    c.landmark_method = a.landmarks == "kmeans" ? LandmarkMethod::KMeans : LandmarkMethod::Sample;
    if (!a.bandwidth_factors.empty()) c.grid.bandwidth_factors = a.bandwidth_factors;
    if (!a.landmark_counts.empty()) c.grid.landmark_counts = a.landmark_counts;
    if (!a.rhos.empty()) c.grid.rhos = a.rhos;
    if (!a.step_sizes.empty()) c.grid.step_sizes = a.step_sizes;
    if (!a.etas.empty()) c.grid.etas = a.etas;
    c.grid.validate();
    c.train.max_epochs = a.max_epochs;
    c.train.batch_size = a.batch_size;
    c.train.patience = a.patience;
    c.train.warm_start = !a.no_warm_start;
    c.bdr.chains = a.chains;
    c.bdr.hmc.n_warmup = a.warmup;
    c.bdr.hmc.n_samples = a.samples;
    c.bdr.hmc.leapfrog_steps = a.leapfrog;
    c.bdr.hmc.target_accept = a.target_accept;
    c.bdr.sample_eta = a.sample_eta;
    c.learn_eta = !a.fixed_eta;
    c.seed = a.seed;
    return c;
}

Split split_from_string(const std::string& name) {
    for (Split s : kAllSplits) {
        if (to_string(s) == name) return s;
    }
    throw InvalidArgument("unknown split '" + name + "' (expected train, early, val or test)");
}

std::string format_double(double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

void write_text(const std::string& path, const std::string& text, std::ostream& fallback) {
    if (path.empty() || path == "-") {
        fallback << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path + "' for writing");
    f << text;
    if (!f) throw Error("failed writing '" + path + "'");
}

void check_dimension(const BagDataset& data, Index expected) {
    data.validate();
    if (!data.empty() && data.dim() != expected) {
        throw DataError("dataset points have dimension " + std::to_string(data.dim()) + " but the model expects " +
                        std::to_string(expected));
    }
}

BayesOptimalOptions oracle_options_from_manifest(const std::string& dir) {
    const DatasetManifest m = read_manifest((std::filesystem::path(dir) / kManifestName).string());
    if (m.generator != "gamma") throw DataError("the oracle needs a gamma dataset directory");
    BayesOptimalOptions o;
    try {
        o.noise_sd = std::stod(m.parameters.at("noise_sd"));
        o.convention = m.parameters.at("convention") == "scale" ? GammaConvention::Scale : GammaConvention::Rate;
        o.label_lo = std::stod(m.parameters.at("label_lo"));
        o.label_hi = std::stod(m.parameters.at("label_hi"));
    } catch (const std::exception&) {
        throw DataError("manifest lacks the generator parameters required by the oracle");
    }
    return o;
}

std::vector<PredictiveDistribution> predict_with(const RegressionModel& model, const BagDataset& data) {
    check_dimension(data, model.landmarks.u.cols());
    return Predictor(model).predict(data);
}

// --- commands ------------------------------------------------------------------

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
    const GammaConfig config = gamma_config(a);
    const GammaSplits splits = gamma_generate(config);
    const DatasetManifest m = write_gamma_splits(a.out_dir, splits, config);
    for (const auto& [name, e] : m.splits) {
        char hex[9];
        std::snprintf(hex, sizeof(hex), "%08x", e.crc32);
        out << name << ": " << e.count << " bags, crc32 " << hex << '\n';
    }
    return kOk;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
    const ExperimentConfig config = experiment_config(a);
    const BagDataset train = read_split(a.data_dir, Split::Train);
    const BagDataset early = read_split(a.data_dir, Split::Early);
    const BagDataset val = read_split(a.data_dir, Split::Val);
    const ModelKind kind = config.models.front();
    auto trained = train_models(train, early, val, config);
    TrainedModel& tm = trained.at(kind);

    std::vector<TuningRow> log;
    if (kind == ModelKind::BDR) log = trained.at(ModelKind::ShrinkMAP).log;
    log.insert(log.end(), tm.log.begin(), tm.log.end());
    if (!a.tuning_log.empty()) write_text(a.tuning_log, tuning_log_csv(log), out);

    tm.model.metadata["data_dir"] = a.data_dir;
    tm.model.metadata["seed"] = std::to_string(config.seed);
    tm.model.metadata["landmarks"] = std::to_string(tm.best.landmarks);
    tm.model.metadata["step_size"] = format_double(tm.best.step_size);
    tm.model.metadata["val_mse"] = format_double(tm.best.val_mse);
    if (tm.best.val_nll) tm.model.metadata["val_nll"] = format_double(*tm.best.val_nll);
    if (kind == ModelKind::BDR) {
        tm.model.metadata["hmc_seed"] = std::to_string(config.bdr.hmc.seed + config.seed);
        tm.model.metadata["accept_rate"] = format_double(tm.diagnostics.accept_rate);
        tm.model.metadata["divergences"] = std::to_string(tm.diagnostics.divergences);
    }
    save_model(a.out, tm.model);

    out << to_string(kind) << ": val_mse " << tm.best.val_mse;
    if (tm.best.val_nll) out << ", val_nll " << *tm.best.val_nll;
    out << ", bandwidth " << tm.best.bandwidth << ", d " << tm.best.landmarks << ", rho " << tm.model.rho;
    if (!tm.diagnostics.message.empty()) out << " (" << tm.diagnostics.message << ")";
    out << '\n';
    return kOk;
}

int cmd_evaluate_multi(const EvaluateArgs& e, const GenerateArgs& g, const TrainArgs& t, std::ostream& out) {
    if (e.multi_seed < 2) throw InvalidArgument("--multi-seed needs at least 2 seeds");
    ExperimentConfig config = experiment_config(t);
    if (std::find(config.models.begin(), config.models.end(), ModelKind::Baseline) == config.models.end()) {
        config.models.insert(config.models.begin(), ModelKind::Baseline);
    }
    GammaConfig data = gamma_config(g);
    std::optional<BayesOptimalPredictor> oracle;
    if (e.with_oracle) {
        BayesOptimalOptions o;
        o.noise_sd = data.noise_sd;
        o.convention = data.convention;
        o.label_lo = data.label_lo;
        o.label_hi = data.label_hi;
        oracle.emplace(o);
    }
    std::vector<MetricReport> runs;
    std::string reports;
    for (int k = 0; k < e.multi_seed; ++k) {
        data.seed = g.seed + static_cast<std::uint64_t>(k);
        const SeedOutcome outcome = run_gamma_seed(data, config, e.with_oracle, oracle ? &*oracle : nullptr);
        for (const auto& r : outcome.reports) {
            runs.push_back(r);
            reports += report_to_json(r) + "\n";
        }
        out << "seed " << data.seed << " done\n";
    }
    if (!e.report.empty()) write_text(e.report, reports, out);
    write_text(e.summary, summary_to_json(aggregate(runs)) + "\n", out);
    return kOk;
}

int cmd_evaluate(const EvaluateArgs& e, std::ostream& out) {
    if (e.model_file.empty() == !e.oracle) throw InvalidArgument("pass exactly one of --model-file and --oracle");
    if (e.data.empty() == e.data_dir.empty()) throw InvalidArgument("pass exactly one of --data and --data-dir");
    const BagDataset data = e.data.empty() ? read_split(e.data_dir, split_from_string(e.split)) : read_dataset(e.data);
    if (!data.has_labels()) throw DataError("evaluation needs labeled bags");

    std::vector<PredictiveDistribution> preds;
    std::string name;
    if (e.oracle) {
        if (e.data_dir.empty()) throw InvalidArgument("--oracle reads the generator settings from --data-dir");
        data.validate();
        preds = BayesOptimalPredictor(oracle_options_from_manifest(e.data_dir)).predict(data);
        name = "bayes-optimal";
    } else {
        const RegressionModel model = load_model(e.model_file);
        preds = predict_with(model, data);
        name = to_string(model.kind);
    }
    std::uint64_t seed = 0;
    if (!e.data_dir.empty()) seed = read_manifest((std::filesystem::path(e.data_dir) / kManifestName).string()).seed;
    const MetricReport report = make_report(name, e.data.empty() ? e.split : "custom", seed, preds, data.labels());
    write_text(e.report, report_to_json(report) + "\n", out);
    if (!e.predictions.empty()) dump_predictions(e.predictions, data, preds);
    return kOk;
}

int cmd_predict(const PredictArgs& p, std::ostream& out) {
    const RegressionModel model = load_model(p.model_file);
    const BagDataset data = read_dataset(p.data);
    const auto preds = predict_with(model, data);
    if (p.out.empty() || p.out == "-") {
        dump_predictions(out, data, preds);
    } else {
        dump_predictions(p.out, data, preds);
    }
    return kOk;
}

void add_generate_options(CLI::App& app, GenerateArgs& g, bool with_out_dir) {
    app.add_option("--n-train", g.n_train, "training bags")->capture_default_str();
    app.add_option("--n-early", g.n_early, "early-stopping bags")->capture_default_str();
    app.add_option("--n-val", g.n_val, "validation bags")->capture_default_str();
    app.add_option("--n-test", g.n_test, "test bags")->capture_default_str();
    app.add_option("--dim", g.dim, "point dimension p")->capture_default_str();
    auto* fixed = app.add_option("--fixed-bag-size,--bag-size", g.fixed_bag_size, "every bag has this many points");
    auto* s5 = app.add_option("--s5", g.s5, "percentage of bags with 5 points (mixed sizes)")->check(CLI::Range(0.0, 50.0));
    s5->excludes(fixed);
    app.add_option("--noise-sd", g.noise_sd, "sd of the additive Gaussian noise")->capture_default_str();
    app.add_option("--seed", g.seed, "generator seed")->capture_default_str();
    app.add_option("--convention", g.convention, "gamma second parameter: rate or scale")->capture_default_str();
    if (with_out_dir) app.add_option("--out-dir", g.out_dir, "output directory")->required();
}

void add_train_options(CLI::App& app, TrainArgs& t, bool with_io) {
    if (with_io) {
        app.add_option("--data-dir", t.data_dir, "directory written by generate")->required();
        app.add_option("--out", t.out, "model file to write")->required();
        app.add_option("--tuning-log", t.tuning_log, "CSV with one row per grid point");
        app.add_option("--seed", t.seed, "training seed")->capture_default_str();
    }
    app.add_option("--model", t.model, "baseline, freq-shrinkage, blr, shrinkage, bdr, probit-shrinkage, probit-blr")
        ->capture_default_str();
    app.add_option("--r-choice", t.r_choice, "prior covariance: k or conv")->capture_default_str();
    app.add_option("--conv-scale", t.conv_scale, "length-scale of the conv prior")->capture_default_str();
    app.add_option("--landmarks", t.landmarks, "landmark selection: kmeans or sample")->capture_default_str();
    app.add_option("--bandwidth-factors", t.bandwidth_factors, "bandwidths as multiples of the median heuristic")
        ->delimiter(',');
    app.add_option("--landmark-counts", t.landmark_counts, "numbers of landmarks d")->delimiter(',');
    app.add_option("--rhos", t.rhos, "prior scales rho")->delimiter(',');
    app.add_option("--step-sizes", t.step_sizes, "Adam step sizes")->delimiter(',');
    app.add_option("--etas", t.etas, "shrinkage strengths eta (initial values when learned)")->delimiter(',');
    app.add_option("--max-epochs", t.max_epochs, "epoch limit")->capture_default_str();
    app.add_option("--batch-size", t.batch_size, "bags per minibatch")->capture_default_str();
    app.add_option("--patience", t.patience, "epochs without improvement before stopping")->capture_default_str();
    app.add_flag("--no-warm-start", t.no_warm_start, "start Adam from zero weights");
    app.add_option("--chains", t.chains, "HMC chains")->capture_default_str();
    app.add_option("--warmup", t.warmup, "HMC warmup iterations per chain")->capture_default_str();
    app.add_option("--samples", t.samples, "HMC draws per chain")->capture_default_str();
    app.add_option("--leapfrog", t.leapfrog, "leapfrog steps per HMC iteration")->capture_default_str();
    app.add_option("--target-accept", t.target_accept, "dual-averaging target")->capture_default_str();
    app.add_flag("--sample-eta", t.sample_eta, "sample eta in BDR instead of fixing it");
    app.add_flag("--fixed-eta", t.fixed_eta, "keep eta at its grid value instead of learning it");
}

int classify(const std::exception& e, std::ostream& err) {
    err << "error: " << e.what() << '\n';
    if (dynamic_cast<const InvalidArgument*>(&e)) return kUsage;
    if (dynamic_cast<const NumericalError*>(&e)) return kNumericalError;
    if (dynamic_cast<const DataError*>(&e)) return kDataError;
    return kDataError;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bayesian distribution regression with kernel mean embeddings", "bagreg"};
    app.set_config("--config", "", "TOML file with option defaults; flags override it");
    app.require_subcommand(1);

    GenerateArgs gen_args;
    auto* gen = app.add_subcommand("generate", "write the four gamma splits and a manifest");
    add_generate_options(*gen, gen_args, true);

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "grid-tune one model and save the best checkpoint");
    add_train_options(*train, train_args, true);

    EvaluateArgs eval_args;
    GenerateArgs eval_gen;
    TrainArgs eval_train;
    eval_train.model = "bdr";
    auto* evaluate = app.add_subcommand("evaluate", "metrics of a saved model, the oracle, or a multi-seed run");
    evaluate->add_option("--model-file", eval_args.model_file, "model written by train");
    evaluate->add_flag("--oracle", eval_args.oracle, "evaluate the Bayes-optimal predictor");
    evaluate->add_option("--data-dir", eval_args.data_dir, "dataset directory");
    evaluate->add_option("--split", eval_args.split, "split inside --data-dir")->capture_default_str();
    evaluate->add_option("--data", eval_args.data, "dataset file");
    evaluate->add_option("--report", eval_args.report, "metric report (JSON); stdout if omitted");
    evaluate->add_option("--predictions", eval_args.predictions, "per-bag CSV");
    evaluate->add_option("--multi-seed", eval_args.multi_seed, "generate, train and evaluate on this many seeds");
    evaluate->add_flag("--with-oracle", eval_args.with_oracle, "include the oracle in a multi-seed run");
    evaluate->add_option("--summary", eval_args.summary, "aggregate summary of a multi-seed run; stdout if omitted");
    add_generate_options(*evaluate, eval_gen, false);
    add_train_options(*evaluate, eval_train, false);

    PredictArgs pred_args;
    auto* predict = app.add_subcommand("predict", "per-bag predictive mean and sd");
    predict->add_option("--model-file", pred_args.model_file, "model written by train")->required();
    predict->add_option("--data", pred_args.data, "dataset file (labels optional)")->required();
    predict->add_option("--out", pred_args.out, "CSV to write; stdout if omitted");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::CallForVersion&) {
        out << "bagreg 0.1.0\n";
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsage;
    }

    try {
        if (gen->parsed()) return cmd_generate(gen_args, out);
        if (train->parsed()) return cmd_train(train_args, out);
        if (evaluate->parsed()) {
            if (eval_args.multi_seed > 0) return cmd_evaluate_multi(eval_args, eval_gen, eval_train, out);
            return cmd_evaluate(eval_args, out);
        }
        if (predict->parsed()) return cmd_predict(pred_args, out);
    } catch (const std::exception& e) {
        return classify(e, err);
    }
    return kUsage;
}

}  // namespace bagreg::cli
