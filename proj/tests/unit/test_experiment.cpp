#include "bagreg/errors.hpp"
#include "bagreg/experiment.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace bagreg;

namespace {

GammaConfig tiny_data(std::uint64_t seed) {
    GammaConfig c;
    c.n_train = 60;
    c.n_early = 30;
    c.n_val = 30;
    c.n_test = 30;
    c.dim = 2;
    c.bag_size = MixedBagSizes{50.0};
    c.seed = seed;
    return c;
}

ExperimentConfig tiny_experiment(std::uint64_t seed) {
    ExperimentConfig e;
    e.seed = seed;
    e.grid.bandwidth_factors = {1.0};
    e.grid.landmark_counts = {6};
    e.grid.rhos = {1.0, 10.0};
    e.grid.step_sizes = {3e-3};
    e.grid.etas = {1.0};
    e.train.max_epochs = 30;
    e.train.patience = 5;
    e.train.batch_size = 16;
    e.bdr.chains = 1;
    e.bdr.hmc.n_warmup = 100;
    e.bdr.hmc.n_samples = 100;
    return e;
}

}  // namespace

TEST(TuningGrid, RejectsEmptyAxes) {
    TuningGrid g;
    EXPECT_NO_THROW(g.validate());
    g.rhos.clear();
    EXPECT_THROW(g.validate(), InvalidArgument);
}

TEST(TuningGrid, BayesianModelsTuneOnNll) {
    EXPECT_FALSE(tunes_on_nll(ModelKind::Baseline));
    EXPECT_TRUE(tunes_on_nll(ModelKind::BLR));
    EXPECT_TRUE(tunes_on_nll(ModelKind::ShrinkMAP));
    EXPECT_TRUE(tunes_on_nll(ModelKind::BDR));
}

TEST(Experiment, SeedRunReportsEveryModel) {
    const SeedOutcome out = run_gamma_seed(tiny_data(1), tiny_experiment(1), true);
    ASSERT_EQ(out.reports.size(), 5u);
    for (const MetricReport& r : out.reports) {
        EXPECT_EQ(r.n_bags, 30u);
        EXPECT_TRUE(std::isfinite(r.mse));
        if (r.model == "baseline") {
            EXPECT_FALSE(r.nll.has_value());
        } else {
            ASSERT_TRUE(r.nll.has_value()) << r.model;
            EXPECT_TRUE(std::isfinite(*r.nll));
        }
    }
    const TrainedModel& shrink = out.models.at(ModelKind::ShrinkMAP);
    EXPECT_EQ(shrink.log.size(), 2u);
    EXPECT_EQ(out.models.at(ModelKind::BDR).model.posterior_draws.rows(), 100);
    // BDR reuses the tuned shrinkage hyperparameters
    EXPECT_EQ(out.models.at(ModelKind::BDR).model.rho, shrink.model.rho);
}

TEST(Experiment, DeterministicGivenSeeds) {
    ExperimentConfig e = tiny_experiment(2);
    e.models = {ModelKind::Baseline, ModelKind::ShrinkMAP};
    const SeedOutcome a = run_gamma_seed(tiny_data(2), e, false);
    const SeedOutcome b = run_gamma_seed(tiny_data(2), e, false);
    ASSERT_EQ(a.reports.size(), b.reports.size());
    for (std::size_t i = 0; i < a.reports.size(); ++i) {
        EXPECT_EQ(a.reports[i].mse, b.reports[i].mse);
        EXPECT_EQ(a.reports[i].nll, b.reports[i].nll);
    }
}

TEST(Experiment, TuningLogHasOneRowPerGridPoint) {
    ExperimentConfig e = tiny_experiment(3);
    e.models = {ModelKind::Baseline};
    e.grid.landmark_counts = {4, 6};
    const auto models = train_models(gamma_generate(tiny_data(3)).train, gamma_generate(tiny_data(3)).early,
                                     gamma_generate(tiny_data(3)).val, e);
    const auto& log = models.at(ModelKind::Baseline).log;
    EXPECT_EQ(log.size(), 4u);
    std::istringstream csv(tuning_log_csv(log));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "model,landmarks,bandwidth,rho,step_size,eta,val_mse,val_nll,epochs,status");
    int rows = 0;
    while (std::getline(csv, line)) ++rows;
    EXPECT_EQ(rows, 4);
}
