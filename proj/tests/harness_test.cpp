#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "rgtta/datagen.hpp"
#include "rgtta/harness.hpp"

namespace rgtta {
namespace {

TEST(ComputeMetrics, PerfectForecast) {
    const std::vector<double> y{1.0, 2.0, 3.0};
    const auto m = compute_metrics(y, y, 0.5);
    EXPECT_DOUBLE_EQ(m.mse, 0.0);
    EXPECT_DOUBLE_EQ(m.mae, 0.0);
    EXPECT_DOUBLE_EQ(m.rmse, 0.0);
    EXPECT_DOUBLE_EQ(m.direction_accuracy, 1.0);
}

TEST(ComputeMetrics, ConstantOffsetPreservesDirection) {
    const std::vector<double> truth{1.0, 2.0, 3.0, 4.0};
    std::vector<double> pred(truth);
    for (auto& p : pred) p += 1.0;
    const auto m = compute_metrics(pred, truth, 0.0);
    EXPECT_DOUBLE_EQ(m.mae, 1.0);
    EXPECT_DOUBLE_EQ(m.mse, 1.0);
    EXPECT_DOUBLE_EQ(m.direction_accuracy, 1.0);
}

TEST(ComputeMetrics, HandComputedThreeElementCase) {
    const std::vector<double> pred{1.0, 2.0, 3.0};
    const std::vector<double> truth{2.0, 2.0, 4.0};
    const auto m = compute_metrics(pred, truth, 1.0);
    EXPECT_NEAR(m.mse, 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(m.mae, 2.0 / 3.0, 1e-12);
    // pred deltas (vs own previous): [0, +, +]; truth deltas: [+, 0, +]
    EXPECT_NEAR(m.direction_accuracy, 1.0 / 3.0, 1e-12);
}

TEST(ComputeMetrics, WmapeMatchesHandFormula) {
    const std::vector<double> pred{2.0, 3.0};
    const std::vector<double> truth{1.0, 5.0};
    const auto m = compute_metrics(pred, truth, 0.0);
    const double w0 = std::pow(0.97, 1.0), w1 = 1.0;
    const double expected = (w0 * 1.0 + w1 * 2.0) / (w0 * 1.0 + w1 * 5.0 + kSimEps);
    EXPECT_NEAR(m.wmape, expected, 1e-12);
}

TEST(ComputeMetrics, RmseSquaredIsMse) {
    auto rng = detail::make_rng(17);
    for (int t = 0; t < 30; ++t) {
        std::vector<double> a(24), b(24);
        for (auto& v : a) v = detail::gauss(rng);
        for (auto& v : b) v = detail::gauss(rng);
        const auto m = compute_metrics(a, b, 0.0);
        EXPECT_NEAR(m.rmse * m.rmse, m.mse, 1e-9);
    }
}

HarnessConfig small_harness() {
    HarnessConfig hc;
    hc.initial_train_size = 300;
    hc.batch_size = 200;
    hc.max_batches = 3;
    hc.seq_len = 24;
    return hc;
}

PolicyConfig fast_config(PolicyKind kind) {
    auto cfg = default_config(kind);
    cfg.train.epochs = 5;
    cfg.grad_minibatch = 16;
    cfg.eval_windows = 16;
    return cfg;
}

TEST(RunStream, EmitsOneRecordPerEvaluableBatch) {
    // exactly initial + 3 batches + horizon rows
    auto spec = make_scenario(Scenario::Stable, 300 + 200 * 3 + 12, 5);
    const auto ds = generate(spec);
    const auto hc = small_harness();
    const auto records = run_stream(ds, Arch::DLinear, fast_config(PolicyKind::Tta), 12, 0, hc);
    ASSERT_EQ(records.size(), 3u);
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(records[static_cast<std::size_t>(i)].batch_index, i + 1);
        EXPECT_TRUE(std::isfinite(records[static_cast<std::size_t>(i)].metrics.mse));
        EXPECT_GE(records[static_cast<std::size_t>(i)].metrics.direction_accuracy, 0.0);
        EXPECT_LE(records[static_cast<std::size_t>(i)].metrics.direction_accuracy, 1.0);
    }
}

TEST(RunStream, SkipsBatchWithoutLookahead) {
    // one full batch but no horizon rows after it
    auto spec = make_scenario(Scenario::Stable, 300 + 200, 5);
    const auto ds = generate(spec);
    const auto records = run_stream(ds, Arch::DLinear, fast_config(PolicyKind::Tta), 12, 0,
                                    small_harness());
    EXPECT_TRUE(records.empty());
}

TEST(RunStream, RejectsShortDataset) {
    auto spec = make_scenario(Scenario::Stable, 200, 5);
    const auto ds = generate(spec);
    EXPECT_THROW(run_stream(ds, Arch::DLinear, fast_config(PolicyKind::Tta), 12, 0,
                            small_harness()),
                 std::invalid_argument);
}

TEST(RunStream, ProtocolFairnessAcrossPolicies) {
    auto spec = make_scenario(Scenario::Recurring, 300 + 200 * 3 + 24, 5);
    const auto ds = generate(spec);
    const auto hc = small_harness();
    const auto init = train_initial(ds, Arch::DLinear, 24, 0, hc, fast_config(PolicyKind::Tta).train);

    std::vector<std::vector<RunRecord>> runs;
    for (PolicyKind kind : {PolicyKind::Tta, PolicyKind::Ewc, PolicyKind::RgTta})
        runs.push_back(run_stream(ds, Arch::DLinear, fast_config(kind), 24, 0, hc, &init));
    for (std::size_t p = 1; p < runs.size(); ++p) {
        ASSERT_EQ(runs[p].size(), runs[0].size());
        for (std::size_t b = 0; b < runs[0].size(); ++b) {
            EXPECT_EQ(runs[p][b].batch_hash, runs[0][b].batch_hash);
            EXPECT_EQ(runs[p][b].target_hash, runs[0][b].target_hash);
        }
    }
}

TEST(RunStream, DeterministicAcrossInvocations) {
    auto spec = make_scenario(Scenario::FastSwitch, 300 + 200 * 2 + 24, 5);
    const auto ds = generate(spec);
    HarnessConfig hc = small_harness();
    hc.max_batches = 2;
    const auto a = run_stream(ds, Arch::DLinear, fast_config(PolicyKind::RgTta), 24, 1, hc);
    const auto b = run_stream(ds, Arch::DLinear, fast_config(PolicyKind::RgTta), 24, 1, hc);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].metrics.mse, b[i].metrics.mse);
        EXPECT_EQ(a[i].adapt.steps_used, b[i].adapt.steps_used);
        EXPECT_EQ(a[i].adapt.lr_used, b[i].adapt.lr_used);
    }
}

RunRecord rec(const std::string& policy, const std::string& model, const std::string& dataset,
              int horizon, std::uint64_t seed, int batch, double mse) {
    RunRecord r;
    r.policy = policy;
    r.model = model;
    r.dataset = dataset;
    r.horizon = horizon;
    r.seed = seed;
    r.batch_index = batch;
    r.metrics.mse = mse;
    r.metrics.rmse = std::sqrt(mse);
    return r;
}

TEST(Aggregate, SeedAveragesAndWins) {
    std::vector<RunRecord> records;
    // policy a: seed MSEs 2 and 4 -> seed-average 3; policy b: constant 5
    records.push_back(rec("a", "m", "d", 96, 0, 1, 2.0));
    records.push_back(rec("a", "m", "d", 96, 1, 1, 4.0));
    records.push_back(rec("b", "m", "d", 96, 0, 1, 5.0));
    records.push_back(rec("b", "m", "d", 96, 1, 1, 5.0));
    const auto agg = aggregate(records);
    ASSERT_EQ(agg.rows.size(), 2u);
    const auto& a_row = agg.rows[0].policy == "a" ? agg.rows[0] : agg.rows[1];
    EXPECT_DOUBLE_EQ(a_row.metrics.mse, 3.0);
    EXPECT_EQ(a_row.n_seeds, 2);
    EXPECT_EQ(agg.win_counts.at("a"), 1);
    EXPECT_EQ(agg.win_counts.count("b"), 0u);
}

TEST(Aggregate, HandComputedWinTable) {
    std::vector<RunRecord> records;
    // 2 configs (horizons 96, 192), 3 policies with hand-set MSEs
    const double mse[3][2] = {{1.0, 9.0}, {2.0, 3.0}, {3.0, 3.0}}; // p0, p1, p2
    const char* names[3] = {"p0", "p1", "p2"};
    for (int p = 0; p < 3; ++p)
        for (int h = 0; h < 2; ++h)
            records.push_back(rec(names[p], "m", "d", h == 0 ? 96 : 192, 0, 1, mse[p][h]));
    const auto agg = aggregate(records);
    EXPECT_EQ(agg.win_counts.at("p0"), 1); // wins H=96
    EXPECT_EQ(agg.win_counts.at("p1"), 1); // ties H=192
    EXPECT_EQ(agg.win_counts.at("p2"), 1); // ties H=192
    EXPECT_EQ(agg.config_wins.size(), 2u);
}

TEST(Aggregate, PermutationInvariant) {
    std::vector<RunRecord> records;
    auto rng = detail::make_rng(3);
    for (int p = 0; p < 3; ++p)
        for (int s = 0; s < 2; ++s)
            for (int b = 1; b <= 4; ++b)
                records.push_back(rec("p" + std::to_string(p), "m", "d", 96,
                                      static_cast<std::uint64_t>(s), b, detail::uniform01(rng)));
    auto shuffled = records;
    std::mt19937 g(7);
    std::shuffle(shuffled.begin(), shuffled.end(), g);
    const auto a = aggregate(records);
    const auto b = aggregate(shuffled);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        EXPECT_EQ(a.rows[i].policy, b.rows[i].policy);
        EXPECT_DOUBLE_EQ(a.rows[i].metrics.mse, b.rows[i].metrics.mse);
    }
    EXPECT_EQ(a.win_counts, b.win_counts);
}

} // namespace
} // namespace rgtta
