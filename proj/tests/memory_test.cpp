#include <gtest/gtest.h>

#include <filesystem>

#include "rgtta/memory.hpp"

namespace rgtta {
namespace {

RegimeFeatures features_from(const std::vector<double>& sample) {
    return extract_features(sample, static_cast<int>(sample.size()));
}

std::vector<double> normal_draw(std::size_t n, double mean, double sd, std::uint64_t seed) {
    auto rng = detail::make_rng(seed);
    std::vector<double> out(n);
    for (auto& v : out) v = mean + sd * detail::gauss(rng);
    return out;
}

CheckpointEntry entry_with(int batch, const std::vector<double>& sample) {
    CheckpointEntry e;
    e.weights = init_weights(Arch::DLinear, 8, 2, 0, static_cast<std::uint64_t>(batch));
    e.features = features_from(sample);
    e.scaler = fit_scaler(sample);
    e.batch_index = batch;
    e.policy_id = "rgtta";
    return e;
}

TEST(RegimeMemory, FifoEviction) {
    RegimeMemory mem(5);
    for (int i = 1; i <= 5; ++i) mem.store(entry_with(i, normal_draw(30, i, 1.0, 100 + i)));
    ASSERT_EQ(mem.size(), 5u);
    for (int i = 0; i < 5; ++i) EXPECT_EQ(mem.entries()[static_cast<std::size_t>(i)].batch_index, i + 1);

    mem.store(entry_with(6, normal_draw(30, 6, 1.0, 106)));
    ASSERT_EQ(mem.size(), 5u);
    for (int i = 0; i < 5; ++i) EXPECT_EQ(mem.entries()[static_cast<std::size_t>(i)].batch_index, i + 2);
}

TEST(RegimeMemory, CapacityOne) {
    RegimeMemory mem(1);
    for (int i = 1; i <= 4; ++i) {
        mem.store(entry_with(i, normal_draw(30, 0.0, 1.0, i)));
        ASSERT_EQ(mem.size(), 1u);
        EXPECT_EQ(mem.entries().front().batch_index, i);
    }
}

TEST(RegimeMemory, FifoProperty) {
    auto rng = detail::make_rng(505);
    for (int trial = 0; trial < 20; ++trial) {
        const int cap = 1 + static_cast<int>(detail::bounded(rng, 6));
        const int n = 1 + static_cast<int>(detail::bounded(rng, 12));
        RegimeMemory mem(cap);
        for (int i = 0; i < n; ++i) mem.store(entry_with(i, normal_draw(20, 0, 1, rng())));
        const int kept = std::min(n, cap);
        ASSERT_EQ(static_cast<int>(mem.size()), kept);
        for (int i = 0; i < kept; ++i)
            EXPECT_EQ(mem.entries()[static_cast<std::size_t>(i)].batch_index, n - kept + i);
    }
}

TEST(BestMatch, EmptyMemory) {
    RegimeMemory mem(5);
    const auto [sim, entry] = mem.best_match(features_from(normal_draw(30, 0, 1, 1)));
    EXPECT_DOUBLE_EQ(sim, 0.0);
    EXPECT_EQ(entry, nullptr);
}

TEST(BestMatch, IdenticalEntryWins) {
    RegimeMemory mem(5);
    const auto sample = normal_draw(60, 0, 1, 2);
    mem.store(entry_with(1, sample));
    const auto [sim, entry] = mem.best_match(features_from(sample));
    ASSERT_NE(entry, nullptr);
    EXPECT_NEAR(sim, 1.0, 1e-9);
}

TEST(BestMatch, PrefersMatchingDistribution) {
    RegimeMemory mem(5);
    const auto same = normal_draw(100, 0.0, 1.0, 11);
    const auto shifted = normal_draw(100, 10.0, 1.0, 12);
    mem.store(entry_with(1, same));
    mem.store(entry_with(2, shifted));
    const auto query = features_from(normal_draw(100, 0.0, 1.0, 13));

    // oracle: both ensemble scores computed directly
    const double sim_same = ensemble_similarity(query, features_from(same));
    const double sim_shifted = ensemble_similarity(query, features_from(shifted));
    ASSERT_GT(sim_same, sim_shifted);

    const auto [sim, entry] = mem.best_match(query);
    ASSERT_NE(entry, nullptr);
    EXPECT_EQ(entry->batch_index, 1);
    EXPECT_DOUBLE_EQ(sim, sim_same);
}

// Constant-prediction DLinear: all weights zero except the seasonal bias, so
// the forecast equals `bias` in scaled space regardless of input.
ModelWeights constant_model(double bias, int L, int H) {
    auto w = init_weights(Arch::DLinear, L, H, 0, 1);
    std::fill(w.params.begin(), w.params.end(), 0.0);
    const auto hv = dlinear::head_view(w);
    for (int o = 0; o < H; ++o)
        w.params[static_cast<std::size_t>(hv.b_seas - w.params.data()) + static_cast<std::size_t>(o)] = bias;
    return w;
}

// identity scaler on [-1, 1]
ScalerState identity_scaler() {
    ScalerState s;
    s.data_min = -1.0;
    s.data_max = 1.0;
    s.fitted = true;
    return s;
}

struct GateFixture {
    std::vector<WindowPair> eval;
    ModelWeights current = constant_model(2.5, 8, 2); // loss = 2.5 - 0.5 = 2.0
    ScalerState scaler = identity_scaler();

    GateFixture() {
        WindowPair w;
        w.input.assign(8, 0.0);
        w.target.assign(2, 0.0);
        eval.assign(4, w);
    }

    CheckpointEntry ckpt(double bias) const {
        CheckpointEntry e;
        e.weights = constant_model(bias, 8, 2);
        e.scaler = identity_scaler();
        e.features.raw_sample = {0.0, 0.0};
        e.batch_index = 1;
        return e;
    }
};

TEST(GateAndLoad, LoadsWhenBothGatesPass) {
    GateFixture f;
    const auto entry = f.ckpt(1.5); // loss 1.0 = 0.5 * current
    auto model = f.current;
    auto scaler = f.scaler;
    const auto d = gate_and_load(0.9, &entry, model, scaler, f.eval, 0.75, 0.70);
    EXPECT_TRUE(d.loaded);
    EXPECT_NEAR(d.loss_current, 2.0, 1e-12);
    EXPECT_NEAR(d.loss_checkpoint, 1.0, 1e-12);
    EXPECT_NEAR(d.loss_active, 1.0, 1e-12);
    EXPECT_LT(d.loss_active, d.loss_current); // loading never increases loss
    EXPECT_EQ(model.params, entry.weights.params);
}

TEST(GateAndLoad, LossGateFails) {
    GateFixture f;
    const auto entry = f.ckpt(2.1); // loss 1.6 = 0.8 * current, 0.8 >= 0.70
    auto model = f.current;
    auto scaler = f.scaler;
    const auto d = gate_and_load(0.9, &entry, model, scaler, f.eval, 0.75, 0.70);
    EXPECT_FALSE(d.loaded);
    EXPECT_NEAR(d.loss_checkpoint, 1.6, 1e-12);
    EXPECT_EQ(model.params, f.current.params);
}

TEST(GateAndLoad, SimilarityGateFails) {
    GateFixture f;
    const auto entry = f.ckpt(0.7); // would be a big improvement
    auto model = f.current;
    auto scaler = f.scaler;
    const auto d = gate_and_load(0.74, &entry, model, scaler, f.eval, 0.75, 0.70);
    EXPECT_FALSE(d.loaded);
    EXPECT_TRUE(std::isnan(d.loss_checkpoint)); // never evaluated
    EXPECT_EQ(model.params, f.current.params);
}

TEST(GateAndLoad, CorruptCheckpointSkipped) {
    GateFixture f;
    CheckpointEntry entry;
    entry.weights_path = "/nonexistent/rgtta_ckpt.rgw"; // no in-memory weights
    entry.scaler = identity_scaler();
    entry.features.raw_sample = {0.0};
    auto model = f.current;
    auto scaler = f.scaler;
    const auto d = gate_and_load(0.95, &entry, model, scaler, f.eval, 0.75, 0.70);
    EXPECT_FALSE(d.loaded);
    EXPECT_EQ(model.params, f.current.params);
}

TEST(RegimeMemory, PersistsEntriesToDisk) {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "rgtta_mem_test";
    fs::remove_all(dir);
    RegimeMemory mem(3, dir.string());
    mem.store(entry_with(1, normal_draw(30, 0, 1, 3)));
    EXPECT_TRUE(fs::exists(dir / "ckpt_rgtta_b1.rgw"));
    EXPECT_TRUE(fs::exists(dir / "ckpt_rgtta_b1.meta"));
    const auto loaded = load_weights((dir / "ckpt_rgtta_b1.rgw").string());
    EXPECT_EQ(loaded.params, mem.entries().front().weights.params);
    fs::remove_all(dir);
}

} // namespace
} // namespace rgtta
