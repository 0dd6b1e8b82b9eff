#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "rgtta/forecast.hpp"

namespace rgtta {
namespace {

std::vector<WindowPair> random_windows(int count, int L, int H, std::uint64_t seed) {
    auto rng = detail::make_rng(seed);
    std::vector<WindowPair> out(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        auto& w = out[static_cast<std::size_t>(i)];
        w.origin_index = i;
        w.input.resize(static_cast<std::size_t>(L));
        w.target.resize(static_cast<std::size_t>(H));
        for (auto& v : w.input) v = detail::gauss(rng);
        for (auto& v : w.target) v = detail::gauss(rng);
    }
    return out;
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

// Central finite differences of the minibatch loss w.r.t. one parameter.
double fd_gradient(ModelWeights& w, std::size_t coord, std::span<const WindowPair> windows,
                   double delta, double h = 1e-5) {
    const double saved = w.params[coord];
    w.params[coord] = saved + h;
    const double up = minibatch_loss(w, windows, delta);
    w.params[coord] = saved - h;
    const double down = minibatch_loss(w, windows, delta);
    w.params[coord] = saved;
    return (up - down) / (2.0 * h);
}

TEST(SmoothL1, KnownValues) {
    const std::vector<double> z{0.0};
    EXPECT_DOUBLE_EQ(smooth_l1(z, z, 1.0), 0.0);
    EXPECT_DOUBLE_EQ(smooth_l1(std::vector<double>{0.5}, z, 1.0), 0.125);
    EXPECT_DOUBLE_EQ(smooth_l1(std::vector<double>{2.0}, z, 1.0), 1.5);
    EXPECT_THROW(smooth_l1(std::vector<double>{1, 2}, z, 1.0), std::invalid_argument);
    EXPECT_THROW(smooth_l1(z, z, 0.0), std::invalid_argument);
}

TEST(DLinear, DecompositionIdentity) {
    const auto w = init_weights(Arch::DLinear, 48, 12, 0, 3);
    auto rng = detail::make_rng(8);
    std::vector<double> input(48);
    for (auto& v : input) v = detail::gauss(rng);
    const auto bout = dlinear::backbone_out(w, input);
    for (int i = 0; i < 48; ++i)
        EXPECT_NEAR(bout[static_cast<std::size_t>(i)] + bout[static_cast<std::size_t>(48 + i)],
                    input[static_cast<std::size_t>(i)], 1e-9);
}

TEST(DLinear, ConstantInputHasZeroSeasonal) {
    const auto w = init_weights(Arch::DLinear, 32, 8, 0, 3);
    const std::vector<double> input(32, 4.2);
    const auto bout = dlinear::backbone_out(w, input);
    for (int i = 0; i < 32; ++i) {
        EXPECT_NEAR(bout[static_cast<std::size_t>(i)], 4.2, 1e-12);       // trend
        EXPECT_NEAR(bout[static_cast<std::size_t>(32 + i)], 0.0, 1e-12);  // seasonal
    }
}

TEST(DLinear, ZeroWeightsZeroOutput) {
    auto w = init_weights(Arch::DLinear, 24, 6, 0, 3);
    std::fill(w.params.begin(), w.params.end(), 0.0);
    const auto pred = dlinear_forward(w, std::vector<double>(24, 0.0));
    for (double p : pred) EXPECT_DOUBLE_EQ(p, 0.0);
}

TEST(Gru, ZeroWeightsZeroForecast) {
    auto w = init_weights(Arch::GruSmall, 16, 4, 8, 3);
    std::fill(w.params.begin(), w.params.end(), 0.0);
    const auto out = gru_forward(w, std::vector<double>(16, 0.0));
    for (double p : out.forecast) EXPECT_DOUBLE_EQ(p, 0.0);
    for (double e : out.embedding) EXPECT_DOUBLE_EQ(e, 0.0);
}

TEST(Gru, DeterministicForward) {
    const auto w = init_weights(Arch::GruSmall, 16, 4, 8, 5);
    const auto windows = random_windows(1, 16, 4, 9);
    const auto a = forward(w, windows[0].input);
    const auto b = forward(w, windows[0].input);
    EXPECT_EQ(a, b);
}

TEST(Serialization, BitExactRoundTrip) {
    for (Arch arch : {Arch::DLinear, Arch::GruSmall}) {
        const auto w = init_weights(arch, 16, 4, 8, 17);
        const auto restored = deserialize_weights(serialize_weights(w));
        EXPECT_EQ(w.params, restored.params);
        EXPECT_EQ(w.head_offset, restored.head_offset);
        const auto input = random_windows(1, 16, 4, 3)[0].input;
        EXPECT_EQ(forward(w, input), forward(restored, input));
    }
}

TEST(Serialization, FileRoundTripAndErrors) {
    const auto w = init_weights(Arch::GruSmall, 12, 3, 6, 23);
    const std::string path = std::filesystem::temp_directory_path() / "rgtta_weights_test.rgw";
    save_weights(w, path);
    const auto back = load_weights(path);
    EXPECT_EQ(w.params, back.params);
    EXPECT_THROW(deserialize_weights("garbage"), std::runtime_error);
    std::filesystem::remove(path);
}

TEST(ParameterCounts, MatchLayoutFormulas) {
    const auto d = init_weights(Arch::DLinear, 96, 96, 0, 1);
    EXPECT_EQ(d.params.size(), 2u * (96u * 96u + 96u)); // 18,624
    EXPECT_EQ(d.head_offset, 0u);

    const auto g = init_weights(Arch::GruSmall, 96, 96, 64, 1);
    const std::size_t h = 64;
    const std::size_t layer0 = 3 * h * 1 + 3 * h * h + 6 * h;
    const std::size_t layer1 = 3 * h * h + 3 * h * h + 6 * h;
    const std::size_t head = h * h + h + 96 * h + 96;
    EXPECT_EQ(g.head_offset, layer0 + layer1);
    EXPECT_EQ(g.params.size(), layer0 + layer1 + head); // 48,224 total, 10,400 head
    EXPECT_EQ(head_size(g), head);
}

TEST(HeadGradient, MatchesFiniteDifferences) {
    for (Arch arch : {Arch::DLinear, Arch::GruSmall}) {
        auto w = init_weights(arch, 16, 6, 8, 31);
        const auto windows = random_windows(6, 16, 6, 77);
        const auto grad = head_gradient(w, windows, 1.0);
        auto rng = detail::make_rng(55);
        for (int i = 0; i < 25; ++i) {
            const std::size_t coord =
                w.head_offset + detail::bounded(rng, head_size(w));
            const double fd = fd_gradient(w, coord, windows, 1.0);
            EXPECT_LT(rel_err(grad[coord - w.head_offset], fd), 1e-4)
                << arch_name(arch) << " coord " << coord;
        }
    }
}

TEST(HeadGradient, ZeroAtLossMinimum) {
    // constant-bias model with bias set to the target: pred == target exactly
    auto w = init_weights(Arch::DLinear, 8, 3, 0, 1);
    std::fill(w.params.begin(), w.params.end(), 0.0);
    WindowPair win;
    win.input.assign(8, 0.0);
    win.target = {0.4, -0.2, 0.9};
    const auto hv = dlinear::head_view(w);
    for (int o = 0; o < 3; ++o)
        w.params[static_cast<std::size_t>(hv.b_seas - w.params.data()) + static_cast<std::size_t>(o)] =
            win.target[static_cast<std::size_t>(o)];
    const auto grad = head_gradient(w, {&win, 1}, 1.0);
    for (double g : grad) EXPECT_DOUBLE_EQ(g, 0.0);
}

TEST(HeadGradient, MeanInvariantUnderDuplication) {
    const auto w = init_weights(Arch::GruSmall, 12, 4, 6, 41);
    auto windows = random_windows(5, 12, 4, 13);
    const auto g1 = head_gradient(w, windows, 1.0);
    auto doubled = windows;
    doubled.insert(doubled.end(), windows.begin(), windows.end());
    const auto g2 = head_gradient(w, doubled, 1.0);
    for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_NEAR(g1[i], g2[i], 1e-12);
}

TEST(FullGradient, MatchesFiniteDifferences) {
    for (Arch arch : {Arch::DLinear, Arch::GruSmall}) {
        auto w = init_weights(arch, 12, 4, 6, 61);
        const auto windows = random_windows(4, 12, 4, 91);
        const auto grad = full_gradient(w, windows, 1.0);
        auto rng = detail::make_rng(71);
        for (int i = 0; i < 25; ++i) {
            const std::size_t coord = detail::bounded(rng, w.params.size());
            const double fd = fd_gradient(w, coord, windows, 1.0);
            EXPECT_LT(rel_err(grad[coord], fd), 1e-3) << arch_name(arch) << " coord " << coord;
        }
    }
}

TEST(OptimizerStep, ZeroGradientKeepsParameters) {
    std::vector<double> params{1.0, -2.0, 3.0};
    const std::vector<double> grad{0.0, 0.0, 0.0};
    OptimizerState st(params.size());
    optimizer_step(params, grad, st, 0.01);
    EXPECT_EQ(st.step, 1);
    EXPECT_DOUBLE_EQ(params[0], 1.0);
    EXPECT_DOUBLE_EQ(params[1], -2.0);
    EXPECT_DOUBLE_EQ(params[2], 3.0);
}

TEST(OptimizerStep, FirstStepIsSignedUnitStep) {
    // bias-corrected moments collapse: update = -alpha * g / (|g| + eps)
    std::vector<double> params{0.0, 0.0};
    const std::vector<double> grad{0.3, -5.0};
    OptimizerState st(params.size());
    optimizer_step(params, grad, st, 1e-2);
    EXPECT_NEAR(params[0], -1e-2, 1e-6);
    EXPECT_NEAR(params[1], 1e-2, 1e-6);
}

TEST(OptimizerStep, Deterministic) {
    std::vector<double> p1{0.5, 0.5}, p2{0.5, 0.5};
    OptimizerState s1(2), s2(2);
    const std::vector<double> grad{0.1, -0.7};
    for (int i = 0; i < 5; ++i) {
        optimizer_step(p1, grad, s1, 1e-3);
        optimizer_step(p2, grad, s2, 1e-3);
    }
    EXPECT_EQ(p1, p2);
}

TEST(TrainFull, LearnsNoiselessTrend) {
    // windows from a clean linear ramp, scaled into [-1, 1]
    std::vector<double> series(200);
    for (std::size_t i = 0; i < series.size(); ++i)
        series[i] = -1.0 + 2.0 * static_cast<double>(i) / 199.0;
    const auto windows = make_windows(series, 24, 8, 1);
    auto w = init_weights(Arch::DLinear, 24, 8, 0, 11);
    TrainOptions opts;
    opts.epochs = 10;
    opts.lr = 3e-3;
    opts.halt_patience = 100; // no early halt: observe all 10 epochs
    const auto report = train_full(w, windows, opts, 19);
    ASSERT_EQ(report.history.size(), 10u);
    for (std::size_t i = 1; i < report.history.size(); ++i)
        EXPECT_LT(report.history[i], report.history[i - 1]);
    EXPECT_LT(report.history.back(), 0.1 * report.history.front());
}

TEST(TrainFull, ZeroEpochsKeepsWeights) {
    auto w = init_weights(Arch::GruSmall, 12, 4, 6, 3);
    const auto before = w.params;
    TrainOptions opts;
    opts.epochs = 0;
    train_full(w, random_windows(4, 12, 4, 5), opts, 3);
    EXPECT_EQ(w.params, before);
}

} // namespace
} // namespace rgtta
