#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "rgtta/core.hpp"
#include "rgtta/detail/rng.hpp"

namespace rgtta {
namespace {

TEST(FitScaler, MapsRangeToUnitInterval) {
    const auto s = fit_scaler({0.0, 10.0});
    EXPECT_DOUBLE_EQ(s.data_min, 0.0);
    EXPECT_DOUBLE_EQ(s.data_max, 10.0);
    EXPECT_DOUBLE_EQ(s.transform(5.0), 0.0);
    EXPECT_DOUBLE_EQ(s.transform(0.0), -1.0);
    EXPECT_DOUBLE_EQ(s.transform(10.0), 1.0);
}

TEST(FitScaler, ConstantSeriesMapsToZero) {
    const auto s = fit_scaler({3.0, 3.0, 3.0});
    EXPECT_DOUBLE_EQ(s.transform(3.0), 0.0);
    EXPECT_DOUBLE_EQ(s.inverse(0.0), 3.0);
}

TEST(FitScaler, Endpoints) {
    const auto s = fit_scaler({-2.0, 2.0});
    EXPECT_DOUBLE_EQ(s.transform(2.0), 1.0);
    EXPECT_DOUBLE_EQ(s.transform(-2.0), -1.0);
}

TEST(FitScaler, Errors) {
    EXPECT_THROW(fit_scaler({}), std::invalid_argument);
    EXPECT_THROW(fit_scaler({1.0, std::numeric_limits<double>::quiet_NaN()}),
                 std::invalid_argument);
}

TEST(FitScaler, RoundTripProperty) {
    auto rng = detail::make_rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> xs(50);
        for (auto& x : xs) x = detail::gauss(rng) * 40.0 + detail::uniform01(rng) * 5.0;
        const auto s = fit_scaler(xs);
        for (double x : xs) EXPECT_NEAR(s.inverse(s.transform(x)), x, 1e-9);
    }
}

TEST(MakeWindows, CountsMatchEnumeration) {
    std::vector<double> series(750);
    for (std::size_t i = 0; i < series.size(); ++i) series[i] = static_cast<double>(i);
    const auto windows = make_windows(series, 96, 96, 1);
    EXPECT_EQ(windows.size(), 559u); // 750 - 96 - 96 + 1

    // Independent enumeration of valid origins.
    int count = 0;
    for (int i = 0; i + 96 + 96 <= 750; ++i) ++count;
    EXPECT_EQ(static_cast<int>(windows.size()), count);
}

TEST(MakeWindows, ShortSeries) {
    EXPECT_TRUE(make_windows(std::vector<double>(191, 0.0), 96, 96, 1).empty());
    const auto one = make_windows(std::vector<double>(192, 0.0), 96, 96, 1);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one[0].origin_index, 0);
}

TEST(MakeWindows, InputPrecedesTarget) {
    std::vector<double> series(40);
    for (std::size_t i = 0; i < series.size(); ++i) series[i] = static_cast<double>(i);
    for (const auto& w : make_windows(series, 8, 4, 3)) {
        EXPECT_EQ(w.input.size(), 8u);
        EXPECT_EQ(w.target.size(), 4u);
        EXPECT_DOUBLE_EQ(w.input.front(), w.origin_index);
        EXPECT_DOUBLE_EQ(w.target.front(), w.input.back() + 1.0);
    }
}

TEST(MakeWindows, CountFormulaProperty) {
    auto rng = detail::make_rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const int len = static_cast<int>(detail::bounded(rng, 400));
        const int L = 1 + static_cast<int>(detail::bounded(rng, 50));
        const int H = 1 + static_cast<int>(detail::bounded(rng, 50));
        const std::vector<double> series(static_cast<std::size_t>(len), 0.0);
        const int expected = std::max(0, len - L - H + 1);
        EXPECT_EQ(static_cast<int>(make_windows(series, L, H, 1).size()), expected);
    }
}

TEST(HarnessConfig, Validation) {
    HarnessConfig hc;
    EXPECT_NO_THROW(hc.validate());
    hc.seq_len = hc.batch_size;
    EXPECT_THROW(hc.validate(), std::invalid_argument);
    hc = HarnessConfig{};
    hc.max_batches = 0;
    EXPECT_THROW(hc.validate(), std::invalid_argument);
}

} // namespace
} // namespace rgtta
