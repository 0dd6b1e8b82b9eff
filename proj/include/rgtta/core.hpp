#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace rgtta {

/// A univariate stream: the target channel of a dataset plus its metadata.
struct TimeSeriesDataset {
    std::string name;
    std::vector<double> values;
    std::string frequency;
    int season_length = 24;
};

/// One supervised example: L observed values and the H values that follow.
struct WindowPair {
    std::vector<double> input;
    std::vector<double> target;
    int origin_index = 0;
};

/// MinMax scaler mapping [data_min, data_max] -> [-1, 1].
/// A constant series (data_max == data_min) maps to 0 everywhere and
/// inverse-transforms back to the constant.
struct ScalerState {
    double data_min = 0.0;
    double data_max = 0.0;
    bool fitted = false;

    bool degenerate() const { return !(data_max > data_min); }

    double transform(double x) const {
        if (degenerate()) return 0.0;
        return 2.0 * (x - data_min) / (data_max - data_min) - 1.0;
    }

    double inverse(double y) const {
        if (degenerate()) return data_min;
        return (y + 1.0) * 0.5 * (data_max - data_min) + data_min;
    }

    std::vector<double> transform(const std::vector<double>& xs) const {
        std::vector<double> out(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) out[i] = transform(xs[i]);
        return out;
    }

    std::vector<double> inverse(const std::vector<double>& ys) const {
        std::vector<double> out(ys.size());
        for (std::size_t i = 0; i < ys.size(); ++i) out[i] = inverse(ys[i]);
        return out;
    }
};

/// Streaming protocol knobs shared by harness and CLI.
struct HarnessConfig {
    int initial_train_size = 720;
    int batch_size = 750;
    int max_batches = 10;
    std::vector<int> horizons = {96, 192, 336, 720};
    std::vector<int> seeds = {0, 1, 2};
    int seq_len = 96;

    void validate() const {
        if (initial_train_size <= 0 || batch_size <= 0 || max_batches <= 0 || seq_len <= 0)
            throw std::invalid_argument("HarnessConfig: all sizes must be positive");
        if (seq_len >= batch_size)
            throw std::invalid_argument("HarnessConfig: seq_len must be smaller than batch_size");
        for (int h : horizons)
            if (h <= 0) throw std::invalid_argument("HarnessConfig: horizons must be positive");
    }
};

inline ScalerState fit_scaler(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("fit_scaler: empty input");
    ScalerState s;
    s.data_min = values[0];
    s.data_max = values[0];
    for (double v : values) {
        if (!std::isfinite(v)) throw std::invalid_argument("fit_scaler: non-finite value");
        s.data_min = std::min(s.data_min, v);
        s.data_max = std::max(s.data_max, v);
    }
    s.fitted = true;
    return s;
}

/// All windows with origin i such that i + L + H <= len(series), stepping by
/// stride. A series too short for a single window yields an empty list.
inline std::vector<WindowPair> make_windows(const std::vector<double>& series, int L, int H,
                                            int stride = 1) {
    if (L <= 0 || H <= 0 || stride <= 0)
        throw std::invalid_argument("make_windows: L, H, stride must be positive");
    std::vector<WindowPair> out;
    const int n = static_cast<int>(series.size());
    for (int i = 0; i + L + H <= n; i += stride) {
        WindowPair w;
        w.origin_index = i;
        w.input.assign(series.begin() + i, series.begin() + i + L);
        w.target.assign(series.begin() + i + L, series.begin() + i + L + H);
        out.push_back(std::move(w));
    }
    return out;
}

} // namespace rgtta
