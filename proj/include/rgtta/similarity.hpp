#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace rgtta {

inline constexpr double kSimEps = 1e-8;

/// 5-D distributional fingerprint of a batch, plus the raw values it was
/// computed from (kept for the KS / Wasserstein components).
struct RegimeFeatures {
    double mean = 0.0;
    double stddev = 0.0;
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
    double lag1_autocorr = 0.0;
    std::vector<double> raw_sample;

    std::array<double, 5> as_vector() const {
        return {mean, stddev, skewness, excess_kurtosis, lag1_autocorr};
    }
};

/// Moments and lag-1 autocorrelation over the trailing 3 x season_length
/// samples (all available if shorter, minimum 8). A zero-variance window
/// takes skewness = kurtosis = autocorr = 0.
inline RegimeFeatures extract_features(const std::vector<double>& series, int season_length) {
    if (season_length < 2) throw std::invalid_argument("extract_features: season_length < 2");
    const std::size_t want = static_cast<std::size_t>(3) * static_cast<std::size_t>(season_length);
    const std::size_t n = std::min(series.size(), want);
    if (n < 8) throw std::invalid_argument("extract_features: fewer than 8 samples");
    const std::size_t off = series.size() - n;

    RegimeFeatures f;
    f.raw_sample.assign(series.begin() + static_cast<std::ptrdiff_t>(off), series.end());

    double sum = 0.0;
    for (double v : f.raw_sample) {
        if (!std::isfinite(v)) throw std::invalid_argument("extract_features: non-finite value");
        sum += v;
    }
    const double mean = sum / static_cast<double>(n);
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : f.raw_sample) {
        const double d = v - mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);

    f.mean = mean;
    f.stddev = std::sqrt(m2);
    if (m2 > 0.0) {
        f.skewness = m3 / std::pow(m2, 1.5);
        f.excess_kurtosis = m4 / (m2 * m2) - 3.0;
        double num = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i)
            num += (f.raw_sample[i] - mean) * (f.raw_sample[i + 1] - mean);
        f.lag1_autocorr = num / (m2 * static_cast<double>(n));
        f.lag1_autocorr = std::clamp(f.lag1_autocorr, -1.0, 1.0);
    }
    return f;
}

namespace detail {

inline double peak_to_peak(const std::vector<double>& v) {
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    return *mx - *mn;
}

} // namespace detail

/// 1 - D_n with D_n the two-sample KS statistic, evaluated over the merged
/// sample support.
inline double ks_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_similarity: empty input");
    std::vector<double> sa(a), sb(b);
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const double na = static_cast<double>(sa.size());
    const double nb = static_cast<double>(sb.size());
    double d = 0.0;
    std::size_t ia = 0, ib = 0;
    while (ia < sa.size() && ib < sb.size()) {
        const double x = std::min(sa[ia], sb[ib]);
        while (ia < sa.size() && sa[ia] <= x) ++ia;
        while (ib < sb.size() && sb[ib] <= x) ++ib;
        d = std::max(d, std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb));
    }
    return 1.0 - d;
}

/// Exact 1-D Wasserstein-1 distance: integral of |F_a - F_b| over the merged
/// support; handles unequal sample sizes.
inline double wasserstein1(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> sa(a), sb(b);
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const double na = static_cast<double>(sa.size());
    const double nb = static_cast<double>(sb.size());
    double w = 0.0;
    std::size_t ia = 0, ib = 0;
    double prev = std::min(sa[0], sb[0]);
    while (ia < sa.size() || ib < sb.size()) {
        double x;
        if (ia < sa.size() && (ib >= sb.size() || sa[ia] <= sb[ib]))
            x = sa[ia];
        else
            x = sb[ib];
        w += std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb) * (x - prev);
        prev = x;
        while (ia < sa.size() && sa[ia] <= x) ++ia;
        while (ib < sb.size() && sb[ib] <= x) ++ib;
    }
    return w;
}

/// Earth-mover similarity 1 / (1 + W1 / max(ptp_a, ptp_b, eps)).
inline double wasserstein_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("wasserstein_similarity: empty input");
    const double w = wasserstein1(a, b);
    const double scale = std::max({detail::peak_to_peak(a), detail::peak_to_peak(b), kSimEps});
    return 1.0 / (1.0 + w / scale);
}

/// Normalised Euclidean distance in 5-D feature space.
inline double feature_similarity(const RegimeFeatures& q, const RegimeFeatures& s) {
    const auto qv = q.as_vector();
    const auto sv = s.as_vector();
    double d2 = 0.0, nq = 0.0, ns = 0.0;
    for (std::size_t i = 0; i < qv.size(); ++i) {
        const double d = qv[i] - sv[i];
        d2 += d * d;
        nq += qv[i] * qv[i];
        ns += sv[i] * sv[i];
    }
    const double dist = std::sqrt(d2);
    const double scale = 0.5 * (std::sqrt(nq) + std::sqrt(ns)) + kSimEps;
    return 1.0 / (1.0 + dist / scale);
}

/// min(sq, ss) / (max(sq, ss) + eps); captures volatility regime shifts.
/// Equal volatilities return exactly 1 so that self-similarity is exact.
inline double variance_ratio_similarity(double sigma_q, double sigma_s) {
    if (sigma_q < 0.0 || sigma_s < 0.0)
        throw std::invalid_argument("variance_ratio_similarity: negative stddev");
    if (sigma_q == sigma_s) return 1.0;
    return std::min(sigma_q, sigma_s) / (std::max(sigma_q, sigma_s) + kSimEps);
}

/// Weighted four-metric ensemble: 0.3 KS + 0.3 Wasserstein + 0.2 feature +
/// 0.2 variance-ratio, clamped to [0, 1].
inline double ensemble_similarity(const RegimeFeatures& q, const RegimeFeatures& s) {
    if (q.raw_sample.empty() || s.raw_sample.empty())
        throw std::invalid_argument("ensemble_similarity: missing raw samples");
    const double sim = 0.3 * ks_similarity(q.raw_sample, s.raw_sample) +
                       0.3 * wasserstein_similarity(q.raw_sample, s.raw_sample) +
                       0.2 * feature_similarity(q, s) +
                       0.2 * variance_ratio_similarity(q.stddev, s.stddev);
    return std::clamp(sim, 0.0, 1.0);
}

} // namespace rgtta
