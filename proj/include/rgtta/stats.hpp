#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace rgtta::stats {

// ---------------------------------------------------------------------------
// Chi-square survival function via the regularized incomplete gamma Q(a, x).
// ---------------------------------------------------------------------------

namespace detail {

inline double gamma_q(double a, double x) {
    if (x < 0 || a <= 0) throw std::invalid_argument("gamma_q: bad arguments");
    if (x == 0) return 1.0;
    const double lg = std::lgamma(a);
    if (x < a + 1.0) {
        // series for P(a, x); Q = 1 - P
        double term = 1.0 / a;
        double sum = term;
        for (int n = 1; n < 500; ++n) {
            term *= x / (a + n);
            sum += term;
            if (std::abs(term) < std::abs(sum) * 1e-15) break;
        }
        return 1.0 - sum * std::exp(-x + a * std::log(x) - lg);
    }
    // continued fraction for Q(a, x), modified Lentz
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - lg) * h;
}

inline double chi2_sf(double x, int dof) { return gamma_q(0.5 * dof, 0.5 * x); }

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Ranks with average ranks for ties (rank 1 = smallest).
inline std::vector<double> average_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank test
// ---------------------------------------------------------------------------

struct WilcoxonResult {
    double statistic = 0.0; // W+ = rank sum of positive differences
    double p_value = 1.0;
    int n = 0; // non-zero pairs
};

/// Zero differences are dropped; tied |d| get average ranks. Exact p by
/// enumerating the rank-sum distribution for n <= 25 (dynamic program over
/// doubled ranks), normal approximation with tie correction and continuity
/// correction above. One-sided tests the "differences are negative"
/// direction (small W+).
inline WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& diffs,
                                           bool one_sided = false) {
    std::vector<double> d;
    for (double v : diffs)
        if (v != 0.0) d.push_back(v);
    WilcoxonResult res;
    res.n = static_cast<int>(d.size());
    if (res.n < 6) throw std::invalid_argument("wilcoxon_signed_rank: need >= 6 non-zero pairs");

    std::vector<double> absd(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) absd[i] = std::abs(d[i]);
    const auto ranks = detail::average_ranks(absd);
    double wplus = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (d[i] > 0.0) wplus += ranks[i];
    res.statistic = wplus;

    const int n = res.n;
    if (n <= 25) {
        // distribution of 2*W+ over all 2^n sign assignments
        std::vector<long> r2(d.size());
        long total = 0;
        for (std::size_t i = 0; i < ranks.size(); ++i) {
            r2[i] = std::lround(2.0 * ranks[i]);
            total += r2[i];
        }
        std::vector<double> ways(static_cast<std::size_t>(total) + 1, 0.0);
        ways[0] = 1.0;
        for (long r : r2)
            for (long s = total; s >= r; --s) ways[static_cast<std::size_t>(s)] += ways[static_cast<std::size_t>(s - r)];
        const double denom = std::pow(2.0, n);
        const long w2 = std::lround(2.0 * wplus);
        double below = 0.0, above = 0.0;
        for (long s = 0; s <= total; ++s) {
            if (s <= w2) below += ways[static_cast<std::size_t>(s)];
            if (s >= w2) above += ways[static_cast<std::size_t>(s)];
        }
        if (one_sided)
            res.p_value = below / denom;
        else
            res.p_value = std::min(1.0, 2.0 * std::min(below, above) / denom);
        return res;
    }

    const double mean = n * (n + 1) / 4.0;
    double tie_term = 0.0;
    {
        std::vector<double> sorted(absd);
        std::sort(sorted.begin(), sorted.end());
        std::size_t i = 0;
        while (i < sorted.size()) {
            std::size_t j = i;
            while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
            const double t = static_cast<double>(j - i + 1);
            tie_term += t * t * t - t;
            i = j + 1;
        }
    }
    const double var = n * (n + 1) * (2.0 * n + 1) / 24.0 - tie_term / 48.0;
    const double sd = std::sqrt(var);
    if (one_sided) {
        res.p_value = detail::normal_cdf((wplus - mean + 0.5) / sd);
    } else {
        const double z = (std::abs(wplus - mean) - 0.5) / sd;
        res.p_value = std::min(1.0, 2.0 * (1.0 - detail::normal_cdf(z)));
    }
    return res;
}

// ---------------------------------------------------------------------------
// Friedman test with Nemenyi post-hoc
// ---------------------------------------------------------------------------

struct FriedmanResult {
    double chi2 = 0.0;
    double p_value = 1.0;
    std::vector<double> mean_ranks;
};

inline double friedman_chi2_from_mean_ranks(const std::vector<double>& mean_ranks, int n_rows) {
    const int k = static_cast<int>(mean_ranks.size());
    double sumsq = 0.0;
    for (double r : mean_ranks) sumsq += r * r;
    return 12.0 * n_rows / (k * (k + 1.0)) * (sumsq - k * (k + 1.0) * (k + 1.0) / 4.0);
}

/// Rows are configurations, columns policies; lower values rank better.
inline FriedmanResult friedman(const std::vector<std::vector<double>>& matrix) {
    const int n = static_cast<int>(matrix.size());
    if (n < 2) throw std::invalid_argument("friedman: need at least 2 rows");
    const int k = static_cast<int>(matrix.front().size());
    if (k < 2) throw std::invalid_argument("friedman: need at least 2 columns");
    FriedmanResult res;
    res.mean_ranks.assign(static_cast<std::size_t>(k), 0.0);
    for (const auto& row : matrix) {
        if (static_cast<int>(row.size()) != k)
            throw std::invalid_argument("friedman: ragged matrix");
        const auto ranks = detail::average_ranks(row);
        for (int j = 0; j < k; ++j) res.mean_ranks[static_cast<std::size_t>(j)] += ranks[static_cast<std::size_t>(j)];
    }
    for (auto& r : res.mean_ranks) r /= static_cast<double>(n);
    res.chi2 = friedman_chi2_from_mean_ranks(res.mean_ranks, n);
    res.p_value = detail::chi2_sf(res.chi2, k - 1);
    return res;
}

/// Critical difference CD = q_{alpha,k} * sqrt(k (k+1) / (6 N)), with the
/// standard infinite-df studentized-range q table (k = 2..10, alpha 0.05 or
/// 0.10).
inline double nemenyi_cd(int k, int n_rows, double alpha) {
    static const double q05[] = {1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164};
    static const double q10[] = {1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920};
    if (k < 2 || k > 10) throw std::invalid_argument("nemenyi_cd: k outside tabulated range 2..10");
    if (n_rows < 1) throw std::invalid_argument("nemenyi_cd: need N >= 1");
    const double* table;
    if (std::abs(alpha - 0.05) < 1e-12)
        table = q05;
    else if (std::abs(alpha - 0.10) < 1e-12)
        table = q10;
    else
        throw std::invalid_argument("nemenyi_cd: alpha must be 0.05 or 0.10");
    return table[k - 2] * std::sqrt(k * (k + 1.0) / (6.0 * n_rows));
}

inline double bonferroni_threshold(double alpha, int comparisons) {
    if (comparisons < 1) throw std::invalid_argument("bonferroni_threshold: need >= 1 comparison");
    return alpha / comparisons;
}

// ---------------------------------------------------------------------------
// Gradient-descent contraction verification
// ---------------------------------------------------------------------------

struct ContractionResult {
    double measured_rate = 0.0;
    double theoretical_rate = 0.0; // (kappa - 1) / (kappa + 1)
};

/// Runs plain gradient descent on a diagonal quadratic with condition number
/// kappa at the optimal step size 2 / (mu + L) and measures the per-step
/// contraction of the distance to the optimum (the supremum over steps, which
/// converges to the worst-eigendirection rate).
inline ContractionResult gd_contraction_check(double kappa, int steps = 200) {
    if (kappa < 1.0) throw std::invalid_argument("gd_contraction_check: kappa must be >= 1");
    if (steps < 1) throw std::invalid_argument("gd_contraction_check: need >= 1 step");
    constexpr int dim = 8;
    const double mu = 1.0, big_l = kappa;
    std::vector<double> eig(dim);
    for (int i = 0; i < dim; ++i)
        eig[static_cast<std::size_t>(i)] = mu + (big_l - mu) * i / (dim - 1.0);
    const double alpha = 2.0 / (mu + big_l);

    std::vector<double> x(dim, 1.0);
    auto norm = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double c : v) s += c * c;
        return std::sqrt(s);
    };
    ContractionResult res;
    res.theoretical_rate = (kappa - 1.0) / (kappa + 1.0);
    double prev = norm(x);
    for (int k = 0; k < steps; ++k) {
        for (int i = 0; i < dim; ++i)
            x[static_cast<std::size_t>(i)] *= 1.0 - alpha * eig[static_cast<std::size_t>(i)];
        const double cur = norm(x);
        if (prev < 1e-280) break;
        res.measured_rate = std::max(res.measured_rate, cur / prev);
        prev = cur;
    }
    return res;
}

/// Per-batch gradient-step savings from starting at a checkpoint with
/// similarity s instead of the worst-case initialisation:
/// -log(1 - s) / |log(rho)|.
inline double step_savings(double s, double rho) {
    if (!(s > 0.0) || !(s < 1.0)) throw std::invalid_argument("step_savings: s must be in (0,1)");
    if (!(rho > 0.0) || !(rho < 1.0))
        throw std::invalid_argument("step_savings: rho must be in (0,1)");
    return -std::log(1.0 - s) / std::abs(std::log(rho));
}

} // namespace rgtta::stats
