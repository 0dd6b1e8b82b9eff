#pragma once

#include <chrono>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rgtta/core.hpp"
#include "rgtta/datagen.hpp"
#include "rgtta/forecast.hpp"
#include "rgtta/policies.hpp"

namespace rgtta {

struct Metrics {
    double mse = 0.0;
    double mae = 0.0;
    double rmse = 0.0;
    double smape = 0.0;
    double wmape = 0.0;
    double direction_accuracy = 0.0;
};

/// Standard point-forecast metrics plus the recency-weighted percentage error
/// and direction accuracy. Direction is judged per step against each series'
/// own previous value, seeded with the last observation before the horizon.
inline Metrics compute_metrics(std::span<const double> pred, std::span<const double> truth,
                               double prior, double wmape_decay = 0.97) {
    if (pred.size() != truth.size() || pred.empty())
        throw std::invalid_argument("compute_metrics: length mismatch");
    const std::size_t h = pred.size();
    Metrics m;
    double wnum = 0.0, wden = 0.0;
    int hits = 0;
    double prev_pred = prior, prev_truth = prior;
    auto sgn = [](double x) { return (x > 0.0) - (x < 0.0); };
    for (std::size_t i = 0; i < h; ++i) {
        const double e = pred[i] - truth[i];
        m.mse += e * e;
        m.mae += std::abs(e);
        m.smape += 2.0 * std::abs(e) / (std::abs(pred[i]) + std::abs(truth[i]) + kSimEps);
        const double w = std::pow(wmape_decay, static_cast<double>(h - 1 - i));
        wnum += w * std::abs(e);
        wden += w * std::abs(truth[i]);
        hits += sgn(pred[i] - prev_pred) == sgn(truth[i] - prev_truth);
        prev_pred = pred[i];
        prev_truth = truth[i];
    }
    const double n = static_cast<double>(h);
    m.mse /= n;
    m.mae /= n;
    m.rmse = std::sqrt(m.mse);
    m.smape *= 100.0 / n;
    m.wmape = wnum / (wden + kSimEps);
    m.direction_accuracy = static_cast<double>(hits) / n;
    return m;
}

/// One evaluated batch of one streaming run. The batch and target hashes make
/// protocol fairness auditable: for a fixed seed they must agree across
/// policies.
struct RunRecord {
    std::string policy;
    std::string model;
    std::string dataset;
    int horizon = 0;
    std::uint64_t seed = 0;
    int batch_index = 0;
    Metrics metrics;
    double adapt_time_seconds = 0.0;
    std::uint64_t batch_hash = 0;
    std::uint64_t target_hash = 0;
    AdaptReport adapt;
};

/// Initial model shared by every policy of a (model, dataset, horizon, seed)
/// configuration: trained weights, the prefix scaler, and the scaled training
/// windows (kept for EWC's Fisher seeding).
struct InitialModel {
    ModelWeights weights;
    ScalerState scaler;
    std::vector<WindowPair> scaled_windows;
    std::vector<double> initial_values;
};

inline InitialModel train_initial(const TimeSeriesDataset& ds, Arch arch, int horizon,
                                  std::uint64_t seed, const HarnessConfig& hc,
                                  const TrainOptions& opts, int hidden = 64) {
    if (static_cast<int>(ds.values.size()) < hc.initial_train_size)
        throw std::invalid_argument("train_initial: dataset shorter than initial_train_size");
    InitialModel init;
    init.initial_values.assign(ds.values.begin(), ds.values.begin() + hc.initial_train_size);
    init.scaler = fit_scaler(init.initial_values);
    const auto scaled = init.scaler.transform(init.initial_values);
    init.scaled_windows = make_windows(scaled, hc.seq_len, horizon, 1);
    init.weights = init_weights(arch, hc.seq_len, horizon, hidden, seed);
    if (!init.scaled_windows.empty()) train_full(init.weights, init.scaled_windows, opts, seed);
    return init;
}

/// Thrown when a policy aborts mid-run; carries the records finished so far.
struct RunAbortError : std::runtime_error {
    RunAbortError(const std::string& what, std::vector<RunRecord> partial_records)
        : std::runtime_error(what), partial(std::move(partial_records)) {}
    std::vector<RunRecord> partial;
};

/// The streaming protocol: initial training on the prefix, then sequential
/// batches, each adapted by the policy and scored on the H rows that follow
/// it. Batch boundaries depend only on the protocol config, never on the
/// policy. A trailing batch without H rows of ground truth is skipped.
inline std::vector<RunRecord> run_stream(const TimeSeriesDataset& ds, Arch arch,
                                         const PolicyConfig& cfg, int horizon, std::uint64_t seed,
                                         const HarnessConfig& hc,
                                         const InitialModel* pretrained = nullptr,
                                         int hidden = 64) {
    cfg.validate();
    hc.validate();
    const int n = static_cast<int>(ds.values.size());
    if (n < hc.initial_train_size)
        throw std::invalid_argument("run_stream: dataset shorter than initial training size");

    InitialModel local;
    if (!pretrained) {
        local = train_initial(ds, arch, horizon, seed, hc, cfg.train, hidden);
        pretrained = &local;
    }
    PolicyState state = make_policy_state(cfg, pretrained->weights, pretrained->scaler,
                                          pretrained->scaled_windows, pretrained->initial_values,
                                          seed);

    std::vector<RunRecord> records;
    const std::vector<double> backbone_before(state.model.backbone().begin(),
                                              state.model.backbone().end());
    for (int t = 1; t <= hc.max_batches; ++t) {
        const int start = hc.initial_train_size + (t - 1) * hc.batch_size;
        const int end = start + hc.batch_size;
        if (end > n || end + horizon > n) break; // no full batch or no lookahead
        const std::vector<double> batch(ds.values.begin() + start, ds.values.begin() + end);

        RunRecord rec;
        rec.policy = policy_name(cfg.kind);
        rec.model = arch_name(arch);
        rec.dataset = ds.name;
        rec.horizon = horizon;
        rec.seed = seed;
        rec.batch_index = t;

        const auto t0 = std::chrono::steady_clock::now();
        try {
            rec.adapt = adapt_batch(cfg, state, batch, t, seed, ds.season_length);
        } catch (const std::exception& e) {
            throw RunAbortError(std::string("run aborted at batch ") + std::to_string(t) + ": " +
                                    e.what(),
                                std::move(records));
        }
        rec.adapt_time_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        if (cfg.kind != PolicyKind::Retrain) {
            const auto backbone = state.model.backbone();
            for (std::size_t i = 0; i < backbone.size(); ++i)
                if (backbone[i] != backbone_before[i])
                    throw RunAbortError("backbone mutated during adaptation at batch " +
                                            std::to_string(t),
                                        std::move(records));
        }

        const std::vector<double> input_raw(ds.values.begin() + end - hc.seq_len,
                                            ds.values.begin() + end);
        const auto pred = state.scaler.inverse(forward(state.model, state.scaler.transform(input_raw)));
        const std::span<const double> truth(ds.values.data() + end, static_cast<std::size_t>(horizon));
        rec.batch_hash = detail::hash_doubles(batch);
        rec.target_hash = detail::fnv1a(truth.data(), truth.size() * sizeof(double));
        rec.metrics = compute_metrics(pred, truth, ds.values[static_cast<std::size_t>(end - 1)]);
        if (!std::isfinite(rec.metrics.mse))
            throw RunAbortError("non-finite forecast metrics at batch " + std::to_string(t),
                                std::move(records));
        records.push_back(std::move(rec));
    }
    return records;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

/// Batch-averaged (then seed-averaged) metrics for one configuration.
struct SummaryRow {
    std::string policy;
    std::string model;
    std::string dataset;
    int horizon = 0;
    int n_seeds = 0;
    int n_batches = 0; // per seed
    Metrics metrics;
    double adapt_time_seconds = 0.0;
};

struct WinEntry {
    std::string model;
    std::string dataset;
    int horizon = 0;
    std::vector<std::string> winners; // argmin-MSE policies, ties shared
};

struct AggregateResult {
    std::vector<SummaryRow> rows;
    std::vector<WinEntry> config_wins;
    std::map<std::string, int> win_counts;
};

inline AggregateResult aggregate(const std::vector<RunRecord>& records) {
    if (records.empty()) throw std::invalid_argument("aggregate: no records");
    using RunKey = std::tuple<std::string, std::string, std::string, int, std::uint64_t>;
    struct Acc {
        Metrics sum;
        double time = 0.0;
        int n = 0;
    };
    std::map<RunKey, Acc> per_run;
    for (const auto& r : records) {
        auto& a = per_run[{r.policy, r.model, r.dataset, r.horizon, r.seed}];
        a.sum.mse += r.metrics.mse;
        a.sum.mae += r.metrics.mae;
        a.sum.rmse += r.metrics.rmse;
        a.sum.smape += r.metrics.smape;
        a.sum.wmape += r.metrics.wmape;
        a.sum.direction_accuracy += r.metrics.direction_accuracy;
        a.time += r.adapt_time_seconds;
        a.n += 1;
    }

    using CfgKey = std::tuple<std::string, std::string, std::string, int>;
    struct CfgAcc {
        Metrics sum;
        double time = 0.0;
        int seeds = 0;
        int batches = 0;
    };
    std::map<CfgKey, CfgAcc> per_cfg;
    for (const auto& [key, acc] : per_run) {
        const auto& [policy, model, dataset, horizon, seed] = key;
        auto& c = per_cfg[{policy, model, dataset, horizon}];
        const double inv = 1.0 / acc.n;
        c.sum.mse += acc.sum.mse * inv;
        c.sum.mae += acc.sum.mae * inv;
        c.sum.rmse += acc.sum.rmse * inv;
        c.sum.smape += acc.sum.smape * inv;
        c.sum.wmape += acc.sum.wmape * inv;
        c.sum.direction_accuracy += acc.sum.direction_accuracy * inv;
        c.time += acc.time; // total adaptation time, averaged over seeds below
        c.seeds += 1;
        c.batches = acc.n;
    }

    AggregateResult out;
    for (const auto& [key, acc] : per_cfg) {
        SummaryRow row;
        std::tie(row.policy, row.model, row.dataset, row.horizon) = key;
        row.n_seeds = acc.seeds;
        row.n_batches = acc.batches;
        const double inv = 1.0 / acc.seeds;
        row.metrics.mse = acc.sum.mse * inv;
        row.metrics.mae = acc.sum.mae * inv;
        row.metrics.rmse = acc.sum.rmse * inv;
        row.metrics.smape = acc.sum.smape * inv;
        row.metrics.wmape = acc.sum.wmape * inv;
        row.metrics.direction_accuracy = acc.sum.direction_accuracy * inv;
        row.adapt_time_seconds = acc.time * inv;
        out.rows.push_back(std::move(row));
    }

    // Win = argmin seed-averaged MSE per (model, dataset, horizon); ties count
    // for every tied policy.
    std::map<CfgKey, std::vector<const SummaryRow*>> by_config;
    for (const auto& row : out.rows)
        by_config[{"", row.model, row.dataset, row.horizon}].push_back(&row);
    for (const auto& [key, rows] : by_config) {
        WinEntry w;
        w.model = std::get<1>(key);
        w.dataset = std::get<2>(key);
        w.horizon = std::get<3>(key);
        double best = rows.front()->metrics.mse;
        for (const auto* r : rows) best = std::min(best, r->metrics.mse);
        for (const auto* r : rows)
            if (r->metrics.mse == best) w.winners.push_back(r->policy);
        for (const auto& p : w.winners) out.win_counts[p] += 1;
        out.config_wins.push_back(std::move(w));
    }
    return out;
}

} // namespace rgtta
