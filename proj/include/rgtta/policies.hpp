#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include "rgtta/core.hpp"
#include "rgtta/forecast.hpp"
#include "rgtta/memory.hpp"
#include "rgtta/similarity.hpp"

namespace rgtta {

enum class PolicyKind { Tta, Ewc, DynaTta, RgTta, RgEwc, RgDynaTta, Retrain };

inline const char* policy_name(PolicyKind k) {
    switch (k) {
        case PolicyKind::Tta: return "tta";
        case PolicyKind::Ewc: return "ewc";
        case PolicyKind::DynaTta: return "dynatta";
        case PolicyKind::RgTta: return "rgtta";
        case PolicyKind::RgEwc: return "rgtta_ewc";
        case PolicyKind::RgDynaTta: return "rgtta_dynatta";
        case PolicyKind::Retrain: return "retrain";
    }
    return "?";
}

inline PolicyKind policy_from_name(const std::string& s) {
    if (s == "tta") return PolicyKind::Tta;
    if (s == "ewc") return PolicyKind::Ewc;
    if (s == "dynatta") return PolicyKind::DynaTta;
    if (s == "rgtta") return PolicyKind::RgTta;
    if (s == "rgtta_ewc") return PolicyKind::RgEwc;
    if (s == "rgtta_dynatta") return PolicyKind::RgDynaTta;
    if (s == "retrain") return PolicyKind::Retrain;
    throw std::invalid_argument("unknown policy: " + s);
}

inline bool is_regime_guided(PolicyKind k) {
    return k == PolicyKind::RgTta || k == PolicyKind::RgEwc || k == PolicyKind::RgDynaTta;
}

inline bool uses_ewc(PolicyKind k) { return k == PolicyKind::Ewc || k == PolicyKind::RgEwc; }

inline bool uses_dynatta(PolicyKind k) {
    return k == PolicyKind::DynaTta || k == PolicyKind::RgDynaTta;
}

/// Every tunable of every policy, with defaults for the standard setup.
struct PolicyConfig {
    PolicyKind kind = PolicyKind::RgTta;

    double alpha_base = 3e-4;
    double gamma = 0.67;
    int k_max = 25;
    int k_min = 5;
    int patience = 3;
    double eps_improve = 0.005;
    bool early_stop = true; // regime-guided policies only; ablation knob

    double tau = 0.75;  // checkpoint similarity threshold
    double gate = 0.70; // loss gate factor
    int memory_cap = 5;

    int fixed_steps = 20; // baseline step budget (tta 20, ewc 15, dynatta 20)

    double ewc_lambda = 400.0;
    int fisher_samples = 200;
    double fisher_clamp_max = 1e4;
    double fisher_decay = 0.5;

    double alpha_min = 1e-4;
    double alpha_max = 1e-3;
    double kappa_sig = 1.0;
    double ema_eta = 0.1;
    int rtab_cap = 360;
    int rdb_cap = 100;
    double warmup_factor = 1.0;

    int eval_windows = 64;
    int grad_minibatch = 32;
    double smooth_l1_delta = 1.0;

    TrainOptions train; // initial-training budget (also used by retrain)

    void validate() const {
        if (alpha_base <= 0 || k_max < 1 || k_min < 1 || k_min > k_max || patience < 1 ||
            eps_improve <= 0)
            throw std::invalid_argument("PolicyConfig: bad adaptation parameters");
        if (!(tau > 0) || !(gate > 0) || gate >= 1 || memory_cap < 1)
            throw std::invalid_argument("PolicyConfig: bad gate parameters");
        if (fixed_steps < 1 || fisher_samples < 1 || ewc_lambda < 0 || fisher_clamp_max <= 0)
            throw std::invalid_argument("PolicyConfig: bad EWC parameters");
        if (!(alpha_min > 0) || !(alpha_min < alpha_max) || rtab_cap < 1 || rdb_cap < 1)
            throw std::invalid_argument("PolicyConfig: bad dynatta parameters");
        if (eval_windows < 1 || grad_minibatch < 1 || smooth_l1_delta <= 0)
            throw std::invalid_argument("PolicyConfig: bad minibatch parameters");
    }
};

inline PolicyConfig default_config(PolicyKind kind) {
    PolicyConfig c;
    c.kind = kind;
    switch (kind) {
        case PolicyKind::Tta: c.fixed_steps = 20; break;
        case PolicyKind::Ewc: c.fixed_steps = 15; break;
        case PolicyKind::DynaTta: c.fixed_steps = 20; break;
        default: c.fixed_steps = 20; break; // RG variants: used by dynatta warmup only
    }
    return c;
}

/// Similarity-scaled learning rate: alpha_base * (1 + gamma * (1 - sim)).
inline double rg_lr(double alpha_base, double gamma, double sim) {
    if (sim < 0.0 || sim > 1.0) {
        std::cerr << "rg_lr: similarity " << sim << " outside [0,1], clamping\n";
        sim = std::clamp(sim, 0.0, 1.0);
    }
    return alpha_base * (1.0 + gamma * (1.0 - sim));
}

/// Loss-driven early stopping over the per-step evaluation losses.
/// history[0] is the pre-adaptation loss; history[k] the loss after step k.
/// Steps start counting toward patience only after the K_min minimum has
/// completed; a step improving by at least eps resets the counter.
inline bool early_stop_check(std::span<const double> history, int k_min, int patience,
                             double eps_improve) {
    if (history.empty()) throw std::invalid_argument("early_stop_check: empty history");
    int count = 0;
    for (std::size_t k = 1; k < history.size(); ++k) {
        const double prev = history[k - 1];
        const double rel = prev == 0.0 ? 0.0 : (prev - history[k]) / std::abs(prev);
        if (static_cast<int>(k) > k_min && rel < eps_improve)
            ++count;
        else
            count = 0;
        if (count >= patience) return true;
    }
    return false;
}

// ---------------------------------------------------------------------------
// EWC
// ---------------------------------------------------------------------------

struct EwcState {
    std::vector<double> fisher; // diagonal, head-sized, clamped to [0, clamp_max]
    std::vector<double> anchor; // head snapshot
};

inline double ewc_penalty(std::span<const double> head, const EwcState& st, double lambda) {
    if (head.size() != st.fisher.size() || head.size() != st.anchor.size())
        throw std::invalid_argument("ewc_penalty: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < head.size(); ++i) {
        const double d = head[i] - st.anchor[i];
        acc += st.fisher[i] * d * d;
    }
    return 0.5 * lambda * acc;
}

inline double ewc_loss(double task_loss, std::span<const double> head, const EwcState& st,
                       double lambda) {
    return task_loss + ewc_penalty(head, st, lambda);
}

/// Adds the penalty gradient lambda * F_i * (theta_i - anchor_i) in place.
inline void add_ewc_penalty_grad(std::span<const double> head, const EwcState& st, double lambda,
                                 std::span<double> grad) {
    for (std::size_t i = 0; i < head.size(); ++i)
        grad[i] += lambda * st.fisher[i] * (head[i] - st.anchor[i]);
}

/// F_new = mean over windows of the squared per-window head gradient,
/// clamped, then blended: F = decay * F_prev + (1 - decay) * F_new.
inline void fisher_update(EwcState& st, const ModelWeights& w,
                          std::span<const WindowPair> sample_windows, double clamp_max,
                          double decay, double delta) {
    if (sample_windows.empty()) throw std::invalid_argument("fisher_update: empty sample");
    const std::size_t n = head_size(w);
    if (st.fisher.size() != n) st.fisher.assign(n, 0.0);
    std::vector<double> fresh(n, 0.0);
    BackboneCache cache;
    for (const auto& win : sample_windows) {
        const auto g = head_gradient(w, {&win, 1}, delta, &cache);
        for (std::size_t i = 0; i < n; ++i) fresh[i] += g[i] * g[i];
    }
    const double inv = 1.0 / static_cast<double>(sample_windows.size());
    for (std::size_t i = 0; i < n; ++i) {
        const double f = std::clamp(fresh[i] * inv, 0.0, clamp_max);
        st.fisher[i] = decay * st.fisher[i] + (1.0 - decay) * f;
    }
}

// ---------------------------------------------------------------------------
// DynaTTA dynamic learning rate
// ---------------------------------------------------------------------------

struct DynattaState {
    std::deque<std::vector<double>> rtab;   // recent embeddings, ring semantics
    std::vector<std::vector<double>> rdb;   // representative embeddings, reservoir
    std::uint64_t rdb_seen = 0;
    std::vector<double> loss_history;
    double shift_ema = 0.0;
    std::uint64_t steps_seen = 0;
    std::mt19937_64 rng{0};
};

namespace detail {

inline double buffer_distance(const std::vector<double>& e,
                              const std::deque<std::vector<double>>& buf) {
    if (buf.size() < 2) return 0.0;
    const std::size_t dim = e.size();
    std::vector<double> center(dim, 0.0);
    for (const auto& b : buf)
        for (std::size_t i = 0; i < dim; ++i) center[i] += b[i];
    for (auto& c : center) c /= static_cast<double>(buf.size());
    double spread = 0.0, dist = 0.0;
    for (const auto& b : buf) {
        double dc = 0.0, de = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            dc += (b[i] - center[i]) * (b[i] - center[i]);
            de += (b[i] - e[i]) * (b[i] - e[i]);
        }
        spread += std::sqrt(dc);
        dist += std::sqrt(de);
    }
    spread /= static_cast<double>(buf.size());
    dist /= static_cast<double>(buf.size());
    return dist / (spread + kSimEps);
}

inline double buffer_distance(const std::vector<double>& e,
                              const std::vector<std::vector<double>>& buf) {
    std::deque<std::vector<double>> d(buf.begin(), buf.end());
    return buffer_distance(e, d);
}

} // namespace detail

/// Sigmoid-of-shift-score learning rate: z-score of the current loss against
/// the running loss history plus normalized distances to the recent (RTAB)
/// and representative (RDB) embedding buffers, EMA-smoothed, mapped into
/// [alpha_min, alpha_max]. Returns alpha_min while warming up. Updates the
/// state (history, EMA, buffers) on every call.
inline double dynatta_lr(DynattaState& st, double current_loss,
                         const std::vector<double>& embedding, const PolicyConfig& cfg) {
    double z = 0.0;
    if (st.loss_history.size() >= 3) {
        double mean = 0.0;
        for (double v : st.loss_history) mean += v;
        mean /= static_cast<double>(st.loss_history.size());
        double var = 0.0;
        for (double v : st.loss_history) var += (v - mean) * (v - mean);
        const double sd = std::sqrt(var / static_cast<double>(st.loss_history.size()));
        if (sd > 1e-12) z = (current_loss - mean) / sd;
    }
    const double d_rtab = detail::buffer_distance(embedding, st.rtab);
    const double d_rdb = detail::buffer_distance(embedding, st.rdb);
    const double score = (z + d_rtab + d_rdb) / 3.0;
    st.shift_ema = (1.0 - cfg.ema_eta) * st.shift_ema + cfg.ema_eta * score;

    const bool warming =
        static_cast<double>(st.steps_seen) < cfg.warmup_factor * cfg.fixed_steps * 3.0;
    ++st.steps_seen;

    st.loss_history.push_back(current_loss);
    st.rtab.push_back(embedding);
    while (st.rtab.size() > static_cast<std::size_t>(cfg.rtab_cap)) st.rtab.pop_front();
    ++st.rdb_seen;
    if (st.rdb.size() < static_cast<std::size_t>(cfg.rdb_cap)) {
        st.rdb.push_back(embedding);
    } else {
        const auto j = detail::bounded(st.rng, st.rdb_seen);
        if (j < static_cast<std::uint64_t>(cfg.rdb_cap)) st.rdb[static_cast<std::size_t>(j)] = embedding;
    }

    if (warming) return cfg.alpha_min;
    const double sig = 1.0 / (1.0 + std::exp(-cfg.kappa_sig * st.shift_ema));
    return cfg.alpha_min + (cfg.alpha_max - cfg.alpha_min) * sig;
}

// ---------------------------------------------------------------------------
// The generic adaptation loop
// ---------------------------------------------------------------------------

/// Everything one policy instance owns across a streaming run.
struct PolicyState {
    ModelWeights model;
    ScalerState scaler;
    RegimeMemory memory{5};
    EwcState ewc;
    DynattaState dyn;
    std::vector<double> seen_values; // retrain only: all rows received so far
};

/// Per-batch adaptation trace, one record per (run, batch).
struct AdaptReport {
    int steps_used = 0;
    std::vector<double> lr_used;
    bool loaded_checkpoint = false;
    double sim = 0.0;
    double pre_loss = 0.0;  // incumbent model on the shared eval windows
    double ckpt_loss = std::numeric_limits<double>::quiet_NaN();
    double post_loss = 0.0; // after adaptation, same eval windows
    bool early_stopped = false;
    bool skipped = false;   // batch too short to window; nothing ran
};

namespace detail {

inline std::uint64_t grad_stream_seed(std::uint64_t run_seed, int batch_index, int step) {
    return mix(mix(run_seed, 0x6D62), mix(static_cast<std::uint64_t>(batch_index),
                                          static_cast<std::uint64_t>(step)));
}

inline std::uint64_t eval_stream_seed(std::uint64_t run_seed, int batch_index) {
    return mix(mix(run_seed, 0xE7A1), static_cast<std::uint64_t>(batch_index));
}

inline std::uint64_t fisher_stream_seed(std::uint64_t run_seed, int batch_index) {
    return mix(mix(run_seed, 0xF154), static_cast<std::uint64_t>(batch_index));
}

inline WindowPair scaled_window(const WindowPair& raw, const ScalerState& s) {
    WindowPair w;
    w.origin_index = raw.origin_index;
    w.input = s.transform(raw.input);
    w.target = s.transform(raw.target);
    return w;
}

/// Raw-space eval loss reusing cached backbone outputs (valid while the
/// backbone and scaler are fixed; head updates do not invalidate it).
inline double eval_loss_cached(const ModelWeights& w, const ScalerState& scaler,
                               std::span<const WindowPair> eval_raw, BackboneCache& cache,
                               double delta) {
    std::vector<double> pred(static_cast<std::size_t>(w.horizon));
    double acc = 0.0;
    for (const auto& win : eval_raw) {
        auto it = cache.find(win.origin_index);
        if (it == cache.end())
            it = cache.emplace(win.origin_index, backbone_transform(w, scaler.transform(win.input)))
                     .first;
        head_forward(w, it->second, pred);
        acc += smooth_l1(scaler.inverse(pred), win.target, delta);
    }
    return acc / static_cast<double>(eval_raw.size());
}

inline std::vector<double> mean_embedding(const std::vector<const std::vector<double>*>& bouts) {
    std::vector<double> mean(bouts.front()->size(), 0.0);
    for (const auto* b : bouts)
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += (*b)[i];
    for (auto& m : mean) m /= static_cast<double>(bouts.size());
    return mean;
}

inline AdaptReport adapt_retrain(const PolicyConfig& cfg, PolicyState& st,
                                 const std::vector<double>& batch_values, int batch_index,
                                 std::uint64_t run_seed) {
    AdaptReport report;
    st.seen_values.insert(st.seen_values.end(), batch_values.begin(), batch_values.end());
    st.scaler = fit_scaler(st.seen_values);
    const auto scaled = st.scaler.transform(st.seen_values);
    const auto windows = make_windows(scaled, st.model.seq_len, st.model.horizon, 1);
    if (windows.empty()) {
        report.skipped = true;
        return report;
    }
    st.model = init_weights(st.model.arch, st.model.seq_len, st.model.horizon, st.model.hidden,
                            mix(run_seed, static_cast<std::uint64_t>(batch_index)));
    const auto train_report = train_full(st.model, windows, cfg.train,
                                         mix(run_seed, static_cast<std::uint64_t>(batch_index), 0x27));
    report.pre_loss = train_report.history.empty() ? 0.0 : train_report.history.front();
    report.post_loss = train_report.value;
    return report;
}

} // namespace detail

/// Executes one batch of the policy's update rule and returns the trace.
/// Regime-guided policies run feature extraction, checkpoint matching, the
/// dual gate, modulated-LR head steps with early stopping, and an
/// unconditional store; baselines run their fixed-step schedule.
inline AdaptReport adapt_batch(const PolicyConfig& cfg, PolicyState& st,
                               const std::vector<double>& batch_values, int batch_index,
                               std::uint64_t run_seed, int season_length) {
    if (cfg.kind == PolicyKind::Retrain)
        return detail::adapt_retrain(cfg, st, batch_values, batch_index, run_seed);

    AdaptReport report;
    st.scaler = fit_scaler(batch_values);
    const auto raw_windows =
        make_windows(batch_values, st.model.seq_len, st.model.horizon, 1);
    if (raw_windows.empty()) {
        report.skipped = true;
        return report;
    }
    const auto features = extract_features(batch_values, season_length);

    // Shared evaluation minibatch: one seeded sample reused for the gate and
    // for every per-step loss, so comparisons stay paired.
    auto eval_rng = detail::make_rng(detail::eval_stream_seed(run_seed, batch_index));
    const auto eval_idx = detail::sample_indices(static_cast<int>(raw_windows.size()),
                                                 cfg.eval_windows, eval_rng);
    std::vector<WindowPair> eval_raw;
    eval_raw.reserve(eval_idx.size());
    for (int i : eval_idx) eval_raw.push_back(raw_windows[static_cast<std::size_t>(i)]);

    const bool rg = is_regime_guided(cfg.kind);
    GateDecision decision;
    if (rg) {
        const auto [sim, entry] = st.memory.best_match(features);
        decision = gate_and_load(sim, entry, st.model, st.scaler, eval_raw, cfg.tau, cfg.gate,
                                 cfg.smooth_l1_delta);
        if (decision.loaded) {
            if (uses_ewc(cfg.kind)) {
                const auto head = st.model.head();
                st.ewc.anchor.assign(head.begin(), head.end());
            }
            if (uses_dynatta(cfg.kind)) {
                st.dyn.loss_history.clear();
                st.dyn.shift_ema = 0.0;
            }
        }
    } else {
        decision.loss_current = eval_loss_raw(st.model, st.scaler, eval_raw, cfg.smooth_l1_delta);
        decision.loss_active = decision.loss_current;
    }
    report.sim = decision.sim;
    report.loaded_checkpoint = decision.loaded;
    report.pre_loss = decision.loss_current;
    report.ckpt_loss = decision.loss_checkpoint;

    const double batch_lr = (cfg.kind == PolicyKind::RgTta || cfg.kind == PolicyKind::RgEwc)
                                ? rg_lr(cfg.alpha_base, cfg.gamma, decision.sim)
                                : cfg.alpha_base;

    BackboneCache cache; // valid: backbone and scaler are fixed from here on
    OptimizerState opt(head_size(st.model));
    std::vector<double> history = {decision.loss_active};
    const int budget = rg && cfg.early_stop ? cfg.k_max : cfg.fixed_steps;
    std::vector<WindowPair> minibatch;

    for (int k = 1; k <= budget; ++k) {
        auto grad_rng = detail::make_rng(detail::grad_stream_seed(run_seed, batch_index, k));
        const auto idx = detail::sample_indices(static_cast<int>(raw_windows.size()),
                                                cfg.grad_minibatch, grad_rng);
        minibatch.clear();
        for (int i : idx)
            minibatch.push_back(detail::scaled_window(raw_windows[static_cast<std::size_t>(i)], st.scaler));

        auto grad = head_gradient(st.model, minibatch, cfg.smooth_l1_delta, &cache);
        if (uses_ewc(cfg.kind))
            add_ewc_penalty_grad(st.model.head(), st.ewc, cfg.ewc_lambda, grad);

        double alpha = batch_lr;
        if (uses_dynatta(cfg.kind)) {
            std::vector<const std::vector<double>*> bouts;
            bouts.reserve(minibatch.size());
            for (const auto& w : minibatch) bouts.push_back(&cache.at(w.origin_index));
            alpha = dynatta_lr(st.dyn, history.back(), detail::mean_embedding(bouts), cfg);
        }

        optimizer_step(st.model.head(), grad, opt, alpha);
        report.lr_used.push_back(alpha);
        report.steps_used = k;

        const double loss =
            detail::eval_loss_cached(st.model, st.scaler, eval_raw, cache, cfg.smooth_l1_delta);
        if (!std::isfinite(loss))
            throw std::runtime_error("adapt_batch: non-finite loss at batch " +
                                     std::to_string(batch_index) + " step " + std::to_string(k));
        history.push_back(loss);

        if (rg && cfg.early_stop &&
            early_stop_check(history, cfg.k_min, cfg.patience, cfg.eps_improve)) {
            report.early_stopped = true;
            break;
        }
    }
    report.post_loss = history.back();

    if (uses_ewc(cfg.kind)) {
        auto fisher_rng = detail::make_rng(detail::fisher_stream_seed(run_seed, batch_index));
        const auto idx = detail::sample_indices(static_cast<int>(raw_windows.size()),
                                                cfg.fisher_samples, fisher_rng);
        std::vector<WindowPair> sample;
        sample.reserve(idx.size());
        for (int i : idx)
            sample.push_back(detail::scaled_window(raw_windows[static_cast<std::size_t>(i)], st.scaler));
        fisher_update(st.ewc, st.model, sample, cfg.fisher_clamp_max, cfg.fisher_decay,
                      cfg.smooth_l1_delta);
        const auto head = st.model.head();
        st.ewc.anchor.assign(head.begin(), head.end());
    }

    if (rg) {
        CheckpointEntry entry;
        entry.weights = st.model;
        entry.features = features;
        entry.scaler = st.scaler;
        entry.batch_index = batch_index;
        entry.stored_loss = report.post_loss;
        entry.policy_id = policy_name(cfg.kind);
        entry.timestamp = batch_index;
        st.memory.store(std::move(entry));
    }
    return report;
}

/// Builds the per-run policy state from an initially-trained model. EWC
/// variants seed the Fisher diagonal and anchor from the training windows;
/// the DynaTTA reservoir rng is derived from the run seed.
inline PolicyState make_policy_state(const PolicyConfig& cfg, ModelWeights trained,
                                     ScalerState initial_scaler,
                                     std::span<const WindowPair> initial_scaled_windows,
                                     std::span<const double> initial_values,
                                     std::uint64_t run_seed) {
    PolicyState st;
    st.model = std::move(trained);
    st.scaler = initial_scaler;
    st.memory = RegimeMemory(cfg.memory_cap);
    if (uses_ewc(cfg.kind)) {
        const auto head = st.model.head();
        st.ewc.anchor.assign(head.begin(), head.end());
        st.ewc.fisher.assign(head.size(), 0.0);
        if (!initial_scaled_windows.empty()) {
            auto rng = detail::make_rng(detail::fisher_stream_seed(run_seed, 0));
            const auto idx = detail::sample_indices(static_cast<int>(initial_scaled_windows.size()),
                                                    cfg.fisher_samples, rng);
            std::vector<WindowPair> sample;
            for (int i : idx) sample.push_back(initial_scaled_windows[static_cast<std::size_t>(i)]);
            fisher_update(st.ewc, st.model, sample, cfg.fisher_clamp_max, cfg.fisher_decay,
                          cfg.smooth_l1_delta);
        }
    }
    if (uses_dynatta(cfg.kind)) st.dyn.rng = detail::make_rng(detail::mix(run_seed, 0xD2));
    if (cfg.kind == PolicyKind::Retrain)
        st.seen_values.assign(initial_values.begin(), initial_values.end());
    return st;
}

} // namespace rgtta
