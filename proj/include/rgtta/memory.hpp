#pragma once

#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

#include "rgtta/core.hpp"
#include "rgtta/forecast.hpp"
#include "rgtta/similarity.hpp"

namespace rgtta {

/// One stored regime specialist: weights snapshot, the regime fingerprint it
/// was adapted on, the co-saved scaler, and bookkeeping metadata.
struct CheckpointEntry {
    ModelWeights weights;
    RegimeFeatures features;
    ScalerState scaler;
    int batch_index = 0;
    double stored_loss = 0.0;
    std::string policy_id;
    std::int64_t timestamp = 0;
    std::string weights_path; // set when the entry is disk-backed

    /// In-memory weights if present, otherwise loaded from weights_path.
    ModelWeights resolve_weights() const {
        if (!weights.params.empty()) return weights;
        return load_weights(weights_path);
    }
};

/// FIFO checkpoint library capped at `capacity` entries. When persist_dir is
/// set, every stored entry is mirrored to disk for post-hoc inspection.
class RegimeMemory {
public:
    explicit RegimeMemory(int capacity = 5, std::string persist_dir = {})
        : capacity_(capacity), persist_dir_(std::move(persist_dir)) {
        if (capacity_ < 1) throw std::invalid_argument("RegimeMemory: capacity must be >= 1");
    }

    int capacity() const { return capacity_; }
    std::size_t size() const { return entries_.size(); }
    const std::deque<CheckpointEntry>& entries() const { return entries_; }

    void store(CheckpointEntry entry) {
        if (entry.features.raw_sample.empty())
            throw std::invalid_argument("RegimeMemory::store: entry without raw sample");
        if (!persist_dir_.empty()) persist(entry);
        entries_.push_back(std::move(entry));
        while (entries_.size() > static_cast<std::size_t>(capacity_)) entries_.pop_front();
    }

    /// Entry maximizing ensemble similarity to the query; ties go to the most
    /// recent entry. Empty memory yields (0, nullptr).
    std::pair<double, const CheckpointEntry*> best_match(const RegimeFeatures& query) const {
        double best = 0.0;
        const CheckpointEntry* best_entry = nullptr;
        for (const auto& e : entries_) {
            const double sim = ensemble_similarity(query, e.features);
            if (!best_entry || sim >= best) {
                best = sim;
                best_entry = &e;
            }
        }
        return {best, best_entry};
    }

private:
    void persist(CheckpointEntry& entry) const;

    int capacity_;
    std::string persist_dir_;
    std::deque<CheckpointEntry> entries_;
};

/// SmoothL1 of a model on raw-valued windows, evaluated with the given scaler:
/// inputs are scaled for the forward pass and predictions mapped back before
/// comparing against the raw targets. Losses computed this way are comparable
/// across models carrying different scalers.
inline double eval_loss_raw(const ModelWeights& w, const ScalerState& scaler,
                            std::span<const WindowPair> raw_windows, double delta = 1.0) {
    if (raw_windows.empty()) throw std::invalid_argument("eval_loss_raw: empty window set");
    double acc = 0.0;
    for (const auto& win : raw_windows) {
        const auto pred = scaler.inverse(forward(w, scaler.transform(win.input)));
        acc += smooth_l1(pred, win.target, delta);
    }
    return acc / static_cast<double>(raw_windows.size());
}

struct GateDecision {
    bool loaded = false;
    double sim = 0.0;
    double loss_current = 0.0; // incumbent model, shared eval windows
    double loss_checkpoint = std::numeric_limits<double>::quiet_NaN();
    double loss_active = 0.0; // whichever model survives the gate
};

/// The dual gate of the checkpoint-reuse rule: load only when sim >= tau and
/// the checkpoint improves the shared-evaluation loss by more than the gate
/// factor. A checkpoint that fails to deserialize is skipped with a log line
/// and the incumbent model stays active.
inline GateDecision gate_and_load(double sim, const CheckpointEntry* entry, ModelWeights& model,
                                  ScalerState& scaler, std::span<const WindowPair> eval_raw,
                                  double tau, double gate, double delta = 1.0) {
    GateDecision d;
    d.sim = sim;
    d.loss_current = eval_loss_raw(model, scaler, eval_raw, delta);
    d.loss_active = d.loss_current;
    if (!entry || sim < tau) return d;
    ModelWeights candidate;
    try {
        candidate = entry->resolve_weights();
        d.loss_checkpoint = eval_loss_raw(candidate, entry->scaler, eval_raw, delta);
    } catch (const std::exception& e) {
        std::cerr << "checkpoint skipped (batch " << entry->batch_index << "): " << e.what()
                  << "\n";
        return d;
    }
    if (d.loss_checkpoint < gate * d.loss_current) {
        model = std::move(candidate);
        scaler = entry->scaler;
        d.loaded = true;
        d.loss_active = d.loss_checkpoint;
    }
    return d;
}

// ---------------------------------------------------------------------------
// On-disk mirroring: weights in the binary format, metadata in a text sidecar.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

inline void save_checkpoint_sidecar(const CheckpointEntry& e, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open sidecar " + path);
    out << "batch_index = " << e.batch_index << "\n";
    out << "stored_loss = " << detail::format_double(e.stored_loss) << "\n";
    out << "policy_id = " << e.policy_id << "\n";
    out << "timestamp = " << e.timestamp << "\n";
    out << "scaler_min = " << detail::format_double(e.scaler.data_min) << "\n";
    out << "scaler_max = " << detail::format_double(e.scaler.data_max) << "\n";
    out << "scaler_fitted = " << (e.scaler.fitted ? 1 : 0) << "\n";
    out << "feat_mean = " << detail::format_double(e.features.mean) << "\n";
    out << "feat_std = " << detail::format_double(e.features.stddev) << "\n";
    out << "feat_skew = " << detail::format_double(e.features.skewness) << "\n";
    out << "feat_kurt = " << detail::format_double(e.features.excess_kurtosis) << "\n";
    out << "feat_acf1 = " << detail::format_double(e.features.lag1_autocorr) << "\n";
    out << "raw_sample =";
    for (double v : e.features.raw_sample) out << ' ' << detail::format_double(v);
    out << "\n";
}

inline void RegimeMemory::persist(CheckpointEntry& entry) const {
    namespace fs = std::filesystem;
    fs::create_directories(persist_dir_);
    const std::string stem = persist_dir_ + "/ckpt_" + entry.policy_id + "_b" +
                             std::to_string(entry.batch_index);
    entry.weights_path = stem + ".rgw";
    save_weights(entry.weights, entry.weights_path);
    save_checkpoint_sidecar(entry, stem + ".meta");
}

} // namespace rgtta
