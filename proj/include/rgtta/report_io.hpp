#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rgtta/harness.hpp"

namespace rgtta {

inline nlohmann::json to_json(const RunRecord& r) {
    nlohmann::json j;
    j["policy"] = r.policy;
    j["model"] = r.model;
    j["dataset"] = r.dataset;
    j["horizon"] = r.horizon;
    j["seed"] = r.seed;
    j["batch"] = r.batch_index;
    j["mse"] = r.metrics.mse;
    j["mae"] = r.metrics.mae;
    j["rmse"] = r.metrics.rmse;
    j["smape"] = r.metrics.smape;
    j["wmape"] = r.metrics.wmape;
    j["direction_accuracy"] = r.metrics.direction_accuracy;
    j["adapt_time_seconds"] = r.adapt_time_seconds;
    char hash_buf[20];
    std::snprintf(hash_buf, sizeof(hash_buf), "%016llx",
                  static_cast<unsigned long long>(r.batch_hash));
    j["batch_hash"] = hash_buf;
    std::snprintf(hash_buf, sizeof(hash_buf), "%016llx",
                  static_cast<unsigned long long>(r.target_hash));
    j["target_hash"] = hash_buf;
    j["steps_used"] = r.adapt.steps_used;
    j["lr_used"] = r.adapt.lr_used;
    j["loaded_checkpoint"] = r.adapt.loaded_checkpoint;
    j["sim"] = r.adapt.sim;
    j["pre_loss"] = r.adapt.pre_loss;
    j["post_loss"] = r.adapt.post_loss;
    if (std::isfinite(r.adapt.ckpt_loss)) j["ckpt_loss"] = r.adapt.ckpt_loss;
    j["early_stopped"] = r.adapt.early_stopped;
    j["skipped"] = r.adapt.skipped;
    return j;
}

/// Append-only run log: one JSON record per line.
inline void write_run_log(const std::vector<RunRecord>& records, const std::string& path,
                          bool append = false) {
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    if (!out) throw std::runtime_error("write_run_log: cannot open " + path);
    for (const auto& r : records) out << to_json(r).dump() << '\n';
}

inline std::vector<nlohmann::json> read_run_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_run_log: cannot open " + path);
    std::vector<nlohmann::json> out;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(nlohmann::json::parse(line));
    return out;
}

// The summary CSV is deterministic for a fixed config (no wall-clock
// columns); timing goes to its own table.
inline const char* summary_csv_header() {
    return "policy,model,dataset,horizon,n_seeds,n_batches,mse,mae,rmse,smape,wmape,"
           "direction_accuracy";
}

inline void write_summary_csv(const std::vector<SummaryRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("write_summary_csv: cannot open " + path);
    out << summary_csv_header() << '\n';
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", r.metrics.mse,
                      r.metrics.mae, r.metrics.rmse, r.metrics.smape, r.metrics.wmape,
                      r.metrics.direction_accuracy);
        out << r.policy << ',' << r.model << ',' << r.dataset << ',' << r.horizon << ','
            << r.n_seeds << ',' << r.n_batches << ',' << buf << '\n';
    }
}

inline void write_timing_csv(const std::vector<SummaryRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("write_timing_csv: cannot open " + path);
    out << "policy,model,dataset,horizon,adapt_time_seconds\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.6f", r.adapt_time_seconds);
        out << r.policy << ',' << r.model << ',' << r.dataset << ',' << r.horizon << ',' << buf
            << '\n';
    }
}

inline std::vector<SummaryRow> read_summary_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_summary_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("read_summary_csv: empty file " + path);
    std::vector<SummaryRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 12)
            throw std::runtime_error("read_summary_csv: malformed row: " + line);
        SummaryRow r;
        r.policy = cells[0];
        r.model = cells[1];
        r.dataset = cells[2];
        r.horizon = std::stoi(cells[3]);
        r.n_seeds = std::stoi(cells[4]);
        r.n_batches = std::stoi(cells[5]);
        r.metrics.mse = std::stod(cells[6]);
        r.metrics.mae = std::stod(cells[7]);
        r.metrics.rmse = std::stod(cells[8]);
        r.metrics.smape = std::stod(cells[9]);
        r.metrics.wmape = std::stod(cells[10]);
        r.metrics.direction_accuracy = std::stod(cells[11]);
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace rgtta
