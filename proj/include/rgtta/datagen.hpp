#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rgtta/core.hpp"
#include "rgtta/detail/rng.hpp"

namespace rgtta {

enum class Scenario {
    Stable,
    TrendBreak,
    SlowDrift,
    FastSwitch,
    Recurring,
    Volatility,
    ShockRecovery,
    MultiRegime,
};

inline const char* scenario_name(Scenario s) {
    switch (s) {
        case Scenario::Stable: return "synth_stable";
        case Scenario::TrendBreak: return "synth_trend_break";
        case Scenario::SlowDrift: return "synth_slow_drift";
        case Scenario::FastSwitch: return "synth_fast_switch";
        case Scenario::Recurring: return "synth_recurring";
        case Scenario::Volatility: return "synth_volatility";
        case Scenario::ShockRecovery: return "synth_shock_recovery";
        case Scenario::MultiRegime: return "synth_multi_regime";
    }
    return "?";
}

inline bool is_scenario_name(const std::string& s) { return s.rfind("synth_", 0) == 0; }

inline Scenario scenario_from_name(const std::string& s) {
    for (Scenario sc : {Scenario::Stable, Scenario::TrendBreak, Scenario::SlowDrift,
                        Scenario::FastSwitch, Scenario::Recurring, Scenario::Volatility,
                        Scenario::ShockRecovery, Scenario::MultiRegime})
        if (s == scenario_name(sc)) return sc;
    throw std::invalid_argument("unknown scenario: " + s);
}

/// One regime of a scenario: signal level (plus optional per-sample slope),
/// seasonal amplitude and a multiplier on the base noise scale, active from
/// start_index until the next segment begins.
struct RegimeSegment {
    int start_index = 0;
    double level = 0.0;
    double slope = 0.0;
    double amplitude = 2.0;
    double noise_scale = 1.0;
};

/// Deterministic recipe for one synthetic series. All magnitudes (levels,
/// amplitudes, AR coefficient, shock size and decay) are generator defaults
/// documented here; the regime *structure* is what each scenario isolates.
struct ScenarioSpec {
    Scenario kind = Scenario::Stable;
    int length = 10000;
    int season_length = 50;
    double noise_std = 1.0;
    std::uint64_t seed = 7;
    double ar_coef = 0.7;
    std::vector<RegimeSegment> schedule;

    // volatility scenario: smooth raised-cosine interpolation of noise std
    double vol_low = 0.5;
    double vol_high = 3.0;
    int vol_period = 5000;

    // shock_recovery scenario
    int shock_index = -1;
    double shock_size = 0.0;
    double shock_tau = 250.0;

    void validate() const {
        if (length < season_length * 3 || season_length < 2)
            throw std::invalid_argument("ScenarioSpec: series too short");
        if (noise_std < 0 || schedule.empty() || schedule.front().start_index != 0)
            throw std::invalid_argument("ScenarioSpec: bad schedule");
        for (std::size_t i = 1; i < schedule.size(); ++i)
            if (schedule[i].start_index <= schedule[i - 1].start_index)
                throw std::invalid_argument("ScenarioSpec: schedule must be strictly increasing");
    }
};

/// Builds the regime schedule for a scenario. The schedule (including the
/// randomized multi-regime ordering) is a pure function of (kind, length,
/// seed), so generation stays reproducible.
inline ScenarioSpec make_scenario(Scenario kind, int length = 10000, std::uint64_t seed = 7,
                                  double noise_std = 1.0) {
    ScenarioSpec spec;
    spec.kind = kind;
    spec.length = length;
    spec.seed = seed;
    spec.noise_std = noise_std;
    switch (kind) {
        case Scenario::Stable:
            spec.schedule = {{0, 10.0, 0.0, 2.0, 1.0}};
            break;
        case Scenario::TrendBreak: {
            const int mid = length / 2;
            const double slope = 0.005;
            spec.schedule = {{0, 0.0, slope, 2.0, 1.0}, {mid, slope * mid, -slope, 2.0, 1.0}};
            break;
        }
        case Scenario::SlowDrift:
            spec.schedule = {{0, 0.0, 15.0 / length, 2.0, 1.0}};
            break;
        case Scenario::FastSwitch: {
            const int period = 2 * spec.season_length;
            for (int start = 0, r = 0; start < length; start += period, r ^= 1)
                spec.schedule.push_back(r == 0 ? RegimeSegment{start, 0.0, 0.0, 1.5, 1.0}
                                               : RegimeSegment{start, 6.0, 0.0, 3.0, 1.0});
            break;
        }
        case Scenario::Recurring: {
            const RegimeSegment regimes[3] = {{0, 0.0, 0.0, 1.5, 1.0},
                                              {0, 8.0, 0.0, 3.5, 1.0},
                                              {0, -6.0, 0.0, 2.5, 1.0}};
            const int seg = 500; // 3 regimes cycling every 1500 samples
            for (int start = 0, r = 0; start < length; start += seg, r = (r + 1) % 3) {
                RegimeSegment s = regimes[r];
                s.start_index = start;
                spec.schedule.push_back(s);
            }
            break;
        }
        case Scenario::Volatility:
            spec.schedule = {{0, 5.0, 0.0, 2.0, 1.0}};
            break;
        case Scenario::ShockRecovery:
            spec.schedule = {{0, 2.0, 0.0, 2.0, 1.0}};
            spec.shock_index = static_cast<int>(0.6 * length);
            spec.shock_size = 8.0 * noise_std;
            spec.shock_tau = 250.0;
            break;
        case Scenario::MultiRegime: {
            const RegimeSegment regimes[4] = {{0, 0.0, 0.0, 1.5, 1.0},
                                              {0, 5.0, 0.0, 2.5, 1.0},
                                              {0, -5.0, 0.0, 3.5, 1.0},
                                              {0, 10.0, 0.0, 2.0, 1.0}};
            auto rng = detail::make_rng(detail::mix(seed, 0x5E69));
            int start = 0, prev = -1;
            while (start < length) {
                int r = static_cast<int>(detail::bounded(rng, 4));
                if (r == prev) r = (r + 1) % 4;
                RegimeSegment s = regimes[r];
                s.start_index = start;
                spec.schedule.push_back(s);
                start += 800 + static_cast<int>(detail::bounded(rng, 1201)); // 800..2000
                prev = r;
            }
            break;
        }
    }
    return spec;
}

/// Base signal level + a * sin(2*pi*t / season) + AR(1) noise, with the
/// scenario's regime schedule applied. Pure function of the spec.
inline TimeSeriesDataset generate(const ScenarioSpec& spec) {
    spec.validate();
    TimeSeriesDataset ds;
    ds.name = scenario_name(spec.kind);
    ds.frequency = "synthetic";
    ds.season_length = spec.season_length;
    ds.values.resize(static_cast<std::size_t>(spec.length));

    auto rng = detail::make_rng(detail::mix(spec.seed, 0xDA7A));
    double ar = 0.0;
    std::size_t seg = 0;
    const double two_pi = 6.283185307179586476925287;
    for (int t = 0; t < spec.length; ++t) {
        while (seg + 1 < spec.schedule.size() && spec.schedule[seg + 1].start_index <= t) ++seg;
        const RegimeSegment& s = spec.schedule[seg];
        double sigma = spec.noise_std * s.noise_scale;
        if (spec.kind == Scenario::Volatility)
            sigma = spec.vol_low + (spec.vol_high - spec.vol_low) *
                                       (1.0 - std::cos(two_pi * t / spec.vol_period)) * 0.5;
        ar = spec.ar_coef * ar + detail::gauss(rng) * sigma;
        double level = s.level + s.slope * (t - s.start_index);
        if (spec.shock_index >= 0 && t >= spec.shock_index)
            level += spec.shock_size * std::exp(-(t - spec.shock_index) / spec.shock_tau);
        ds.values[static_cast<std::size_t>(t)] =
            level + s.amplitude * std::sin(two_pi * t / spec.season_length) + ar;
    }
    return ds;
}

// ---------------------------------------------------------------------------
// ETT-style CSV: timestamp column first (kept only for ordering), numeric
// columns after, header row required.
// ---------------------------------------------------------------------------

/// Season length by dataset naming convention; synthetic and unknown names
/// fall back to 50 and 24 respectively.
inline int season_for_name(const std::string& name) {
    std::string s;
    for (char c : name) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (s.rfind("etth", 0) == 0) return 24;
    if (s.rfind("ettm", 0) == 0) return 96;
    if (s.rfind("weather", 0) == 0) return 144;
    if (s.rfind("exchange", 0) == 0) return 5;
    if (s.rfind("synth", 0) == 0) return 50;
    return 24;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_cell(const std::string& cell, std::size_t row, const std::string& col) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    while (end && *end == ' ') ++end;
    if (end == begin || (end && *end != '\0'))
        throw std::runtime_error("CSV: non-numeric cell at row " + std::to_string(row) +
                                 ", column " + col + ": '" + cell + "'");
    if (!std::isfinite(v))
        throw std::runtime_error("CSV: non-finite value at row " + std::to_string(row) +
                                 ", column " + col);
    return v;
}

inline std::string file_stem(const std::string& path) {
    const auto slash = path.find_last_of("/\\");
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    const auto dot = base.find_last_of('.');
    return dot == std::string::npos ? base : base.substr(0, dot);
}

} // namespace detail

/// Loads the target channel of an ETT-style CSV. The target is chosen by
/// header name (default "OT"); when no name is given and "OT" is absent, the
/// last column is used. Rows with NaN or non-numeric cells are rejected with
/// the row and column in the message.
inline TimeSeriesDataset load_csv(const std::string& path, const std::string& target_column = "") {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_csv: empty file " + path);
    const auto header = detail::split_csv_line(line);
    if (header.size() < 2)
        throw std::runtime_error("load_csv: need a timestamp column and at least one value column");

    std::size_t target = header.size() - 1;
    if (!target_column.empty()) {
        bool found = false;
        for (std::size_t i = 1; i < header.size(); ++i)
            if (header[i] == target_column) {
                target = i;
                found = true;
                break;
            }
        if (!found)
            throw std::runtime_error("load_csv: target column '" + target_column +
                                     "' not found in " + path);
    } else {
        for (std::size_t i = 1; i < header.size(); ++i)
            if (header[i] == "OT") {
                target = i;
                break;
            }
    }

    TimeSeriesDataset ds;
    ds.name = detail::file_stem(path);
    ds.frequency = "file";
    ds.season_length = season_for_name(ds.name);
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error("load_csv: row " + std::to_string(row) + " has " +
                                     std::to_string(cells.size()) + " cells, expected " +
                                     std::to_string(header.size()));
        ds.values.push_back(detail::parse_cell(cells[target], row, header[target]));
    }
    if (ds.values.empty()) throw std::runtime_error("load_csv: no data rows in " + path);
    return ds;
}

/// Writes a dataset in the same ETT-style shape the loader reads
/// (integer timestamps, one "OT" column, full double precision).
inline void write_csv(const TimeSeriesDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("write_csv: cannot open " + path);
    out << "date,OT\n";
    char buf[40];
    for (std::size_t i = 0; i < ds.values.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", ds.values[i]);
        out << i << ',' << buf << '\n';
    }
    if (!out) throw std::runtime_error("write_csv: write failed for " + path);
}

} // namespace rgtta
