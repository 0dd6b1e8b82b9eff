// rgtta: command-line driver for the streaming adaptation benchmark.
//
// Subcommands:
//   bench     run the policy x model x dataset x horizon x seed cross-product
//   ablate    one-factor hyperparameter sweep for the regime-guided policy
//   gen-data  write synthetic regime scenarios as ETT-style CSV
//   stats     statistical comparison tables from a summary CSV
//
// Exit codes: 0 success, 1 usage error, 2 runtime abort.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "rgtta/report_io.hpp"
#include "rgtta/rgtta.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rgtta;

namespace {

constexpr const char* kVersion = "0.1.0";

int thread_budget() {
    if (const char* env = std::getenv("RG_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs `tasks` indexed jobs on up to thread_budget() workers.
void run_parallel(int n_tasks, const std::function<void(int)>& job) {
    const int workers = std::min(thread_budget(), n_tasks);
    if (workers <= 1) {
        for (int i = 0; i < n_tasks; ++i) job(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n_tasks; i = next.fetch_add(1)) job(i);
        });
    for (auto& t : pool) t.join();
}

void apply_config_overrides(PolicyConfig& cfg, const json& j) {
    auto num = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    num("alpha_base", cfg.alpha_base);
    num("gamma", cfg.gamma);
    num("k_max", cfg.k_max);
    num("k_min", cfg.k_min);
    num("patience", cfg.patience);
    num("eps_improve", cfg.eps_improve);
    num("early_stop", cfg.early_stop);
    num("tau", cfg.tau);
    num("gate", cfg.gate);
    num("memory_cap", cfg.memory_cap);
    num("fixed_steps", cfg.fixed_steps);
    num("ewc_lambda", cfg.ewc_lambda);
    num("fisher_samples", cfg.fisher_samples);
    num("fisher_clamp_max", cfg.fisher_clamp_max);
    num("fisher_decay", cfg.fisher_decay);
    num("alpha_min", cfg.alpha_min);
    num("alpha_max", cfg.alpha_max);
    num("kappa_sig", cfg.kappa_sig);
    num("ema_eta", cfg.ema_eta);
    num("rtab_cap", cfg.rtab_cap);
    num("rdb_cap", cfg.rdb_cap);
    num("warmup_factor", cfg.warmup_factor);
    num("eval_windows", cfg.eval_windows);
    num("grad_minibatch", cfg.grad_minibatch);
    num("smooth_l1_delta", cfg.smooth_l1_delta);
    num("train_epochs", cfg.train.epochs);
    num("train_lr", cfg.train.lr);
    num("train_minibatch", cfg.train.minibatch);
}

json config_to_json(const PolicyConfig& c) {
    return json{{"kind", policy_name(c.kind)},
                {"alpha_base", c.alpha_base},
                {"gamma", c.gamma},
                {"k_max", c.k_max},
                {"k_min", c.k_min},
                {"patience", c.patience},
                {"eps_improve", c.eps_improve},
                {"early_stop", c.early_stop},
                {"tau", c.tau},
                {"gate", c.gate},
                {"memory_cap", c.memory_cap},
                {"fixed_steps", c.fixed_steps},
                {"ewc_lambda", c.ewc_lambda},
                {"fisher_samples", c.fisher_samples},
                {"fisher_clamp_max", c.fisher_clamp_max},
                {"fisher_decay", c.fisher_decay},
                {"alpha_min", c.alpha_min},
                {"alpha_max", c.alpha_max},
                {"kappa_sig", c.kappa_sig},
                {"ema_eta", c.ema_eta},
                {"rtab_cap", c.rtab_cap},
                {"rdb_cap", c.rdb_cap},
                {"warmup_factor", c.warmup_factor},
                {"eval_windows", c.eval_windows},
                {"grad_minibatch", c.grad_minibatch},
                {"smooth_l1_delta", c.smooth_l1_delta},
                {"train_epochs", c.train.epochs},
                {"train_lr", c.train.lr},
                {"train_minibatch", c.train.minibatch}};
}

struct BenchOptions {
    std::vector<std::string> policies = {"tta", "ewc", "dynatta", "rgtta", "rgtta_ewc",
                                         "rgtta_dynatta"};
    std::vector<std::string> models = {"dlinear", "gru_small"};
    std::vector<std::string> datasets;
    std::vector<int> horizons = {96};
    int seeds = 3;
    std::string out_dir = "bench_out";
    std::string config_file;
    std::string data_dir = ".";
    std::string target_column;
    int synth_length = 10000;
    std::uint64_t synth_seed = 7;
    double synth_noise = 1.0;
    HarnessConfig harness;
    int hidden = 64;
};

TimeSeriesDataset resolve_dataset(const std::string& name, const BenchOptions& opt) {
    if (is_scenario_name(name))
        return generate(make_scenario(scenario_from_name(name), opt.synth_length, opt.synth_seed,
                                      opt.synth_noise));
    if (fs::exists(name)) return load_csv(name, opt.target_column);
    const std::string candidate = opt.data_dir + "/" + name + ".csv";
    if (fs::exists(candidate)) return load_csv(candidate, opt.target_column);
    throw CLI::ValidationError("dataset", "unknown dataset '" + name +
                                              "': not a synth_* scenario, a file, or present in " +
                                              opt.data_dir);
}

struct BenchResult {
    std::vector<RunRecord> records;
    std::vector<std::string> errors;
};

/// Runs the full cross-product. Initial training is shared across policies of
/// the same (model, dataset, horizon, seed) cell, mirroring the protocol where
/// every policy starts from the same trained model.
BenchResult run_bench(const BenchOptions& opt, const json& overrides) {
    std::vector<TimeSeriesDataset> datasets;
    for (const auto& name : opt.datasets) datasets.push_back(resolve_dataset(name, opt));
    std::vector<Arch> archs;
    for (const auto& m : opt.models) archs.push_back(arch_from_name(m));
    std::vector<PolicyConfig> configs;
    for (const auto& p : opt.policies) {
        PolicyConfig cfg = default_config(policy_from_name(p));
        apply_config_overrides(cfg, overrides);
        cfg.validate();
        configs.push_back(cfg);
    }

    struct Cell {
        int dataset, arch, horizon, seed;
    };
    std::vector<Cell> cells;
    for (int d = 0; d < static_cast<int>(datasets.size()); ++d)
        for (int a = 0; a < static_cast<int>(archs.size()); ++a)
            for (int h = 0; h < static_cast<int>(opt.horizons.size()); ++h)
                for (int s = 0; s < opt.seeds; ++s) cells.push_back({d, a, h, s});

    // Phase 1: one initial training per cell, shared by all policies.
    std::vector<InitialModel> initials(cells.size());
    std::vector<std::string> phase1_errors(cells.size());
    run_parallel(static_cast<int>(cells.size()), [&](int i) {
        const Cell& c = cells[static_cast<std::size_t>(i)];
        try {
            initials[static_cast<std::size_t>(i)] = train_initial(
                datasets[static_cast<std::size_t>(c.dataset)], archs[static_cast<std::size_t>(c.arch)],
                opt.horizons[static_cast<std::size_t>(c.horizon)],
                static_cast<std::uint64_t>(c.seed), opt.harness, configs.front().train, opt.hidden);
        } catch (const std::exception& e) {
            phase1_errors[static_cast<std::size_t>(i)] = e.what();
        }
    });

    // Phase 2: policy runs.
    const int n_runs = static_cast<int>(cells.size() * configs.size());
    std::vector<std::vector<RunRecord>> slots(static_cast<std::size_t>(n_runs));
    std::vector<std::string> errors(static_cast<std::size_t>(n_runs));
    run_parallel(n_runs, [&](int i) {
        const int cell_idx = i / static_cast<int>(configs.size());
        const int cfg_idx = i % static_cast<int>(configs.size());
        if (!phase1_errors[static_cast<std::size_t>(cell_idx)].empty()) {
            errors[static_cast<std::size_t>(i)] =
                "initial training failed: " + phase1_errors[static_cast<std::size_t>(cell_idx)];
            return;
        }
        const Cell& c = cells[static_cast<std::size_t>(cell_idx)];
        try {
            slots[static_cast<std::size_t>(i)] = run_stream(
                datasets[static_cast<std::size_t>(c.dataset)], archs[static_cast<std::size_t>(c.arch)],
                configs[static_cast<std::size_t>(cfg_idx)],
                opt.horizons[static_cast<std::size_t>(c.horizon)],
                static_cast<std::uint64_t>(c.seed), opt.harness,
                &initials[static_cast<std::size_t>(cell_idx)], opt.hidden);
        } catch (const RunAbortError& e) {
            slots[static_cast<std::size_t>(i)] = e.partial;
            errors[static_cast<std::size_t>(i)] = e.what();
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(i)] = e.what();
        }
    });

    BenchResult result;
    for (auto& s : slots)
        result.records.insert(result.records.end(), s.begin(), s.end());
    for (auto& e : errors)
        if (!e.empty()) result.errors.push_back(e);
    for (std::size_t i = 0; i < phase1_errors.size(); ++i)
        if (!phase1_errors[i].empty())
            result.errors.push_back("cell " + std::to_string(i) + ": " + phase1_errors[i]);
    return result;
}

json build_manifest(const BenchOptions& opt, const json& overrides,
                    const std::vector<PolicyConfig>& configs) {
    json m;
    m["tool"] = "rgtta";
    m["version"] = kVersion;
    m["policies"] = opt.policies;
    m["models"] = opt.models;
    m["datasets"] = opt.datasets;
    m["horizons"] = opt.horizons;
    json seeds = json::array();
    for (int s = 0; s < opt.seeds; ++s) seeds.push_back(s);
    m["seeds"] = seeds;
    m["harness"] = {{"initial_train_size", opt.harness.initial_train_size},
                    {"batch_size", opt.harness.batch_size},
                    {"max_batches", opt.harness.max_batches},
                    {"seq_len", opt.harness.seq_len}};
    m["hidden"] = opt.hidden;
    m["synth"] = {{"length", opt.synth_length},
                  {"seed", opt.synth_seed},
                  {"noise_std", opt.synth_noise}};
    m["config_overrides"] = overrides;
    json cfgs = json::array();
    for (const auto& c : configs) cfgs.push_back(config_to_json(c));
    m["policy_configs"] = cfgs;
    json hashes = json::object();
    for (const auto& name : opt.datasets) {
        BenchOptions tmp = opt;
        const auto ds = resolve_dataset(name, tmp);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(detail::hash_doubles(ds.values)));
        hashes[name] = buf;
    }
    m["dataset_hashes"] = hashes;
    return m;
}

int cmd_bench(const BenchOptions& opt) {
    json overrides = json::object();
    if (!opt.config_file.empty()) {
        std::ifstream in(opt.config_file);
        if (!in) {
            std::cerr << "cannot open config file " << opt.config_file << "\n";
            return 1;
        }
        in >> overrides;
    }
    // Validate every name before any run.
    std::vector<PolicyConfig> configs;
    try {
        for (const auto& p : opt.policies) {
            PolicyConfig cfg = default_config(policy_from_name(p));
            apply_config_overrides(cfg, overrides);
            cfg.validate();
            configs.push_back(cfg);
        }
        for (const auto& m : opt.models) arch_from_name(m);
        BenchOptions probe = opt;
        for (const auto& d : opt.datasets) resolve_dataset(d, probe);
        opt.harness.validate();
    } catch (const std::exception& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    }

    const auto result = run_bench(opt, overrides);
    fs::create_directories(opt.out_dir);
    write_run_log(result.records, opt.out_dir + "/run_log.jsonl");
    if (!result.records.empty()) {
        const auto agg = aggregate(result.records);
        write_summary_csv(agg.rows, opt.out_dir + "/summary.csv");
        write_timing_csv(agg.rows, opt.out_dir + "/timing.csv");
        std::ofstream wins(opt.out_dir + "/wins.csv", std::ios::trunc);
        wins << "policy,wins,total_configs\n";
        for (const auto& [policy, count] : agg.win_counts)
            wins << policy << ',' << count << ',' << agg.config_wins.size() << '\n';
    }
    std::ofstream mf(opt.out_dir + "/manifest.json", std::ios::trunc);
    mf << build_manifest(opt, overrides, configs).dump(2) << '\n';

    if (!result.errors.empty()) {
        for (const auto& e : result.errors) std::cerr << "abort: " << e << "\n";
        std::cerr << result.errors.size() << " run(s) aborted; partial results written to "
                  << opt.out_dir << "\n";
        return 2;
    }
    std::cout << result.records.size() << " records written to " << opt.out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

struct AblateOptions {
    std::string param;
    std::vector<std::string> values;
    std::string dataset = "synth_recurring";
    std::string model = "gru_small";
    int horizon = 96;
    int seeds = 3;
    std::string out_dir = "ablate_out";
    BenchOptions base; // synth/csv resolution + harness settings
};

int cmd_ablate(const AblateOptions& opt) {
    static const std::map<std::string, std::string> defaults = {{"gamma", "0.67"},
                                                                {"loss_gate", "0.7"},
                                                                {"memory_cap", "5"},
                                                                {"ckpt_threshold", "0.75"},
                                                                {"early_stop", "loss_driven"}};
    const auto def_it = defaults.find(opt.param);
    if (def_it == defaults.end()) {
        std::cerr << "usage error: unknown sweep parameter '" << opt.param
                  << "' (expected gamma, loss_gate, memory_cap, ckpt_threshold, early_stop)\n";
        return 1;
    }
    std::vector<std::string> values = opt.values;
    if (std::find(values.begin(), values.end(), def_it->second) == values.end())
        values.push_back(def_it->second);

    auto config_for = [&](const std::string& value) {
        PolicyConfig cfg = default_config(PolicyKind::RgTta);
        if (opt.param == "gamma")
            cfg.gamma = std::stod(value);
        else if (opt.param == "loss_gate")
            cfg.gate = std::stod(value);
        else if (opt.param == "memory_cap")
            cfg.memory_cap = std::stoi(value);
        else if (opt.param == "ckpt_threshold")
            cfg.tau = std::stod(value);
        else if (opt.param == "early_stop") {
            if (value == "fixed20") {
                cfg.early_stop = false;
                cfg.fixed_steps = 20;
            } else if (value == "loss_driven") {
                cfg.early_stop = true;
            } else {
                throw CLI::ValidationError("early_stop",
                                           "values must be fixed20 or loss_driven, got " + value);
            }
        }
        cfg.validate();
        return cfg;
    };

    TimeSeriesDataset ds;
    std::vector<PolicyConfig> configs;
    try {
        ds = resolve_dataset(opt.dataset, opt.base);
        for (const auto& v : values) configs.push_back(config_for(v));
        arch_from_name(opt.model);
    } catch (const std::exception& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    }
    const Arch arch = arch_from_name(opt.model);

    // Shared initial models per seed; one streaming run per (value, seed).
    std::vector<InitialModel> initials(static_cast<std::size_t>(opt.seeds));
    run_parallel(opt.seeds, [&](int s) {
        initials[static_cast<std::size_t>(s)] =
            train_initial(ds, arch, opt.horizon, static_cast<std::uint64_t>(s), opt.base.harness,
                          configs.front().train, opt.base.hidden);
    });

    const int n_runs = static_cast<int>(values.size()) * opt.seeds;
    std::vector<std::vector<RunRecord>> slots(static_cast<std::size_t>(n_runs));
    std::vector<std::string> errors(static_cast<std::size_t>(n_runs));
    run_parallel(n_runs, [&](int i) {
        const int vi = i / opt.seeds;
        const int s = i % opt.seeds;
        try {
            slots[static_cast<std::size_t>(i)] = run_stream(
                ds, arch, configs[static_cast<std::size_t>(vi)], opt.horizon,
                static_cast<std::uint64_t>(s), opt.base.harness, &initials[static_cast<std::size_t>(s)],
                opt.base.hidden);
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(i)] = e.what();
        }
    });
    for (const auto& e : errors)
        if (!e.empty()) {
            std::cerr << "abort: " << e << "\n";
            return 2;
        }

    std::vector<double> mean_mse(values.size(), 0.0);
    std::vector<RunRecord> all_records;
    for (std::size_t vi = 0; vi < values.size(); ++vi) {
        double acc = 0.0;
        int n = 0;
        for (int s = 0; s < opt.seeds; ++s) {
            const auto& recs = slots[vi * static_cast<std::size_t>(opt.seeds) + static_cast<std::size_t>(s)];
            double run_mse = 0.0;
            for (const auto& r : recs) run_mse += r.metrics.mse;
            if (!recs.empty()) {
                acc += run_mse / static_cast<double>(recs.size());
                ++n;
            }
            all_records.insert(all_records.end(), recs.begin(), recs.end());
        }
        mean_mse[vi] = n > 0 ? acc / n : 0.0;
    }
    const auto def_pos = static_cast<std::size_t>(
        std::find(values.begin(), values.end(), def_it->second) - values.begin());
    const double def_mse = mean_mse[def_pos];

    fs::create_directories(opt.out_dir);
    write_run_log(all_records, opt.out_dir + "/run_log.jsonl");
    std::ofstream out(opt.out_dir + "/ablation.csv", std::ios::trunc);
    out << "parameter,value,mean_mse,delta_vs_default_pct\n";
    for (std::size_t vi = 0; vi < values.size(); ++vi) {
        const double delta = def_mse != 0.0 ? 100.0 * (mean_mse[vi] - def_mse) / def_mse : 0.0;
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%.17g,%.4f", mean_mse[vi], delta);
        out << opt.param << ',' << values[vi] << ',' << buf << '\n';
    }
    std::cout << "ablation table written to " << opt.out_dir << "/ablation.csv\n";
    return 0;
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

int cmd_gen_data(const std::string& scenario, int length, std::uint64_t seed, double noise_std,
                 const std::string& out_dir) {
    std::vector<Scenario> kinds;
    if (scenario == "all") {
        kinds = {Scenario::Stable,     Scenario::TrendBreak,    Scenario::SlowDrift,
                 Scenario::FastSwitch, Scenario::Recurring,     Scenario::Volatility,
                 Scenario::ShockRecovery, Scenario::MultiRegime};
    } else {
        try {
            kinds = {scenario_from_name(scenario)};
        } catch (const std::exception& e) {
            std::cerr << "usage error: " << e.what() << "\n";
            return 1;
        }
    }
    fs::create_directories(out_dir);
    for (Scenario k : kinds) {
        const auto ds = generate(make_scenario(k, length, seed, noise_std));
        const std::string path = out_dir + "/" + ds.name + ".csv";
        write_csv(ds, path);
        std::cout << path << " (" << ds.values.size() << " rows)\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

int cmd_stats(const std::string& summary_path, const std::string& out_dir, double alpha) {
    std::vector<SummaryRow> rows;
    try {
        rows = read_summary_csv(summary_path);
    } catch (const std::exception& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    }
    if (rows.empty()) {
        std::cerr << "usage error: summary has no rows\n";
        return 1;
    }

    using CfgKey = std::tuple<std::string, std::string, int>;
    std::map<CfgKey, std::map<std::string, double>> mse; // config -> policy -> mse
    std::set<std::string> policies;
    for (const auto& r : rows) {
        mse[{r.model, r.dataset, r.horizon}][r.policy] = r.metrics.mse;
        policies.insert(r.policy);
    }

    fs::create_directories(out_dir);

    // Pairwise baseline vs regime-guided tables.
    const std::vector<std::pair<std::string, std::string>> pairs = {
        {"tta", "rgtta"}, {"ewc", "rgtta_ewc"}, {"dynatta", "rgtta_dynatta"}};
    int n_pairs = 0;
    for (const auto& [base, rg] : pairs)
        if (policies.count(base) && policies.count(rg)) ++n_pairs;
    std::ofstream pw(out_dir + "/pairwise.csv", std::ios::trunc);
    pw << "baseline,rg_variant,n,delta_mse_avg_pct,delta_mse_median_pct,rg_wins,p_value,"
          "bonferroni_alpha,significant\n";
    for (const auto& [base, rg] : pairs) {
        if (!policies.count(base) || !policies.count(rg)) continue;
        std::vector<double> diffs, rel;
        int wins = 0;
        for (const auto& [key, by_policy] : mse) {
            const auto b = by_policy.find(base);
            const auto r = by_policy.find(rg);
            if (b == by_policy.end() || r == by_policy.end()) continue;
            diffs.push_back(r->second - b->second);
            if (b->second != 0.0) rel.push_back(100.0 * (r->second - b->second) / b->second);
            wins += r->second < b->second;
        }
        if (static_cast<int>(diffs.size()) < 6) {
            std::cerr << "skipping " << base << " vs " << rg << ": fewer than 6 configurations\n";
            continue;
        }
        const auto test = stats::wilcoxon_signed_rank(diffs, /*one_sided=*/true);
        double avg = 0.0;
        for (double v : rel) avg += v;
        avg /= rel.empty() ? 1.0 : static_cast<double>(rel.size());
        std::vector<double> med_buf = rel;
        std::sort(med_buf.begin(), med_buf.end());
        const double median = med_buf.empty() ? 0.0
                              : med_buf.size() % 2 == 1
                                  ? med_buf[med_buf.size() / 2]
                                  : 0.5 * (med_buf[med_buf.size() / 2 - 1] + med_buf[med_buf.size() / 2]);
        const double threshold =
            stats::bonferroni_threshold(alpha, std::max(1, n_pairs));
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%zu,%.4f,%.4f,%d,%.6g,%.6g,%d", diffs.size(), avg, median,
                      wins, test.p_value, threshold, test.p_value < threshold ? 1 : 0);
        pw << base << ',' << rg << ',' << buf << '\n';
    }

    // Win counts.
    std::map<std::string, int> wins;
    int n_cfg = 0;
    for (const auto& [key, by_policy] : mse) {
        double best = by_policy.begin()->second;
        for (const auto& [p, v] : by_policy) best = std::min(best, v);
        for (const auto& [p, v] : by_policy)
            if (v == best) wins[p] += 1;
        ++n_cfg;
    }
    std::ofstream wc(out_dir + "/win_counts.csv", std::ios::trunc);
    wc << "policy,wins,total_configs\n";
    for (const auto& [p, n] : wins) wc << p << ',' << n << ',' << n_cfg << '\n';

    // Friedman + Nemenyi over configs that carry every policy.
    std::vector<std::string> plist(policies.begin(), policies.end());
    std::vector<std::vector<double>> matrix;
    for (const auto& [key, by_policy] : mse) {
        if (by_policy.size() != plist.size()) continue;
        std::vector<double> row;
        for (const auto& p : plist) row.push_back(by_policy.at(p));
        matrix.push_back(std::move(row));
    }
    std::ofstream fr(out_dir + "/friedman.txt", std::ios::trunc);
    if (matrix.size() >= 2 && plist.size() >= 2) {
        const auto res = stats::friedman(matrix);
        const double cd = plist.size() <= 10
                              ? stats::nemenyi_cd(static_cast<int>(plist.size()),
                                                  static_cast<int>(matrix.size()), alpha)
                              : 0.0;
        fr << "configurations: " << matrix.size() << "\npolicies: " << plist.size() << "\n";
        fr << "friedman_chi2: " << res.chi2 << "\np_value: " << res.p_value << "\n";
        fr << "nemenyi_cd(alpha=" << alpha << "): " << cd << "\n";
        for (std::size_t j = 0; j < plist.size(); ++j)
            fr << "mean_rank " << plist[j] << ": " << res.mean_ranks[j] << "\n";
        std::ofstream cdf(out_dir + "/cd_diagram.csv", std::ios::trunc);
        cdf << "policy,mean_rank,cd\n";
        for (std::size_t j = 0; j < plist.size(); ++j)
            cdf << plist[j] << ',' << res.mean_ranks[j] << ',' << cd << '\n';
    } else {
        fr << "not enough complete configurations for the Friedman test\n";
    }
    std::cout << "statistics written to " << out_dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Streaming test-time adaptation benchmark"};
    app.require_subcommand(1);

    // bench
    BenchOptions bopt;
    auto* bench = app.add_subcommand("bench", "Run the streaming benchmark cross-product");
    bench->add_option("--policies", bopt.policies,
                      "Policies: tta ewc dynatta rgtta rgtta_ewc rgtta_dynatta retrain");
    bench->add_option("--models", bopt.models, "Models: gru_small dlinear");
    bench->add_option("--datasets", bopt.datasets, "synth_* names or CSV files")->required();
    bench->add_option("--horizons", bopt.horizons, "Forecast horizons");
    bench->add_option("--seeds", bopt.seeds, "Number of seeds (expands to 0..N-1)");
    bench->add_option("--out", bopt.out_dir, "Output directory");
    bench->add_option("--config", bopt.config_file, "JSON file overriding policy config fields");
    bench->add_option("--data-dir", bopt.data_dir, "Directory searched for <dataset>.csv");
    bench->add_option("--target", bopt.target_column, "CSV target column (default OT/last)");
    bench->add_option("--synth-length", bopt.synth_length, "Synthetic series length");
    bench->add_option("--synth-seed", bopt.synth_seed, "Synthetic generator seed");
    bench->add_option("--synth-noise", bopt.synth_noise, "Synthetic base noise std");
    bench->add_option("--initial-train", bopt.harness.initial_train_size, "Initial training rows");
    bench->add_option("--batch-size", bopt.harness.batch_size, "Streaming batch size");
    bench->add_option("--max-batches", bopt.harness.max_batches, "Maximum streaming batches");
    bench->add_option("--seq-len", bopt.harness.seq_len, "Model input length L");
    bench->add_option("--hidden", bopt.hidden, "GRU hidden size");

    // ablate
    AblateOptions aopt;
    auto* ablate = app.add_subcommand("ablate", "One-factor hyperparameter sweep (rgtta)");
    ablate->add_option("--param", aopt.param,
                       "Sweep parameter: gamma loss_gate memory_cap ckpt_threshold early_stop")
        ->required();
    ablate->add_option("--values", aopt.values, "Values to sweep")->required();
    ablate->add_option("--dataset", aopt.dataset, "Dataset (synth_* or CSV)");
    ablate->add_option("--model", aopt.model, "Model");
    ablate->add_option("--horizon", aopt.horizon, "Forecast horizon");
    ablate->add_option("--seeds", aopt.seeds, "Number of seeds");
    ablate->add_option("--out", aopt.out_dir, "Output directory");
    ablate->add_option("--synth-length", aopt.base.synth_length, "Synthetic series length");
    ablate->add_option("--synth-seed", aopt.base.synth_seed, "Synthetic generator seed");
    ablate->add_option("--max-batches", aopt.base.harness.max_batches, "Maximum batches");

    // gen-data
    std::string gd_scenario = "all";
    int gd_length = 10000;
    std::uint64_t gd_seed = 7;
    double gd_noise = 1.0;
    std::string gd_out = "data";
    auto* gen = app.add_subcommand("gen-data", "Write synthetic scenarios as ETT-style CSV");
    gen->add_option("--scenario", gd_scenario, "Scenario name or 'all'");
    gen->add_option("--length", gd_length, "Series length");
    gen->add_option("--seed", gd_seed, "Generator seed");
    gen->add_option("--noise-std", gd_noise, "Base noise std");
    gen->add_option("--out", gd_out, "Output directory");

    // stats
    std::string st_summary;
    std::string st_out = "stats_out";
    double st_alpha = 0.05;
    auto* stats_cmd = app.add_subcommand("stats", "Statistical comparison from a summary CSV");
    stats_cmd->add_option("--summary", st_summary, "summary.csv from bench")->required();
    stats_cmd->add_option("--out", st_out, "Output directory");
    stats_cmd->add_option("--alpha", st_alpha, "Significance level (0.05 or 0.10)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (bench->parsed()) return cmd_bench(bopt);
        if (ablate->parsed()) return cmd_ablate(aopt);
        if (gen->parsed()) return cmd_gen_data(gd_scenario, gd_length, gd_seed, gd_noise, gd_out);
        if (stats_cmd->parsed()) return cmd_stats(st_summary, st_out, st_alpha);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "abort: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
