#pragma once

#include "shapmine/analysis.hpp"
#include "shapmine/conformance.hpp"
#include "shapmine/csv.hpp"
#include "shapmine/discovery.hpp"
#include "shapmine/error.hpp"
#include "shapmine/generator.hpp"
#include "shapmine/shapley.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace shapmine {

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct RunConfig {
    std::vector<FeatureId> features = [] {
        std::vector<FeatureId> all;
        for (const auto& f : feature_catalog()) all.push_back(f.id);
        return all;
    }();
    int values_per_feature = 10;
    int k_max = 3;
    std::vector<std::string> miners = {"inductive", "dfg"};
    std::vector<std::string> metrics = {"fitness", "precision", "fscore", "size", "cfc"};
    ResourceLimits limits;
    long generation_budget = 2000;
    double generation_epsilon = 0.05;
    MinerConfig miner_config;
    MeasureConfig measure_config;
    double analysis_alpha = 0.05;
    int feasibility_buckets = 10;
    std::uint64_t seed = 42;
    int parallelism = 0; // 0: SHAPMINE_JOBS env var, then hardware concurrency
    std::map<FeatureId, std::vector<double>> grid_overrides;
};

inline void validate(const RunConfig& c) {
    if (c.features.empty()) throw DomainError("run config: no features");
    std::set<FeatureId> dedup(c.features.begin(), c.features.end());
    if (dedup.size() != c.features.size()) throw DomainError("run config: duplicate features");
    if (c.values_per_feature < 1) throw DomainError("run config: values_per_feature < 1");
    if (c.k_max < 1 || c.k_max > static_cast<int>(c.features.size()))
        throw DomainError("run config: k_max outside [1, |features|]");
    if (c.miners.empty()) throw DomainError("run config: no miners");
    if (c.metrics.empty()) throw DomainError("run config: no metrics");
    if (c.generation_budget < 1) throw DomainError("run config: generation budget < 1");
    for (const auto& [f, grid] : c.grid_overrides)
        if (grid.empty()) throw DomainError("run config: empty grid override");
}

inline nlohmann::json run_config_to_json(const RunConfig& c) {
    nlohmann::json j;
    std::vector<std::string> feature_names;
    for (auto f : c.features) feature_names.push_back(feature_name(f));
    j["features"] = feature_names;
    j["values_per_feature"] = c.values_per_feature;
    j["k_max"] = c.k_max;
    j["miners"] = c.miners;
    j["metrics"] = c.metrics;
    j["limits"] = {{"timeout_ms", c.limits.timeout_ms}, {"disk_cap_bytes", c.limits.disk_cap_bytes}};
    j["generation"] = {{"budget", c.generation_budget}, {"epsilon", c.generation_epsilon}};
    j["discovery"] = {{"dfg_eta", c.miner_config.dfg_eta},
                      {"concurrency_balance", c.miner_config.concurrency_balance},
                      {"soundness_state_cap", c.measure_config.soundness_state_cap},
                      {"replay_silent_depth", c.measure_config.silent_depth_cap}};
    j["analysis"] = {{"alpha", c.analysis_alpha}, {"buckets", c.feasibility_buckets}};
    j["seed"] = c.seed;
    j["parallelism"] = c.parallelism;
    if (!c.grid_overrides.empty()) {
        nlohmann::json grids;
        for (const auto& [f, grid] : c.grid_overrides) grids[feature_name(f)] = grid;
        j["grids"] = grids;
    }
    return j;
}

/// All fields optional; missing ones take the documented defaults.
inline RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c;
    if (j.contains("features")) {
        c.features.clear();
        for (const auto& name : j.at("features")) c.features.push_back(feature_from_name(name));
    }
    if (j.contains("values_per_feature")) c.values_per_feature = j.at("values_per_feature");
    if (j.contains("k_max")) c.k_max = j.at("k_max");
    if (j.contains("miners")) c.miners = j.at("miners").get<std::vector<std::string>>();
    if (j.contains("metrics")) c.metrics = j.at("metrics").get<std::vector<std::string>>();
    if (j.contains("limits")) {
        const auto& l = j.at("limits");
        if (l.contains("timeout_ms")) c.limits.timeout_ms = l.at("timeout_ms");
        if (l.contains("disk_cap_bytes")) c.limits.disk_cap_bytes = l.at("disk_cap_bytes");
    }
    if (j.contains("generation")) {
        const auto& g = j.at("generation");
        if (g.contains("budget")) c.generation_budget = g.at("budget");
        if (g.contains("epsilon")) c.generation_epsilon = g.at("epsilon");
    }
    if (j.contains("discovery")) {
        const auto& d = j.at("discovery");
        if (d.contains("dfg_eta")) c.miner_config.dfg_eta = d.at("dfg_eta");
        if (d.contains("concurrency_balance")) c.miner_config.concurrency_balance = d.at("concurrency_balance");
        if (d.contains("soundness_state_cap")) c.measure_config.soundness_state_cap = d.at("soundness_state_cap");
        if (d.contains("replay_silent_depth")) c.measure_config.silent_depth_cap = d.at("replay_silent_depth");
    }
    if (j.contains("analysis")) {
        const auto& a = j.at("analysis");
        if (a.contains("alpha")) c.analysis_alpha = a.at("alpha");
        if (a.contains("buckets")) c.feasibility_buckets = a.at("buckets");
    }
    if (j.contains("seed")) c.seed = j.at("seed");
    if (j.contains("parallelism")) c.parallelism = j.at("parallelism");
    if (j.contains("grids"))
        for (auto it = j.at("grids").begin(); it != j.at("grids").end(); ++it)
            c.grid_overrides[feature_from_name(it.key())] = it.value().get<std::vector<double>>();
    validate(c);
    return c;
}

// ---------------------------------------------------------------------------
// Configuration enumeration (step i)
// ---------------------------------------------------------------------------

/// Smallest common superspace of two partial targets; overlapping features
/// must agree on their values.
inline TargetConfiguration join_configurations(const TargetConfiguration& a, const TargetConfiguration& b) {
    validate(a);
    validate(b);
    TargetConfiguration out;
    out.targets = a.targets;
    for (const auto& [f, v] : b.targets) {
        auto it = out.targets.find(f);
        if (it != out.targets.end() && it->second != v)
            throw ConflictError(std::string("join: feature ") + feature_name(f) + " has values " +
                                csv::format_double(it->second) + " and " + csv::format_double(v));
        out.targets[f] = v;
    }
    std::string id;
    for (const auto& [f, v] : out.targets) {
        if (!id.empty()) id += '_';
        id += std::string(feature_name(f)) + "=" + csv::format_double(v);
    }
    out.id = id;
    return out;
}

/// The value grid for one feature: v equidistant samples over the catalog
/// range (v=1: midpoint), unless overridden in the config.
inline std::vector<double> value_grid(const RunConfig& cfg, FeatureId f) {
    auto it = cfg.grid_overrides.find(f);
    if (it != cfg.grid_overrides.end()) return it->second;
    const auto& info = feature_info(f);
    int v = cfg.values_per_feature;
    if (v == 1) return {(info.lo + info.hi) / 2.0};
    std::vector<double> grid;
    grid.reserve(v);
    for (int j = 0; j < v; ++j) {
        // endpoints pinned exactly so rounding cannot leave the catalog range
        if (j == 0) grid.push_back(info.lo);
        else if (j == v - 1) grid.push_back(info.hi);
        else grid.push_back(info.lo + static_cast<double>(j) * (info.hi - info.lo) / static_cast<double>(v - 1));
    }
    return grid;
}

/// Closed-form count: sum over k of C(n,k) * v^k.
inline unsigned long long enumeration_count(int n, int v, int k_max) {
    unsigned long long total = 0;
    for (int k = 1; k <= k_max; ++k) {
        unsigned long long binom = 1;
        for (int i = 0; i < k; ++i) binom = binom * static_cast<unsigned long long>(n - i) /
                                            static_cast<unsigned long long>(i + 1);
        unsigned long long vk = 1;
        for (int i = 0; i < k; ++i) vk *= static_cast<unsigned long long>(v);
        total += binom * vk;
    }
    return total;
}

/// Every k-subset of features (k = 1..k_max, subset-lexicographic in config
/// feature order) crossed with every grid value tuple (value-index
/// odometer). Ids encode subset and value indices.
inline std::vector<TargetConfiguration> enumerate_configurations(const RunConfig& cfg) {
    validate(cfg);
    const int n = static_cast<int>(cfg.features.size());
    std::vector<std::vector<double>> grids;
    grids.reserve(n);
    for (auto f : cfg.features) grids.push_back(value_grid(cfg, f));

    std::vector<TargetConfiguration> out;
    for (int k = 1; k <= cfg.k_max; ++k) {
        std::vector<int> subset(k);
        for (int i = 0; i < k; ++i) subset[i] = i;
        for (;;) {
            // value-index odometer, last index fastest
            std::vector<std::size_t> vidx(k, 0);
            for (;;) {
                TargetConfiguration tc;
                std::string id;
                for (int i = 0; i < k; ++i) {
                    FeatureId f = cfg.features[subset[i]];
                    TargetConfiguration single;
                    single.id = std::string(feature_name(f)) + "-" + std::to_string(vidx[i]);
                    single.targets[f] = grids[subset[i]][vidx[i]];
                    tc = (i == 0) ? single : join_configurations(tc, single);
                    if (!id.empty()) id += '_';
                    id += single.id;
                }
                tc.id = id;
                out.push_back(std::move(tc));
                int pos = k - 1;
                while (pos >= 0 && ++vidx[pos] >= grids[subset[pos]].size()) {
                    vidx[pos] = 0;
                    --pos;
                }
                if (pos < 0) break;
            }
            int pos = k - 1;
            while (pos >= 0 && subset[pos] == n - k + pos) --pos;
            if (pos < 0) break;
            ++subset[pos];
            for (int i = pos + 1; i < k; ++i) subset[i] = subset[i - 1] + 1;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Output directory layout and atomic persistence
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace detail

/// Per-configuration seed, derived from the global seed and the id.
inline std::uint64_t config_seed(std::uint64_t global_seed, const std::string& config_id) {
    return detail::splitmix64(global_seed ^ detail::fnv1a64(config_id));
}

namespace detail {

inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return content;
}

inline const std::string kMeasurementsHeader =
    "config_id,features,target_values,miner,status,fitness,precision,fscore,size,cfc,exec_time_ms,sound";

struct MeasurementsRow {
    std::string config_id;
    std::string features;      // "nusa|tlv"
    std::string target_values; // "3|0"
    std::string miner;
    std::string status; // ok|timeout|resource_exceeded|discovery_failed|generation_failed
    std::string fitness, precision, fscore, size, cfc, exec_time_ms, sound;

    std::string to_csv() const {
        return csv::join({config_id, features, target_values, miner, status, fitness, precision, fscore,
                          size, cfc, exec_time_ms, sound});
    }
};

inline std::pair<std::string, std::string> coalition_columns(const TargetConfiguration& tc) {
    std::string feats, vals;
    for (const auto& [f, v] : tc.targets) {
        if (!feats.empty()) {
            feats += '|';
            vals += '|';
        }
        feats += feature_name(f);
        vals += csv::format_double(v);
    }
    return {feats, vals};
}

inline MeasurementsRow measurement_to_row(const TargetConfiguration& tc, const MetricRecord& rec) {
    auto [feats, vals] = coalition_columns(tc);
    MeasurementsRow row;
    row.config_id = tc.id;
    row.features = feats;
    row.target_values = vals;
    row.miner = rec.miner;
    row.status = measure_status_name(rec.status);
    if (rec.status == MeasureStatus::Ok) {
        row.fitness = csv::format_double(*rec.fitness);
        row.precision = csv::format_double(*rec.precision);
        row.fscore = csv::format_double(*rec.fscore_value);
        row.size = std::to_string(*rec.size);
        row.cfc = std::to_string(*rec.cfc);
    }
    row.exec_time_ms = std::to_string(rec.exec_time_ms);
    row.sound = soundness_name(rec.sound);
    return row;
}

inline MeasurementsRow generation_failed_row(const TargetConfiguration& tc, const std::string& miner) {
    auto [feats, vals] = coalition_columns(tc);
    MeasurementsRow row;
    row.config_id = tc.id;
    row.features = feats;
    row.target_values = vals;
    row.miner = miner;
    row.status = "generation_failed";
    return row;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Run state
// ---------------------------------------------------------------------------

struct ReportSummary;

struct RunState {
    std::filesystem::path out_dir;
    std::vector<TargetConfiguration> configurations;
    std::map<std::string, std::string> generation_rows;                 // config_id -> csv row
    std::map<std::pair<std::string, std::string>, std::string> measurement_rows; // (id, miner) -> row
    long generated_ok = 0;
    long generation_failed = 0;
    bool reports_written = false;
    std::int64_t wall_time_ms = 0;
    std::map<std::string, double> feasibility_per_miner;
    double feasibility_overlap = 0;
    long complete_games = 0;
    long incomplete_games = 0;
};

struct RunOptions {
    long max_new_configurations = -1; // <0: unlimited; used to test interrupt/resume
    bool quiet = false;
};

namespace detail {

inline std::map<std::string, const TargetConfiguration*> index_by_id(
    const std::vector<TargetConfiguration>& configs) {
    std::map<std::string, const TargetConfiguration*> index;
    for (const auto& c : configs) {
        if (!index.emplace(c.id, &c).second)
            throw IntegrityError("duplicate configuration id '" + c.id + "'");
    }
    return index;
}

/// Reads a CSV file into header-checked field rows.
inline std::vector<std::vector<std::string>> read_csv_checked(const std::filesystem::path& path,
                                                              const std::string& expected_header) {
    auto lines = csv::split_lines(read_file(path));
    if (lines.empty() || lines[0] != expected_header)
        throw IntegrityError(path.string() + ": bad or missing header (expected '" + expected_header + "')");
    std::size_t columns = csv::split(expected_header).size();
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto fields = csv::split(lines[i]);
        if (fields.size() != columns)
            throw IntegrityError(path.string() + ": line " + std::to_string(i + 1) +
                                 ": expected " + std::to_string(columns) + " fields");
        rows.push_back(std::move(fields));
    }
    return rows;
}

inline void load_existing_state(RunState& state, const RunConfig& cfg) {
    auto index = index_by_id(state.configurations);
    auto gen_path = state.out_dir / "generation.csv";
    if (std::filesystem::exists(gen_path)) {
        for (auto& fields : read_csv_checked(gen_path, generation_csv_header())) {
            const std::string& id = fields[0];
            if (!index.count(id))
                throw IntegrityError("generation.csv references unknown configuration '" + id + "'");
            std::string row = csv::join(fields);
            state.generation_rows[id] = row;
            if (fields[5] == "ok") {
                ++state.generated_ok;
                if (!std::filesystem::exists(state.out_dir / "logs" / (id + ".xes")))
                    throw IntegrityError("generation.csv says ok but logs/" + id + ".xes is missing");
            } else {
                ++state.generation_failed;
            }
        }
    }
    auto meas_path = state.out_dir / "measurements.csv";
    if (std::filesystem::exists(meas_path)) {
        for (auto& fields : read_csv_checked(meas_path, kMeasurementsHeader)) {
            const std::string& id = fields[0];
            if (!index.count(id))
                throw IntegrityError("measurements.csv references unknown configuration '" + id + "'");
            state.measurement_rows[{id, fields[3]}] = csv::join(fields);
        }
    }
    // a configuration is checkpointed as one unit: generation row + one
    // measurement row per miner
    for (const auto& [id, row] : state.generation_rows) {
        for (const auto& miner : cfg.miners)
            if (!state.measurement_rows.count({id, miner}))
                throw IntegrityError("configuration '" + id + "' has a generation row but no measurement for miner '" +
                                     miner + "'");
    }
}

inline void checkpoint(const RunState& state) {
    std::string gen = generation_csv_header() + "\n";
    for (const auto& [id, row] : state.generation_rows) gen += row + "\n";
    write_file_atomic(state.out_dir / "generation.csv", gen);
    std::string meas = kMeasurementsHeader + "\n";
    for (const auto& [key, row] : state.measurement_rows) meas += row + "\n";
    write_file_atomic(state.out_dir / "measurements.csv", meas);
}

inline int effective_parallelism(const RunConfig& cfg) {
    if (cfg.parallelism > 0) return cfg.parallelism;
    if (const char* env = std::getenv("SHAPMINE_JOBS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Reporting (steps iv + statistics)
// ---------------------------------------------------------------------------

namespace detail {

inline std::optional<double> metric_value(const MeasurementsRow&, const std::string&);

struct ParsedMeasurement {
    TargetConfiguration coalition;
    std::string miner;
    std::string status;
    std::map<std::string, std::optional<double>> metrics;
};

inline TargetConfiguration coalition_from_columns(const std::string& id, const std::string& features,
                                                  const std::string& target_values) {
    TargetConfiguration tc;
    tc.id = id;
    auto feats = csv::split(features, '|');
    auto vals = csv::split(target_values, '|');
    if (feats.size() != vals.size())
        throw IntegrityError("measurements.csv: features/target_values arity mismatch for '" + id + "'");
    for (std::size_t i = 0; i < feats.size(); ++i)
        tc.targets[feature_from_name(feats[i])] = csv::parse_double(vals[i]);
    return tc;
}

inline std::vector<ParsedMeasurement> parse_measurements(const std::filesystem::path& out_dir,
                                                         const std::vector<std::string>& metrics) {
    auto rows = read_csv_checked(out_dir / "measurements.csv", kMeasurementsHeader);
    std::vector<ParsedMeasurement> parsed;
    for (auto& f : rows) {
        ParsedMeasurement m;
        m.coalition = coalition_from_columns(f[0], f[1], f[2]);
        m.miner = f[3];
        m.status = f[4];
        bool ok = m.status == "ok";
        std::map<std::string, std::string> cells = {{"fitness", f[5]}, {"precision", f[6]},
                                                    {"fscore", f[7]},  {"size", f[8]},
                                                    {"cfc", f[9]},     {"exec_time", f[10]}};
        for (const auto& metric : metrics) {
            auto it = cells.find(metric);
            if (it == cells.end()) throw DomainError("unknown metric '" + metric + "' in config");
            if (ok && !it->second.empty())
                m.metrics[metric] = csv::parse_double(it->second);
            else
                m.metrics[metric] = std::nullopt;
        }
        parsed.push_back(std::move(m));
    }
    return parsed;
}

inline std::string subset_key(const std::vector<std::pair<FeatureId, double>>& players) {
    std::string key;
    for (const auto& [f, v] : players) {
        if (!key.empty()) key += '+';
        key += feature_name(f);
    }
    return key;
}

} // namespace detail

struct ReportSummary {
    long configurations = 0;
    long generated_ok = 0;
    long generation_failed = 0;
    long measurement_rows = 0;
    long complete_games = 0;
    long incomplete_games = 0;
    std::map<std::string, double> feasibility_per_miner;
    double feasibility_overlap = 0;
};

/// Recomputes shapley.csv from measurements.csv (step iv alone).
inline long recompute_shapley(const std::filesystem::path& out_dir) {
    auto config = run_config_from_json(nlohmann::json::parse(detail::read_file(out_dir / "config.json")));
    if (!std::filesystem::exists(out_dir / "measurements.csv"))
        throw Error("shapley: missing stage outputs: measurements.csv");
    auto parsed = detail::parse_measurements(out_dir, config.metrics);
    std::vector<MeasurementRow> rows;
    for (const auto& m : parsed)
        for (const auto& metric : config.metrics)
            rows.push_back(MeasurementRow{m.coalition, m.miner, metric, m.metrics.at(metric)});
    auto games = assemble_games(rows, config.k_max);
    std::string csv_text = shapley_csv_header() + "\n";
    long complete = 0;
    for (const auto& g : games) {
        if (!g.complete()) continue;
        csv_text += shapley_csv_rows(shapley_exact(g));
        ++complete;
    }
    detail::write_file_atomic(out_dir / "shapley.csv", csv_text);
    return complete;
}

/// Emits every report artifact from the persisted measurements: shapley.csv,
/// ranking.csv, correlations.csv, robustness.csv, feasibility.csv and
/// summary.json.
inline ReportSummary write_reports(const std::filesystem::path& out_dir, std::int64_t wall_time_ms = 0) {
    std::vector<std::string> missing;
    for (const char* f : {"config.json", "generation.csv", "measurements.csv"})
        if (!std::filesystem::exists(out_dir / f)) missing.push_back(f);
    if (!missing.empty()) {
        std::string what = "report: missing stage outputs:";
        for (const auto& m : missing) what += " " + m;
        throw Error(what);
    }
    auto config = run_config_from_json(nlohmann::json::parse(detail::read_file(out_dir / "config.json")));
    auto parsed = detail::parse_measurements(out_dir, config.metrics);

    std::vector<MeasurementRow> rows;
    for (const auto& m : parsed)
        for (const auto& metric : config.metrics)
            rows.push_back(MeasurementRow{m.coalition, m.miner, metric, m.metrics.at(metric)});

    auto games = assemble_games(rows, config.k_max);
    std::vector<ShapleyAttribution> attributions;
    long complete = 0, incomplete = 0;
    std::string shapley_text = shapley_csv_header() + "\n";
    for (const auto& g : games) {
        if (!g.complete()) {
            ++incomplete;
            continue;
        }
        auto a = shapley_exact(g);
        shapley_text += shapley_csv_rows(a);
        attributions.push_back(std::move(a));
        ++complete;
    }
    detail::write_file_atomic(out_dir / "shapley.csv", shapley_text);

    // ranking.csv: one Friedman/Nemenyi block per player-feature subset,
    // games pooled across miners, metrics and value combinations
    std::string ranking_text =
        "scope,feature,mean_rank,games,friedman_statistic,p_value,critical_distance,cliques\n";
    std::map<std::string, std::vector<const ShapleyAttribution*>> by_subset;
    for (const auto& a : attributions) by_subset[detail::subset_key(a.players)].push_back(&a);
    for (const auto& [scope, group] : by_subset) {
        if (group.front()->players.size() < 2 || group.size() < 2) continue;
        std::vector<std::string> names;
        for (const auto& [f, v] : group.front()->players) names.push_back(feature_name(f));
        std::vector<std::vector<double>> matrix;
        for (const auto* a : group) matrix.push_back(a->phi_normalized);
        auto report = friedman_nemenyi(matrix, names, config.analysis_alpha);
        for (std::size_t i = 0; i < names.size(); ++i) {
            std::string cliques;
            for (std::size_t c = 0; c < report.cliques.size(); ++c)
                if (std::find(report.cliques[c].begin(), report.cliques[c].end(), i) !=
                    report.cliques[c].end()) {
                    if (!cliques.empty()) cliques += ';';
                    cliques += std::to_string(c);
                }
            ranking_text += csv::join({scope, names[i], csv::format_double(report.mean_ranks[i]),
                                       std::to_string(report.games), csv::format_double(report.statistic),
                                       csv::format_double(report.p_value),
                                       csv::format_double(report.critical_distance), cliques}) +
                            "\n";
        }
    }
    detail::write_file_atomic(out_dir / "ranking.csv", ranking_text);

    // correlations.csv
    std::string corr_text = "miner,metric,feature,rho,p_value,strength,n\n";
    for (const auto& rec : correlate_value_impact(attributions))
        corr_text += csv::join({rec.miner, rec.metric, feature_name(rec.feature), csv::format_double(rec.rho),
                                csv::format_double(rec.p_value), strength_name(rec.strength),
                                std::to_string(rec.n)}) +
                     "\n";
    detail::write_file_atomic(out_dir / "correlations.csv", corr_text);

    // robustness.csv
    std::string robust_text = "miner,metric,mean_norm_phi,var_norm_phi,n,degenerate\n";
    for (const auto& p : robustness(attributions))
        robust_text += csv::join({p.miner, p.metric, csv::format_double(p.mean_norm_phi),
                                  csv::format_double(p.var_norm_phi), std::to_string(p.n),
                                  p.degenerate ? "1" : "0"}) +
                       "\n";
    detail::write_file_atomic(out_dir / "robustness.csv", robust_text);

    // feasibility.csv
    std::vector<FeasibilityInput> feas_inputs;
    for (const auto& m : parsed)
        feas_inputs.push_back(FeasibilityInput{m.coalition, m.miner, m.status == "ok"});
    auto feas = feasibility(feas_inputs, attributions, config.feasibility_buckets);
    std::string feas_text =
        "feature,bucket_lo,bucket_hi,miner,metric,n_configs,success_fraction,n_phi,mean_norm_phi\n";
    for (const auto& cell : feas.cells)
        feas_text += csv::join({feature_name(cell.feature), csv::format_double(cell.lo),
                                csv::format_double(cell.hi), cell.miner, cell.metric,
                                std::to_string(cell.n_configs), csv::format_double(cell.success_fraction),
                                std::to_string(cell.n_phi),
                                cell.mean_norm_phi ? csv::format_double(*cell.mean_norm_phi) : ""}) +
                     "\n";
    detail::write_file_atomic(out_dir / "feasibility.csv", feas_text);

    // summary
    ReportSummary summary;
    std::set<std::string> config_ids;
    for (const auto& m : parsed) config_ids.insert(m.coalition.id);
    summary.configurations = static_cast<long>(config_ids.size());
    summary.measurement_rows = static_cast<long>(parsed.size());
    for (auto& row : detail::read_csv_checked(out_dir / "generation.csv", generation_csv_header()))
        (row[5] == "ok" ? summary.generated_ok : summary.generation_failed) += 1;
    summary.complete_games = complete;
    summary.incomplete_games = incomplete;
    for (const auto& mf : feas.per_miner) summary.feasibility_per_miner[mf.miner] = mf.percent_ok;
    summary.feasibility_overlap = feas.overlap_percent;

    nlohmann::json sj;
    sj["configurations"] = summary.configurations;
    sj["generated_ok"] = summary.generated_ok;
    sj["generation_failed"] = summary.generation_failed;
    sj["measurement_rows"] = summary.measurement_rows;
    sj["complete_games"] = summary.complete_games;
    sj["incomplete_games"] = summary.incomplete_games;
    sj["zero_complete_games"] = (summary.complete_games == 0);
    nlohmann::json feas_json;
    for (const auto& [miner, pct] : summary.feasibility_per_miner) feas_json[miner] = pct;
    sj["feasibility_percent"] = feas_json;
    sj["feasibility_overlap_percent"] = summary.feasibility_overlap;
    sj["wall_time_ms"] = wall_time_ms;
    detail::write_file_atomic(out_dir / "summary.json", sj.dump(2) + "\n");
    return summary;
}

// ---------------------------------------------------------------------------
// run / resume
// ---------------------------------------------------------------------------

namespace detail {

inline void process_configuration(const RunConfig& cfg, const MinerRegistry& registry,
                                  const TargetConfiguration& tc, const std::filesystem::path& out_dir,
                                  std::string& gen_row_out,
                                  std::vector<std::pair<std::string, std::string>>& meas_rows_out) {
    auto outcome = calibrate(tc, cfg.generation_budget, cfg.generation_epsilon,
                             config_seed(cfg.seed, tc.id));
    gen_row_out = generation_csv_row(outcome);
    if (outcome.status == GenStatus::Ok) {
        write_file_atomic(out_dir / "logs" / (tc.id + ".xes"), write_xes(*outcome.log));
        for (const auto& miner : cfg.miners) {
            auto rec = measure(registry, miner, *outcome.log, cfg.limits, tc.id, cfg.measure_config);
            meas_rows_out.emplace_back(miner, measurement_to_row(tc, rec).to_csv());
        }
    } else {
        for (const auto& miner : cfg.miners)
            meas_rows_out.emplace_back(miner, generation_failed_row(tc, miner).to_csv());
    }
}

} // namespace detail

/// Executes (or continues) a run in out_dir: calibrate -> measure per miner,
/// checkpointing after every configuration; afterwards computes Shapley
/// attributions and the analysis reports.
inline RunState run(const RunConfig& cfg, const std::filesystem::path& out_dir, const RunOptions& options = {}) {
    validate(cfg);
    auto t0 = std::chrono::steady_clock::now();
    std::filesystem::create_directories(out_dir);
    std::filesystem::create_directories(out_dir / "logs");

    // config snapshot: first run writes it, later runs must match
    auto snapshot_path = out_dir / "config.json";
    auto desired = run_config_to_json(cfg).dump(2) + "\n";
    if (std::filesystem::exists(snapshot_path)) {
        auto existing = detail::read_file(snapshot_path);
        if (existing != desired) {
            auto old_json = nlohmann::json::parse(existing);
            auto new_json = nlohmann::json::parse(desired);
            std::string diff;
            for (auto it = new_json.begin(); it != new_json.end(); ++it) {
                if (!old_json.contains(it.key()) || old_json.at(it.key()) != it.value())
                    diff += "\n  " + it.key() + ": snapshot=" +
                            (old_json.contains(it.key()) ? old_json.at(it.key()).dump() : "<absent>") +
                            " supplied=" + it.value().dump();
            }
            for (auto it = old_json.begin(); it != old_json.end(); ++it)
                if (!new_json.contains(it.key()))
                    diff += "\n  " + it.key() + ": snapshot=" + it.value().dump() + " supplied=<absent>";
            throw IntegrityError("config mismatch with existing run directory:" + diff);
        }
    } else {
        detail::write_file_atomic(snapshot_path, desired);
    }

    RunState state;
    state.out_dir = out_dir;
    state.configurations = enumerate_configurations(cfg);
    detail::load_existing_state(state, cfg);

    std::vector<const TargetConfiguration*> pending;
    for (const auto& tc : state.configurations)
        if (!state.generation_rows.count(tc.id)) pending.push_back(&tc);
    if (options.max_new_configurations >= 0 &&
        static_cast<long>(pending.size()) > options.max_new_configurations)
        pending.resize(options.max_new_configurations);

    MinerRegistry registry = MinerRegistry::builtin(cfg.miner_config);
    for (const auto& miner : cfg.miners)
        if (!registry.has(miner)) throw DomainError("unknown miner '" + miner + "' in config");

    std::mutex state_mutex;
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    int workers = std::min<int>(detail::effective_parallelism(cfg), std::max<std::size_t>(pending.size(), 1));
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= pending.size()) return;
            const TargetConfiguration& tc = *pending[i];
            try {
                std::string gen_row;
                std::vector<std::pair<std::string, std::string>> meas_rows;
                detail::process_configuration(cfg, registry, tc, out_dir, gen_row, meas_rows);
                std::lock_guard<std::mutex> lock(state_mutex);
                state.generation_rows[tc.id] = gen_row;
                for (auto& [miner, row] : meas_rows) state.measurement_rows[{tc.id, miner}] = row;
                detail::checkpoint(state);
                if (!options.quiet)
                    std::fprintf(stderr, "[%zu/%zu] %s\n", state.generation_rows.size(),
                                 state.configurations.size(), tc.id.c_str());
            } catch (...) {
                std::lock_guard<std::mutex> lock(state_mutex);
                if (!first_error) first_error = std::current_exception();
                next.store(pending.size()); // stop pulling new work
                return;
            }
        }
    };
    if (!pending.empty()) {
        if (workers <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
            for (auto& t : pool) t.join();
        }
        if (first_error) std::rethrow_exception(first_error);
    } else if (!std::filesystem::exists(out_dir / "generation.csv")) {
        detail::checkpoint(state); // empty run still leaves valid files
    }

    state.generated_ok = 0;
    state.generation_failed = 0;
    for (auto& [id, row] : state.generation_rows)
        (csv::split(row)[5] == "ok" ? state.generated_ok : state.generation_failed) += 1;

    bool all_done = state.generation_rows.size() == state.configurations.size();
    state.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - t0)
                             .count();
    if (all_done) {
        auto summary = write_reports(out_dir, state.wall_time_ms);
        state.reports_written = true;
        state.feasibility_per_miner = summary.feasibility_per_miner;
        state.feasibility_overlap = summary.feasibility_overlap;
        state.complete_games = summary.complete_games;
        state.incomplete_games = summary.incomplete_games;
    }
    return state;
}

/// Continues a run from its output directory alone. A supplied config (e.g.
/// from flags) must match the snapshot.
inline RunState resume(const std::filesystem::path& out_dir, const std::optional<RunConfig>& supplied = {},
                       const RunOptions& options = {}) {
    auto snapshot_path = out_dir / "config.json";
    if (!std::filesystem::exists(snapshot_path))
        throw IntegrityError("resume: no config.json snapshot in " + out_dir.string());
    RunConfig cfg;
    try {
        cfg = run_config_from_json(nlohmann::json::parse(detail::read_file(snapshot_path)));
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError("resume: corrupt config.json: " + std::string(e.what()));
    }
    if (supplied) {
        // run() produces the field-level diff on mismatch
        return run(*supplied, out_dir, options);
    }
    return run(cfg, out_dir, options);
}

} // namespace shapmine
