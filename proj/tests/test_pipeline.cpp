#include "shapmine/pipeline.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <unistd.h>

namespace {

using namespace shapmine;
namespace fs = std::filesystem;

fs::path temp_dir(const std::string& tag) {
    auto dir = fs::temp_directory_path() / ("shapmine_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

/// measurements.csv with the exec_time_ms column (index 10) blanked.
std::string strip_timing(const std::string& csv_text) {
    std::string out;
    for (const auto& line : csv::split_lines(csv_text)) {
        auto fields = csv::split(line);
        if (fields.size() == 12) fields[10] = "";
        out += csv::join(fields) + "\n";
    }
    return out;
}

std::string strip_wall_time(const std::string& json_text) {
    std::string out;
    for (const auto& line : csv::split_lines(json_text))
        if (line.find("wall_time_ms") == std::string::npos) out += line + "\n";
    return out;
}

RunConfig mini_config() {
    RunConfig cfg;
    cfg.features = {FeatureId::nusa, FeatureId::tlv};
    cfg.values_per_feature = 2;
    cfg.k_max = 2;
    cfg.miners = {"inductive", "dfg"};
    cfg.metrics = {"fitness", "precision", "fscore", "size", "cfc"};
    cfg.generation_budget = 200;
    cfg.generation_epsilon = 0.05;
    cfg.seed = 5;
    cfg.parallelism = 2;
    cfg.grid_overrides[FeatureId::nusa] = {1.0, 3.0};
    cfg.grid_overrides[FeatureId::tlv] = {0.0, 20.0};
    return cfg;
}

TEST(Join, UnionAndConflicts) {
    TargetConfiguration a{"a", {{FeatureId::nusa, 3.0}}};
    TargetConfiguration b{"b", {{FeatureId::tlv, 0.0}}};
    auto joined = join_configurations(a, b);
    EXPECT_EQ(joined.targets.size(), 2u);
    EXPECT_DOUBLE_EQ(joined.targets[FeatureId::nusa], 3.0);
    EXPECT_DOUBLE_EQ(joined.targets[FeatureId::tlv], 0.0);

    auto idempotent = join_configurations(a, a);
    EXPECT_EQ(idempotent.targets, a.targets);

    TargetConfiguration conflicting{"c", {{FeatureId::nusa, 4.0}}};
    EXPECT_THROW(join_configurations(a, conflicting), ConflictError);
}

TEST(Join, CommutativeAssociative) {
    std::mt19937_64 rng(21);
    const auto& catalog = feature_catalog();
    for (int round = 0; round < 25; ++round) {
        TargetConfiguration xs[3];
        for (int i = 0; i < 3; ++i) {
            const auto& info = catalog[(round + i * 3) % catalog.size()];
            double frac = static_cast<double>(rng() % 100) / 99.0;
            xs[i].id = "t" + std::to_string(i);
            xs[i].targets[info.id] = info.lo + frac * (info.hi - info.lo);
        }
        auto ab = join_configurations(xs[0], xs[1]);
        auto ba = join_configurations(xs[1], xs[0]);
        EXPECT_EQ(ab.targets, ba.targets);
        EXPECT_EQ(ab.id, ba.id);
        auto left = join_configurations(join_configurations(xs[0], xs[1]), xs[2]);
        auto right = join_configurations(xs[0], join_configurations(xs[1], xs[2]));
        EXPECT_EQ(left.targets, right.targets);
    }
}

TEST(Enumerate, PaperCount) {
    RunConfig cfg; // defaults: 8 features, v=10, k_max=3
    EXPECT_EQ(enumerate_configurations(cfg).size(), 58880u);
    EXPECT_EQ(enumeration_count(8, 10, 3), 58880ull);
}

TEST(Enumerate, SmallCounts) {
    RunConfig cfg;
    cfg.features = {FeatureId::aq1};
    cfg.values_per_feature = 1;
    cfg.k_max = 1;
    auto configs = enumerate_configurations(cfg);
    ASSERT_EQ(configs.size(), 1u);
    // v=1 grid collapses to the range midpoint
    EXPECT_DOUBLE_EQ(configs[0].targets[FeatureId::aq1], (1.0 + 79.92) / 2.0);

    RunConfig c2;
    c2.features = {FeatureId::nusa, FeatureId::tlv, FeatureId::rt5v};
    c2.values_per_feature = 3;
    c2.k_max = 2;
    EXPECT_EQ(enumerate_configurations(c2).size(), 36u); // 3*3 + 3*9
}

// independent oracle: dynamic programming over features
unsigned long long dp_count(int n, int v, int k_max) {
    std::vector<unsigned long long> ways(static_cast<std::size_t>(k_max) + 1, 0);
    ways[0] = 1;
    for (int f = 0; f < n; ++f)
        for (int k = k_max; k >= 1; --k) ways[k] += ways[k - 1] * static_cast<unsigned long long>(v);
    unsigned long long total = 0;
    for (int k = 1; k <= k_max; ++k) total += ways[k];
    return total;
}

TEST(Enumerate, CountMatchesIndependentFormula) {
    for (int n = 1; n <= 10; ++n)
        for (int v = 1; v <= 10; ++v)
            for (int k_max = 1; k_max <= n; ++k_max)
                EXPECT_EQ(enumeration_count(n, v, k_max), dp_count(n, v, k_max))
                    << n << " " << v << " " << k_max;
}

TEST(Enumerate, ListSizeMatchesCountOnSamples) {
    std::mt19937 rng(31);
    const auto& catalog = feature_catalog();
    for (int round = 0; round < 8; ++round) {
        RunConfig cfg;
        int n = 1 + static_cast<int>(rng() % 5);
        cfg.features.clear();
        for (int i = 0; i < n; ++i) cfg.features.push_back(catalog[i].id);
        cfg.values_per_feature = 1 + static_cast<int>(rng() % 5);
        cfg.k_max = 1 + static_cast<int>(rng() % n);
        auto configs = enumerate_configurations(cfg);
        EXPECT_EQ(configs.size(), enumeration_count(n, cfg.values_per_feature, cfg.k_max));
        std::set<std::string> ids;
        for (const auto& c : configs) ids.insert(c.id);
        EXPECT_EQ(ids.size(), configs.size()); // unique ids
        // deterministic ordering
        auto again = enumerate_configurations(cfg);
        for (std::size_t i = 0; i < configs.size(); ++i) EXPECT_EQ(configs[i].id, again[i].id);
    }
}

TEST(ConfigJson, RoundTripAndDefaults) {
    auto cfg = mini_config();
    auto round = run_config_from_json(run_config_to_json(cfg));
    EXPECT_EQ(run_config_to_json(round), run_config_to_json(cfg));

    auto defaults = run_config_from_json(nlohmann::json::object());
    EXPECT_EQ(defaults.features.size(), 8u);
    EXPECT_EQ(defaults.values_per_feature, 10);
    EXPECT_EQ(defaults.k_max, 3);
    EXPECT_EQ(defaults.limits.timeout_ms, 300000);
    EXPECT_EQ(defaults.limits.disk_cap_bytes, 19'000'000'000);
    EXPECT_EQ(defaults.generation_budget, 2000L);
    EXPECT_DOUBLE_EQ(defaults.generation_epsilon, 0.05);
}

TEST(ConfigSeed, DeterministicAndSpread) {
    EXPECT_EQ(config_seed(1, "a"), config_seed(1, "a"));
    EXPECT_NE(config_seed(1, "a"), config_seed(1, "b"));
    EXPECT_NE(config_seed(1, "a"), config_seed(2, "a"));
}

TEST(Config, ValidationErrors) {
    RunConfig cfg;
    cfg.k_max = 9; // more than 8 features
    EXPECT_THROW(validate(cfg), DomainError);
    cfg = RunConfig{};
    cfg.features = {FeatureId::aq1, FeatureId::aq1};
    EXPECT_THROW(validate(cfg), DomainError);
    cfg = RunConfig{};
    cfg.miners.clear();
    EXPECT_THROW(validate(cfg), DomainError);
    cfg = RunConfig{};
    cfg.values_per_feature = 0;
    EXPECT_THROW(validate(cfg), DomainError);
}

TEST(Run, ParallelismFromEnvironment) {
    ::setenv("SHAPMINE_JOBS", "1", 1);
    auto dir = temp_dir("envjobs");
    auto cfg = mini_config();
    cfg.parallelism = 0; // defer to the environment
    cfg.features = {FeatureId::nusa};
    cfg.k_max = 1;
    cfg.grid_overrides.clear();
    cfg.grid_overrides[FeatureId::nusa] = {1.0};
    cfg.generation_budget = 60;
    RunOptions opt;
    opt.quiet = true;
    auto state = run(cfg, dir, opt);
    EXPECT_TRUE(state.reports_written);
    ::unsetenv("SHAPMINE_JOBS");
    fs::remove_all(dir);
}

TEST(Run, MiniStudyProducesAllArtifacts) {
    auto dir = temp_dir("mini");
    auto cfg = mini_config();
    RunOptions opt;
    opt.quiet = true;
    auto state = run(cfg, dir, opt);
    EXPECT_EQ(state.configurations.size(), 8u); // 2*2 singles + 4 pairs
    EXPECT_TRUE(state.reports_written);
    for (const char* f : {"config.json", "generation.csv", "measurements.csv", "shapley.csv",
                          "ranking.csv", "correlations.csv", "robustness.csv", "feasibility.csv",
                          "summary.json"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;

    // one measurements row per configuration per miner
    auto lines = csv::split_lines(slurp(dir / "measurements.csv"));
    EXPECT_EQ(lines.size(), 1 + 8 * 2);
    auto gen_lines = csv::split_lines(slurp(dir / "generation.csv"));
    EXPECT_EQ(gen_lines.size(), 1 + 8);

    // ok logs persisted as XES
    for (std::size_t i = 1; i < gen_lines.size(); ++i) {
        auto fields = csv::split(gen_lines[i]);
        if (fields[5] == "ok") {
            EXPECT_TRUE(fs::exists(dir / "logs" / (fields[0] + ".xes")));
        }
    }
    fs::remove_all(dir);
}

TEST(Run, RerunningCompletedRunIsIdempotent) {
    auto dir = temp_dir("idem");
    auto cfg = mini_config();
    RunOptions opt;
    opt.quiet = true;
    run(cfg, dir, opt);
    std::map<std::string, std::string> before;
    for (const char* f : {"generation.csv", "shapley.csv", "ranking.csv", "correlations.csv",
                          "robustness.csv", "feasibility.csv"})
        before[f] = slurp(dir / f);
    auto before_meas = strip_timing(slurp(dir / "measurements.csv"));
    auto before_summary = strip_wall_time(slurp(dir / "summary.json"));

    auto state = run(cfg, dir, opt); // no pending work
    EXPECT_TRUE(state.reports_written);
    for (auto& [f, content] : before) EXPECT_EQ(slurp(dir / f), content) << f;
    EXPECT_EQ(strip_timing(slurp(dir / "measurements.csv")), before_meas);
    EXPECT_EQ(strip_wall_time(slurp(dir / "summary.json")), before_summary);
    fs::remove_all(dir);
}

TEST(Run, InterruptAndResumeMatchesCleanRun) {
    auto cfg = mini_config();
    RunOptions quiet;
    quiet.quiet = true;

    auto clean_dir = temp_dir("clean");
    run(cfg, clean_dir, quiet);

    auto resumed_dir = temp_dir("resumed");
    RunOptions partial = quiet;
    partial.max_new_configurations = 3; // simulate an interruption
    auto partial_state = run(cfg, resumed_dir, partial);
    EXPECT_FALSE(partial_state.reports_written);
    EXPECT_EQ(partial_state.generation_rows.size(), 3u);

    auto resumed_state = resume(resumed_dir, std::nullopt, quiet);
    EXPECT_TRUE(resumed_state.reports_written);

    for (const char* f : {"generation.csv", "shapley.csv", "ranking.csv", "correlations.csv",
                          "robustness.csv", "feasibility.csv"})
        EXPECT_EQ(slurp(resumed_dir / f), slurp(clean_dir / f)) << f;
    EXPECT_EQ(strip_timing(slurp(resumed_dir / "measurements.csv")),
              strip_timing(slurp(clean_dir / "measurements.csv")));
    EXPECT_EQ(strip_wall_time(slurp(resumed_dir / "summary.json")),
              strip_wall_time(slurp(clean_dir / "summary.json")));
    fs::remove_all(clean_dir);
    fs::remove_all(resumed_dir);
}

TEST(Resume, FreshCompletedDirHasNothingToDo) {
    auto dir = temp_dir("done");
    auto cfg = mini_config();
    RunOptions opt;
    opt.quiet = true;
    run(cfg, dir, opt);
    auto state = resume(dir, std::nullopt, opt);
    EXPECT_EQ(state.generation_rows.size(), state.configurations.size());
    fs::remove_all(dir);
}

TEST(Resume, ConfigMismatchRefusedWithDiff) {
    auto dir = temp_dir("mismatch");
    auto cfg = mini_config();
    RunOptions opt;
    opt.quiet = true;
    RunOptions partial = opt;
    partial.max_new_configurations = 1;
    run(cfg, dir, partial);
    auto other = cfg;
    other.seed = 99;
    try {
        resume(dir, other, opt);
        FAIL() << "expected IntegrityError";
    } catch (const IntegrityError& e) {
        std::string what = e.what();
        EXPECT_NE(what.find("config mismatch"), std::string::npos);
        EXPECT_NE(what.find("seed"), std::string::npos);
    }
    fs::remove_all(dir);
}

TEST(Resume, MissingSnapshotFails) {
    auto dir = temp_dir("nosnap");
    EXPECT_THROW(resume(dir), IntegrityError);
    fs::remove_all(dir);
}

TEST(Resume, CorruptCheckpointFails) {
    auto dir = temp_dir("corrupt");
    auto cfg = mini_config();
    RunOptions opt;
    opt.quiet = true;
    RunOptions partial = opt;
    partial.max_new_configurations = 2;
    run(cfg, dir, partial);
    { // damage the header
        std::ofstream out(dir / "measurements.csv", std::ios::trunc);
        out << "bogus,header\nrow,too\n";
    }
    EXPECT_THROW(resume(dir, std::nullopt, opt), IntegrityError);
    fs::remove_all(dir);
}

TEST(Report, MissingInputsListed) {
    auto dir = temp_dir("noreport");
    try {
        write_reports(dir);
        FAIL() << "expected Error";
    } catch (const Error& e) {
        std::string what = e.what();
        EXPECT_NE(what.find("config.json"), std::string::npos);
        EXPECT_NE(what.find("measurements.csv"), std::string::npos);
    }
    fs::remove_all(dir);
}

TEST(Report, ZeroCompleteGamesLeavesHeaderOnlyShapley) {
    auto dir = temp_dir("zerogames");
    RunConfig cfg;
    cfg.features = {FeatureId::rt5v};
    cfg.k_max = 1;
    cfg.values_per_feature = 1;
    cfg.grid_overrides[FeatureId::rt5v] = {0.0}; // unreachable: coverage is always >= 0.05
    cfg.generation_budget = 40;
    cfg.generation_epsilon = 0.05;
    cfg.miners = {"inductive"};
    cfg.seed = 4;
    RunOptions opt;
    opt.quiet = true;
    auto state = run(cfg, dir, opt);
    EXPECT_TRUE(state.reports_written);
    EXPECT_EQ(slurp(dir / "shapley.csv"), shapley_csv_header() + "\n");
    auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    EXPECT_TRUE(summary.at("zero_complete_games").get<bool>());
    EXPECT_EQ(summary.at("generated_ok").get<long>(), 0);
    fs::remove_all(dir);
}

TEST(RecomputeShapley, RewritesOnlyShapley) {
    auto dir = temp_dir("stepiv");
    auto cfg = mini_config();
    RunOptions opt;
    opt.quiet = true;
    run(cfg, dir, opt);
    auto before = slurp(dir / "shapley.csv");
    fs::remove(dir / "ranking.csv");
    long complete = recompute_shapley(dir);
    EXPECT_GE(complete, 0);
    EXPECT_EQ(slurp(dir / "shapley.csv"), before);
    EXPECT_FALSE(fs::exists(dir / "ranking.csv")); // untouched by the shapley step
    fs::remove_all(dir);
}

} // namespace
