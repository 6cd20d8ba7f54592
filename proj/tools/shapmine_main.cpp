#include "shapmine/pipeline.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

shapmine::RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw shapmine::Error("cannot read config file " + path);
    nlohmann::json j;
    in >> j;
    return shapmine::run_config_from_json(j);
}

void print_feasibility_table(const std::map<std::string, double>& per_miner, double overlap) {
    std::printf("Feasible configurations by miner\n");
    std::printf("  %-12s %10s\n", "miner", "ok [%]");
    for (const auto& [miner, pct] : per_miner) std::printf("  %-12s %10.1f\n", miner.c_str(), pct);
    std::printf("  %-12s %10.1f\n", "overlap", overlap);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Shapley attribution of event-log meta-features to process discovery metrics"};
    app.require_subcommand(1);

    // enumerate
    auto* enumerate_cmd = app.add_subcommand("enumerate", "print configuration count and ids");
    std::string enum_config_path, enum_features;
    int enum_values = -1, enum_kmax = -1;
    bool count_only = false;
    enumerate_cmd->add_option("--config", enum_config_path, "run config JSON");
    enumerate_cmd->add_option("--features", enum_features, "comma-separated feature ids");
    enumerate_cmd->add_option("--values", enum_values, "values per feature");
    enumerate_cmd->add_option("--k-max", enum_kmax, "maximal coalition size");
    enumerate_cmd->add_flag("--count-only", count_only, "print only the count");

    // run
    auto* run_cmd = app.add_subcommand("run", "execute a full study");
    std::string run_config_path, run_out;
    bool quiet = false;
    run_cmd->add_option("--config", run_config_path, "run config JSON")->required();
    run_cmd->add_option("--out", run_out, "output directory")->required();
    run_cmd->add_flag("--quiet", quiet, "suppress per-configuration progress");

    // resume
    auto* resume_cmd = app.add_subcommand("resume", "continue an interrupted run");
    std::string resume_out, resume_config_path;
    bool resume_quiet = false;
    resume_cmd->add_option("--out", resume_out, "output directory")->required();
    resume_cmd->add_option("--config", resume_config_path, "config to check against the snapshot");
    resume_cmd->add_flag("--quiet", resume_quiet, "suppress per-configuration progress");

    // report
    auto* report_cmd = app.add_subcommand("report", "regenerate analysis reports from persisted results");
    std::string report_out;
    report_cmd->add_option("--out", report_out, "output directory")->required();

    // shapley
    auto* shapley_cmd = app.add_subcommand("shapley", "recompute shapley.csv only");
    std::string shapley_out;
    shapley_cmd->add_option("--out", shapley_out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*enumerate_cmd) {
            shapmine::RunConfig cfg;
            if (!enum_config_path.empty()) cfg = load_config_file(enum_config_path);
            if (!enum_features.empty()) {
                cfg.features.clear();
                for (const auto& name : shapmine::csv::split(enum_features))
                    cfg.features.push_back(shapmine::feature_from_name(name));
            }
            if (enum_values > 0) cfg.values_per_feature = enum_values;
            if (enum_kmax > 0) cfg.k_max = enum_kmax;
            auto configs = shapmine::enumerate_configurations(cfg);
            std::printf("%zu\n", configs.size());
            if (!count_only)
                for (const auto& c : configs) std::printf("%s\n", c.id.c_str());
            return 0;
        }
        if (*run_cmd) {
            auto cfg = load_config_file(run_config_path);
            shapmine::RunOptions options;
            options.quiet = quiet;
            auto state = shapmine::run(cfg, run_out, options);
            std::printf("configurations: %zu  generated ok: %ld  failed: %ld  complete games: %ld\n",
                        state.configurations.size(), state.generated_ok, state.generation_failed,
                        state.complete_games);
            print_feasibility_table(state.feasibility_per_miner, state.feasibility_overlap);
            std::printf("wall time: %lld ms\n", static_cast<long long>(state.wall_time_ms));
            return 0;
        }
        if (*resume_cmd) {
            std::optional<shapmine::RunConfig> supplied;
            if (!resume_config_path.empty()) supplied = load_config_file(resume_config_path);
            shapmine::RunOptions options;
            options.quiet = resume_quiet;
            auto state = shapmine::resume(resume_out, supplied, options);
            std::printf("configurations: %zu  done: %zu  reports: %s\n", state.configurations.size(),
                        state.generation_rows.size(), state.reports_written ? "written" : "pending");
            return 0;
        }
        if (*report_cmd) {
            auto summary = shapmine::write_reports(report_out);
            std::printf("reports written: measurements rows %ld, complete games %ld\n",
                        summary.measurement_rows, summary.complete_games);
            print_feasibility_table(summary.feasibility_per_miner, summary.feasibility_overlap);
            return 0;
        }
        if (*shapley_cmd) {
            long complete = shapmine::recompute_shapley(shapley_out);
            std::printf("shapley.csv rewritten: %ld complete games\n", complete);
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
