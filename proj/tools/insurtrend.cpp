// Command-line driver for the staged insurer clustering pipeline.

#include "insurtrend/pipeline.hpp"
#include "insurtrend/synthetic.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace {

constexpr int kExitStageError = 1;
constexpr int kExitConfigError = 2;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"insurtrend: quarterly insurer ratios -> LSTM fusion -> DTW clustering"};
    app.set_version_flag("--version", std::string(insurtrend::kToolVersion));
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, workspace, format;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets;
    app.add_option("-c,--config", config_path, "INI config file with one section per stage")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "root seed for every stage");
    app.add_option("--workspace", workspace, "artifact directory");
    app.add_option("--format", format, "table format for exports")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--set", sets, "override a config entry, e.g. --set fuse.epochs=30");

    std::vector<CLI::App*> stage_cmds;
    for (const auto stage : insurtrend::kStages) {
        stage_cmds.push_back(app.add_subcommand(std::string(stage), "run the " + std::string(stage) + " stage"));
    }
    auto* all = app.add_subcommand("run", "run every stage in order");
    auto* verify = app.add_subcommand("verify", "re-check every manifest hash in the workspace");

    auto* synth = app.add_subcommand("synth", "write a synthetic quarterly panel in the default source layout");
    std::string synth_out;
    insurtrend::SyntheticPanelOptions synth_opt;
    synth->add_option("output", synth_out, "destination CSV")->required();
    synth->add_option("--companies", synth_opt.companies)->check(CLI::PositiveNumber);
    synth->add_option("--quarters", synth_opt.quarters)->check(CLI::PositiveNumber);
    synth->add_option("--synth-seed", synth_opt.seed, "generator seed");

    CLI11_PARSE(app, argc, argv);

    if (synth->parsed()) {
        try {
            insurtrend::write_text_file(synth_out, insurtrend::records_to_csv(insurtrend::synthetic_records(synth_opt)));
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return kExitStageError;
        }
        return 0;
    }

    insurtrend::PipelineConfig cfg;
    try {
        std::map<std::string, std::string> entries;
        if (!config_path.empty()) entries = insurtrend::read_config_file(config_path);
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw insurtrend::ConfigError("--set expects section.key=value, got '" + s + "'");
            entries[s.substr(0, eq)] = s.substr(eq + 1);
        }
        if (seed) entries["general.seed"] = std::to_string(*seed);
        if (!workspace.empty()) entries["general.workspace"] = workspace;
        if (!format.empty()) entries["general.format"] = format;
        cfg = insurtrend::build_config(entries);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
    }

    try {
        if (verify->parsed()) {
            const auto problems = insurtrend::verify_workspace(cfg.workspace);
            for (const auto& p : problems) std::cerr << p << '\n';
            if (!problems.empty()) return kExitStageError;
            std::cout << "workspace " << cfg.workspace.string() << ": all manifests verified\n";
            return 0;
        }
        if (all->parsed()) {
            insurtrend::run_all(cfg);
            return 0;
        }
        for (auto* cmd : stage_cmds) {
            if (cmd->parsed()) insurtrend::run_subcommand(cmd->get_name(), cfg);
        }
    } catch (const insurtrend::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitStageError;
    }
    return 0;
}
