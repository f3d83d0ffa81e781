// irspace: command-line driver for the query-log geometry pipeline.

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "irspace/config.hpp"
#include "irspace/error.hpp"
#include "irspace/io.hpp"
#include "irspace/pipeline.hpp"

using namespace irspace;

namespace {

PipelineConfig load_config(const std::string& path, const std::map<std::string, std::string>& flags,
                           const std::vector<std::string>& sets, const std::string& outdir) {
    PipelineConfig cfg;
    if (!path.empty()) cfg = parse_config(read_file(path));
    for (const auto& [key, value] : flags) apply_override(cfg, key, value);
    for (const auto& kv : sets) {
        auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw ValidationError("--set expects key=value, got '" + kv + "'");
        apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!outdir.empty()) cfg.outdir = outdir;
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Geometry of search sessions: ingest, embed, fit and probe query logs"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, outdir;
    std::vector<std::string> sets;
    bool force = false;
    app.add_option("-c,--config", config_path, "JSON config file");
    app.add_option("-o,--outdir", outdir, "Output directory (overrides the config)");
    app.add_option("--set", sets, "Override a config field, e.g. --set distance.b=0.5")->take_all();
    app.add_flag("-f,--force", force, "Recompute stages even when they are up to date");

    std::map<std::string, std::string> flags;
    for (const auto& key : config_keys()) {
        if (key == "outdir") continue;
        app.add_option_function<std::string>("--" + key, [&flags, key](const std::string& v) { flags[key] = v; },
                                             "Config field " + key)
            ->group("Config fields");
    }

    std::vector<Stage> stages;
    for (Stage s : all_stages()) {
        auto* sub = app.add_subcommand(std::string(to_string(s)), "Run the " + std::string(to_string(s)) + " stage");
        sub->callback([&stages, s] { stages = {s}; });
    }
    std::vector<std::string> run_names;
    auto* run = app.add_subcommand("run", "Run several stages in order");
    run->add_option("stages", run_names, "Stage names")->required();
    run->callback([&] {
        stages.clear();
        for (const auto& n : run_names) stages.push_back(parse_stage(n));
    });
    auto* show = app.add_subcommand("config", "Print the resolved configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(exit_code_for(e));
    }

    try {
        PipelineConfig cfg = load_config(config_path, flags, sets, outdir);
        if (show->parsed()) {
            std::cout << dump_config(cfg);
            return 0;
        }
        OutputLock lock(cfg.outdir);
        RunOptions opts;
        opts.force = force;
        opts.log = &std::cout;
        for (Stage s : stages) run_stage(s, cfg, opts);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(exit_code_for(e));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::validation);
    }
    return 0;
}
