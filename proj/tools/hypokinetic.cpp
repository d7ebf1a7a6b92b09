// hypokinetic: run a named experiment preset from a config file.
//
//   hypokinetic run --config FILE [--preset NAME] [--seed N] [--out DIR]
//   hypokinetic list-presets
//
// Exit codes: 0 all criteria pass, 2 some criterion fails, 3 the run is
// invalid (truncation tail too large), 1 usage or configuration error.

#include <hypokinetic/config.hpp>
#include <hypokinetic/runner.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

int main(int argc, char** argv) {
    using namespace hypokinetic;

    CLI::App app{"Hermite-Fourier hypocoercivity laboratory"};
    app.require_subcommand(1);

    std::string config_path, preset, out;
    std::optional<std::uint64_t> seed;
    CLI::App* run_cmd = app.add_subcommand("run", "run one experiment");
    run_cmd->add_option("--config", config_path, "configuration file")->required();
    run_cmd->add_option("--preset", preset, "override the preset key");
    run_cmd->add_option("--seed", seed, "override the seed key");
    run_cmd->add_option("--out", out, "override the output directory");
    CLI::App* list_cmd = app.add_subcommand("list-presets", "print the preset names with their models");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (list_cmd->parsed()) {
        for (const auto& p : presets()) {
            std::cout << p.name << "  [";
            for (std::size_t i = 0; i < p.models.size(); ++i) std::cout << (i ? "|" : "") << p.models[i];
            std::cout << "]  " << p.summary << '\n';
        }
        return 0;
    }

    ExperimentConfig cfg;
    try {
        RawConfig raw = read_config_file(config_path);
        if (!preset.empty()) raw["preset"] = preset;
        if (seed) raw["seed"] = std::to_string(*seed);
        if (!out.empty()) raw["output_dir"] = out;
        cfg = validate_config(raw);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }

    try {
        const VerdictReport v = run(cfg);
        v.write(std::cout);
        return v.exit_code();
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << '\n';
        return 1;
    }
}
