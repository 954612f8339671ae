#include "treeshadow/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace ts = treeshadow::experiment;

int main(int argc, char** argv) {
    CLI::App app{"scenario-tree utility optimisation under proportional transaction "
                 "costs, with shadow-price extraction and verification"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 0;

    const std::vector<std::string> kinds = {"solve",      "shadow-verify",  "f-curve",
                                            "stickiness", "divergence",     "arbitrage-demo",
                                            "fbm-validate"};
    for (const auto& kind : kinds) {
        auto* sub = app.add_subcommand(kind, "run a '" + kind + "' experiment");
        sub->add_option("--config", config_path, "experiment config file")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "seed override (mandatory for stochastic runs)")
            ->each([&](const std::string&) { seed_set = true; });
        sub->add_option("--out", out_dir, "output directory root");
        sub->add_option("--jobs", jobs, "worker cap for parallel sections");
    }

    CLI11_PARSE(app, argc, argv);
    const std::string kind = app.get_subcommands().front()->get_name();

    try {
        ts::Config cfg = ts::parse_config_file(config_path);
        cfg.sections["experiment"]["kind"] = kind;  // subcommand wins over the file
        ts::RunOverrides ov;
        if (seed_set) ov.seed = seed;
        ov.out_dir = out_dir;
        ov.jobs = jobs;
        const auto result = ts::run(cfg, ov);
        if (!result.run_dir.empty()) std::cout << "results: " << result.run_dir << "\n";
        if (!result.message.empty())
            (result.status == 0 ? std::cout : std::cerr) << result.message << "\n";
        return result.status;
    } catch (const ts::ValidationError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
