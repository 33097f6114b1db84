#include "deltapi/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Off-policy damped policy iteration for H-infinity tracking"};
    app.require_subcommand(1);

    deltapi::CliOptions options;
    std::uint64_t seed = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", options.config, "run configuration (JSON)")->required();
        sub->add_option("--out-dir", options.out_dir, "artifact directory (overrides output_dir)");
        sub->add_option("--seed", seed, "override the configured seed");
    };

    auto* collect = app.add_subcommand("collect", "simulate the behavior policy and store window statistics");
    add_common(collect);
    collect->add_option("--dataset", options.dataset, "dataset output path");

    auto* train = app.add_subcommand("train", "run off-policy policy iteration on a stored dataset");
    add_common(train);
    train->add_option("--dataset", options.dataset, "dataset input path");
    train->add_option("--weights", options.weights, "weights output path");

    auto* evaluate = app.add_subcommand("evaluate", "closed-loop test of trained weights");
    add_common(evaluate);
    evaluate->add_option("--weights", options.weights, "weights input path");

    auto* pipeline = app.add_subcommand("pipeline", "collect, train and evaluate in sequence");
    add_common(pipeline);
    pipeline->add_option("--dataset", options.dataset, "dataset path");
    pipeline->add_option("--weights", options.weights, "weights path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : deltapi::exit_code::kBadInput;
    }

    for (auto* sub : app.get_subcommands()) {
        if (sub->count("--seed")) options.seed = seed;
    }

    if (collect->parsed()) return deltapi::cmd_collect(options, std::cout, std::cerr);
    if (train->parsed()) return deltapi::cmd_train(options, std::cout, std::cerr);
    if (evaluate->parsed()) return deltapi::cmd_evaluate(options, std::cout, std::cerr);
    return deltapi::cmd_pipeline(options, std::cout, std::cerr);
}
