#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "ldt/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"ldt: language decision transformer pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    int jobs = 1;
    long long seed = -1;  // -1: take the seed from the config

    for (const char* name : {"gen-data", "train", "eval", "report", "reproduce"}) {
        auto* cmd = app.add_subcommand(name);
        cmd->add_option("--config", config_path, "run configuration file")->required();
        cmd->add_option("--jobs", jobs, "worker count")->check(CLI::PositiveNumber);
        cmd->add_option("--seed", seed, "master seed override");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::fprintf(stderr, "error: LDT_E_USAGE: %s\n", e.what());
        return 2;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        ldt::RunConfig cfg = ldt::load_run_config(config_path, seed);
        if (command == "gen-data")
            ldt::cmd_gen_data(cfg);
        else if (command == "train")
            ldt::cmd_train(cfg, jobs);
        else if (command == "eval")
            ldt::cmd_eval(cfg, jobs);
        else if (command == "report")
            ldt::cmd_report(cfg, jobs);
        else
            ldt::cmd_reproduce(cfg, jobs);
        return 0;
    } catch (const ldt::PipelineError& e) {
        std::fprintf(stderr, "error: %s: %s\n", e.code.c_str(), e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: LDT_E_RUNTIME: %s\n", e.what());
        return 1;
    }
}
