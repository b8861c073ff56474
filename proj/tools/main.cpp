#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "relaysim/config.hpp"
#include "relaysim/harness.hpp"
#include "relaysim/sim.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir;
    std::vector<std::string> overrides;
};

void add_common_flags(CLI::App* sub, CommonOpts& opts) {
    sub->add_option("--seed", opts.seed, "root random seed")
        ->each([&opts](const std::string&) { opts.seed_set = true; });
    sub->add_option("--out", opts.out_dir, "output directory");
    sub->add_option("--override", opts.overrides, "config override, key=value")
        ->take_all()
        ->allow_extra_args(false);
}

relaysim::ExperimentConfig load_with_opts(const CommonOpts& opts) {
    relaysim::ExperimentConfig cfg = relaysim::load_config_file(opts.config_path);
    for (const std::string& o : opts.overrides) relaysim::apply_override(cfg, o);
    if (opts.seed_set) {
        cfg.seed = opts.seed;
        cfg.seeds = {opts.seed};
    }
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    return cfg;
}

int do_sweep(const relaysim::ExperimentConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream rows(cfg.out_dir + "/metrics.csv", std::ios::binary);
    std::ofstream summary(cfg.out_dir + "/summary.csv", std::ios::binary);
    if (!rows || !summary)
        throw std::runtime_error("cannot write sweep outputs in " + cfg.out_dir);
    const int flagged = relaysim::run_suite(cfg, rows, summary);
    std::cout << "sweep done, outputs in " << cfg.out_dir;
    if (flagged > 0) std::cout << ", " << flagged << " flagged rows";
    std::cout << "\n";
    return 0;
}

int do_replay(const std::string& trace_path) {
    std::ifstream in(trace_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open trace: " + trace_path);
    const relaysim::ReplayReport report = relaysim::replay_trace(in);
    if (!report.ok) throw std::runtime_error("replay diverged: " + report.message);
    std::cout << "replay ok, " << report.steps_checked << " steps verified\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"grid relay network simulator and learning harness"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    CommonOpts train_opts, eval_opts, baseline_opts, sweep_opts;
    std::string checkpoint_path, baseline_name, trace_path;

    CLI::App* train = app.add_subcommand("train", "train a policy, save log and checkpoint");
    train->add_option("config", train_opts.config_path, "configuration file")->required();
    add_common_flags(train, train_opts);

    CLI::App* eval = app.add_subcommand("eval", "roll out a trained checkpoint");
    eval->add_option("checkpoint", checkpoint_path, "checkpoint file")->required();
    eval->add_option("config", eval_opts.config_path, "configuration file")->required();
    add_common_flags(eval, eval_opts);

    CLI::App* baseline = app.add_subcommand("baseline", "run one comparison strategy");
    baseline->add_option("name", baseline_name,
                         "greedy_ga | max_coverage | random_centralized")
        ->required();
    baseline->add_option("config", baseline_opts.config_path, "configuration file")->required();
    add_common_flags(baseline, baseline_opts);

    CLI::App* sweep = app.add_subcommand("sweep", "strategy x scenario x seed comparison");
    sweep->add_option("config", sweep_opts.config_path, "configuration file")->required();
    add_common_flags(sweep, sweep_opts);

    CLI::App* replay = app.add_subcommand("replay", "verify a recorded episode trace");
    replay->add_option("trace", trace_path, "trace file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << app.help() << "\n";
        std::cerr << e.what() << "\n";
        return 1;
    }

    try {
        if (train->parsed()) return relaysim::run_train(load_with_opts(train_opts));
        if (eval->parsed()) {
            relaysim::ExperimentConfig cfg = load_with_opts(eval_opts);
            cfg.checkpoint = checkpoint_path;
            return relaysim::run_eval(cfg);
        }
        if (baseline->parsed())
            return relaysim::run_baseline(load_with_opts(baseline_opts), baseline_name);
        if (sweep->parsed()) return do_sweep(load_with_opts(sweep_opts));
        if (replay->parsed()) return do_replay(trace_path);
        std::cerr << app.help() << "\n";
        return 1;
    } catch (const relaysim::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
