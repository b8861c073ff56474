#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "relaysim/config.hpp"
#include "relaysim/learner.hpp"
#include "relaysim/metrics.hpp"

namespace relaysim {

// One evaluated episode or static deployment, one CSV line.
struct MetricsRow {
    std::string strategy;
    int grid = 0;                   // square side
    int users = 0;
    uint64_t seed = 0;
    int episode = 0;
    bool success = false;
    int agents = 0;
    int steps = 0;
    double mean_delay = 0.0;        // s, over served users at the end
    double mean_bottleneck = 0.0;   // bit/s
    double min_bottleneck = 0.0;    // bit/s, the objective value
    std::array<int, 7> violations{};
    uint64_t config_hash = 0;
    std::string note;               // nonempty marks a failed cell

    std::string scenario() const;
};

void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const MetricsRow& row);
MetricsRow parse_metrics_row(const std::string& line);

// Per-scenario aggregates over every row that shares the key. Delay and
// capacity moments skip rows that served nobody; counts make that visible.
struct SummaryRow {
    std::string strategy;
    int grid = 0;
    int users = 0;
    int rows = 0;
    int served_rows = 0;
    double success_rate = 0.0;
    double agents_mean = 0.0, agents_std = 0.0;
    double steps_mean = 0.0, steps_std = 0.0;
    double delay_mean = 0.0, delay_std = 0.0;
    double bottleneck_mean = 0.0, bottleneck_std = 0.0;
    double objective_mean = 0.0, objective_std = 0.0;
};

std::vector<SummaryRow> summarize(const std::vector<MetricsRow>& rows);
void write_summary_header(std::ostream& os);
void write_summary_row(std::ostream& os, const SummaryRow& row);

// Greedy evaluation rollouts of a trained policy under `cfg`, one row per
// episode; writes traces for the first `trace_episodes` episodes when a
// directory is given.
std::vector<MetricsRow> eval_policy_rows(const Learner& policy, const ExperimentConfig& cfg,
                                         const std::string& strategy, uint64_t seed, int episodes,
                                         const std::string& trace_dir = "",
                                         int trace_episodes = 0);

// Strategy x grid x users x seed sweep. Rows land in deterministic key
// order regardless of worker count; failed cells become flagged rows.
// Returns the number of flagged cells.
int run_suite(const ExperimentConfig& cfg, std::ostream& rows_csv, std::ostream& summary_csv);

// Entry points behind the CLI verbs. Each writes CSVs under cfg.out_dir.
int run_train(const ExperimentConfig& cfg);
int run_eval(const ExperimentConfig& cfg);
int run_baseline(const ExperimentConfig& cfg, const std::string& name);

}  // namespace relaysim
