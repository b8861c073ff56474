#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace relaysim {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Free-space path loss channel constants.
struct ChannelParams {
    double tx_power = 1.0;        // W
    double gain_tx = 1.0;
    double gain_rx = 1.0;
    double wavelength = 0.125;    // m
    double noise_power = 1e-9;    // W
    double bandwidth = 1e7;       // Hz
    double prop_speed = 3e8;      // m/s
    double cell_size = 1.0;       // m per grid cell
    bool use_propagation_delay = false;
};

struct RoutingWeights {
    double w_delay = 1e6;
    double w_capacity = 1e8;
    double w_load = 0.05;
};

struct DispatchThresholds {
    double eta_min = 0.75;        // exploration sufficiency gate
    double delta_max = 0.5;       // neighborhood density gate
    double theta_load = 0.8;      // requester load eligibility, fraction of load cap
    int max_agents = 12;
    int per_agent_cap = 3;
    double softmax_temp = 0.5;
    double lambda_load = 1.0 / 3.0;
    double lambda_explore = 1.0 / 3.0;
    double lambda_depth = 1.0 / 3.0;
    int productivity_window = 10;
};

struct RewardWeights {
    // local: explored cells, user found, density, bridge, load deviation
    double w1 = 1.0;
    double w2 = 5.0;
    double w3 = 0.5;
    double w4 = 2.0;
    double w5 = 0.1;
    // global: comm quality, connected users, exploration, agent count, failures
    double g1 = 1.0;
    double g2 = 1.0;
    double g3 = 0.5;
    double g4 = 0.05;
    double g5 = 1.0;
    double lambda_local = 0.5;
    double lambda_global = 0.5;
    double density_base = 2.0;    // density threshold = base + tree depth
    double stagnation_penalty = 0.01;
    bool stagnation_enabled = true;
    // violation severities per role
    double pen_out_of_bounds = 1.0;
    double pen_conflict = 1.0;
    double pen_parent_explorer = 2.0;
    double pen_parent_relay = 3.0;
    double pen_child_loss = 3.0;
    double pen_structural = 3.0;
};

struct HyperParams {
    double gamma = 0.95;
    double lr_actor = 1e-3;
    double lr_critic = 1e-3;
    int batch = 128;
    int buffer_capacity = 800;
    double eps0 = 0.1;
    double eps_min = 0.01;
    double eps_decay = 0.995;     // per environment step
    int target_update_period = 100;
    int episodes = 2000;
    int update_period = 1;        // environment steps between gradient updates
    bool shared_actor = true;
};

struct NetConfig {
    int enc_dim = 32;
    int gat_dim = 32;
    int value_hidden = 32;
};

struct GaConfig {
    int population = 40;
    int generations = 60;
    double p_add = 0.2;
    double p_remove = 0.2;
    double p_relocate = 0.4;
    double p_crossover = 0.8;
};

struct EpisodeLimits {
    int max_steps = 0;            // 0: scale 400 * cells / 100
    int stall_window = 50;
    double rho_min = 1.0;
};

struct EnvConfig {
    int width = 10;
    int height = 10;
    int users = 5;
    int max_users = 5;
    int sense_radius = 3;
    int comm_radius = 3;
    double load_cap = 50.0;       // per-agent load limit
    double workload_min = 5.0;
    double workload_max = 15.0;
    double capacity_req_min = 1e6;   // bit/s
    double capacity_req_max = 3e6;
    double delay_cap_min = 0.03;     // s
    double delay_cap_max = 0.06;
};

struct BaselineConfig {
    int static_max_agents = 64;   // cap for the offline deployments
    int random_budget = 0;        // 0: use dispatch.max_agents
};

struct SweepConfig {
    std::vector<int> users{1, 2, 3, 4, 5};
    std::vector<int> grids;       // empty: keep env grid
    std::vector<std::string> strategies{"a3", "greedy_ga", "max_coverage", "random_centralized"};
    int train_episodes = 800;
};

struct ExperimentConfig {
    std::string mode = "train";
    uint64_t seed = 1;
    std::vector<uint64_t> seeds{1, 2, 3, 4, 5};
    std::string out_dir = "out";
    std::string checkpoint;       // learned-policy checkpoint for eval/sweep
    int trace_episodes = 0;       // how many leading episodes get a trace file
    int eval_episodes = 20;       // rollouts per evaluation call

    EnvConfig env;
    ChannelParams chan;
    RoutingWeights route;
    DispatchThresholds dispatch;
    RewardWeights reward;
    HyperParams learn;
    NetConfig net;
    GaConfig ga;
    EpisodeLimits limits;
    BaselineConfig baseline;
    SweepConfig sweep;

    int max_steps_for(int width, int height) const {
        if (limits.max_steps > 0) return limits.max_steps;
        return static_cast<int>(std::max(1.0, 400.0 * width * height / 100.0));
    }

    bool operator==(const ExperimentConfig& other) const;
};

// Key-tree text format: one `section.key = value` per line, '#' comments.
// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

std::string serialize_config(const ExperimentConfig& cfg);
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);
void apply_override(ExperimentConfig& cfg, const std::string& key_eq_value);
uint64_t config_hash(const ExperimentConfig& cfg);
void validate_config(const ExperimentConfig& cfg);

}  // namespace relaysim
