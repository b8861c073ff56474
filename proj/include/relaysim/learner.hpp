#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "relaysim/actor_critic.hpp"
#include "relaysim/config.hpp"
#include "relaysim/sim.hpp"

namespace relaysim {

// One environment step as the learner stores it: joint observation-action
// at t plus the successor state, with whatever agent counts each side had.
struct Transition {
    Matrix obs;                               // agents x obs_dim
    Matrix node_static;                       // agents x static feature dim
    std::vector<std::pair<int, int>> edges;   // agent-agent comm pairs
    std::vector<Action> actions;
    double reward = 0.0;                      // team reward r(t)
    std::vector<double> shaped;               // per-agent shaped rewards
    Matrix next_obs;
    Matrix next_static;
    std::vector<std::pair<int, int>> next_edges;
    bool terminal = false;
    int agents_before = 0;
    int agents_after = 0;
};

// Fixed-capacity ring; sampling is uniform without replacement per batch.
class ReplayBuffer {
  public:
    explicit ReplayBuffer(size_t capacity) : capacity_(capacity) {}

    void push(Transition t);
    size_t size() const { return storage_.size(); }
    size_t capacity() const { return capacity_; }
    const Transition& at(size_t i) const { return storage_[i]; }

    std::vector<const Transition*> sample(size_t batch, Rng& rng) const;

  private:
    size_t capacity_;
    size_t head_ = 0;  // next slot to overwrite once full
    std::vector<Transition> storage_;
};

// What one agent's policy sees, stacked for a whole-team forward pass.
struct Snapshot {
    Matrix obs;
    Matrix node_static;
    std::vector<std::vector<int>> adjacency;
    std::vector<std::pair<int, int>> edges;
};

Snapshot take_snapshot(const Sim& sim);

struct TrainRow {
    int episode = 0;
    int steps = 0;
    double reward = 0.0;
    bool success = false;
    int agents = 0;
    double epsilon = 0.0;
    double critic_loss = 0.0;
};

struct EvalSummary {
    int episodes = 0;
    double success_rate = 0.0;
    double mean_agents = 0.0;
    double mean_steps = 0.0;
    double mean_delay = 0.0;        // over episodes with >= 1 connected user
    double mean_bottleneck = 0.0;   // bit/s, same restriction
    double mean_connected = 0.0;
};

// Centralized training, decentralized execution: one shared policy net by
// default (per-agent sets via config), one value net over the comm graph.
class Learner {
  public:
    explicit Learner(const ExperimentConfig& cfg, uint64_t init_seed);

    std::vector<Action> act(const Snapshot& snap, double epsilon, Rng& rng) const;

    // y = r + gamma * Q'(s', target policy actions); y = r on terminal steps.
    Eigen::VectorXd td_targets(const std::vector<const Transition*>& batch) const;

    double critic_update(const std::vector<const Transition*>& batch);
    double actor_update(const std::vector<const Transition*>& batch);

    std::vector<TrainRow> train(uint64_t root_seed, std::ostream* log_csv);

    EvalSummary evaluate(uint64_t root_seed, int episodes) const;

    void save(const std::string& path) const;
    void load(const std::string& path);

    const ExperimentConfig& config() const { return cfg_; }
    const NetDims& dims() const { return dims_; }
    long critic_forward_calls() const {
        return critic_.forward_calls + critic_target_.forward_calls;
    }
    uint64_t update_steps() const { return critic_steps_; }

    ActorNet& actor(int agent_id = 0);
    const ActorNet& actor(int agent_id = 0) const;
    CriticNet& critic() { return critic_; }
    const CriticNet& critic() const { return critic_; }
    ReplayBuffer& buffer() { return buffer_; }

    double epsilon_at(uint64_t env_step) const;

  private:
    ExperimentConfig cfg_;
    NetDims dims_;
    uint64_t init_seed_;
    std::vector<ActorNet> actors_;         // size 1 when shared
    std::vector<ActorNet> actor_targets_;
    CriticNet critic_;
    CriticNet critic_target_;
    ReplayBuffer buffer_;
    uint64_t critic_steps_ = 0;
    uint64_t env_steps_ = 0;

    void sync_targets();
};

void write_train_header(std::ostream& os);
void write_train_row(std::ostream& os, const TrainRow& row);

}  // namespace relaysim
