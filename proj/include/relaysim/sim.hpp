#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "relaysim/config.hpp"
#include "relaysim/dispatch.hpp"
#include "relaysim/env.hpp"
#include "relaysim/reward.hpp"
#include "relaysim/routing.hpp"

namespace relaysim {

struct ConnectAttempt {
    int user = 0;
    CommitResult result = CommitResult::Ok;
};

// Everything one pipeline step produced, for rewards, learning, and traces.
struct StepRecord {
    std::vector<Action> actions;
    StepOutcome outcome;
    std::vector<RequestEvent> requests;
    std::vector<int> broken_flows;       // user ids whose committed path died
    std::vector<ConnectAttempt> connects;
    std::vector<double> locals;          // per acting agent
    std::vector<double> shaped;
    double global = 0.0;
    GlobalFacts global_facts;
};

// Deterministic sub-streams for one episode of one run.
uint64_t episode_world_seed(uint64_t root_seed, int episode);
Rng episode_dispatch_stream(uint64_t root_seed, int episode);
Rng episode_exploration_stream(uint64_t root_seed, int episode);

// World plus the derived per-step state (graph with flow loads, route table),
// advanced by the fixed pipeline: move, dispatch, re-route, connect, reward.
struct Sim {
    ExperimentConfig cfg;
    World world;
    CommGraph graph;
    RouteTable routes;
    Rng dispatch_rng;
    StepRecord last;

    Sim(const ExperimentConfig& cfg, uint64_t world_seed, Rng dispatch_stream);
    // Starts from a caller-prepared world (pre-placed agents, known users).
    Sim(const ExperimentConfig& cfg, World start, Rng dispatch_stream);

    void step(const std::vector<Action>& actions);
    TerminationStatus status() const { return episode_done(world, cfg); }

  private:
    void refresh_topology();
    void attempt_connections();
    void score_step(int acting_agents, int explored_before);
};

class TraceWriter {
  public:
    explicit TraceWriter(std::ostream& os) : os_(os) {}
    void begin_episode(const ExperimentConfig& cfg, uint64_t root_seed, int episode,
                       const Sim& sim);
    void record_step(const Sim& sim);
    void end_episode(TerminationStatus status);

  private:
    std::ostream& os_;
};

struct EpisodeResult {
    TerminationStatus status = TerminationStatus::Running;
    bool success = false;
    int steps = 0;
    int agents_used = 1;
    int connected_users = 0;
    int failures = 0;
    double total_global = 0.0;
    double mean_delay = 0.0;       // s, over connected users at episode end
    double mean_bottleneck = 0.0;  // bit/s
    double min_bottleneck = 0.0;   // bit/s, min over connected users
};

using Policy = std::function<std::vector<Action>(const Sim&)>;

EpisodeResult run_episode(Sim& sim, const Policy& policy, TraceWriter* trace = nullptr);

// Re-executes a recorded episode and verifies the per-step world digests.
struct ReplayReport {
    bool ok = false;
    int steps_checked = 0;
    std::string message;
};
ReplayReport replay_trace(std::istream& in);

}  // namespace relaysim
