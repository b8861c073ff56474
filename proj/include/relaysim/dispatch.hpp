#pragma once

#include <vector>

#include "relaysim/config.hpp"
#include "relaysim/rng.hpp"
#include "relaysim/topology.hpp"
#include "relaysim/types.hpp"

namespace relaysim {

struct ChainStat {
    int id = 0;
    double load = 0.0;
    double productivity = 0.0;  // cells per step
    int depth = 1;
};

// A deployment request carries the requester's and all ancestors' statistics.
struct DeployRequest {
    int requester = 0;
    std::vector<ChainStat> chain_stats;  // requester first, then up the tree
};

enum class RequestReason {
    Approved,
    NotExplorer,
    CapExhausted,
    FleetFull,
    OverLoaded,
    UnderExplored,
    OverDense,
};
const char* to_string(RequestReason r);

struct RequestVerdict {
    bool approved = false;
    RequestReason reason = RequestReason::Approved;
    double eta = 0.0;    // explored fraction of the accessible region
    double delta = 0.0;  // agent-neighbor density
};

// Mean cells revealed per step over the trailing window; agents younger than
// the window are measured over their whole post-spawn lifetime.
double productivity(const AgentState& agent, int window, int now);

DeployRequest build_request(const World& world, int requester, int window);

// Explored fraction of the in-bounds cells within 2*sense_radius of the agent.
double exploration_ratio(const World& world, int agent_id, int sense_radius);

// Agent neighbors within comm_radius over the in-bounds neighborhood cells.
double neighborhood_density(const World& world, int agent_id, int comm_radius);

RequestVerdict validate_request(const World& world, int requester,
                                const ExperimentConfig& cfg);

// Candidate score from clamped normalized load, productivity, and depth.
double deploy_score(const DispatchThresholds& th, double load_hat, double prod_hat,
                    double depth_hat);

std::vector<double> score_candidates(const DeployRequest& req, const ExperimentConfig& cfg);

// Boltzmann choice over candidate scores; returns the winning index.
size_t select_parent(const std::vector<double>& scores, double temp, Rng& rng);

// Places a new explorer on a free cell within comm radius of the parent, as
// far toward the requester's frontier as possible. Returns the new agent id,
// or kNoNextHop when every in-range cell is occupied.
int spawn(World& world, int parent_id, int requester, const ExperimentConfig& cfg);

struct RequestEvent {
    int requester = 0;
    RequestVerdict verdict;
    int parent = kNoNextHop;    // chosen parent when approved
    int spawned = kNoNextHop;   // new agent id, or kNoNextHop if expired
};

// Runs the full request pipeline for every agent whose action raised the
// request bit, in ascending requester id, rechecking the fleet cap per spawn.
std::vector<RequestEvent> process_requests(World& world, const std::vector<Action>& actions,
                                           const ExperimentConfig& cfg, Rng& rng);

}  // namespace relaysim
