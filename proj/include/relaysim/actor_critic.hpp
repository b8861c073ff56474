#pragma once

#include <string>
#include <utility>
#include <vector>

#include "relaysim/config.hpp"
#include "relaysim/nn.hpp"
#include "relaysim/sim.hpp"
#include "relaysim/types.hpp"

namespace relaysim {

constexpr int kRequestDim = 2;       // request bit as a two-way choice
constexpr int kOwnFeatureDim = 10;   // per-agent scalar block of the policy input
constexpr int kNodeStaticDim = 6;    // value-net node descriptor without actions

struct NetDims {
    int obs_dim = 0;    // policy input width per agent
    int node_dim = 0;   // value-net input width per node (static + action one-hots)
    int enc = 0;
    int gat = 0;
    int value_hidden = 0;
};

NetDims net_dims(const ExperimentConfig& cfg);

// Flattens one observation: 4 flags per sensed cell in fixed diamond order,
// then the agent's own normalized scalars.
Eigen::RowVectorXd encode_observation(const Observation& obs, const ExperimentConfig& cfg);

// Static node descriptor for the centralized value net: normalized position,
// role one-hot, normalized load and depth.
Eigen::RowVectorXd node_static_features(const AgentState& agent, const ExperimentConfig& cfg);

// Action one-hots appended to the static node descriptor.
Eigen::RowVectorXd action_one_hot(const Action& a);

// Agent-to-agent adjacency lists (base station excluded) from a comm graph.
std::vector<std::vector<int>> agent_adjacency(const CommGraph& graph);

struct ActorHeads {
    Var move_logits;     // n x 5
    Var request_logits;  // n x 2
};

// Policy network: per-agent encoder, one attention layer over the comm
// neighborhood, and two output heads. One forward pass covers every agent.
struct ActorNet {
    ParamSet params;

    void init(const NetDims& dims, uint64_t seed);
    ActorHeads forward(Tape& tape, TapeBinding& bind, Var obs,
                       const std::vector<std::vector<int>>& adjacency) const;
};

// Centralized value network over the full comm graph: shared encoder and
// attention stack, per-node transform, mean pooling per graph, scalar output.
struct CriticNet {
    ParamSet params;
    mutable long forward_calls = 0;  // proof that evaluation never consults it

    void init(const NetDims& dims, uint64_t seed);
    // node_features: (sum of node counts) x node_dim; returns n_graphs x 1.
    Var forward(Tape& tape, TapeBinding& bind, Var node_features,
                const std::vector<std::vector<int>>& adjacency,
                const std::vector<int>& graph_ids, int n_graphs) const;
};

// Greedy action from one agent's head rows; epsilon-greedy exploration
// replaces the move uniformly and flips the request bit independently.
Action select_action(const Eigen::RowVectorXd& move_logits,
                     const Eigen::RowVectorXd& request_logits, double epsilon, Rng& rng);

}  // namespace relaysim
