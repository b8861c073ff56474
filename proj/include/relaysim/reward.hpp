#pragma once

#include <vector>

#include "relaysim/config.hpp"
#include "relaysim/routing.hpp"
#include "relaysim/types.hpp"

namespace relaysim {

// Everything one agent's local reward depends on for a single step.
struct LocalFacts {
    Role role = Role::Explorer;
    int depth = 1;
    double load = 0.0;
    int newly_explored = 0;
    bool found_user = false;
    int neighbor_count = 0;  // other agents within comm radius
    bool bridge = false;     // lies on a committed user-to-BS path
    ViolationKind violation = ViolationKind::None;
};

struct GlobalFacts {
    double comm_quality = 0.0;  // [0,1]
    int connected_users = 0;
    double explored_gain = 0.0;  // fraction of all cells newly revealed this step
    int agents = 0;
    int failures = 0;            // flow breaks this step
};

double density_threshold(const RewardWeights& w, int depth);

double violation_penalty(const RewardWeights& w, ViolationKind v, Role role);

double explorer_reward(const RewardWeights& w, const LocalFacts& f);

double relay_reward(const RewardWeights& w, const LocalFacts& f, double fleet_mean_load);

double local_reward(const RewardWeights& w, const LocalFacts& f, double fleet_mean_load);

double global_reward(const RewardWeights& w, const GlobalFacts& f);

// Per-agent affine mix of the local rewards with the shared global reward.
std::vector<double> shape_rewards(const RewardWeights& w, const std::vector<double>& locals,
                                  double global);

// Mean per-connected-user service quality: normalized delay headroom and
// bottleneck headroom against the capacity of a comm-radius-length link.
double comm_quality(const World& world, const CommGraph& graph, const ExperimentConfig& cfg);

}  // namespace relaysim
