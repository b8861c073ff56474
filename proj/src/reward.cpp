#include "relaysim/reward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace relaysim {

double density_threshold(const RewardWeights& w, int depth) {
    return w.density_base + depth;
}

double violation_penalty(const RewardWeights& w, ViolationKind v, Role role) {
    switch (v) {
        case ViolationKind::None: return 0.0;
        case ViolationKind::OutOfBounds: return w.pen_out_of_bounds;
        case ViolationKind::PositionConflict: return w.pen_conflict;
        case ViolationKind::ParentDisconnect:
            return role == Role::Relay ? w.pen_parent_relay : w.pen_parent_explorer;
        case ViolationKind::ChildLoss: return w.pen_child_loss;
        case ViolationKind::StructuralBreak: return w.pen_structural;
    }
    return 0.0;
}

double explorer_reward(const RewardWeights& w, const LocalFacts& f) {
    if (f.role != Role::Explorer)
        throw std::invalid_argument("explorer_reward: agent is not an explorer");
    const double crowding =
        std::max(0.0, f.neighbor_count - density_threshold(w, f.depth));
    return w.w1 * f.newly_explored + w.w2 * (f.found_user ? 1.0 : 0.0) - w.w3 * crowding -
           violation_penalty(w, f.violation, f.role);
}

double relay_reward(const RewardWeights& w, const LocalFacts& f, double fleet_mean_load) {
    if (f.role != Role::Relay) throw std::invalid_argument("relay_reward: agent is not a relay");
    return w.w4 * (f.bridge ? 1.0 : 0.0) - w.w5 * std::abs(f.load - fleet_mean_load) -
           violation_penalty(w, f.violation, f.role);
}

double local_reward(const RewardWeights& w, const LocalFacts& f, double fleet_mean_load) {
    return f.role == Role::Explorer ? explorer_reward(w, f)
                                    : relay_reward(w, f, fleet_mean_load);
}

double global_reward(const RewardWeights& w, const GlobalFacts& f) {
    double r = w.g1 * f.comm_quality + w.g2 * f.connected_users + w.g3 * f.explored_gain -
               w.g4 * f.agents - w.g5 * f.failures;
    if (w.stagnation_enabled && f.explored_gain == 0.0) r -= w.stagnation_penalty;
    return r;
}

std::vector<double> shape_rewards(const RewardWeights& w, const std::vector<double>& locals,
                                  double global) {
    std::vector<double> shaped;
    shaped.reserve(locals.size());
    for (double l : locals) shaped.push_back(w.lambda_local * l + w.lambda_global * global);
    return shaped;
}

double comm_quality(const World& world, const CommGraph& graph, const ExperimentConfig& cfg) {
    const double cap_ref =
        make_link(cfg.chan, {0, 0}, {cfg.env.comm_radius, 0}).capacity;
    double total = 0.0;
    int count = 0;
    for (const auto& user : world.users) {
        if (!user.connected) continue;
        const FlowStats st = flow_stats(world, graph, user, cfg);
        const double delay_term = std::clamp(1.0 - st.delay / user.max_delay, 0.0, 1.0);
        const double cap_term = std::clamp(st.bottleneck / cap_ref, 0.0, 1.0);
        total += 0.5 * (delay_term + cap_term);
        ++count;
    }
    return count == 0 ? 0.0 : total / count;
}

}  // namespace relaysim
