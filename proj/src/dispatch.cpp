#include "relaysim/dispatch.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace relaysim {

const char* to_string(RequestReason r) {
    switch (r) {
        case RequestReason::Approved: return "approved";
        case RequestReason::NotExplorer: return "not-explorer";
        case RequestReason::CapExhausted: return "cap-exhausted";
        case RequestReason::FleetFull: return "fleet-full";
        case RequestReason::OverLoaded: return "over-loaded";
        case RequestReason::UnderExplored: return "under-explored";
        case RequestReason::OverDense: return "over-dense";
    }
    return "approved";
}

double productivity(const AgentState& agent, int window, int now) {
    if (window < 1) throw std::invalid_argument("productivity: window must be positive");
    const int t_past = std::max(agent.spawn_step, now - window);
    const int span = std::max(1, now - t_past);
    int cells = 0;
    for (int s : agent.reveal_steps) cells += (s > t_past && s <= now) ? 1 : 0;
    return static_cast<double>(cells) / span;
}

DeployRequest build_request(const World& world, int requester, int window) {
    DeployRequest req;
    req.requester = requester;
    int cur = requester;
    while (cur != kBsId) {
        const auto& a = world.agents[cur];
        req.chain_stats.push_back(
            {a.id, a.load, productivity(a, window, world.step_count), a.depth});
        cur = a.parent;
    }
    return req;
}

double exploration_ratio(const World& world, int agent_id, int sense_radius) {
    const GridPos center = world.agents[agent_id].pos;
    int accessible = 0;
    int explored = 0;
    for (GridPos c : manhattan_diamond(center, 2 * sense_radius)) {
        if (!world.in_bounds(c)) continue;
        ++accessible;
        explored += world.is_explored(c) ? 1 : 0;
    }
    return accessible == 0 ? 1.0 : static_cast<double>(explored) / accessible;
}

double neighborhood_density(const World& world, int agent_id, int comm_radius) {
    const GridPos center = world.agents[agent_id].pos;
    int cells = 0;
    for (GridPos c : manhattan_diamond(center, comm_radius))
        cells += (world.in_bounds(c) && !(c == center)) ? 1 : 0;
    int neighbors = 0;
    for (const auto& other : world.agents) {
        if (other.id == agent_id) continue;
        neighbors += manhattan(other.pos, center) <= comm_radius ? 1 : 0;
    }
    return cells == 0 ? 1.0 : static_cast<double>(neighbors) / cells;
}

RequestVerdict validate_request(const World& world, int requester,
                                const ExperimentConfig& cfg) {
    const auto& agent = world.agents[requester];
    RequestVerdict v;
    v.eta = exploration_ratio(world, requester, cfg.env.sense_radius);
    v.delta = neighborhood_density(world, requester, cfg.env.comm_radius);

    auto reject = [&](RequestReason why) {
        v.approved = false;
        v.reason = why;
        return v;
    };
    if (agent.role != Role::Explorer) return reject(RequestReason::NotExplorer);
    if (agent.deploy_requests_made >= cfg.dispatch.per_agent_cap)
        return reject(RequestReason::CapExhausted);
    if (static_cast<int>(world.agents.size()) >= cfg.dispatch.max_agents)
        return reject(RequestReason::FleetFull);
    if (agent.load / cfg.env.load_cap > cfg.dispatch.theta_load)
        return reject(RequestReason::OverLoaded);
    if (v.eta < cfg.dispatch.eta_min) return reject(RequestReason::UnderExplored);
    if (v.delta > cfg.dispatch.delta_max) return reject(RequestReason::OverDense);
    v.approved = true;
    v.reason = RequestReason::Approved;
    return v;
}

double deploy_score(const DispatchThresholds& th, double load_hat, double prod_hat,
                    double depth_hat) {
    auto clamp01 = [](double x) { return std::clamp(x, 0.0, 1.0); };
    return th.lambda_load * (1.0 - clamp01(load_hat)) + th.lambda_explore * clamp01(prod_hat) +
           th.lambda_depth * clamp01(depth_hat);
}

std::vector<double> score_candidates(const DeployRequest& req, const ExperimentConfig& cfg) {
    if (req.chain_stats.empty())
        throw std::invalid_argument("score_candidates: empty candidate chain");
    const double load_max = cfg.env.load_cap;
    const double prod_max = 2.0 * cfg.env.sense_radius + 1.0;  // widest fresh row per move
    const double depth_max = cfg.dispatch.max_agents;
    std::vector<double> scores;
    scores.reserve(req.chain_stats.size());
    for (const auto& c : req.chain_stats)
        scores.push_back(deploy_score(cfg.dispatch, c.load / load_max,
                                      c.productivity / prod_max, c.depth / depth_max));
    return scores;
}

size_t select_parent(const std::vector<double>& scores, double temp, Rng& rng) {
    if (scores.empty()) throw std::invalid_argument("select_parent: no candidates");
    if (temp <= 0.0) throw std::invalid_argument("select_parent: temperature must be positive");
    const double hi = *std::max_element(scores.begin(), scores.end());
    std::vector<double> weights;
    weights.reserve(scores.size());
    double total = 0.0;
    for (double s : scores) {
        const double w = std::exp((s - hi) / temp);
        weights.push_back(w);
        total += w;
    }
    const double u = rng.uniform() * total;
    double cum = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
        cum += weights[i];
        if (u < cum) return i;
    }
    return weights.size() - 1;
}

int spawn(World& world, int parent_id, int requester, const ExperimentConfig& cfg) {
    const auto& parent = world.agents[parent_id];
    const GridPos requester_pos = world.agents[requester].pos;

    // Frontier direction: resultant of offsets to unexplored accessible cells.
    double fx = 0.0;
    double fy = 0.0;
    for (GridPos c : manhattan_diamond(requester_pos, 2 * cfg.env.sense_radius)) {
        if (!world.in_bounds(c) || world.is_explored(c)) continue;
        fx += c.x - requester_pos.x;
        fy += c.y - requester_pos.y;
    }
    if (fx == 0.0 && fy == 0.0) {
        fx = requester_pos.x - parent.pos.x;
        fy = requester_pos.y - parent.pos.y;
    }
    if (fx == 0.0 && fy == 0.0) fx = 1.0;

    bool found = false;
    GridPos best{0, 0};
    double best_proj = 0.0;
    for (GridPos c : manhattan_diamond(parent.pos, cfg.env.comm_radius)) {
        if (!world.in_bounds(c) || world.agent_at(c) != kNoNextHop) continue;
        const double proj = fx * (c.x - parent.pos.x) + fy * (c.y - parent.pos.y);
        if (!found || proj > best_proj ||
            (proj == best_proj && std::pair(c.x, c.y) < std::pair(best.x, best.y))) {
            found = true;
            best = c;
            best_proj = proj;
        }
    }
    if (!found) return kNoNextHop;

    AgentState child;
    child.id = static_cast<int>(world.agents.size());
    child.pos = best;
    child.role = Role::Explorer;
    child.parent = parent_id;
    child.depth = parent.depth + 1;
    child.spawn_step = world.step_count;
    world.agents.push_back(std::move(child));
    auto& p = world.agents[parent_id];
    p.children.push_back(world.agents.back().id);
    p.role = Role::Relay;

    // Birth scan: the newcomer reveals its surroundings immediately.
    auto& newborn = world.agents.back();
    int progress = 0;
    for (GridPos c : manhattan_diamond(newborn.pos, cfg.env.sense_radius)) {
        if (!world.in_bounds(c) || world.is_explored(c)) continue;
        world.explored[c.y * world.width + c.x] = 1;
        ++world.explored_count;
        newborn.reveal_steps.push_back(world.step_count);
        ++progress;
    }
    for (auto& user : world.users) {
        if (user.discovered || manhattan(newborn.pos, user.pos) > cfg.env.sense_radius)
            continue;
        user.discovered = true;
        user.discovered_by = newborn.id;
        user.discovery_step = world.step_count;
        ++progress;
    }
    if (progress > 0) world.last_progress_step = world.step_count;
    return newborn.id;
}

std::vector<RequestEvent> process_requests(World& world, const std::vector<Action>& actions,
                                           const ExperimentConfig& cfg, Rng& rng) {
    std::vector<RequestEvent> events;
    const int requesters = static_cast<int>(actions.size());
    for (int id = 0; id < requesters; ++id) {
        if (!actions[id].request) continue;
        RequestEvent ev;
        ev.requester = id;
        ev.verdict = validate_request(world, id, cfg);
        if (ev.verdict.approved) {
            world.agents[id].deploy_requests_made += 1;
            DeployRequest req = build_request(world, id, cfg.dispatch.productivity_window);
            const auto scores = score_candidates(req, cfg);
            const size_t pick = select_parent(scores, cfg.dispatch.softmax_temp, rng);
            ev.parent = req.chain_stats[pick].id;
            ev.spawned = spawn(world, ev.parent, id, cfg);
        }
        events.push_back(ev);
    }
    return events;
}

}  // namespace relaysim
