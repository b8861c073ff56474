#include "relaysim/routing.hpp"

#include <cmath>
#include <stdexcept>

namespace relaysim {

std::vector<int> RouteTable::chain(int agent_id) const {
    std::vector<int> out;
    int cur = agent_id;
    while (cur != kBsId) {
        if (cur == kNoNextHop || !metrics[cur].reached())
            throw std::logic_error("chain: agent has no route to the base station");
        out.push_back(cur);
        cur = metrics[cur].next_hop;
        if (out.size() > metrics.size())
            throw std::logic_error("chain: next-hop cycle");
    }
    out.push_back(kBsId);
    return out;
}

PathMetrics bs_metrics() {
    PathMetrics m;
    m.delay = 0.0;
    m.bottleneck = kBsBottleneck;
    m.load = 0.0;
    m.next_hop = kBsId;
    return m;
}

CandidateMetrics candidate_metrics(const PathMetrics& upstream, const LinkState& link,
                                   double payload, const ChannelParams& chan) {
    if (!upstream.reached())
        throw std::invalid_argument("candidate_metrics: neighbor not reached");
    if (link.available() <= 0.0)
        throw std::domain_error("candidate_metrics: saturated link");
    CandidateMetrics c;
    c.delay = upstream.delay + hop_delay(chan, link, payload);
    c.bottleneck = std::min(upstream.bottleneck, link.available());
    c.load = upstream.load + payload;
    return c;
}

double route_score(const RoutingWeights& w, double delay, double bottleneck, double load) {
    if (bottleneck <= 0.0) throw std::domain_error("route_score: zero bottleneck");
    return w.w_delay * delay + w.w_capacity / bottleneck + w.w_load * load;
}

RouteTable relax_until_stable(const CommGraph& graph, const RoutingWeights& w,
                              const std::vector<double>& payloads,
                              const ChannelParams& chan) {
    const int n = graph.agent_count;
    if (static_cast<int>(payloads.size()) != n)
        throw std::invalid_argument("relax_until_stable: one payload per agent required");

    RouteTable table;
    table.metrics.assign(n, PathMetrics{});
    const PathMetrics bs = bs_metrics();
    auto metrics_of = [&](int id) -> const PathMetrics& {
        return id == kBsId ? bs : table.metrics[id];
    };

    const int max_rounds = n + 2;
    bool stable = false;
    for (int round = 0; round < max_rounds && !stable; ++round) {
        stable = true;
        std::vector<PathMetrics> next = table.metrics;
        for (int i = 0; i < n; ++i) {
            const PathMetrics& cur = table.metrics[i];
            int best_hop = kNoNextHop;
            CandidateMetrics best{};
            double best_score = 0.0;
            for (auto [nbr, e] : graph.neighbors(i)) {
                const PathMetrics& up = metrics_of(nbr);
                if (!up.reached() || graph.links[e].available() <= 0.0) continue;
                // Feasibility: only adopt a neighbor strictly closer to the BS
                // (by delay) than this agent currently is, unless it is the
                // hop already in use being refreshed.
                if (nbr != cur.next_hop && up.delay >= cur.delay) continue;
                const CandidateMetrics cand = candidate_metrics(up, graph.links[e], payloads[i], chan);
                const double s = route_score(w, cand.delay, cand.bottleneck, cand.load);
                if (best_hop == kNoNextHop || s < best_score ||
                    (s == best_score && nbr < best_hop)) {
                    best_hop = nbr;
                    best = cand;
                    best_score = s;
                }
            }
            if (best_hop == kNoNextHop) continue;
            if (best_hop != cur.next_hop || best.delay != cur.delay ||
                best.bottleneck != cur.bottleneck || best.load != cur.load) {
                next[i].delay = best.delay;
                next[i].bottleneck = best.bottleneck;
                next[i].load = best.load;
                next[i].next_hop = best_hop;
                stable = false;
            }
        }
        table.metrics = std::move(next);
    }
    if (!stable) throw std::runtime_error("relax_until_stable: no fixed point within round cap");

    for (int i = 0; i < n; ++i)
        if (!table.metrics[i].reached())
            throw std::domain_error("relax_until_stable: agent " + std::to_string(i) +
                                    " has no reached neighbor with available capacity");
    // Cycle check: every agent's pointer chase must end at the BS.
    for (int i = 0; i < n; ++i) (void)table.chain(i);
    return table;
}

const char* to_string(CommitResult r) {
    switch (r) {
        case CommitResult::Ok: return "ok";
        case CommitResult::BrokenChain: return "broken-chain";
        case CommitResult::CapacityViolation: return "capacity-violation";
        case CommitResult::LoadViolation: return "load-violation";
    }
    return "ok";
}

CommitResult commit_flow(World& world, CommGraph& graph, int user_id, int serving_agent,
                         const std::vector<int>& chain, const ExperimentConfig& cfg) {
    auto& user = world.users[user_id];
    if (!user.discovered || chain.empty() || chain.front() != serving_agent ||
        chain.back() != kBsId)
        return CommitResult::BrokenChain;
    if (manhattan(user.pos, world.agents[serving_agent].pos) > cfg.env.comm_radius)
        return CommitResult::BrokenChain;

    std::vector<int> edge_idx;
    for (size_t h = 0; h + 1 < chain.size(); ++h) {
        const int e = graph.edge_between(chain[h], chain[h + 1]);
        if (e < 0) return CommitResult::BrokenChain;
        edge_idx.push_back(e);
    }

    const LinkState access = make_link(cfg.chan, user.pos, world.agents[serving_agent].pos);
    if (access.capacity - user.workload < user.min_capacity)
        return CommitResult::CapacityViolation;
    for (int e : edge_idx)
        if (graph.links[e].available() - user.workload < user.min_capacity)
            return CommitResult::CapacityViolation;
    for (size_t h = 0; h + 1 < chain.size(); ++h)
        if (world.agents[chain[h]].load + user.workload > cfg.env.load_cap)
            return CommitResult::LoadViolation;

    for (int e : edge_idx) graph.links[e].load += user.workload;
    for (size_t h = 0; h + 1 < chain.size(); ++h)
        world.agents[chain[h]].load += user.workload;
    user.connected = true;
    user.serving_agent = serving_agent;
    user.route = chain;
    return CommitResult::Ok;
}

FlowStats flow_stats(const World& world, const CommGraph& graph, const UserState& user,
                     const ExperimentConfig& cfg) {
    if (!user.connected) throw std::invalid_argument("flow_stats: user not connected");
    FlowStats st;
    LinkState access = make_link(cfg.chan, user.pos, world.agents[user.serving_agent].pos);
    access.load = user.workload;
    st.delay = hop_delay(cfg.chan, access, user.workload);
    st.bottleneck = access.available();
    for (size_t h = 0; h + 1 < user.route.size(); ++h) {
        const int e = graph.edge_between(user.route[h], user.route[h + 1]);
        if (e < 0) throw std::logic_error("flow_stats: committed chain has a missing hop");
        st.delay += hop_delay(cfg.chan, graph.links[e], user.workload);
        st.bottleneck = std::min(st.bottleneck, graph.links[e].available());
        ++st.hops;
    }
    return st;
}

}  // namespace relaysim
