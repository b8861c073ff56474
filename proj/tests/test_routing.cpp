#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <set>
#include <vector>

#include "doctest.h"
#include "relaysim/channel.hpp"
#include "relaysim/routing.hpp"
#include "relaysim/rng.hpp"
#include "relaysim/topology.hpp"

using namespace relaysim;

namespace {

// Synthetic topology builder: edges carry physically consistent links made
// from a chosen distance, loads set by the caller.
struct GraphBuilder {
    CommGraph g;

    explicit GraphBuilder(int agents) {
        g.agent_count = agents;
        g.adj.assign(static_cast<size_t>(agents) + 1, {});
    }

    void edge(int a, int b, double dist_cells, double load, const ChannelParams& chan) {
        const int e = static_cast<int>(g.edges.size());
        g.edges.emplace_back(std::min(a, b), std::max(a, b));
        LinkState l = make_link(chan, {0, 0}, {static_cast<int>(dist_cells), 0});
        l.load = load;
        g.links.push_back(l);
        g.adj[static_cast<size_t>(a) + 1].emplace_back(b, e);
        g.adj[static_cast<size_t>(b) + 1].emplace_back(a, e);
    }
};

struct RandomTree {
    CommGraph g;
    std::vector<int> parent;      // tree parent per agent
    std::vector<double> payload;  // per agent
};

RandomTree random_tree(Rng& rng, const ChannelParams& chan, int max_nodes) {
    const int n = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(max_nodes)));
    GraphBuilder b(n);
    RandomTree t;
    for (int i = 0; i < n; ++i) {
        const int p = static_cast<int>(rng.below(static_cast<uint64_t>(i) + 1)) - 1;
        const double dist = 1.0 + static_cast<double>(rng.below(4));
        LinkState probe = make_link(chan, {0, 0}, {static_cast<int>(dist), 0});
        const double load = rng.uniform() * 0.4 * probe.capacity;
        b.edge(p, i, dist, load, chan);
        t.parent.push_back(p);
        t.payload.push_back(rng.uniform() * 30.0);
    }
    t.g = std::move(b.g);
    return t;
}

}  // namespace

TEST_CASE("station metrics anchor the recursion") {
    const PathMetrics bs = bs_metrics();
    CHECK(bs.delay == 0.0);
    CHECK(bs.bottleneck == 9223372036854775807.0);
    CHECK(bs.bottleneck == kBsBottleneck);
    CHECK(bs.load == 0.0);
    CHECK(bs.next_hop == kBsId);
    CHECK(bs.reached());
    CHECK_FALSE(PathMetrics{}.reached());
}

TEST_CASE("one hop composes delay bottleneck and load") {
    ChannelParams chan;
    LinkState link = make_link(chan, {0, 0}, {2, 0});
    link.load = 5.0;

    const CandidateMetrics c = candidate_metrics(bs_metrics(), link, 10.0, chan);
    CHECK(c.delay == hop_delay(chan, link, 10.0));
    CHECK(c.bottleneck == link.available());
    CHECK(c.load == 10.0);

    PathMetrics up;
    up.delay = 1e-6;
    up.bottleneck = 42.0;
    up.load = 3.0;
    up.next_hop = kBsId;
    const CandidateMetrics two = candidate_metrics(up, link, 7.0, chan);
    CHECK(two.delay == 1e-6 + hop_delay(chan, link, 7.0));
    CHECK(two.bottleneck == 42.0);  // upstream constrains
    CHECK(two.load == 10.0);

    CHECK_THROWS_AS(candidate_metrics(PathMetrics{}, link, 1.0, chan),
                    std::invalid_argument);
    LinkState dead = link;
    dead.load = dead.capacity;
    CHECK_THROWS_AS(candidate_metrics(bs_metrics(), dead, 1.0, chan), std::domain_error);
}

TEST_CASE("route score is the weighted three-term sum") {
    RoutingWeights w;
    CHECK(route_score(w, 2e-7, 1.5e8, 20.0) ==
          w.w_delay * 2e-7 + w.w_capacity / 1.5e8 + w.w_load * 20.0);
    RoutingWeights odd;
    odd.w_delay = 2.0;
    odd.w_capacity = 3.0;
    odd.w_load = 0.25;
    CHECK(route_score(odd, 1.0, 6.0, 8.0) == 2.0 + 0.5 + 2.0);
    CHECK_THROWS_AS(route_score(w, 1.0, 0.0, 1.0), std::domain_error);
}

TEST_CASE("tree routing equals the unique-path recursion") {
    // On a tree there is exactly one path per agent; the iterative solver
    // must land on it with bitwise-identical metric arithmetic.
    ChannelParams chan;
    RoutingWeights w;
    Rng rng(4242);
    for (int trial = 0; trial < 500; ++trial) {
        const RandomTree t = random_tree(rng, chan, 10);
        const int n = t.g.agent_count;
        const RouteTable table = relax_until_stable(t.g, w, t.payload, chan);
        REQUIRE(static_cast<int>(table.metrics.size()) == n);

        // children were appended after their parents, so ascending id order
        // is a valid top-down evaluation order
        std::vector<double> delay(n), bneck(n), load(n);
        for (int i = 0; i < n; ++i) {
            const int p = t.parent[i];
            const LinkState& link = t.g.links[t.g.edge_between(p, i)];
            const double up_delay = p == kBsId ? 0.0 : delay[p];
            const double up_bneck = p == kBsId ? kBsBottleneck : bneck[p];
            const double up_load = p == kBsId ? 0.0 : load[p];
            delay[i] = up_delay + hop_delay(chan, link, t.payload[i]);
            bneck[i] = std::min(up_bneck, link.available());
            load[i] = up_load + t.payload[i];
        }
        for (int i = 0; i < n; ++i) {
            CHECK(table.metrics[i].next_hop == t.parent[i]);
            CHECK(table.metrics[i].delay == delay[i]);
            CHECK(table.metrics[i].bottleneck == bneck[i]);
            CHECK(table.metrics[i].load == load[i]);
        }
    }
}

TEST_CASE("graph routing is loop-free feasible and locally optimal") {
    ChannelParams chan;
    RoutingWeights w;
    Rng rng(1357);
    for (int trial = 0; trial < 500; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(8));
        GraphBuilder b(n);
        std::set<std::pair<int, int>> present;
        auto add = [&](int a, int c) {
            if (!present.insert({std::min(a, c), std::max(a, c)}).second) return;
            const double dist = 1.0 + static_cast<double>(rng.below(4));
            LinkState probe = make_link(chan, {0, 0}, {static_cast<int>(dist), 0});
            b.edge(a, c, dist, rng.uniform() * 0.3 * probe.capacity, chan);
        };
        // random spanning tree keeps every agent reachable, extras add choice
        for (int i = 0; i < n; ++i)
            add(static_cast<int>(rng.below(static_cast<uint64_t>(i) + 1)) - 1, i);
        for (int i = -1; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (rng.bernoulli(0.3)) add(i, j);
        std::vector<double> payload;
        for (int i = 0; i < n; ++i) payload.push_back(rng.uniform() * 25.0);

        const CommGraph& g = b.g;
        const RouteTable table = relax_until_stable(g, w, payload, chan);

        for (int i = 0; i < n; ++i) {
            const PathMetrics& m = table.metrics[i];
            REQUIRE(m.reached());

            // loop-free: the chain visits distinct nodes and ends at the station
            const std::vector<int> chain = table.chain(i);
            CHECK(chain.front() == i);
            CHECK(chain.back() == kBsId);
            std::set<int> seen(chain.begin(), chain.end());
            CHECK(seen.size() == chain.size());

            // feasible: delay strictly decreases toward the station
            const double up_delay =
                m.next_hop == kBsId ? 0.0 : table.metrics[m.next_hop].delay;
            CHECK(up_delay < m.delay);

            // locally optimal: no admissible neighbor offers a lower score,
            // and the stored metrics reproduce the chosen hop's arithmetic
            const double committed = route_score(w, m.delay, m.bottleneck, m.load);
            for (auto [nbr, e] : g.neighbors(i)) {
                const PathMetrics up =
                    nbr == kBsId ? bs_metrics() : table.metrics[nbr];
                if (!up.reached() || g.links[e].available() <= 0.0) continue;
                if (up.delay >= m.delay) continue;
                const CandidateMetrics cand =
                    candidate_metrics(up, g.links[e], payload[i], chan);
                if (nbr == m.next_hop) {
                    CHECK(cand.delay == m.delay);
                    CHECK(cand.bottleneck == m.bottleneck);
                    CHECK(cand.load == m.load);
                }
                const double s = route_score(w, cand.delay, cand.bottleneck, cand.load);
                CHECK((committed < s || (committed == s && m.next_hop <= nbr)));
            }
        }
    }
}

TEST_CASE("equal-score alternatives resolve to the lower id") {
    ChannelParams chan;
    RoutingWeights w;
    GraphBuilder b(3);
    b.edge(kBsId, 0, 2, 0.0, chan);
    b.edge(kBsId, 1, 2, 0.0, chan);
    b.edge(0, 2, 1, 0.0, chan);
    b.edge(1, 2, 1, 0.0, chan);
    const RouteTable t =
        relax_until_stable(b.g, w, std::vector<double>(3, 0.0), chan);
    CHECK(t.metrics[0].next_hop == kBsId);
    CHECK(t.metrics[1].next_hop == kBsId);
    CHECK(t.metrics[2].next_hop == 0);
    CHECK(t.chain(2) == std::vector<int>{2, 0, kBsId});
}

TEST_CASE("solver rejects malformed or unroutable inputs") {
    ChannelParams chan;
    RoutingWeights w;

    GraphBuilder lone(1);
    lone.edge(kBsId, 0, 1, 0.0, chan);
    CHECK_THROWS_AS(relax_until_stable(lone.g, w, {}, chan), std::invalid_argument);

    // an agent behind a fully saturated cut has no admissible hop
    GraphBuilder cut(2);
    cut.edge(kBsId, 0, 1, 0.0, chan);
    LinkState probe = make_link(chan, {0, 0}, {1, 0});
    cut.edge(0, 1, 1, probe.capacity, chan);
    CHECK_THROWS_AS(relax_until_stable(cut.g, w, std::vector<double>(2, 0.0), chan),
                    std::domain_error);

    // no agents at all is a valid empty problem
    GraphBuilder empty(0);
    const RouteTable t = relax_until_stable(empty.g, w, {}, chan);
    CHECK(t.metrics.empty());
}

TEST_CASE("chains reject unreached agents and pointer cycles") {
    RouteTable t;
    t.metrics.assign(2, PathMetrics{});
    CHECK_THROWS_AS(t.chain(0), std::logic_error);

    t.metrics[0].delay = 1.0;
    t.metrics[0].next_hop = 1;
    t.metrics[1].delay = 2.0;
    t.metrics[1].next_hop = 0;
    CHECK_THROWS_AS(t.chain(0), std::logic_error);
}

TEST_CASE("flow commit reserves the whole path or nothing") {
    ExperimentConfig cfg;
    World w;
    w.width = 12;
    w.height = 12;
    w.bs = {0, 0};
    w.explored.assign(144, 1);
    for (int i = 0; i < 2; ++i) {
        AgentState a;
        a.id = i;
        a.pos = {3 * (i + 1), 0};
        a.parent = i == 0 ? kBsId : 0;
        a.depth = i + 1;
        w.agents.push_back(a);
    }
    UserState u;
    u.id = 0;
    u.pos = {7, 1};
    u.workload = 9.0;
    u.min_capacity = 1e6;
    u.max_delay = 0.1;
    u.discovered = true;
    w.users.push_back(u);
    CommGraph g = rebuild_graph(w, cfg.chan, cfg.env.comm_radius);
    const std::vector<int> chain{1, 0, kBsId};

    SUBCASE("success applies loads everywhere") {
        REQUIRE(commit_flow(w, g, 0, 1, chain, cfg) == CommitResult::Ok);
        CHECK(w.users[0].connected);
        CHECK(w.users[0].serving_agent == 1);
        CHECK(w.users[0].route == chain);
        CHECK(w.agents[0].load == 9.0);
        CHECK(w.agents[1].load == 9.0);
        CHECK(g.links[g.edge_between(1, 0)].load == 9.0);
        CHECK(g.links[g.edge_between(0, kBsId)].load == 9.0);
    }
    SUBCASE("undiscovered users cannot be served") {
        w.users[0].discovered = false;
        CHECK(commit_flow(w, g, 0, 1, chain, cfg) == CommitResult::BrokenChain);
        CHECK_FALSE(w.users[0].connected);
    }
    SUBCASE("chain must start at the serving agent and end at the station") {
        CHECK(commit_flow(w, g, 0, 0, chain, cfg) == CommitResult::BrokenChain);
        CHECK(commit_flow(w, g, 0, 1, {1, 0}, cfg) == CommitResult::BrokenChain);
        CHECK(commit_flow(w, g, 0, 1, {}, cfg) == CommitResult::BrokenChain);
    }
    SUBCASE("server must be within reach of the user") {
        w.users[0].pos = {11, 11};
        CHECK(commit_flow(w, g, 0, 1, chain, cfg) == CommitResult::BrokenChain);
    }
    SUBCASE("every chain hop needs a live edge") {
        CHECK(commit_flow(w, g, 0, 1, {1, kBsId}, cfg) == CommitResult::BrokenChain);
    }
    SUBCASE("capacity demands bound the access link") {
        w.users[0].min_capacity = 1e12;
        CHECK(commit_flow(w, g, 0, 1, chain, cfg) == CommitResult::CapacityViolation);
        CHECK(w.agents[0].load == 0.0);
        for (const LinkState& l : g.links) CHECK(l.load == 0.0);
    }
    SUBCASE("capacity demands bound every relay hop") {
        // choke one relay link only; the access link stays comfortable
        g.links[g.edge_between(0, kBsId)].load =
            g.links[g.edge_between(0, kBsId)].capacity - 9.5;
        w.users[0].min_capacity = 1.0;
        CHECK(commit_flow(w, g, 0, 1, chain, cfg) == CommitResult::CapacityViolation);
        CHECK(w.agents[1].load == 0.0);
    }
    SUBCASE("agent duty caps bound the whole chain") {
        w.agents[0].load = cfg.env.load_cap - 5.0;  // 9 more would burst it
        CHECK(commit_flow(w, g, 0, 1, chain, cfg) == CommitResult::LoadViolation);
        CHECK(w.agents[1].load == 0.0);
        for (const LinkState& l : g.links) CHECK(l.load == 0.0);
    }
}

TEST_CASE("flow stats recompute the committed path end to end") {
    ExperimentConfig cfg;
    World w;
    w.width = 12;
    w.height = 12;
    w.bs = {0, 0};
    w.explored.assign(144, 1);
    for (int i = 0; i < 2; ++i) {
        AgentState a;
        a.id = i;
        a.pos = {3 * (i + 1), 0};
        a.parent = i == 0 ? kBsId : 0;
        a.depth = i + 1;
        w.agents.push_back(a);
    }
    UserState u;
    u.id = 0;
    u.pos = {7, 1};
    u.workload = 9.0;
    u.min_capacity = 1e6;
    u.max_delay = 0.1;
    u.discovered = true;
    w.users.push_back(u);
    CommGraph g = rebuild_graph(w, cfg.chan, cfg.env.comm_radius);

    CHECK_THROWS_AS(flow_stats(w, g, w.users[0], cfg), std::invalid_argument);

    REQUIRE(commit_flow(w, g, 0, 1, {1, 0, kBsId}, cfg) == CommitResult::Ok);
    const FlowStats st = flow_stats(w, g, w.users[0], cfg);

    LinkState access = make_link(cfg.chan, u.pos, w.agents[1].pos);
    access.load = 9.0;
    double delay = hop_delay(cfg.chan, access, 9.0);
    double bneck = access.available();
    for (int hop : {g.edge_between(1, 0), g.edge_between(0, kBsId)}) {
        delay += hop_delay(cfg.chan, g.links[hop], 9.0);
        bneck = std::min(bneck, g.links[hop].available());
    }
    CHECK(st.delay == delay);
    CHECK(st.bottleneck == bneck);
    CHECK(st.hops == 2);

    // a vanished hop is a hard logic error, not a soft miss
    w.agents[0].pos = {11, 11};
    CommGraph moved = rebuild_graph(w, cfg.chan, cfg.env.comm_radius);
    CHECK_THROWS_AS(flow_stats(w, moved, w.users[0], cfg), std::logic_error);
}

TEST_CASE("refreshing a loaded route keeps the current hop admissible") {
    // After commits raise loads, re-solving with per-agent payloads must
    // still produce a consistent, loop-free table.
    ExperimentConfig cfg;
    World w;
    w.width = 12;
    w.height = 12;
    w.bs = {0, 0};
    w.explored.assign(144, 1);
    for (int i = 0; i < 3; ++i) {
        AgentState a;
        a.id = i;
        a.pos = {2 * (i + 1), 0};
        a.parent = i == 0 ? kBsId : i - 1;
        a.depth = i + 1;
        w.agents.push_back(a);
    }
    UserState u;
    u.id = 0;
    u.pos = {6, 2};
    u.workload = 14.0;
    u.min_capacity = 1e6;
    u.max_delay = 0.1;
    u.discovered = true;
    w.users.push_back(u);

    CommGraph g = rebuild_graph(w, cfg.chan, cfg.env.comm_radius);
    RouteTable t0 = relax_until_stable(g, cfg.route, std::vector<double>(3, 0.0), cfg.chan);
    REQUIRE(commit_flow(w, g, 0, 2, t0.chain(2), cfg) == CommitResult::Ok);

    std::vector<double> loads;
    for (const auto& a : w.agents) loads.push_back(a.load);
    const RouteTable t1 = relax_until_stable(g, cfg.route, loads, cfg.chan);
    for (int i = 0; i < 3; ++i) {
        const std::vector<int> chain = t1.chain(i);
        CHECK(chain.back() == kBsId);
        const int hop = t1.metrics[i].next_hop;
        const double up = hop == kBsId ? 0.0 : t1.metrics[hop].delay;
        CHECK(up < t1.metrics[i].delay);
    }
}
