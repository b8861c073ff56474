#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <set>
#include <vector>

#include "doctest.h"
#include "relaysim/dispatch.hpp"
#include "relaysim/env.hpp"
#include "relaysim/reward.hpp"
#include "relaysim/routing.hpp"
#include "relaysim/rng.hpp"
#include "relaysim/sim.hpp"
#include "relaysim/topology.hpp"

using namespace relaysim;

namespace {

// Hand-built world on an open grid; parents/children wired by the caller.
World blank_world(int w, int h, const std::vector<GridPos>& agents) {
    World world;
    world.width = w;
    world.height = h;
    world.bs = {0, 0};
    world.explored.assign(static_cast<size_t>(w) * h, 0);
    for (size_t i = 0; i < agents.size(); ++i) {
        AgentState a;
        a.id = static_cast<int>(i);
        a.pos = agents[i];
        world.agents.push_back(std::move(a));
    }
    return world;
}

void wire(World& w, int child, int parent) {
    w.agents[child].parent = parent;
    w.agents[child].depth = parent == kBsId ? 1 : w.agents[parent].depth + 1;
    if (parent != kBsId) {
        w.agents[parent].children.push_back(child);
        w.agents[parent].role = Role::Relay;
    }
}

std::vector<Action> stay_all(const World& w) {
    return std::vector<Action>(w.agents.size());
}

}  // namespace

TEST_CASE("fresh worlds are seeded and reproducible") {
    EnvConfig env;
    env.width = 8;
    env.height = 8;
    env.users = 4;
    const World a = new_world(env, 11);
    const World b = new_world(env, 11);
    const World c = new_world(env, 12);
    CHECK(world_to_text(a) == world_to_text(b));
    CHECK(world_to_text(a) != world_to_text(c));

    CHECK(a.agents.size() == 1);
    CHECK(a.agents[0].pos == GridPos{0, 0});
    CHECK(a.agents[0].parent == kBsId);
    CHECK(a.users.size() == 4);
    std::set<std::pair<int, int>> spots;
    for (const auto& u : a.users) {
        CHECK(a.in_bounds(u.pos));
        CHECK_FALSE(u.pos == a.bs);
        CHECK_FALSE(u.discovered);
        CHECK_FALSE(u.connected);
        CHECK(u.workload >= env.workload_min);
        CHECK(u.workload <= env.workload_max);
        CHECK(u.min_capacity >= env.capacity_req_min);
        CHECK(u.min_capacity <= env.capacity_req_max);
        CHECK(u.max_delay >= env.delay_cap_min);
        CHECK(u.max_delay <= env.delay_cap_max);
        CHECK(u.priority >= 1);
        CHECK(u.priority <= 5);
        spots.insert({u.pos.x, u.pos.y});
    }
    CHECK(spots.size() == a.users.size());

    // the first scan marks exactly the in-bounds diamond around the station
    int expected = 0;
    for (GridPos p : manhattan_diamond({0, 0}, env.sense_radius))
        expected += a.in_bounds(p) ? 1 : 0;
    CHECK(a.explored_count == expected);
    CHECK(a.is_explored({0, 0}));

    CHECK_THROWS_AS(new_world(EnvConfig{.width = 1}, 1), std::invalid_argument);
}

TEST_CASE("moves respect bounds conflicts and links") {
    EnvConfig env;
    env.width = 6;
    env.height = 6;
    World w = blank_world(6, 6, {{0, 0}, {2, 0}, {2, 3}});
    wire(w, 1, kBsId);
    wire(w, 2, 1);

    SUBCASE("out of bounds is refused and flagged") {
        std::vector<Action> acts = stay_all(w);
        acts[0].move = Move::Down;
        const StepOutcome out = execute_step(w, acts, env);
        CHECK(out.facts[0].violation == ViolationKind::OutOfBounds);
        CHECK_FALSE(out.facts[0].moved);
        CHECK(w.agents[0].pos == GridPos{0, 0});
    }
    SUBCASE("occupied target is refused") {
        std::vector<Action> acts = stay_all(w);
        w.agents[1].pos = {1, 0};
        acts[0].move = Move::Right;
        const StepOutcome out = execute_step(w, acts, env);
        CHECK(out.facts[0].violation == ViolationKind::PositionConflict);
        CHECK(w.agents[0].pos == GridPos{0, 0});
    }
    SUBCASE("parent link bound is enforced") {
        std::vector<Action> acts = stay_all(w);
        acts[2].move = Move::Up;  // (2,4) is 5 from parent at (2,0)? no: 4 > 3
        const StepOutcome out = execute_step(w, acts, env);
        CHECK(out.facts[2].violation == ViolationKind::ParentDisconnect);
        CHECK(w.agents[2].pos == GridPos{2, 3});
    }
    SUBCASE("child link bound is enforced") {
        std::vector<Action> acts = stay_all(w);
        acts[1].move = Move::Right;  // keeps the BS link, drops child 2 to distance 4
        const StepOutcome out = execute_step(w, acts, env);
        CHECK(out.facts[1].violation == ViolationKind::ChildLoss);
    }
    SUBCASE("legal moves land and scan") {
        std::vector<Action> acts = stay_all(w);
        acts[2].move = Move::Down;
        const StepOutcome out = execute_step(w, acts, env);
        CHECK(out.facts[2].moved);
        CHECK(w.agents[2].pos == GridPos{2, 2});
        CHECK(out.facts[2].newly_explored > 0);
        CHECK(w.step_count == 1);
        CHECK(w.last_progress_step == 1);
    }
    SUBCASE("action count must match the fleet") {
        std::vector<Action> acts(2);
        CHECK_THROWS_AS(execute_step(w, acts, env), std::invalid_argument);
    }
}

TEST_CASE("earlier movers vacate cells for later ones") {
    EnvConfig env;
    env.width = 6;
    env.height = 6;
    World w = blank_world(6, 6, {{1, 1}, {1, 2}});
    wire(w, 1, kBsId);
    std::vector<Action> acts = stay_all(w);
    acts[0].move = Move::Right;  // vacates (1,1)
    acts[1].move = Move::Down;   // takes (1,1)
    const StepOutcome out = execute_step(w, acts, env);
    CHECK(out.facts[0].moved);
    CHECK(out.facts[1].moved);
    CHECK(w.agents[0].pos == GridPos{2, 1});
    CHECK(w.agents[1].pos == GridPos{1, 1});

    // the reverse order collides: agent 0 cannot enter agent 1's cell
    World v = blank_world(6, 6, {{1, 1}, {1, 2}});
    wire(v, 1, kBsId);
    std::vector<Action> acts2 = stay_all(v);
    acts2[0].move = Move::Up;  // agent 1 still at (1,2)
    const StepOutcome out2 = execute_step(v, acts2, env);
    CHECK(out2.facts[0].violation == ViolationKind::PositionConflict);
}

TEST_CASE("sensing reveals cells once and discovers users") {
    EnvConfig env;
    env.width = 8;
    env.height = 8;
    env.sense_radius = 2;
    env.comm_radius = 20;  // keep the station link slack, this test is about sensing
    World w = blank_world(8, 8, {{4, 4}});
    w.agents[0].parent = kBsId;
    UserState u;
    u.id = 0;
    u.pos = {4, 1};
    w.users.push_back(u);

    const StepOutcome first = execute_step(w, stay_all(w), env);
    CHECK(first.facts[0].newly_explored == 13);  // full diamond, radius 2
    CHECK(w.explored_count == 13);
    CHECK_FALSE(w.users[0].discovered);

    std::vector<Action> acts = stay_all(w);
    acts[0].move = Move::Down;
    const StepOutcome second = execute_step(w, acts, env);
    CHECK(second.facts[0].newly_explored == 5);  // one fresh row
    CHECK(second.facts[0].found_user);
    CHECK(w.users[0].discovered);
    CHECK(w.users[0].discovered_by == 0);
    CHECK(w.users[0].discovery_step == 2);
    CHECK(second.discovered_users == std::vector<int>{0});

    // re-sensing the same cells reveals nothing new
    const StepOutcome third = execute_step(w, stay_all(w), env);
    CHECK(third.facts[0].newly_explored == 0);
    CHECK(third.total_new_cells == 0);
}

TEST_CASE("episodes end by service timeout or stall") {
    ExperimentConfig cfg;
    cfg.env.width = 6;
    cfg.env.height = 6;
    cfg.env.users = 1;
    cfg.env.max_users = 1;
    World w = new_world(cfg.env, 3);
    CHECK(episode_done(w, cfg) == TerminationStatus::Running);

    SUBCASE("all users served means success") {
        w.users[0].connected = true;
        CHECK(episode_done(w, cfg) == TerminationStatus::Success);
    }
    SUBCASE("step budget exhausts into timeout") {
        w.step_count = cfg.max_steps_for(6, 6);
        CHECK(episode_done(w, cfg) == TerminationStatus::FailTimeout);
    }
    SUBCASE("full fleet with no progress stalls") {
        cfg.dispatch.max_agents = 1;
        w.last_progress_step = 4;
        w.step_count = 4 + cfg.limits.stall_window;
        CHECK(episode_done(w, cfg) == TerminationStatus::FailStalled);
        // progress inside the window keeps it running
        w.last_progress_step = w.step_count - cfg.limits.stall_window + 1;
        CHECK(episode_done(w, cfg) == TerminationStatus::Running);
    }
    SUBCASE("partial service can satisfy a lowered bar") {
        cfg.env.users = 2;
        cfg.env.max_users = 2;
        World w2 = new_world(cfg.env, 5);
        w2.users[0].connected = true;
        CHECK(episode_done(w2, cfg) == TerminationStatus::Running);
        cfg.limits.rho_min = 0.5;
        CHECK(episode_done(w2, cfg) == TerminationStatus::Success);
    }
}

TEST_CASE("world text round-trips losslessly") {
    ExperimentConfig cfg;
    cfg.env.width = 7;
    cfg.env.height = 5;
    cfg.env.users = 3;
    cfg.env.max_users = 3;
    World w = new_world(cfg.env, 99);
    Rng rng(5);
    for (int step = 0; step < 12; ++step) {
        std::vector<Action> acts(w.agents.size());
        for (auto& a : acts) a.move = static_cast<Move>(rng.below(kMoveCount));
        execute_step(w, acts, cfg.env);
    }
    w.users[0].discovered = true;
    w.users[0].discovered_by = 0;
    w.failure_events = 2;

    const std::string text = world_to_text(w);
    const World back = world_from_text(text);
    CHECK(world_to_text(back) == text);
    CHECK(world_digest(back) == world_digest(w));

    World tweaked = back;
    tweaked.agents[0].load += 1.0;
    CHECK(world_digest(tweaked) != world_digest(w));
}

TEST_CASE("observations carry the local patch and neighbor links") {
    ExperimentConfig cfg;
    cfg.env.width = 8;
    cfg.env.height = 8;
    cfg.env.sense_radius = 2;
    cfg.env.comm_radius = 3;
    World w = blank_world(8, 8, {{0, 1}, {1, 2}, {7, 7}});
    wire(w, 1, 0);
    wire(w, 2, kBsId);  // far node, no physical neighbors
    w.explored[1 * 8 + 0] = 1;
    w.explored_count = 1;
    UserState u;
    u.id = 0;
    u.pos = {2, 1};
    w.users.push_back(u);

    const CommGraph g = rebuild_graph(w, cfg.chan, cfg.env.comm_radius);
    const Observation obs = sense(w, g, 0, cfg);
    CHECK(obs.agent_id == 0);
    CHECK(obs.cells.size() == 13);
    int users_seen = 0, agents_seen = 0, out_of_bounds = 0;
    for (const CellView& v : obs.cells) {
        users_seen += v.has_user ? 1 : 0;
        agents_seen += v.has_agent ? 1 : 0;
        out_of_bounds += v.in_bounds ? 0 : 1;
        if (v.pos == GridPos{0, 1}) CHECK(v.explored);
    }
    CHECK(users_seen == 1);   // (2,1) inside the radius-2 diamond
    CHECK(agents_seen == 2);  // self and the agent at (1,2)
    CHECK(out_of_bounds == 5);

    REQUIRE(obs.neighbors.size() == 2);  // BS and agent 1, sorted by id
    CHECK(obs.neighbors[0].id == kBsId);
    CHECK(obs.neighbors[1].id == 1);
    CHECK(obs.neighbors[0].available ==
          obs.neighbors[0].capacity - obs.neighbors[0].load);

    const Observation far = sense(w, g, 2, cfg);
    CHECK(far.neighbors.empty());
    CHECK_THROWS_AS(sense(w, g, 9, cfg), std::invalid_argument);
}

TEST_CASE("graph edges match the manhattan radius exactly") {
    ChannelParams chan;
    Rng rng(17);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(8));
        std::vector<GridPos> pts;
        std::set<std::pair<int, int>> used;
        while (static_cast<int>(pts.size()) < n) {
            GridPos p{static_cast<int>(rng.below(9)), static_cast<int>(rng.below(9))};
            if (used.insert({p.x, p.y}).second) pts.push_back(p);
        }
        World w = blank_world(9, 9, pts);
        const int rc = 2 + static_cast<int>(rng.below(3));
        const CommGraph g = rebuild_graph(w, chan, rc);

        auto pos_of = [&](int id) { return id == kBsId ? w.bs : w.agents[id].pos; };
        int expected = 0;
        for (int i = -1; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                const bool close = manhattan(pos_of(i), pos_of(j)) <= rc;
                expected += close ? 1 : 0;
                CHECK(g.has_edge(i, j) == close);
            }
        CHECK(static_cast<int>(g.edges.size()) == expected);
        CHECK(g.links.size() == g.edges.size());
        for (size_t e = 0; e < g.edges.size(); ++e) {
            const auto [a, b] = g.edges[e];
            CHECK(g.edge_between(a, b) == static_cast<int>(e));
            CHECK(g.edge_between(b, a) == static_cast<int>(e));
            CHECK(g.links[e].load == 0.0);
        }
    }
}

TEST_CASE("tree bookkeeping and reachability") {
    World w = blank_world(10, 10, {{1, 0}, {3, 0}, {6, 0}, {9, 9}});
    wire(w, 0, kBsId);
    wire(w, 1, 0);
    const CommGraph g = rebuild_graph(w, ChannelParams{}, 3);

    attach_child(w, g, 1, 2);
    CHECK(w.agents[2].parent == 1);
    CHECK(w.agents[2].depth == 3);
    CHECK(w.agents[1].role == Role::Relay);
    CHECK_THROWS_AS(attach_child(w, g, 1, 2), std::invalid_argument);   // duplicate
    CHECK_THROWS_AS(attach_child(w, g, 0, 3), std::invalid_argument);   // not connected
    CHECK_THROWS_AS(attach_child(w, g, 0, 9), std::invalid_argument);   // unknown child

    const ControlTree t = control_tree(w);
    CHECK(t.parent == std::vector<int>{kBsId, 0, 1, kBsId});
    CHECK(t.depth == std::vector<int>{1, 2, 3, 1});

    CHECK(connected_to_bs(g, 0));
    CHECK(connected_to_bs(g, 1));
    CHECK(connected_to_bs(g, 2));
    CHECK_FALSE(connected_to_bs(g, 3));
}

TEST_CASE("hypothetical moves are classified before they happen") {
    World w = blank_world(12, 12, {{3, 0}, {6, 0}, {3, 3}});
    wire(w, 0, kBsId);
    wire(w, 1, 0);
    wire(w, 2, 0);
    std::vector<GridPos> pos{{3, 0}, {6, 0}, {3, 3}};

    CHECK(would_disconnect(w, pos, 2, {3, 2}, 3) == ViolationKind::None);
    CHECK(would_disconnect(w, pos, 2, {3, 4}, 3) == ViolationKind::ParentDisconnect);
    CHECK(would_disconnect(w, pos, 0, {2, 0}, 3) == ViolationKind::ChildLoss);

    // breaking a non-tree agent's only physical path is a structural break:
    // agent 2's parent is 0, but agent 3 reaches the BS only through 2.
    World v = blank_world(12, 12, {{3, 0}, {3, 3}, {3, 6}});
    wire(v, 0, kBsId);
    wire(v, 1, 0);
    wire(v, 2, 1);
    std::vector<GridPos> vpos{{3, 0}, {3, 3}, {3, 6}};
    // (1,0) keeps the station link but strands child 1 at distance 5
    CHECK(would_disconnect(v, vpos, 0, {1, 0}, 3) == ViolationKind::ChildLoss);

    // structural break without tree-edge damage needs a non-tree dependency
    World s = blank_world(12, 12, {{3, 0}, {6, 0}, {6, 3}});
    wire(s, 0, kBsId);
    wire(s, 1, 0);
    wire(s, 2, 1);
    std::vector<GridPos> spos{{3, 0}, {6, 0}, {6, 3}};
    s.agents[2].parent = 1;
    // agent 0 moving to (0,3): keeps BS link (3) and child 1? distance becomes 6
    CHECK(would_disconnect(s, spos, 0, {0, 3}, 3) == ViolationKind::ChildLoss);
    // shrink the tree so 0 has no children, then the same move strands 1 and 2
    s.agents[0].children.clear();
    s.agents[1].parent = kBsId;
    CHECK(would_disconnect(s, spos, 0, {0, 3}, 3) == ViolationKind::StructuralBreak);
}

TEST_CASE("flow loads land on committed links") {
    ExperimentConfig cfg;
    World w = blank_world(10, 10, {{2, 0}, {5, 0}});
    wire(w, 0, kBsId);
    wire(w, 1, 0);
    UserState u;
    u.id = 0;
    u.pos = {6, 1};
    u.workload = 12.0;
    u.min_capacity = 1e6;
    u.max_delay = 0.05;
    u.discovered = true;
    w.users.push_back(u);

    CommGraph g = rebuild_graph(w, cfg.chan, cfg.env.comm_radius);
    const RouteTable routes =
        relax_until_stable(g, cfg.route, std::vector<double>(2, 0.0), cfg.chan);
    REQUIRE(commit_flow(w, g, 0, 1, routes.chain(1), cfg) == CommitResult::Ok);
    CHECK(w.users[0].connected);
    CHECK(w.users[0].route == std::vector<int>{1, 0, kBsId});
    CHECK(w.agents[1].load == 12.0);
    CHECK(w.agents[0].load == 12.0);

    CommGraph fresh = rebuild_graph(w, cfg.chan, cfg.env.comm_radius);
    const std::vector<int> broken = apply_flow_loads(fresh, w, cfg.env.comm_radius);
    CHECK(broken.empty());
    CHECK(fresh.links[fresh.edge_between(1, 0)].load == 12.0);
    CHECK(fresh.links[fresh.edge_between(0, kBsId)].load == 12.0);
    CHECK(fresh.edge_between(1, kBsId) == -1);  // out of range, no direct edge

    // a hop beyond range marks the flow broken and carries no load
    w.agents[1].pos = {9, 9};
    CommGraph moved = rebuild_graph(w, cfg.chan, cfg.env.comm_radius);
    const std::vector<int> gone = apply_flow_loads(moved, w, cfg.env.comm_radius);
    CHECK(gone == std::vector<int>{0});
    for (const LinkState& l : moved.links) CHECK(l.load == 0.0);
}

TEST_CASE("request gates fire in a fixed order") {
    ExperimentConfig cfg;
    cfg.env.width = 10;
    cfg.env.height = 10;
    cfg.dispatch.max_agents = 3;

    World w = blank_world(10, 10, {{5, 5}});
    wire(w, 0, kBsId);
    // fully explored neighborhood, no nearby agents: approvable
    for (auto& cell : w.explored) cell = 1;
    w.explored_count = w.cells();

    SUBCASE("approval when every gate passes") {
        const RequestVerdict v = validate_request(w, 0, cfg);
        CHECK(v.approved);
        CHECK(v.reason == RequestReason::Approved);
        CHECK(v.eta == 1.0);
        CHECK(v.delta == 0.0);
    }
    SUBCASE("relays may not request") {
        w.agents[0].role = Role::Relay;
        CHECK(validate_request(w, 0, cfg).reason == RequestReason::NotExplorer);
    }
    SUBCASE("per-agent budget exhausts") {
        w.agents[0].deploy_requests_made = cfg.dispatch.per_agent_cap;
        CHECK(validate_request(w, 0, cfg).reason == RequestReason::CapExhausted);
    }
    SUBCASE("fleet cap blocks") {
        w.agents.push_back(w.agents[0]);
        w.agents.back().id = 1;
        w.agents.back().pos = {5, 6};
        w.agents.push_back(w.agents[0]);
        w.agents.back().id = 2;
        w.agents.back().pos = {5, 7};
        CHECK(validate_request(w, 0, cfg).reason == RequestReason::FleetFull);
    }
    SUBCASE("overloaded requesters are deferred") {
        w.agents[0].load = cfg.env.load_cap * cfg.dispatch.theta_load + 1.0;
        CHECK(validate_request(w, 0, cfg).reason == RequestReason::OverLoaded);
    }
    SUBCASE("unexplored surroundings block") {
        w.explored.assign(w.explored.size(), 0);
        w.explored_count = 0;
        const RequestVerdict v = validate_request(w, 0, cfg);
        CHECK(v.reason == RequestReason::UnderExplored);
        CHECK(v.eta == 0.0);
    }
    SUBCASE("crowded surroundings block") {
        // pack neighbors until density crosses 0.5 of the radius-3 diamond
        for (int k = 1; k <= 13; ++k) {
            AgentState extra;
            extra.id = k;
            extra.pos = {5 + (k % 4) - 1, 5 + (k / 4) - 1};
            w.agents.push_back(extra);
        }
        cfg.dispatch.max_agents = 64;
        const RequestVerdict v = validate_request(w, 0, cfg);
        CHECK(v.reason == RequestReason::OverDense);
        CHECK(v.delta > cfg.dispatch.delta_max);
    }
}

TEST_CASE("exploration ratio and density are plain fractions") {
    ExperimentConfig cfg;
    World w = blank_world(9, 9, {{4, 4}, {4, 5}});
    wire(w, 0, kBsId);
    // radius-6 accessible ball around (4,4) clipped to the grid
    int accessible = 0;
    for (GridPos c : manhattan_diamond({4, 4}, 2 * cfg.env.sense_radius))
        accessible += w.in_bounds(c) ? 1 : 0;
    // mark half of it explored
    int marked = 0;
    for (GridPos c : manhattan_diamond({4, 4}, 2 * cfg.env.sense_radius)) {
        if (!w.in_bounds(c) || marked >= accessible / 2) continue;
        w.explored[c.y * 9 + c.x] = 1;
        ++marked;
    }
    w.explored_count = marked;
    const double eta = exploration_ratio(w, 0, cfg.env.sense_radius);
    CHECK(eta == doctest::Approx(static_cast<double>(marked) / accessible));

    const double delta = neighborhood_density(w, 0, cfg.env.comm_radius);
    int cells = 0;
    for (GridPos c : manhattan_diamond({4, 4}, cfg.env.comm_radius))
        cells += (w.in_bounds(c) && !(c == GridPos{4, 4})) ? 1 : 0;
    CHECK(delta == doctest::Approx(1.0 / cells));
}

TEST_CASE("deployment scores favor idle productive shallow parents") {
    ExperimentConfig cfg;
    DeployRequest req;
    req.requester = 2;
    req.chain_stats = {
        {2, 0.0, 7.0, 3},                  // idle and productive, deep
        {1, cfg.env.load_cap, 0.0, 2},     // saturated and idle
        {0, cfg.env.load_cap / 2, 3.5, 1},
    };
    const std::vector<double> s = score_candidates(req, cfg);
    REQUIRE(s.size() == 3);
    const double prod_max = 2.0 * cfg.env.sense_radius + 1.0;
    const double third = 1.0 / 3.0;
    CHECK(s[0] == doctest::Approx(third * 1.0 + third * (7.0 / prod_max) + third * (3.0 / 12.0)));
    CHECK(s[1] == doctest::Approx(third * 0.0 + third * 0.0 + third * (2.0 / 12.0)));
    CHECK(s[2] == doctest::Approx(third * 0.5 + third * (3.5 / prod_max) + third * (1.0 / 12.0)));

    // scores clamp their normalized inputs
    DeployRequest wild;
    wild.chain_stats = {{0, -5.0, 99.0, 40}};
    const std::vector<double> clamped = score_candidates(wild, cfg);
    CHECK(clamped[0] == doctest::Approx(1.0));

    CHECK_THROWS_AS(score_candidates(DeployRequest{}, cfg), std::invalid_argument);

    // a dominant score wins essentially always at low temperature
    Rng rng(3);
    std::vector<double> scores{0.99, 0.01};
    int first = 0;
    for (int i = 0; i < 200; ++i) first += select_parent(scores, 0.05, rng) == 0 ? 1 : 0;
    CHECK(first > 190);
    CHECK_THROWS_AS(select_parent(scores, 0.0, rng), std::invalid_argument);
    CHECK_THROWS_AS(select_parent({}, 0.5, rng), std::invalid_argument);
}

TEST_CASE("productivity averages reveals over the window") {
    AgentState a;
    a.spawn_step = 0;
    // reveals at steps 1,1,1,2,5: window 10 at now=5 sees all 5 cells
    a.reveal_steps = {1, 1, 1, 2, 5};
    CHECK(productivity(a, 10, 5) == doctest::Approx(1.0));
    // window 2 at now=5 sees only the step-5 reveal, over 2 steps
    CHECK(productivity(a, 2, 5) == doctest::Approx(0.5));
    // young agents divide by their lifetime, not the window
    AgentState y;
    y.spawn_step = 4;
    y.reveal_steps = {5, 5, 5, 5};
    CHECK(productivity(y, 10, 5) == doctest::Approx(4.0));
    // newborn at now: no steps lived yet, no productivity
    AgentState n;
    n.spawn_step = 5;
    CHECK(productivity(n, 10, 5) == 0.0);
}

TEST_CASE("request pipeline spawns scans and recounts the fleet") {
    ExperimentConfig cfg;
    cfg.env.width = 12;
    cfg.env.height = 12;
    cfg.dispatch.max_agents = 2;

    World w = blank_world(12, 12, {{5, 5}});
    wire(w, 0, kBsId);
    for (auto& cell : w.explored) cell = 1;
    w.explored_count = w.cells();
    // an undiscovered user just beyond the parent, found by the birth scan
    UserState u;
    u.id = 0;
    u.pos = {9, 5};
    w.users.push_back(u);
    // unexplored pocket east of the requester pulls the frontier that way
    for (int x = 8; x < 12; ++x)
        for (int y = 0; y < 12; ++y) {
            w.explored[y * 12 + x] = 0;
            --w.explored_count;
        }

    std::vector<Action> acts(1);
    acts[0].request = true;
    Rng rng(9);
    const std::vector<RequestEvent> events = process_requests(w, acts, cfg, rng);
    REQUIRE(events.size() == 1);
    CHECK(events[0].verdict.approved);
    CHECK(events[0].parent == 0);  // single-candidate chain
    REQUIRE(events[0].spawned == 1);
    CHECK(w.agents.size() == 2);
    CHECK(w.agents[0].deploy_requests_made == 1);
    CHECK(w.agents[1].parent == 0);
    CHECK(w.agents[1].depth == 2);
    CHECK(w.agents[1].role == Role::Explorer);
    CHECK(w.agents[0].role == Role::Relay);
    // frontier projection drops the newborn east of the parent
    CHECK(w.agents[1].pos.x > 5);
    CHECK(manhattan(w.agents[1].pos, w.agents[0].pos) <= cfg.env.comm_radius);
    // birth scan revealed around the newborn and found the user
    CHECK(w.users[0].discovered);
    CHECK(w.users[0].discovered_by == 1);

    // second round: the parent turned relay and may not ask, the newborn
    // explorer hits the fleet cap
    std::vector<Action> again(2);
    again[0].request = true;
    again[1].request = true;
    const std::vector<RequestEvent> second = process_requests(w, again, cfg, rng);
    REQUIRE(second.size() == 2);
    CHECK(second[0].verdict.reason == RequestReason::NotExplorer);
    CHECK(second[1].verdict.reason == RequestReason::FleetFull);
    CHECK(w.agents.size() == 2);
}

TEST_CASE("local rewards follow the role formulas") {
    RewardWeights rw;
    CHECK(density_threshold(rw, 1) == 3.0);
    CHECK(density_threshold(rw, 4) == 6.0);

    LocalFacts f;
    f.role = Role::Explorer;
    f.depth = 1;
    f.newly_explored = 3;
    f.found_user = true;
    f.neighbor_count = 5;  // crowding 5 - 3 = 2
    CHECK(explorer_reward(rw, f) == doctest::Approx(1.0 * 3 + 5.0 - 0.5 * 2));

    f.violation = ViolationKind::ParentDisconnect;
    CHECK(explorer_reward(rw, f) ==
          doctest::Approx(3.0 + 5.0 - 1.0 - rw.pen_parent_explorer));

    LocalFacts r;
    r.role = Role::Relay;
    r.bridge = true;
    r.load = 30.0;
    CHECK(relay_reward(rw, r, 20.0) == doctest::Approx(2.0 - 0.1 * 10.0));
    r.violation = ViolationKind::ParentDisconnect;
    CHECK(relay_reward(rw, r, 20.0) ==
          doctest::Approx(2.0 - 1.0 - rw.pen_parent_relay));

    CHECK_THROWS_AS(explorer_reward(rw, r), std::invalid_argument);
    CHECK_THROWS_AS(relay_reward(rw, f, 0.0), std::invalid_argument);
    CHECK(local_reward(rw, f, 0.0) == explorer_reward(rw, f));
    CHECK(local_reward(rw, r, 20.0) == relay_reward(rw, r, 20.0));

    CHECK(violation_penalty(rw, ViolationKind::None, Role::Explorer) == 0.0);
    CHECK(violation_penalty(rw, ViolationKind::OutOfBounds, Role::Relay) == 1.0);
    CHECK(violation_penalty(rw, ViolationKind::ChildLoss, Role::Explorer) == 3.0);
}

TEST_CASE("global reward mixes quality service growth and cost") {
    RewardWeights rw;
    GlobalFacts g;
    g.comm_quality = 0.8;
    g.connected_users = 2;
    g.explored_gain = 0.25;
    g.agents = 6;
    g.failures = 1;
    CHECK(global_reward(rw, g) ==
          doctest::Approx(0.8 + 2.0 + 0.5 * 0.25 - 0.05 * 6 - 1.0));

    GlobalFacts idle;
    idle.agents = 2;
    CHECK(global_reward(rw, idle) ==
          doctest::Approx(-0.05 * 2 - rw.stagnation_penalty));
    RewardWeights no_stall = rw;
    no_stall.stagnation_enabled = false;
    CHECK(global_reward(no_stall, idle) == doctest::Approx(-0.05 * 2));

    const std::vector<double> shaped = shape_rewards(rw, {1.0, -2.0}, 4.0);
    REQUIRE(shaped.size() == 2);
    CHECK(shaped[0] == doctest::Approx(0.5 * 1.0 + 0.5 * 4.0));
    CHECK(shaped[1] == doctest::Approx(0.5 * -2.0 + 0.5 * 4.0));
}

TEST_CASE("service quality is a bounded per-user average") {
    ExperimentConfig cfg;
    World w = blank_world(10, 10, {{2, 0}});
    wire(w, 0, kBsId);
    UserState u;
    u.id = 0;
    u.pos = {3, 1};
    u.workload = 10.0;
    u.min_capacity = 1e6;
    u.max_delay = 0.04;
    u.discovered = true;
    w.users.push_back(u);
    CommGraph g = rebuild_graph(w, cfg.chan, cfg.env.comm_radius);

    CHECK(comm_quality(w, g, cfg) == 0.0);  // nobody served yet

    const RouteTable routes =
        relax_until_stable(g, cfg.route, std::vector<double>(1, 0.0), cfg.chan);
    REQUIRE(commit_flow(w, g, 0, 0, routes.chain(0), cfg) == CommitResult::Ok);
    const double q = comm_quality(w, g, cfg);
    CHECK(q > 0.0);
    CHECK(q <= 1.0);
}

TEST_CASE("random walks never break the backbone") {
    ExperimentConfig cfg;
    cfg.env.width = 8;
    cfg.env.height = 8;
    cfg.env.users = 2;
    cfg.env.max_users = 2;
    for (uint64_t seed = 0; seed < 30; ++seed) {
        Sim sim(cfg, episode_world_seed(seed, 0), episode_dispatch_stream(seed, 0));
        Rng rng = Rng::stream(seed, "walk");
        for (int step = 0; step < 60 && sim.status() == TerminationStatus::Running; ++step) {
            std::vector<Action> acts(sim.world.agents.size());
            for (auto& a : acts) {
                a.move = static_cast<Move>(rng.below(kMoveCount));
                a.request = rng.bernoulli(0.25);
            }
            sim.step(acts);
            const World& w = sim.world;
            std::set<std::pair<int, int>> occupied;
            int explored_check = 0;
            for (const auto& cell : w.explored) explored_check += cell ? 1 : 0;
            CHECK(explored_check == w.explored_count);
            for (const auto& agent : w.agents) {
                CHECK(w.in_bounds(agent.pos));
                CHECK(occupied.insert({agent.pos.x, agent.pos.y}).second);
                CHECK(connected_to_bs(sim.graph, agent.id));
                if (agent.parent != kBsId)
                    CHECK(manhattan(agent.pos, w.agents[agent.parent].pos) <=
                          cfg.env.comm_radius);
            }
        }
    }
}
