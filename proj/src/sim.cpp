#include "relaysim/sim.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace relaysim {

uint64_t episode_world_seed(uint64_t root_seed, int episode) {
    return derive_seed(root_seed, "env/episode/" + std::to_string(episode));
}

Rng episode_dispatch_stream(uint64_t root_seed, int episode) {
    return Rng::stream(root_seed, "dispatch/episode/" + std::to_string(episode));
}

Rng episode_exploration_stream(uint64_t root_seed, int episode) {
    return Rng::stream(root_seed, "exploration/episode/" + std::to_string(episode));
}

Sim::Sim(const ExperimentConfig& cfg_in, uint64_t world_seed, Rng dispatch_stream)
    : cfg(cfg_in), world(new_world(cfg_in.env, world_seed)), dispatch_rng(dispatch_stream) {
    refresh_topology();
}

Sim::Sim(const ExperimentConfig& cfg_in, World start, Rng dispatch_stream)
    : cfg(cfg_in), world(std::move(start)), dispatch_rng(dispatch_stream) {
    refresh_topology();
}

void Sim::refresh_topology() {
    graph = rebuild_graph(world, cfg.chan, cfg.env.comm_radius);
    const std::vector<int> broken = apply_flow_loads(graph, world, cfg.env.comm_radius);
    for (int uid : broken) {
        auto& user = world.users[uid];
        for (size_t h = 0; h + 1 < user.route.size(); ++h)
            world.agents[user.route[h]].load -= user.workload;
        user.connected = false;
        user.route.clear();
        world.failure_events += 1;
        last.broken_flows.push_back(uid);
    }
    // Subtracted loads invalidate the graph's link loads; rebuild once more.
    if (!broken.empty()) {
        graph = rebuild_graph(world, cfg.chan, cfg.env.comm_radius);
        apply_flow_loads(graph, world, cfg.env.comm_radius);
    }
    std::vector<double> payloads;
    payloads.reserve(world.agents.size());
    for (const auto& a : world.agents) payloads.push_back(a.load);
    routes = relax_until_stable(graph, cfg.route, payloads, cfg.chan);
}

void Sim::attempt_connections() {
    for (auto& user : world.users) {
        if (!user.discovered || user.connected) continue;
        const int serving = user.discovered_by;
        const auto chain = routes.chain(serving);
        const CommitResult res = commit_flow(world, graph, user.id, serving, chain, cfg);
        last.connects.push_back({user.id, res});
        if (res == CommitResult::Ok) {
            world.last_progress_step = world.step_count;
            std::vector<double> payloads;
            payloads.reserve(world.agents.size());
            for (const auto& a : world.agents) payloads.push_back(a.load);
            routes = relax_until_stable(graph, cfg.route, payloads, cfg.chan);
        }
    }
}

void Sim::score_step(int acting_agents, int explored_before) {
    std::unordered_set<int> bridges;
    for (const auto& user : world.users)
        if (user.connected)
            for (size_t h = 0; h + 1 < user.route.size(); ++h) bridges.insert(user.route[h]);

    double fleet_mean = 0.0;
    for (const auto& a : world.agents) fleet_mean += a.load;
    fleet_mean /= static_cast<double>(world.agents.size());

    last.locals.clear();
    for (int id = 0; id < acting_agents; ++id) {
        const auto& a = world.agents[id];
        LocalFacts f;
        f.role = a.role;
        f.depth = a.depth;
        f.load = a.load;
        f.newly_explored = last.outcome.facts[id].newly_explored;
        f.found_user = last.outcome.facts[id].found_user;
        f.violation = last.outcome.facts[id].violation;
        f.bridge = bridges.count(id) > 0;
        for (auto [nbr, e] : graph.neighbors(id)) f.neighbor_count += nbr != kBsId ? 1 : 0;
        last.locals.push_back(local_reward(cfg.reward, f, fleet_mean));
    }

    GlobalFacts gf;
    gf.comm_quality = comm_quality(world, graph, cfg);
    for (const auto& u : world.users) gf.connected_users += u.connected ? 1 : 0;
    gf.explored_gain =
        static_cast<double>(world.explored_count - explored_before) / world.cells();
    gf.agents = static_cast<int>(world.agents.size());
    gf.failures = static_cast<int>(last.broken_flows.size());
    last.global_facts = gf;
    last.global = global_reward(cfg.reward, gf);
    last.shaped = shape_rewards(cfg.reward, last.locals, last.global);
}

void Sim::step(const std::vector<Action>& actions) {
    const int acting = static_cast<int>(world.agents.size());
    const int explored_before = world.explored_count;
    last = StepRecord{};
    last.actions = actions;
    last.outcome = execute_step(world, actions, cfg.env);
    last.requests = process_requests(world, actions, cfg, dispatch_rng);
    refresh_topology();
    attempt_connections();
    score_step(acting, explored_before);
}

namespace {

std::string fmt(double v) { return format_double(v); }

std::string fmt_bottleneck(double v) { return v >= kBsBottleneck ? "inf" : fmt(v); }

}  // namespace

void TraceWriter::begin_episode(const ExperimentConfig& cfg, uint64_t root_seed, int episode,
                                const Sim& sim) {
    os_ << "relaysim-trace v1\n";
    os_ << "config_hash = " << config_hash(cfg) << "\n";
    os_ << "root_seed = " << root_seed << "\n";
    os_ << "episode = " << episode << "\n";
    os_ << "begin config\n";
    os_ << serialize_config(cfg);
    os_ << "end config\n";
    os_ << "begin world\n";
    os_ << world_to_text(sim.world);
    os_ << "end world\n";
}

void TraceWriter::record_step(const Sim& sim) {
    const auto& rec = sim.last;
    os_ << "step " << sim.world.step_count << "\n";
    for (size_t id = 0; id < rec.actions.size(); ++id)
        os_ << "action " << id << " " << to_string(rec.actions[id].move) << " "
            << (rec.actions[id].request ? 1 : 0) << "\n";
    for (const auto& req : rec.requests) {
        os_ << "request " << req.requester << " " << to_string(req.verdict.reason)
            << " eta=" << fmt(req.verdict.eta) << " delta=" << fmt(req.verdict.delta);
        if (req.verdict.approved)
            os_ << " parent=" << req.parent << " spawned=" << req.spawned;
        os_ << "\n";
    }
    for (int uid : rec.broken_flows) os_ << "break " << uid << "\n";
    for (const auto& c : rec.connects)
        os_ << "connect " << c.user << " " << to_string(c.result) << "\n";
    for (size_t e = 0; e < sim.graph.edges.size(); ++e) {
        const auto& [a, b] = sim.graph.edges[e];
        const auto& link = sim.graph.links[e];
        os_ << "graph_edge " << a << " " << b << " " << fmt(link.distance) << " "
            << fmt(link.capacity) << " " << fmt(link.load) << "\n";
    }
    for (const auto& agent : sim.world.agents)
        os_ << "tree_edge " << agent.parent << " " << agent.id << "\n";
    for (size_t id = 0; id < sim.routes.metrics.size(); ++id) {
        const auto& m = sim.routes.metrics[id];
        os_ << "route," << id << "," << m.next_hop << "," << fmt(m.delay) << ","
            << fmt_bottleneck(m.bottleneck) << "," << fmt(m.load) << "\n";
    }
    for (size_t id = 0; id < rec.locals.size(); ++id)
        os_ << "reward " << id << " " << fmt(rec.locals[id]) << " " << fmt(rec.shaped[id])
            << "\n";
    const auto& gf = rec.global_facts;
    os_ << "global " << fmt(rec.global) << " comm=" << fmt(gf.comm_quality)
        << " connected=" << gf.connected_users << " gain=" << fmt(gf.explored_gain)
        << " agents=" << gf.agents << " failures=" << gf.failures << "\n";
    os_ << "digest " << world_digest(sim.world) << "\n";
}

void TraceWriter::end_episode(TerminationStatus status) {
    os_ << "end " << to_string(status) << "\n";
}

EpisodeResult run_episode(Sim& sim, const Policy& policy, TraceWriter* trace) {
    EpisodeResult res;
    TerminationStatus st = sim.status();
    while (st == TerminationStatus::Running) {
        const std::vector<Action> actions = policy(sim);
        sim.step(actions);
        res.total_global += sim.last.global;
        ++res.steps;
        if (trace) trace->record_step(sim);
        st = sim.status();
    }
    res.status = st;
    res.success = st == TerminationStatus::Success;
    res.agents_used = static_cast<int>(sim.world.agents.size());
    res.failures = sim.world.failure_events;
    double best = 0.0;
    for (const auto& user : sim.world.users) {
        if (!user.connected) continue;
        const FlowStats fs = flow_stats(sim.world, sim.graph, user, sim.cfg);
        res.mean_delay += fs.delay;
        res.mean_bottleneck += fs.bottleneck;
        best = res.connected_users == 0 ? fs.bottleneck : std::min(best, fs.bottleneck);
        ++res.connected_users;
    }
    if (res.connected_users > 0) {
        res.mean_delay /= res.connected_users;
        res.mean_bottleneck /= res.connected_users;
        res.min_bottleneck = best;
    }
    if (trace) trace->end_episode(st);
    return res;
}

ReplayReport replay_trace(std::istream& in) {
    ReplayReport report;
    std::string line;
    if (!std::getline(in, line) || line != "relaysim-trace v1") {
        report.message = "unknown trace version header";
        return report;
    }
    uint64_t root_seed = 0;
    int episode = 0;
    uint64_t declared_hash = 0;
    std::string config_text;
    std::string world_text;
    bool in_config = false;
    bool in_world = false;
    // Header, embedded config, embedded initial world.
    while (std::getline(in, line)) {
        if (line == "begin config") { in_config = true; continue; }
        if (line == "end config") { in_config = false; continue; }
        if (line == "begin world") { in_world = true; continue; }
        if (line == "end world") break;
        if (in_config)
            config_text += line + "\n";
        else if (in_world)
            world_text += line + "\n";
        else if (line.rfind("config_hash = ", 0) == 0)
            declared_hash = std::stoull(line.substr(14));
        else if (line.rfind("root_seed = ", 0) == 0)
            root_seed = std::stoull(line.substr(12));
        else if (line.rfind("episode = ", 0) == 0)
            episode = std::stoi(line.substr(10));
    }

    ExperimentConfig cfg = parse_config(config_text);
    if (config_hash(cfg) != declared_hash) {
        report.message = "embedded config does not match its declared hash";
        return report;
    }
    World initial = world_from_text(world_text);
    Sim sim(cfg, initial.seed, episode_dispatch_stream(root_seed, episode));
    if (world_digest(sim.world) != world_digest(initial)) {
        report.message = "reconstructed initial world differs from the embedded snapshot";
        return report;
    }

    std::vector<Action> actions;
    auto flush_step = [&](uint64_t expect_digest) -> bool {
        sim.step(actions);
        actions.clear();
        ++report.steps_checked;
        return world_digest(sim.world) == expect_digest;
    };
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "action") {
            int id;
            std::string move_name;
            int request;
            ls >> id >> move_name >> request;
            Action a;
            for (int m = 0; m < kMoveCount; ++m)
                if (move_name == to_string(static_cast<Move>(m))) a.move = static_cast<Move>(m);
            a.request = request != 0;
            if (static_cast<int>(actions.size()) != id) {
                report.message = "trace actions out of order at step " +
                                 std::to_string(report.steps_checked + 1);
                return report;
            }
            actions.push_back(a);
        } else if (tag == "digest") {
            uint64_t expect;
            ls >> expect;
            if (!flush_step(expect)) {
                report.message =
                    "world digest mismatch at step " + std::to_string(report.steps_checked);
                return report;
            }
        } else if (tag == "end") {
            std::string status_name;
            ls >> status_name;
            if (status_name != to_string(sim.status())) {
                report.message = "final status mismatch: trace says " + status_name +
                                 ", replay says " + to_string(sim.status());
                return report;
            }
            report.ok = true;
            report.message = "replay verified";
            return report;
        }
        // graph_edge/tree_edge/route/reward/... lines are derived state and skipped.
    }
    report.message = "trace ended without an end marker";
    return report;
}

}  // namespace relaysim
