#include "relaysim/env.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <sstream>
#include <stdexcept>

#include "relaysim/rng.hpp"

namespace relaysim {

GridPos move_delta(Move m) {
    switch (m) {
        case Move::Up: return {0, 1};
        case Move::Down: return {0, -1};
        case Move::Left: return {-1, 0};
        case Move::Right: return {1, 0};
        case Move::Stay: return {0, 0};
    }
    return {0, 0};
}

const char* to_string(Role r) { return r == Role::Explorer ? "explorer" : "relay"; }

const char* to_string(Move m) {
    switch (m) {
        case Move::Up: return "up";
        case Move::Down: return "down";
        case Move::Left: return "left";
        case Move::Right: return "right";
        case Move::Stay: return "stay";
    }
    return "stay";
}

const char* to_string(ViolationKind v) {
    switch (v) {
        case ViolationKind::None: return "none";
        case ViolationKind::OutOfBounds: return "out-of-bounds";
        case ViolationKind::PositionConflict: return "position-conflict";
        case ViolationKind::ParentDisconnect: return "parent-disconnect";
        case ViolationKind::ChildLoss: return "child-loss";
        case ViolationKind::StructuralBreak: return "structural-break";
    }
    return "none";
}

const char* to_string(TerminationStatus s) {
    switch (s) {
        case TerminationStatus::Running: return "running";
        case TerminationStatus::Success: return "success";
        case TerminationStatus::FailTimeout: return "fail-timeout";
        case TerminationStatus::FailStalled: return "fail-stalled";
    }
    return "running";
}

int World::agent_at(GridPos p) const {
    for (const auto& a : agents)
        if (a.pos == p) return a.id;
    return kNoNextHop;
}

namespace {

void reveal_around(World& world, AgentState& agent, int sense_radius, int step,
                   AgentStepFacts* facts) {
    for (GridPos c : manhattan_diamond(agent.pos, sense_radius)) {
        if (!world.in_bounds(c) || world.is_explored(c)) continue;
        world.explored[c.y * world.width + c.x] = 1;
        ++world.explored_count;
        agent.reveal_steps.push_back(step);
        if (facts) ++facts->newly_explored;
    }
}

}  // namespace

World new_world(const EnvConfig& env, uint64_t seed) {
    if (env.width < 2 || env.height < 2)
        throw std::invalid_argument("new_world: grid must be at least 2x2");
    if (env.users < 1 || env.users > env.max_users)
        throw std::invalid_argument("new_world: user count out of range");

    World w;
    w.width = env.width;
    w.height = env.height;
    w.bs = {0, 0};
    w.seed = seed;
    w.explored.assign(static_cast<size_t>(env.width) * env.height, 0);

    Rng rng = Rng::stream(seed, "env");
    for (int i = 0; i < env.users; ++i) {
        UserState u;
        u.id = i;
        for (;;) {
            GridPos p{static_cast<int>(rng.below(static_cast<uint64_t>(env.width))),
                      static_cast<int>(rng.below(static_cast<uint64_t>(env.height)))};
            if (p == w.bs) continue;
            bool taken = false;
            for (const auto& other : w.users) taken |= other.pos == p;
            if (taken) continue;
            u.pos = p;
            break;
        }
        u.workload = rng.uniform(env.workload_min, env.workload_max);
        u.min_capacity = rng.uniform(env.capacity_req_min, env.capacity_req_max);
        u.max_delay = rng.uniform(env.delay_cap_min, env.delay_cap_max);
        u.priority = rng.uniform_int(1, 5);
        w.users.push_back(std::move(u));
    }

    AgentState a0;
    a0.id = 0;
    a0.pos = w.bs;
    a0.parent = kBsId;
    a0.depth = 1;
    w.agents.push_back(std::move(a0));
    reveal_around(w, w.agents[0], env.sense_radius, 0, nullptr);
    return w;
}

Observation sense(const World& world, const CommGraph& graph, int agent_id,
                  const ExperimentConfig& cfg) {
    if (agent_id < 0 || agent_id >= static_cast<int>(world.agents.size()))
        throw std::invalid_argument("sense: unknown agent id");
    const auto& agent = world.agents[agent_id];

    Observation obs;
    obs.agent_id = agent_id;
    obs.pos = agent.pos;
    obs.role = agent.role;
    obs.load = agent.load;
    obs.depth = agent.depth;
    obs.requests_left =
        std::max(0, cfg.dispatch.per_agent_cap - agent.deploy_requests_made);
    for (GridPos c : manhattan_diamond(agent.pos, cfg.env.sense_radius)) {
        CellView v;
        v.pos = c;
        v.in_bounds = world.in_bounds(c);
        if (v.in_bounds) {
            v.explored = world.is_explored(c);
            v.has_agent = world.agent_at(c) != kNoNextHop;
            for (const auto& u : world.users) v.has_user |= u.pos == c;
        }
        obs.cells.push_back(v);
    }
    for (auto [nbr, e] : graph.neighbors(agent_id)) {
        NeighborInfo info;
        info.id = nbr;
        info.pos = nbr == kBsId ? world.bs : world.agents[nbr].pos;
        info.capacity = graph.links[e].capacity;
        info.load = graph.links[e].load;
        info.available = graph.links[e].available();
        obs.neighbors.push_back(info);
    }
    std::sort(obs.neighbors.begin(), obs.neighbors.end(),
              [](const NeighborInfo& a, const NeighborInfo& b) { return a.id < b.id; });
    return obs;
}

StepOutcome execute_step(World& world, const std::vector<Action>& actions,
                         const EnvConfig& env) {
    const int n = static_cast<int>(world.agents.size());
    if (static_cast<int>(actions.size()) != n)
        throw std::invalid_argument("execute_step: one action per agent required");

    StepOutcome out;
    out.facts.resize(n);

    std::vector<GridPos> positions;
    positions.reserve(n);
    for (const auto& a : world.agents) positions.push_back(a.pos);

    for (int id = 0; id < n; ++id) {
        const Action& act = actions[id];
        if (act.move == Move::Stay) continue;
        const GridPos target = positions[id] + move_delta(act.move);
        auto& facts = out.facts[id];
        if (!world.in_bounds(target)) {
            facts.violation = ViolationKind::OutOfBounds;
            continue;
        }
        bool occupied = false;
        for (int j = 0; j < n; ++j) occupied |= j != id && positions[j] == target;
        if (occupied) {
            facts.violation = ViolationKind::PositionConflict;
            continue;
        }
        const ViolationKind kind =
            would_disconnect(world, positions, id, target, env.comm_radius);
        if (kind != ViolationKind::None) {
            facts.violation = kind;
            continue;
        }
        positions[id] = target;
        facts.moved = true;
    }
    for (int id = 0; id < n; ++id) world.agents[id].pos = positions[id];

    const int step = world.step_count + 1;
    for (int id = 0; id < n; ++id) {
        reveal_around(world, world.agents[id], env.sense_radius, step, &out.facts[id]);
        out.total_new_cells += out.facts[id].newly_explored;
        for (auto& user : world.users) {
            if (user.discovered) continue;
            if (manhattan(world.agents[id].pos, user.pos) <= env.sense_radius) {
                user.discovered = true;
                user.discovered_by = id;
                user.discovery_step = step;
                out.facts[id].found_user = true;
                out.discovered_users.push_back(user.id);
            }
        }
    }

    world.step_count = step;
    if (out.total_new_cells > 0 || !out.discovered_users.empty())
        world.last_progress_step = step;
    return out;
}

TerminationStatus episode_done(const World& world, const ExperimentConfig& cfg) {
    int connected = 0;
    for (const auto& u : world.users) connected += u.connected ? 1 : 0;
    const double ratio =
        world.users.empty() ? 1.0 : static_cast<double>(connected) / world.users.size();
    if (ratio >= cfg.limits.rho_min) return TerminationStatus::Success;
    if (world.step_count >= cfg.max_steps_for(world.width, world.height))
        return TerminationStatus::FailTimeout;
    const bool fleet_full =
        static_cast<int>(world.agents.size()) >= cfg.dispatch.max_agents;
    if (fleet_full && connected < static_cast<int>(world.users.size()) &&
        world.step_count - world.last_progress_step >= cfg.limits.stall_window)
        return TerminationStatus::FailStalled;
    return TerminationStatus::Running;
}

namespace {

std::string fmt(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw std::runtime_error("unformattable double");
    return std::string(buf, end);
}

template <typename T>
std::string join(const std::vector<T>& xs) {
    std::string out;
    for (size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(xs[i]);
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(std::stoi(cur));
            cur.clear();
        }
    };
    for (char c : s) {
        if (c == ',')
            flush();
        else
            cur += c;
    }
    flush();
    return out;
}

std::map<std::string, std::string> parse_kvs(std::istringstream& rest) {
    std::map<std::string, std::string> kv;
    std::string tok;
    while (rest >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) throw std::runtime_error("snapshot: bad token " + tok);
        kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return kv;
}

GridPos parse_pos(const std::string& s) {
    // (x,y)
    auto comma = s.find(',');
    if (s.size() < 5 || s.front() != '(' || s.back() != ')' || comma == std::string::npos)
        throw std::runtime_error("snapshot: bad position " + s);
    return {std::stoi(s.substr(1, comma - 1)),
            std::stoi(s.substr(comma + 1, s.size() - comma - 2))};
}

double parse_dbl(const std::string& s) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw std::runtime_error("snapshot: bad number " + s);
    return v;
}

}  // namespace

std::string world_to_text(const World& w) {
    std::string out = "relaysim-world v1\n";
    out += "seed = " + std::to_string(w.seed) + "\n";
    out += "width = " + std::to_string(w.width) + "\n";
    out += "height = " + std::to_string(w.height) + "\n";
    out += "step_count = " + std::to_string(w.step_count) + "\n";
    out += "failure_events = " + std::to_string(w.failure_events) + "\n";
    out += "last_progress_step = " + std::to_string(w.last_progress_step) + "\n";
    out += "explored = ";
    for (uint8_t c : w.explored) out += c ? '1' : '0';
    out += '\n';
    for (const auto& a : w.agents) {
        out += "agent " + std::to_string(a.id);
        out += " pos=(" + std::to_string(a.pos.x) + "," + std::to_string(a.pos.y) + ")";
        out += std::string(" role=") + to_string(a.role);
        out += " parent=" + std::to_string(a.parent);
        out += " depth=" + std::to_string(a.depth);
        out += " load=" + fmt(a.load);
        out += " requests=" + std::to_string(a.deploy_requests_made);
        out += " spawn_step=" + std::to_string(a.spawn_step);
        out += " reveals=" + join(a.reveal_steps);
        out += '\n';
    }
    for (const auto& u : w.users) {
        out += "user " + std::to_string(u.id);
        out += " pos=(" + std::to_string(u.pos.x) + "," + std::to_string(u.pos.y) + ")";
        out += " workload=" + fmt(u.workload);
        out += " min_capacity=" + fmt(u.min_capacity);
        out += " max_delay=" + fmt(u.max_delay);
        out += " priority=" + std::to_string(u.priority);
        out += " discovered=" + std::to_string(u.discovered ? 1 : 0);
        out += " discovered_by=" + std::to_string(u.discovered_by);
        out += " discovery_step=" + std::to_string(u.discovery_step);
        out += " connected=" + std::to_string(u.connected ? 1 : 0);
        out += " serving=" + std::to_string(u.serving_agent);
        out += " route=" + join(u.route);
        out += '\n';
    }
    return out;
}

World world_from_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "relaysim-world v1")
        throw std::runtime_error("snapshot: unknown version header");

    World w;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string head;
        ls >> head;
        if (head == "agent") {
            int id;
            ls >> id;
            auto kv = parse_kvs(ls);
            AgentState a;
            a.id = id;
            a.pos = parse_pos(kv.at("pos"));
            a.role = kv.at("role") == "relay" ? Role::Relay : Role::Explorer;
            a.parent = std::stoi(kv.at("parent"));
            a.depth = std::stoi(kv.at("depth"));
            a.load = parse_dbl(kv.at("load"));
            a.deploy_requests_made = std::stoi(kv.at("requests"));
            a.spawn_step = std::stoi(kv.at("spawn_step"));
            a.reveal_steps = parse_int_list(kv.count("reveals") ? kv.at("reveals") : "");
            if (static_cast<int>(w.agents.size()) != id)
                throw std::runtime_error("snapshot: agent ids must be dense and ordered");
            w.agents.push_back(std::move(a));
        } else if (head == "user") {
            int id;
            ls >> id;
            auto kv = parse_kvs(ls);
            UserState u;
            u.id = id;
            u.pos = parse_pos(kv.at("pos"));
            u.workload = parse_dbl(kv.at("workload"));
            u.min_capacity = parse_dbl(kv.at("min_capacity"));
            u.max_delay = parse_dbl(kv.at("max_delay"));
            u.priority = std::stoi(kv.at("priority"));
            u.discovered = kv.at("discovered") == "1";
            u.discovered_by = std::stoi(kv.at("discovered_by"));
            u.discovery_step = std::stoi(kv.at("discovery_step"));
            u.connected = kv.at("connected") == "1";
            u.serving_agent = std::stoi(kv.at("serving"));
            u.route = parse_int_list(kv.count("route") ? kv.at("route") : "");
            w.users.push_back(std::move(u));
        } else {
            auto eq = line.find('=');
            if (eq == std::string::npos) throw std::runtime_error("snapshot: bad line " + line);
            std::string key = line.substr(0, line.find(' '));
            std::string value = line.substr(eq + 1);
            if (!value.empty() && value.front() == ' ') value.erase(0, 1);
            if (key == "seed")
                w.seed = std::stoull(value);
            else if (key == "width")
                w.width = std::stoi(value);
            else if (key == "height")
                w.height = std::stoi(value);
            else if (key == "step_count")
                w.step_count = std::stoi(value);
            else if (key == "failure_events")
                w.failure_events = std::stoi(value);
            else if (key == "last_progress_step")
                w.last_progress_step = std::stoi(value);
            else if (key == "explored") {
                w.explored.clear();
                w.explored_count = 0;
                for (char c : value) {
                    w.explored.push_back(c == '1' ? 1 : 0);
                    w.explored_count += c == '1' ? 1 : 0;
                }
            } else {
                throw std::runtime_error("snapshot: unknown key " + key);
            }
        }
    }
    if (w.width < 2 || w.height < 2 ||
        w.explored.size() != static_cast<size_t>(w.width) * w.height)
        throw std::runtime_error("snapshot: inconsistent dimensions");
    // children are derived state; rebuild from parent pointers
    for (const auto& a : w.agents)
        if (a.parent != kBsId) w.agents[a.parent].children.push_back(a.id);
    return w;
}

uint64_t world_digest(const World& world) { return fnv1a(world_to_text(world)); }

}  // namespace relaysim
