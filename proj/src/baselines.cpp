#include "relaysim/baselines.hpp"

#include <algorithm>
#include <cstdlib>
#include <deque>
#include <limits>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>

#include "relaysim/env.hpp"
#include "relaysim/routing.hpp"
#include "relaysim/topology.hpp"

namespace relaysim {

namespace {

std::vector<double> agent_loads(const World& world) {
    std::vector<double> loads(world.agents.size(), 0.0);
    for (size_t i = 0; i < loads.size(); ++i) loads[i] = world.agents[i].load;
    return loads;
}

// Advances up to `max_step` Manhattan cells toward `target`, x first.
GridPos step_toward(GridPos from, GridPos target, int max_step) {
    int budget = max_step;
    const int dx = target.x - from.x;
    const int tx = std::min(std::abs(dx), budget);
    from.x += dx > 0 ? tx : -tx;
    budget -= tx;
    const int dy = target.y - from.y;
    const int ty = std::min(std::abs(dy), budget);
    from.y += dy > 0 ? ty : -ty;
    return from;
}

bool contains(const std::vector<GridPos>& v, GridPos p) {
    return std::find(v.begin(), v.end(), p) != v.end();
}

// Connected components over {BS} + positions with Manhattan-radius links.
// Returns one flag per position; the base station is always connected.
std::vector<uint8_t> connected_flags(const std::vector<GridPos>& positions, GridPos bs,
                                     int comm_radius) {
    const int n = static_cast<int>(positions.size());
    std::vector<uint8_t> seen(n, 0);
    std::deque<GridPos> queue{bs};
    while (!queue.empty()) {
        const GridPos cur = queue.front();
        queue.pop_front();
        for (int i = 0; i < n; ++i) {
            if (seen[i] || manhattan(cur, positions[i]) > comm_radius) continue;
            seen[i] = 1;
            queue.push_back(positions[i]);
        }
    }
    return seen;
}

std::tuple<int, double, double> fitness(const Deployment& d) {
    return {d.agent_count(), d.max_delay, -d.min_bottleneck};
}

}  // namespace

StaticEval evaluate_deployment(const std::vector<GridPos>& positions, const World& users_from,
                               const ExperimentConfig& cfg) {
    StaticEval out;
    World& w = out.world;
    w.width = cfg.env.width;
    w.height = cfg.env.height;
    w.bs = {0, 0};
    w.explored.assign(static_cast<size_t>(w.width) * w.height, 1);
    w.explored_count = w.cells();
    w.seed = users_from.seed;

    for (size_t i = 0; i < positions.size(); ++i) {
        if (!w.in_bounds(positions[i])) { out.report.c[6].ok = false; return out; }
        for (size_t j = 0; j < i; ++j)
            if (positions[j] == positions[i]) { out.report.c[6].ok = false; return out; }
        AgentState a;
        a.id = static_cast<int>(i);
        a.pos = positions[i];
        a.role = Role::Relay;
        w.agents.push_back(std::move(a));
    }
    for (const UserState& src : users_from.users) {
        UserState u = src;
        u.discovered = true;
        u.discovery_step = 0;
        u.discovered_by = kNoNextHop;
        u.connected = false;
        u.serving_agent = kNoNextHop;
        u.route.clear();
        w.users.push_back(std::move(u));
    }

    out.graph = rebuild_graph(w, cfg.chan, cfg.env.comm_radius);

    // Hierarchy bookkeeping: BFS parents from the station. Unreached agents
    // keep the default parent and surface through the reachability check.
    {
        std::vector<uint8_t> attached(w.agents.size(), 0);
        std::deque<int> queue{kBsId};
        while (!queue.empty()) {
            const int cur = queue.front();
            queue.pop_front();
            for (auto [nbr, e] : out.graph.neighbors(cur)) {
                (void)e;
                if (nbr == kBsId || attached[nbr]) continue;
                attached[nbr] = 1;
                attach_child(w, out.graph, cur, nbr);
                queue.push_back(nbr);
            }
        }
    }

    RouteTable routes = relax_until_stable(out.graph, cfg.route, agent_loads(w), cfg.chan);
    for (UserState& u : w.users) {
        std::vector<int> candidates;
        for (const AgentState& a : w.agents) {
            if (manhattan(a.pos, u.pos) > cfg.env.comm_radius) continue;
            if (!routes.metrics[a.id].reached()) continue;
            candidates.push_back(a.id);
        }
        std::sort(candidates.begin(), candidates.end(), [&](int l, int r) {
            if (w.agents[l].load != w.agents[r].load) return w.agents[l].load < w.agents[r].load;
            return l < r;
        });
        for (int c : candidates) {
            if (commit_flow(w, out.graph, u.id, c, routes.chain(c), cfg) != CommitResult::Ok)
                continue;
            u.discovered_by = c;
            routes = relax_until_stable(out.graph, cfg.route, agent_loads(w), cfg.chan);
            break;
        }
    }

    out.report = check_constraints(w, out.graph, cfg);
    out.feasible = out.report.all_ok();
    bool any = false;
    for (const UserState& u : w.users) {
        if (!u.connected) continue;
        const FlowStats fs = flow_stats(w, out.graph, u, cfg);
        out.max_delay = any ? std::max(out.max_delay, fs.delay) : fs.delay;
        out.min_bottleneck = any ? std::min(out.min_bottleneck, fs.bottleneck) : fs.bottleneck;
        any = true;
    }
    return out;
}

Deployment greedy_init(const World& users_from, const ExperimentConfig& cfg) {
    const int rc = cfg.env.comm_radius;
    const int cap = cfg.baseline.static_max_agents;
    const GridPos bs{0, 0};
    std::vector<GridPos> positions;

    auto place = [&](GridPos p) {
        if (contains(positions, p) || p == bs) return;
        positions.push_back(p);
        if (static_cast<int>(positions.size()) > cap)
            throw std::runtime_error("greedy placement exceeded the static agent cap");
    };

    for (const UserState& u : users_from.users) {
        bool served = false;
        for (GridPos p : positions) served = served || manhattan(p, u.pos) <= rc;
        if (served) continue;

        // Start the chain at the nearest existing node, station preferred.
        GridPos cur = bs;
        int best = manhattan(bs, u.pos);
        for (GridPos p : positions) {
            const int d = manhattan(p, u.pos);
            if (d < best) { best = d; cur = p; }
        }
        while (manhattan(cur, u.pos) > rc) {
            cur = step_toward(cur, u.pos, rc);
            place(cur);
        }
        if (cur == bs) place(u.pos);  // the station cannot serve traffic itself
    }

    // Load repair: unserved users get a dedicated nearby agent.
    StaticEval eval = evaluate_deployment(positions, users_from, cfg);
    while (!eval.feasible && !eval.report.c[0].ok &&
           static_cast<int>(positions.size()) < cap) {
        int uid = -1;
        for (const UserState& u : eval.world.users)
            if (!u.connected) { uid = u.id; break; }
        if (uid < 0) break;
        const GridPos upos = users_from.users[uid].pos;
        bool placed = false;
        for (int x = 0; x < cfg.env.width && !placed; ++x) {
            for (int y = 0; y < cfg.env.height && !placed; ++y) {
                const GridPos c{x, y};
                if (manhattan(c, upos) > rc || contains(positions, c) || c == bs) continue;
                bool linked = manhattan(c, bs) <= rc;
                for (GridPos p : positions) linked = linked || manhattan(c, p) <= rc;
                if (!linked) continue;
                positions.push_back(c);
                placed = true;
            }
        }
        if (!placed) break;
        eval = evaluate_deployment(positions, users_from, cfg);
    }

    Deployment d;
    d.positions = std::move(positions);
    d.feasible = eval.feasible;
    d.max_delay = eval.max_delay;
    d.min_bottleneck = eval.min_bottleneck;
    return d;
}

namespace {

std::vector<GridPos> placement_candidates(const std::vector<GridPos>& positions,
                                          const ExperimentConfig& cfg) {
    const GridPos bs{0, 0};
    std::vector<GridPos> out;
    for (int x = 0; x < cfg.env.width; ++x) {
        for (int y = 0; y < cfg.env.height; ++y) {
            const GridPos c{x, y};
            if (c == bs || contains(positions, c)) continue;
            bool linked = manhattan(c, bs) <= cfg.env.comm_radius;
            for (GridPos p : positions) linked = linked || manhattan(c, p) <= cfg.env.comm_radius;
            if (linked) out.push_back(c);
        }
    }
    return out;
}

void mutate(std::vector<GridPos>& positions, const ExperimentConfig& cfg, Rng& rng) {
    if (rng.bernoulli(cfg.ga.p_add)) {
        const auto cands = placement_candidates(positions, cfg);
        if (!cands.empty()) positions.push_back(cands[rng.below(cands.size())]);
    }
    if (rng.bernoulli(cfg.ga.p_remove) && positions.size() > 1)
        positions.erase(positions.begin() + static_cast<long>(rng.below(positions.size())));
    if (rng.bernoulli(cfg.ga.p_relocate) && !positions.empty()) {
        positions.erase(positions.begin() + static_cast<long>(rng.below(positions.size())));
        const auto cands = placement_candidates(positions, cfg);
        if (!cands.empty()) positions.push_back(cands[rng.below(cands.size())]);
    }
}

std::vector<GridPos> crossover(const std::vector<GridPos>& a, const std::vector<GridPos>& b,
                               const ExperimentConfig& cfg, Rng& rng) {
    const bool vertical = rng.bernoulli(0.5);
    const int dim = vertical ? cfg.env.width : cfg.env.height;
    const int split = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(std::max(1, dim - 1))));
    std::vector<GridPos> child;
    auto coord = [&](GridPos p) { return vertical ? p.x : p.y; };
    for (GridPos p : a)
        if (coord(p) < split && !contains(child, p)) child.push_back(p);
    for (GridPos p : b)
        if (coord(p) >= split && !contains(child, p)) child.push_back(p);
    return child;
}

// Bridges disconnected components back to the station-rooted one by walking
// relay chains from the nearest connected node. May grow the set.
bool repair_connectivity(std::vector<GridPos>& positions, const ExperimentConfig& cfg) {
    const GridPos bs{0, 0};
    const int rc = cfg.env.comm_radius;
    const int cap = cfg.baseline.static_max_agents;
    for (int guard = 0; guard < cap + 2; ++guard) {
        const auto seen = connected_flags(positions, bs, rc);
        int target = -1;
        GridPos from = bs;
        int best = std::numeric_limits<int>::max();
        for (size_t i = 0; i < positions.size(); ++i) {
            if (seen[i]) continue;
            // nearest (connected node, stray node) pair, lexicographic ties
            auto consider = [&](GridPos c) {
                const int d = manhattan(c, positions[i]);
                if (d < best || (d == best && std::tuple(c.x, c.y, positions[i].x, positions[i].y) <
                                                  std::tuple(from.x, from.y, positions[target].x,
                                                             positions[target].y))) {
                    best = d;
                    from = c;
                    target = static_cast<int>(i);
                }
            };
            if (target < 0) { best = manhattan(bs, positions[i]); from = bs; target = static_cast<int>(i); }
            consider(bs);
            for (size_t j = 0; j < positions.size(); ++j)
                if (seen[j]) consider(positions[j]);
        }
        if (target < 0) return true;  // everything attached
        GridPos cur = from;
        const GridPos goal = positions[target];
        while (manhattan(cur, goal) > rc) {
            cur = step_toward(cur, goal, rc);
            if (cur != bs && !contains(positions, cur)) positions.push_back(cur);
            if (static_cast<int>(positions.size()) > cap) return false;
        }
    }
    return false;
}

const Deployment& tournament(const std::vector<Deployment>& pop, Rng& rng) {
    const Deployment& a = pop[rng.below(pop.size())];
    const Deployment& b = pop[rng.below(pop.size())];
    if (dominates(a, b)) return a;
    if (dominates(b, a)) return b;
    return fitness(a) <= fitness(b) ? a : b;
}

bool same_positions(const Deployment& a, const Deployment& b) {
    return a.positions == b.positions;
}

void sort_canonical(std::vector<GridPos>& positions) {
    std::sort(positions.begin(), positions.end());
}

std::vector<Deployment> select_survivors(std::vector<Deployment> pool, size_t keep) {
    // duplicates add nothing to a Pareto archive
    std::sort(pool.begin(), pool.end(), [](const Deployment& a, const Deployment& b) {
        if (fitness(a) != fitness(b)) return fitness(a) < fitness(b);
        return a.positions < b.positions;
    });
    pool.erase(std::unique(pool.begin(), pool.end(), same_positions), pool.end());

    std::vector<Deployment> survivors;
    std::vector<Deployment> rest = std::move(pool);
    while (survivors.size() < keep && !rest.empty()) {
        std::vector<Deployment> front = pareto_front(rest);
        std::vector<Deployment> next;
        for (const Deployment& d : rest) {
            bool in_front = false;
            for (const Deployment& f : front) in_front = in_front || same_positions(f, d);
            if (!in_front) next.push_back(d);
        }
        for (Deployment& f : front) {
            if (survivors.size() >= keep) break;
            survivors.push_back(std::move(f));
        }
        rest = std::move(next);
    }
    return survivors;
}

}  // namespace

std::vector<Deployment> ga_optimize(const std::vector<Deployment>& init, const World& users_from,
                                    const ExperimentConfig& cfg, Rng& rng) {
    const size_t mu = static_cast<size_t>(std::max(2, cfg.ga.population));
    std::vector<Deployment> pop;
    for (const Deployment& d : init) {
        std::vector<GridPos> pos = d.positions;
        sort_canonical(pos);
        const StaticEval ev = evaluate_deployment(pos, users_from, cfg);
        if (ev.feasible)
            pop.push_back({std::move(pos), true, ev.max_delay, ev.min_bottleneck});
    }
    if (pop.empty()) return {};

    auto make_child = [&](std::vector<GridPos> pos) -> bool {
        mutate(pos, cfg, rng);
        if (!repair_connectivity(pos, cfg)) return false;
        sort_canonical(pos);
        if (pos.empty() || static_cast<int>(pos.size()) > cfg.baseline.static_max_agents)
            return false;
        const StaticEval ev = evaluate_deployment(pos, users_from, cfg);
        if (!ev.feasible) return false;
        pop.push_back({std::move(pos), true, ev.max_delay, ev.min_bottleneck});
        return true;
    };

    // Fill the initial population with mutated copies.
    for (size_t attempts = 0; pop.size() < mu && attempts < mu * 20; ++attempts)
        make_child(pop[attempts % pop.size()].positions);

    for (int gen = 0; gen < cfg.ga.generations; ++gen) {
        size_t born = 0;
        for (size_t attempts = 0; born < mu && attempts < mu * 20; ++attempts) {
            std::vector<GridPos> pos;
            {
                // references die before make_child can reallocate the pool
                const Deployment& a = tournament(pop, rng);
                const Deployment& b = tournament(pop, rng);
                pos = rng.bernoulli(cfg.ga.p_crossover) ? crossover(a.positions, b.positions, cfg, rng)
                                                        : a.positions;
            }
            born += make_child(std::move(pos)) ? 1 : 0;
        }
        pop = select_survivors(std::move(pop), mu);
    }
    return pareto_front(pop);
}

Deployment greedy_max_coverage(const ExperimentConfig& cfg) {
    const GridPos bs{0, 0};
    const int rc = cfg.env.comm_radius;
    const int w = cfg.env.width;
    const int h = cfg.env.height;
    std::vector<uint8_t> covered(static_cast<size_t>(w) * h, 0);
    int covered_count = 0;
    auto mark = [&](GridPos center) {
        for (GridPos c : manhattan_diamond(center, rc)) {
            if (c.x < 0 || c.x >= w || c.y < 0 || c.y >= h) continue;
            uint8_t& cell = covered[static_cast<size_t>(c.y) * w + c.x];
            covered_count += cell ? 0 : 1;
            cell = 1;
        }
    };
    mark(bs);

    std::vector<GridPos> positions;
    while (covered_count < w * h) {
        GridPos best{0, 0};
        int best_gain = 0;
        for (int x = 0; x < w; ++x) {
            for (int y = 0; y < h; ++y) {
                const GridPos c{x, y};
                if (c == bs || contains(positions, c)) continue;
                bool linked = manhattan(c, bs) <= rc;
                for (GridPos p : positions) linked = linked || manhattan(c, p) <= rc;
                if (!linked) continue;
                int gain = 0;
                for (GridPos cell : manhattan_diamond(c, rc)) {
                    if (cell.x < 0 || cell.x >= w || cell.y < 0 || cell.y >= h) continue;
                    gain += covered[static_cast<size_t>(cell.y) * w + cell.x] ? 0 : 1;
                }
                if (gain > best_gain) { best_gain = gain; best = c; }
            }
        }
        if (best_gain <= 0) break;  // cannot happen on a connected grid
        positions.push_back(best);
        mark(best);
    }

    Deployment d;
    d.positions = std::move(positions);
    d.feasible = covered_count == w * h;
    return d;
}

int covered_cells(const std::vector<GridPos>& positions, const ExperimentConfig& cfg) {
    int count = 0;
    const GridPos bs{0, 0};
    for (int x = 0; x < cfg.env.width; ++x) {
        for (int y = 0; y < cfg.env.height; ++y) {
            const GridPos c{x, y};
            bool in = manhattan(c, bs) <= cfg.env.comm_radius;
            for (GridPos p : positions) in = in || manhattan(c, p) <= cfg.env.comm_radius;
            count += in ? 1 : 0;
        }
    }
    return count;
}

EpisodeResult random_centralized(const ExperimentConfig& cfg, uint64_t seed, int episode,
                                 ConstraintReport* final_report) {
    World w = new_world(cfg.env, episode_world_seed(seed, episode));
    const int budget = cfg.baseline.random_budget > 0 ? cfg.baseline.random_budget
                                                      : cfg.dispatch.max_agents;
    Rng place = Rng::stream(seed, "baseline/random/" + std::to_string(episode));
    const int rc = cfg.env.comm_radius;

    for (int k = 1; k < budget; ++k) {
        std::vector<GridPos> cands;
        for (int x = 0; x < w.width; ++x) {
            for (int y = 0; y < w.height; ++y) {
                const GridPos c{x, y};
                if (w.agent_at(c) != kNoNextHop) continue;
                bool linked = manhattan(c, w.bs) <= rc;
                for (const AgentState& a : w.agents) linked = linked || manhattan(c, a.pos) <= rc;
                if (linked) cands.push_back(c);
            }
        }
        if (cands.empty()) break;
        const GridPos pick = cands[place.below(cands.size())];

        // Nearest in-range node wins, the station on ties, then the lower id.
        // The candidate filter guarantees at least one node is in range.
        int parent = kBsId;
        int best = manhattan(pick, w.bs);
        for (const AgentState& a : w.agents) {
            const int d = manhattan(pick, a.pos);
            if (d <= rc && d < best) { best = d; parent = a.id; }
        }

        const int cid = static_cast<int>(w.agents.size());
        AgentState child;
        child.id = cid;
        child.pos = pick;
        child.role = Role::Explorer;
        child.spawn_step = 0;
        w.agents.push_back(std::move(child));
        CommGraph g = rebuild_graph(w, cfg.chan, rc);
        attach_child(w, g, parent, cid);

        auto& newborn = w.agents.back();
        for (GridPos c : manhattan_diamond(newborn.pos, cfg.env.sense_radius)) {
            if (!w.in_bounds(c) || w.is_explored(c)) continue;
            w.explored[c.y * w.width + c.x] = 1;
            ++w.explored_count;
            newborn.reveal_steps.push_back(0);
        }
        for (auto& user : w.users) {
            if (user.discovered || manhattan(newborn.pos, user.pos) > cfg.env.sense_radius)
                continue;
            user.discovered = true;
            user.discovered_by = newborn.id;
            user.discovery_step = 0;
        }
    }

    Sim sim(cfg, std::move(w), episode_dispatch_stream(seed, episode));

    // One agent moves per step: the (agent, direction) pair that uncovers the
    // most cells without breaking the tree; everyone else holds position.
    const Policy rule = [&cfg, rc](const Sim& s) {
        const World& world = s.world;
        std::vector<GridPos> positions(world.agents.size());
        for (const AgentState& a : world.agents) positions[a.id] = a.pos;

        std::vector<Action> actions(world.agents.size());
        int best_gain = 0;
        int best_agent = -1;
        Move best_move = Move::Stay;
        for (const AgentState& a : world.agents) {
            for (Move m : {Move::Up, Move::Down, Move::Left, Move::Right}) {
                const GridPos np = a.pos + move_delta(m);
                if (!world.in_bounds(np) || world.agent_at(np) != kNoNextHop) continue;
                if (would_disconnect(world, positions, a.id, np, rc) != ViolationKind::None)
                    continue;
                int gain = 0;
                for (GridPos c : manhattan_diamond(np, cfg.env.sense_radius))
                    gain += (world.in_bounds(c) && !world.is_explored(c)) ? 1 : 0;
                if (gain > best_gain) { best_gain = gain; best_agent = a.id; best_move = m; }
            }
        }
        if (best_agent >= 0) actions[best_agent].move = best_move;
        return actions;
    };
    const EpisodeResult res = run_episode(sim, rule);
    if (final_report) *final_report = check_constraints(sim.world, sim.graph, cfg);
    return res;
}

bool dominates(const Deployment& a, const Deployment& b) {
    const bool no_worse = a.agent_count() <= b.agent_count() && a.max_delay <= b.max_delay &&
                          a.min_bottleneck >= b.min_bottleneck;
    const bool strictly = a.agent_count() < b.agent_count() || a.max_delay < b.max_delay ||
                          a.min_bottleneck > b.min_bottleneck;
    return no_worse && strictly;
}

std::vector<Deployment> pareto_front(const std::vector<Deployment>& pool) {
    std::vector<Deployment> front;
    for (const Deployment& d : pool) {
        bool dominated = false;
        for (const Deployment& other : pool) dominated = dominated || dominates(other, d);
        if (!dominated) front.push_back(d);
    }
    return front;
}

}  // namespace relaysim
