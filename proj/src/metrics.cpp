#include "relaysim/metrics.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace relaysim {

namespace {

std::string user_tag(int id) { return "user " + std::to_string(id); }
std::string agent_tag(int id) { return "agent " + std::to_string(id); }

}  // namespace

ConstraintReport check_constraints(const World& world, const CommGraph& graph,
                                   const ExperimentConfig& cfg) {
    ConstraintReport rep;

    int connected = 0;
    for (const auto& u : world.users) {
        if (u.connected)
            ++connected;
        else
            rep.c[0].witnesses.push_back(user_tag(u.id));
    }
    const double ratio =
        world.users.empty() ? 1.0
                            : static_cast<double>(connected) / static_cast<double>(world.users.size());
    rep.c[0].ok = ratio >= cfg.limits.rho_min;
    if (rep.c[0].ok) rep.c[0].witnesses.clear();

    for (const auto& u : world.users) {
        if (!u.connected) continue;
        const FlowStats fs = flow_stats(world, graph, u, cfg);
        if (fs.delay > u.max_delay) {
            rep.c[1].ok = false;
            rep.c[1].witnesses.push_back(user_tag(u.id) + " delay " + format_double(fs.delay));
        }
        if (fs.bottleneck < u.min_capacity) {
            rep.c[2].ok = false;
            rep.c[2].witnesses.push_back(user_tag(u.id) + " bottleneck " +
                                         format_double(fs.bottleneck));
        }
        if (manhattan(world.agents[u.serving_agent].pos, u.pos) > cfg.env.comm_radius) {
            rep.c[4].ok = false;
            rep.c[4].witnesses.push_back(user_tag(u.id) + " access hop");
        }
        for (size_t h = 0; h + 1 < u.route.size(); ++h) {
            const GridPos a = world.agents[u.route[h]].pos;
            const GridPos b = u.route[h + 1] == kBsId ? world.bs
                                                      : world.agents[u.route[h + 1]].pos;
            if (manhattan(a, b) > cfg.env.comm_radius) {
                rep.c[4].ok = false;
                rep.c[4].witnesses.push_back(user_tag(u.id) + " hop " +
                                             std::to_string(u.route[h]) + "->" +
                                             std::to_string(u.route[h + 1]));
            }
        }
    }

    for (const auto& a : world.agents) {
        if (a.load > cfg.env.load_cap) {
            rep.c[3].ok = false;
            rep.c[3].witnesses.push_back(agent_tag(a.id) + " load " + format_double(a.load));
        }
        if (!connected_to_bs(graph, a.id)) {
            rep.c[5].ok = false;
            rep.c[5].witnesses.push_back(agent_tag(a.id));
        }
        if (!world.in_bounds(a.pos)) {
            rep.c[6].ok = false;
            rep.c[6].witnesses.push_back(agent_tag(a.id));
        }
    }
    return rep;
}

double objective_value(const World& world, const CommGraph& graph,
                       const ExperimentConfig& cfg) {
    double best = std::numeric_limits<double>::infinity();
    bool any = false;
    for (const auto& u : world.users) {
        if (!u.connected) continue;
        best = std::min(best, flow_stats(world, graph, u, cfg).bottleneck);
        any = true;
    }
    if (!any) throw std::domain_error("objective is undefined with no served user");
    return best;
}

}  // namespace relaysim
