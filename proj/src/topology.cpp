#include "relaysim/topology.hpp"

#include <stdexcept>

namespace relaysim {

int CommGraph::edge_between(int a, int b) const {
    for (auto [nbr, e] : adj[a + 1])
        if (nbr == b) return e;
    return -1;
}

CommGraph rebuild_graph(const World& world, const ChannelParams& chan, int comm_radius) {
    CommGraph g;
    const int n = static_cast<int>(world.agents.size());
    g.agent_count = n;
    g.adj.assign(n + 1, {});

    auto pos_of = [&](int id) { return id == kBsId ? world.bs : world.agents[id].pos; };
    auto try_edge = [&](int a, int b) {
        if (manhattan(pos_of(a), pos_of(b)) > comm_radius) return;
        const int e = static_cast<int>(g.edges.size());
        g.edges.emplace_back(a, b);
        g.links.push_back(make_link(chan, pos_of(a), pos_of(b)));
        g.adj[a + 1].emplace_back(b, e);
        g.adj[b + 1].emplace_back(a, e);
    };

    for (int i = 0; i < n; ++i) try_edge(kBsId, i);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) try_edge(i, j);
    return g;
}

std::vector<int> apply_flow_loads(CommGraph& graph, const World& world, int comm_radius) {
    std::vector<int> broken;
    for (const auto& user : world.users) {
        if (!user.connected) continue;
        bool ok = !user.route.empty() && user.route.front() == user.serving_agent &&
                  user.route.back() == kBsId &&
                  manhattan(user.pos, world.agents[user.serving_agent].pos) <= comm_radius;
        if (ok) {
            for (size_t h = 0; h + 1 < user.route.size(); ++h)
                if (graph.edge_between(user.route[h], user.route[h + 1]) < 0) {
                    ok = false;
                    break;
                }
        }
        if (!ok) {
            broken.push_back(user.id);
            continue;
        }
        for (size_t h = 0; h + 1 < user.route.size(); ++h)
            graph.links[graph.edge_between(user.route[h], user.route[h + 1])].load +=
                user.workload;
    }
    return broken;
}

ControlTree control_tree(const World& world) {
    ControlTree t;
    t.parent.reserve(world.agents.size());
    t.depth.reserve(world.agents.size());
    for (const auto& a : world.agents) {
        t.parent.push_back(a.parent);
        t.depth.push_back(a.depth);
    }
    return t;
}

void attach_child(World& world, const CommGraph& graph, int parent_id, int child_id) {
    const int n = static_cast<int>(world.agents.size());
    if (child_id < 0 || child_id >= n) throw std::invalid_argument("attach_child: unknown child");
    if (parent_id != kBsId && (parent_id < 0 || parent_id >= n))
        throw std::invalid_argument("attach_child: unknown parent");
    if (!graph.has_edge(parent_id, child_id))
        throw std::invalid_argument("attach_child: parent and child are not connected");
    if (parent_id != kBsId) {
        auto& kids = world.agents[parent_id].children;
        for (int k : kids)
            if (k == child_id) throw std::invalid_argument("attach_child: duplicate child");
        kids.push_back(child_id);
        world.agents[parent_id].role = Role::Relay;
    }
    auto& child = world.agents[child_id];
    child.parent = parent_id;
    child.depth = parent_id == kBsId ? 1 : world.agents[parent_id].depth + 1;
}

bool connected_to_bs(const CommGraph& graph, int agent_id) {
    std::vector<uint8_t> seen(graph.agent_count + 1, 0);
    std::vector<int> stack{kBsId};
    seen[0] = 1;
    while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        if (cur == agent_id) return true;
        for (auto [nbr, e] : graph.neighbors(cur)) {
            if (!seen[nbr + 1]) {
                seen[nbr + 1] = 1;
                stack.push_back(nbr);
            }
        }
    }
    return seen[agent_id + 1] != 0;
}

ViolationKind would_disconnect(const World& world, const std::vector<GridPos>& positions,
                               int agent_id, GridPos new_pos, int comm_radius) {
    const auto& mover = world.agents[agent_id];
    auto pos_of = [&](int id) { return id == agent_id ? new_pos : positions[id]; };

    if (mover.parent == kBsId) {
        if (manhattan(new_pos, world.bs) > comm_radius) return ViolationKind::ParentDisconnect;
    } else if (manhattan(new_pos, pos_of(mover.parent)) > comm_radius) {
        return ViolationKind::ParentDisconnect;
    }
    for (int child : mover.children)
        if (manhattan(new_pos, pos_of(child)) > comm_radius) return ViolationKind::ChildLoss;

    // Full reachability sweep: the move must leave every agent with a BS path.
    const int n = static_cast<int>(world.agents.size());
    std::vector<uint8_t> seen(n + 1, 0);
    std::vector<int> stack{kBsId};
    seen[0] = 1;
    int reached = 0;
    auto linked = [&](int a, int b) {
        const GridPos pa = a == kBsId ? world.bs : pos_of(a);
        const GridPos pb = b == kBsId ? world.bs : pos_of(b);
        return manhattan(pa, pb) <= comm_radius;
    };
    while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        for (int next = 0; next < n; ++next) {
            if (!seen[next + 1] && linked(cur, next)) {
                seen[next + 1] = 1;
                ++reached;
                stack.push_back(next);
            }
        }
    }
    if (reached < n) return ViolationKind::StructuralBreak;
    return ViolationKind::None;
}

}  // namespace relaysim
