#pragma once

#include <utility>
#include <vector>

#include "relaysim/channel.hpp"
#include "relaysim/types.hpp"

namespace relaysim {

// Physical connectivity: an edge joins two nodes whose Manhattan distance
// is at most the communication radius. The base station is node kBsId.
struct CommGraph {
    int agent_count = 0;
    std::vector<std::pair<int, int>> edges;  // node id pairs, lower id first
    std::vector<LinkState> links;            // parallel to edges
    // adjacency indexed by node id + 1 (slot 0 is the base station)
    std::vector<std::vector<std::pair<int, int>>> adj;  // (neighbor id, edge index)

    const std::vector<std::pair<int, int>>& neighbors(int id) const { return adj[id + 1]; }
    int edge_between(int a, int b) const;    // edge index or -1
    bool has_edge(int a, int b) const { return edge_between(a, b) >= 0; }
};

// Snapshot of the logical hierarchy, derived from per-agent parent links.
struct ControlTree {
    std::vector<int> parent;  // parent[id], kBsId at the top level
    std::vector<int> depth;   // depth[id], base station is depth 0
};

CommGraph rebuild_graph(const World& world, const ChannelParams& chan, int comm_radius);

// Adds committed flow loads onto the graph's links. Returns ids of users
// whose committed chain has a missing hop (their load is not applied).
std::vector<int> apply_flow_loads(CommGraph& graph, const World& world, int comm_radius);

ControlTree control_tree(const World& world);

// Registers `child_id` as a tree child of `parent_id`, promoting the parent
// to relay. The pair must be connected in `graph`.
void attach_child(World& world, const CommGraph& graph, int parent_id, int child_id);

bool connected_to_bs(const CommGraph& graph, int agent_id);

// Classifies the topological damage of moving one agent, using hypothetical
// positions; ViolationKind::None means the move keeps everyone attached.
ViolationKind would_disconnect(const World& world, const std::vector<GridPos>& positions,
                               int agent_id, GridPos new_pos, int comm_radius);

}  // namespace relaysim
