#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relaysim/grid.hpp"

namespace relaysim {

// Node id space: agents are 0..N-1, the base station is kBsId.
constexpr int kBsId = -1;
constexpr int kNoNextHop = -2;

enum class Role : uint8_t { Explorer, Relay };

enum class Move : uint8_t { Up, Down, Left, Right, Stay };
constexpr int kMoveCount = 5;

GridPos move_delta(Move m);

struct Action {
    Move move = Move::Stay;
    bool request = false;

    bool operator==(const Action&) const = default;
};

enum class ViolationKind : uint8_t {
    None,
    OutOfBounds,
    PositionConflict,
    ParentDisconnect,
    ChildLoss,
    StructuralBreak,
};

const char* to_string(Role r);
const char* to_string(Move m);
const char* to_string(ViolationKind v);

struct AgentState {
    int id = 0;
    GridPos pos;
    Role role = Role::Explorer;
    int parent = kBsId;
    std::vector<int> children;
    int depth = 1;
    double load = 0.0;
    int deploy_requests_made = 0;
    int spawn_step = 0;
    // step at which each cell attributed to this agent was first revealed,
    // one entry per cell, nondecreasing
    std::vector<int> reveal_steps;
};

struct UserState {
    int id = 0;
    GridPos pos;
    double workload = 0.0;      // units per task
    double min_capacity = 0.0;  // bit/s
    double max_delay = 0.0;     // s
    int priority = 1;           // stored only, drives nothing
    bool discovered = false;
    int discovered_by = kNoNextHop;
    int discovery_step = -1;
    bool connected = false;
    int serving_agent = kNoNextHop;
    // committed relay chain: serving agent first, then ancestors, ending with kBsId
    std::vector<int> route;
};

struct World {
    int width = 0;
    int height = 0;
    GridPos bs{0, 0};
    std::vector<AgentState> agents;  // index == id
    std::vector<UserState> users;
    std::vector<uint8_t> explored;   // row-major, explored[y*width+x]
    int step_count = 0;
    int explored_count = 0;
    int failure_events = 0;          // cumulative broken-flow count
    int last_progress_step = 0;
    uint64_t seed = 0;

    bool in_bounds(GridPos p) const {
        return p.x >= 0 && p.x < width && p.y >= 0 && p.y < height;
    }
    bool is_explored(GridPos p) const { return explored[p.y * width + p.x] != 0; }
    int agent_at(GridPos p) const;   // agent id or kNoNextHop
    int cells() const { return width * height; }
};

struct AgentStepFacts {
    int newly_explored = 0;
    bool found_user = false;
    bool moved = false;
    ViolationKind violation = ViolationKind::None;
};

struct StepOutcome {
    std::vector<AgentStepFacts> facts;  // index == agent id
    int total_new_cells = 0;
    std::vector<int> discovered_users;
};

// What one agent can see: nearby cells, itself, and its radio neighborhood.
struct CellView {
    GridPos pos;
    bool in_bounds = false;
    bool explored = false;
    bool has_agent = false;
    bool has_user = false;
};

struct NeighborInfo {
    int id = kBsId;
    GridPos pos;
    double capacity = 0.0;   // bit/s
    double load = 0.0;
    double available = 0.0;  // bit/s
};

struct Observation {
    int agent_id = 0;
    GridPos pos;
    Role role = Role::Explorer;
    double load = 0.0;
    int depth = 1;
    int requests_left = 0;
    std::vector<CellView> cells;         // fixed diamond order around pos
    std::vector<NeighborInfo> neighbors; // nodes within comm radius, BS included
};

}  // namespace relaysim
