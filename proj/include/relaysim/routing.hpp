#pragma once

#include <limits>
#include <vector>

#include "relaysim/channel.hpp"
#include "relaysim/config.hpp"
#include "relaysim/topology.hpp"
#include "relaysim/types.hpp"

namespace relaysim {

// The base station's bottleneck stands in for +infinity and is never
// serialized as a finite capacity.
constexpr double kBsBottleneck = 9223372036854775807.0;  // 2^63 - 1

struct PathMetrics {
    double delay = std::numeric_limits<double>::infinity();  // s, toward BS
    double bottleneck = 0.0;                                 // bit/s, min along path
    double load = 0.0;                                       // accumulated units
    int next_hop = kNoNextHop;
    bool reached() const { return delay != std::numeric_limits<double>::infinity(); }
};

struct CandidateMetrics {
    double delay = 0.0;
    double bottleneck = 0.0;
    double load = 0.0;
};

struct RouteTable {
    std::vector<PathMetrics> metrics;  // index == agent id

    // Next-hop chain from `agent_id` to the base station, ending with kBsId.
    std::vector<int> chain(int agent_id) const;
};

PathMetrics bs_metrics();

// Metrics of the path through neighbor `upstream` over `link`.
CandidateMetrics candidate_metrics(const PathMetrics& upstream, const LinkState& link,
                                   double payload, const ChannelParams& chan);

double route_score(const RoutingWeights& w, double delay, double bottleneck, double load);

// Iterates per-agent next-hop selection until no agent changes its choice.
// An agent only adopts a neighbor whose current delay is strictly below its
// own, which keeps the next-hop pointers cycle-free; ties go to the lower id.
RouteTable relax_until_stable(const CommGraph& graph, const RoutingWeights& w,
                              const std::vector<double>& payloads,
                              const ChannelParams& chan);

enum class CommitResult { Ok, BrokenChain, CapacityViolation, LoadViolation };
const char* to_string(CommitResult r);

// Reserves the user's workload on every hop of `chain` (serving agent first,
// kBsId last) and on the serving agent's access link. All-or-nothing.
CommitResult commit_flow(World& world, CommGraph& graph, int user_id, int serving_agent,
                         const std::vector<int>& chain, const ExperimentConfig& cfg);

// End-to-end stats of a committed flow under the current graph.
struct FlowStats {
    double delay = 0.0;        // s, access hop plus relay hops
    double bottleneck = 0.0;   // bit/s, min available along the path
    int hops = 0;              // relay hops, access hop excluded
};
FlowStats flow_stats(const World& world, const CommGraph& graph, const UserState& user,
                     const ExperimentConfig& cfg);

}  // namespace relaysim
