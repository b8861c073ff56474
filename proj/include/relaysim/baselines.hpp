#pragma once

#include <vector>

#include "relaysim/config.hpp"
#include "relaysim/metrics.hpp"
#include "relaysim/rng.hpp"
#include "relaysim/sim.hpp"
#include "relaysim/types.hpp"

namespace relaysim {

// A static agent placement plus its measured quality.
struct Deployment {
    std::vector<GridPos> positions;
    bool feasible = false;
    double max_delay = 0.0;        // s, worst served user
    double min_bottleneck = 0.0;   // bit/s, worst served user
    int agent_count() const { return static_cast<int>(positions.size()); }
};

// Builds a world with agents pinned at `positions`, all cells explored and
// every user known, then serves users over the shared routing stack.
struct StaticEval {
    bool feasible = false;
    double max_delay = 0.0;
    double min_bottleneck = 0.0;
    ConstraintReport report;
    World world;       // post-assignment state, for inspection
    CommGraph graph;
};
StaticEval evaluate_deployment(const std::vector<GridPos>& positions, const World& users_from,
                               const ExperimentConfig& cfg);

// Chains relays from the base station toward every user, reusing placed
// agents, then patches load shortfalls with extra serving agents.
Deployment greedy_init(const World& users_from, const ExperimentConfig& cfg);

// Evolves position sets under (count, max delay, -min bottleneck) Pareto
// selection with add/remove/relocate mutations and a split-line crossover
// that re-bridges the halves; infeasible children are discarded.
std::vector<Deployment> ga_optimize(const std::vector<Deployment>& init,
                                    const World& users_from, const ExperimentConfig& cfg,
                                    Rng& rng);

// Grows a connected placement that maximizes newly covered cells each step
// until every cell lies within comm radius of the station or an agent.
Deployment greedy_max_coverage(const ExperimentConfig& cfg);

// Random connected initial placement of a fixed agent budget, then a
// centralized one-agent-per-step rule that greedily grows explored area
// while keeping the team connected; users are served through the normal
// per-step pipeline. `final_report` receives the end-state feasibility
// verdicts when given.
EpisodeResult random_centralized(const ExperimentConfig& cfg, uint64_t seed, int episode,
                                 ConstraintReport* final_report = nullptr);

// Cells within comm radius of the station or any agent.
int covered_cells(const std::vector<GridPos>& positions, const ExperimentConfig& cfg);

bool dominates(const Deployment& a, const Deployment& b);

std::vector<Deployment> pareto_front(const std::vector<Deployment>& pool);

}  // namespace relaysim
