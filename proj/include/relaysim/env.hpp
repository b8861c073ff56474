#pragma once

#include <string>

#include "relaysim/config.hpp"
#include "relaysim/topology.hpp"
#include "relaysim/types.hpp"

namespace relaysim {

enum class TerminationStatus { Running, Success, FailTimeout, FailStalled };
const char* to_string(TerminationStatus s);

// Fresh world: base station at (0,0), agent 0 on the base-station cell, users
// hidden on distinct non-BS cells, explored map seeded by agent 0's first scan.
World new_world(const EnvConfig& env, uint64_t seed);

// Partial state projection for one agent. Neighbor link metrics come from
// `graph`, which should carry current flow loads.
Observation sense(const World& world, const CommGraph& graph, int agent_id,
                  const ExperimentConfig& cfg);

// Applies one move per agent in ascending id order with validity checks,
// then sweeps sensing and user discovery from the new positions.
StepOutcome execute_step(World& world, const std::vector<Action>& actions,
                         const EnvConfig& env);

TerminationStatus episode_done(const World& world, const ExperimentConfig& cfg);

// Versioned structured-text snapshot, lossless for replay and debugging.
std::string world_to_text(const World& world);
World world_from_text(const std::string& text);

// Canonical digest of the full world state, for replay verification.
uint64_t world_digest(const World& world);

}  // namespace relaysim
