#pragma once

#include <array>
#include <string>
#include <vector>

#include "relaysim/config.hpp"
#include "relaysim/routing.hpp"
#include "relaysim/topology.hpp"
#include "relaysim/types.hpp"

namespace relaysim {

struct ConstraintVerdict {
    bool ok = true;
    std::vector<std::string> witnesses;  // human-readable failing items
};

// Feasibility checks, indexed 0..6:
//   0 service ratio: connected users / all users >= rho_min
//   1 per-user end-to-end delay <= that user's cap
//   2 per-user path bottleneck >= that user's capacity floor
//   3 per-agent load <= load cap
//   4 every committed hop within comm radius (Manhattan)
//   5 every agent reaches the base station over the comm graph
//   6 every agent inside the grid
struct ConstraintReport {
    std::array<ConstraintVerdict, 7> c;

    bool all_ok() const {
        for (const auto& v : c)
            if (!v.ok) return false;
        return true;
    }
    std::array<int, 7> violation_counts() const {
        std::array<int, 7> n{};
        for (size_t i = 0; i < c.size(); ++i) n[i] = static_cast<int>(c[i].witnesses.size());
        return n;
    }
};

ConstraintReport check_constraints(const World& world, const CommGraph& graph,
                                   const ExperimentConfig& cfg);

// Smallest path bottleneck over connected users; errors when none is served.
double objective_value(const World& world, const CommGraph& graph,
                       const ExperimentConfig& cfg);

}  // namespace relaysim
