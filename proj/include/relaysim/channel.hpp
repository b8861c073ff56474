#pragma once

#include "relaysim/config.hpp"
#include "relaysim/grid.hpp"

namespace relaysim {

struct LinkState {
    double distance = 0.0;   // metres
    double capacity = 0.0;   // bit/s
    double load = 0.0;       // carried workload
    double available() const { return capacity - load; }
};

// Free-space path loss ratio at the Euclidean distance between the endpoints.
// Co-located endpoints have undefined path loss and are rejected.
double snr(const ChannelParams& p, GridPos a, GridPos b);

// Shannon limit for the given bandwidth.
double capacity(const ChannelParams& p, double snr_value);

// Transmission delay of one payload over the link, plus propagation when enabled.
double hop_delay(const ChannelParams& p, const LinkState& link, double payload);

// Link between two grid nodes with a one-cell floor on the distance, so
// co-located nodes (agent on the base-station cell) get a finite capacity.
LinkState make_link(const ChannelParams& p, GridPos a, GridPos b);

}  // namespace relaysim
