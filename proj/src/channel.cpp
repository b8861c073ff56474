#include "relaysim/channel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace relaysim {

double snr(const ChannelParams& p, GridPos a, GridPos b) {
    const double d = euclidean(a, b) * p.cell_size;
    if (d <= 0.0) throw std::domain_error("snr: co-located endpoints");
    const double four_pi = 4.0 * std::numbers::pi;
    return p.tx_power * p.gain_tx * p.gain_rx * p.wavelength * p.wavelength /
           (four_pi * four_pi * p.noise_power * d * d);
}

double capacity(const ChannelParams& p, double snr_value) {
    if (snr_value < 0.0) throw std::domain_error("capacity: negative snr");
    return p.bandwidth * std::log2(1.0 + snr_value);
}

double hop_delay(const ChannelParams& p, const LinkState& link, double payload) {
    if (payload < 0.0) throw std::domain_error("hop_delay: negative payload");
    const double avail = link.available();
    if (avail <= 0.0) throw std::domain_error("hop_delay: no available capacity");
    double t = payload / avail;
    if (p.use_propagation_delay) t += link.distance / p.prop_speed;
    return t;
}

LinkState make_link(const ChannelParams& p, GridPos a, GridPos b) {
    LinkState link;
    link.distance = std::max(euclidean(a, b), 1.0) * p.cell_size;
    const double four_pi = 4.0 * std::numbers::pi;
    const double s = p.tx_power * p.gain_tx * p.gain_rx * p.wavelength * p.wavelength /
                     (four_pi * four_pi * p.noise_power * link.distance * link.distance);
    link.capacity = capacity(p, s);
    link.load = 0.0;
    return link;
}

}  // namespace relaysim
