#include "transitmp/controllers.hpp"

#include <algorithm>
#include <cmath>

namespace transitmp {

namespace {

LinkGeometry geometry(const Link& link, const SegmentationStrategy& seg) {
    return {link.length, link.free_flow_speed, link.last_station(), segment_vehicle_window(link, seg)};
}

std::vector<ObservedVehicle> collect(const Scenario& sc, const WorldState& world, LinkIndex l, MovementIndex m,
                                     const Window& window, bool observe_all) {
    std::vector<ObservedVehicle> out;
    const auto& link = sc.network.links[l];
    const auto station = link.last_station();
    for (const auto& v : world.links[l].vehicles) {
        if (v.movement != m || !(v.is_cv || observe_all) || !window.contains(v.position)) continue;
        ObservedVehicle o;
        o.position = v.position;
        o.link_travel_time = v.link_travel_time(world.t);
        o.occupancy = v.occupancy;
        o.cls = v.cls;
        if (v.is_transit() && station) {
            if (v.motion == Motion::Dwelling) {
                o.remaining_dwell = v.remaining_dwell;
            } else {
                const auto& line = sc.transit_lines[v.line];
                const bool stops_ahead = v.next_stop < line.stops.size() && line.stops[v.next_stop].link == l &&
                                         line.stops[v.next_stop].position <= *station + 1e-9 &&
                                         v.position <= line.stops[v.next_stop].position;
                o.remaining_dwell = stops_ahead ? line.dwell_base : 0.0;
            }
        }
        out.push_back(o);
    }
    return out;
}

}  // namespace

NodeObservation observe_node(const Scenario& sc, const WorldState& world, NodeIndex n,
                             const ObservationOptions& options) {
    const auto& net = sc.network;
    const auto& node = net.nodes[n];
    NodeObservation obs;
    obs.node = n;
    obs.active_phase = world.active_phase.empty() ? 0 : world.active_phase[n];
    for (auto m : node.movements) {
        const auto& mv = net.movements[m];
        MovementObservation mo;
        mo.movement = m;
        mo.saturation = mv.saturation_flow;
        mo.expected_travel_time = net.expected_travel_time(m);
        mo.link = geometry(net.links[mv.from], options.segmentation);
        mo.vehicles = collect(sc, world, mv.from, m, mo.link.window, options.observe_all);
        for (auto k : net.outgoing[mv.to]) {
            DownstreamObservation d;
            d.movement = k;
            d.turning_ratio = net.movements[k].turning_ratio;
            d.expected_travel_time = net.expected_travel_time(k);
            d.link = geometry(net.links[mv.to], options.segmentation);
            d.vehicles = collect(sc, world, mv.to, k, d.link.window, options.observe_all);
            mo.downstream.push_back(std::move(d));
        }
        obs.movements.push_back(std::move(mo));
    }
    for (const auto& phase : node.phases) {
        std::vector<int> local;
        for (auto m : phase.movements) {
            auto it = std::find(node.movements.begin(), node.movements.end(), m);
            local.push_back(static_cast<int>(it - node.movements.begin()));
        }
        obs.phases.push_back(std::move(local));
    }
    return obs;
}

double tau(double link_travel_time, double expected_travel_time) {
    if (!(expected_travel_time > 0.0)) throw ConfigError("expected free-flow travel time must be > 0");
    return link_travel_time / expected_travel_time;
}

int beta(const ObservedVehicle& v, std::optional<double> station) {
    if (v.cls == VehicleClass::Car) return 1;
    if (!station) return 1;
    return v.position >= *station ? 1 : 0;
}

int beta_eta(const ObservedVehicle& v, const LinkGeometry& link, double decision_step, double theta) {
    if (v.cls == VehicleClass::Car) return 1;
    const double speed = link.free_flow_speed;
    double arrival = 0.0;
    if (link.station && v.position <= *link.station) {
        arrival = (*link.station - v.position) / speed + v.remaining_dwell + (link.length - *link.station) / speed + theta;
    } else {
        arrival = (link.length - v.position) / speed + theta;
    }
    return arrival < decision_step ? 1 : 0;
}

namespace {

struct Sums {
    double weighted = 0.0;    // sum of beta * p * tau
    double unweighted = 0.0;  // sum of beta * tau
};

template <typename Beta>
Sums upstream_sums(const MovementObservation& mo, const Beta& beta_of) {
    Sums s;
    for (const auto& v : mo.vehicles) {
        const double bt = beta_of(v, mo.link) * tau(v.link_travel_time, mo.expected_travel_time);
        s.unweighted += bt;
        s.weighted += bt * v.occupancy;
    }
    return s;
}

template <typename Beta>
double downstream_sum(const MovementObservation& mo, const Beta& beta_of) {
    double total = 0.0;
    for (const auto& d : mo.downstream) {
        double inner = 0.0;
        for (const auto& v : d.vehicles) inner += beta_of(v, d.link) * tau(v.link_travel_time, d.expected_travel_time);
        total += d.turning_ratio * inner;
    }
    return total;
}

void sum_phases(const NodeObservation& obs, PressureTable& table) {
    table.phases.assign(obs.phases.size(), 0.0);
    for (std::size_t p = 0; p < obs.phases.size(); ++p)
        for (int k : obs.phases[p]) table.phases[p] += table.movements[k].pressure;
}

PressureTable start(const NodeObservation& obs) {
    PressureTable t;
    t.node = obs.node;
    t.movements.resize(obs.movements.size());
    return t;
}

const auto kAlwaysOne = [](const ObservedVehicle&, const LinkGeometry&) { return 1; };

// Occupancy averaged over the visible vehicles that the count includes.
template <typename Beta>
double mean_counted_occupancy(const MovementObservation& mo, const Beta& beta_of) {
    double weight = 0.0, sum = 0.0;
    for (const auto& v : mo.vehicles) {
        const double b = beta_of(v, mo.link);
        weight += b;
        sum += b * v.occupancy;
    }
    return weight > 0.0 ? sum / weight : 1.0;
}

template <typename Beta>
PressureTable count_pressure(const NodeObservation& obs, const Beta& beta_of,
                             std::span<const std::optional<double>> mean_occupancy) {
    auto table = start(obs);
    for (std::size_t k = 0; k < obs.movements.size(); ++k) {
        const auto& mo = obs.movements[k];
        double up = 0.0;
        for (const auto& v : mo.vehicles) up += beta_of(v, mo.link);
        up /= std::sqrt(mo.link.window.length());
        double down = 0.0;
        for (const auto& d : mo.downstream) {
            double inner = 0.0;
            for (const auto& v : d.vehicles) inner += beta_of(v, d.link);
            down += d.turning_ratio * inner / std::sqrt(d.link.window.length());
        }
        const double pbar = k < mean_occupancy.size() && mean_occupancy[k] && mo.vehicles.empty()
                                ? *mean_occupancy[k]
                                : mean_counted_occupancy(mo, beta_of);
        auto& mp = table.movements[k];
        mp.upstream = up;
        mp.downstream = down;
        mp.unweighted_diff = up - down;
        mp.saturation = mo.saturation;
        mp.pressure = mo.saturation * pbar * (up - down);
    }
    sum_phases(obs, table);
    return table;
}

}  // namespace

PressureTable cvmp_pressure(const NodeObservation& obs) {
    auto table = start(obs);
    for (std::size_t k = 0; k < obs.movements.size(); ++k) {
        const auto& mo = obs.movements[k];
        const auto up = upstream_sums(mo, kAlwaysOne);
        const double down = downstream_sum(mo, kAlwaysOne);
        auto& mp = table.movements[k];
        mp.upstream = up.unweighted;
        mp.downstream = down;
        mp.unweighted_diff = up.unweighted - down;
        mp.saturation = mo.saturation;
        mp.pressure = mo.saturation * (up.unweighted - down);
    }
    sum_phases(obs, table);
    return table;
}

PressureTable transit_pressure(const NodeObservation& obs, const BetaParams& beta_of) {
    auto table = start(obs);
    for (std::size_t k = 0; k < obs.movements.size(); ++k) {
        const auto& mo = obs.movements[k];
        const auto up = upstream_sums(mo, beta_of);
        const double down = downstream_sum(mo, beta_of);
        auto& mp = table.movements[k];
        mp.upstream = up.weighted;
        mp.downstream = down;
        mp.unweighted_diff = up.unweighted - down;
        mp.forced_zero = mp.unweighted_diff < 0.0;
        mp.saturation = mp.forced_zero ? 0.0 : mo.saturation;
        mp.pressure = mp.saturation * (up.weighted - down);
    }
    sum_phases(obs, table);
    return table;
}

PressureTable mtransit_pressure(const NodeObservation& obs, const BetaParams& beta_of,
                                std::span<const FallbackState> fallback, bool clamp_on_fallback) {
    auto table = start(obs);
    for (std::size_t k = 0; k < obs.movements.size(); ++k) {
        const auto& mo = obs.movements[k];
        const double down = downstream_sum(mo, beta_of);
        auto& mp = table.movements[k];
        mp.downstream = down;
        bool clamp = true;
        if (mo.vehicles.empty()) {
            const auto& fb = fallback[k];
            mp.fallback = true;
            mp.upstream = fb.occupancy * fb.tau_hat;
            mp.unweighted_diff = fb.tau_hat - down;
            clamp = clamp_on_fallback;
        } else {
            const auto up = upstream_sums(mo, beta_of);
            mp.upstream = up.weighted;
            mp.unweighted_diff = up.unweighted - down;
        }
        mp.forced_zero = clamp && mp.unweighted_diff < 0.0;
        mp.saturation = mp.forced_zero ? 0.0 : mo.saturation;
        mp.pressure = mp.saturation * (mp.upstream - down);
    }
    sum_phases(obs, table);
    return table;
}

PressureTable occ_pressure(const NodeObservation& obs, std::span<const std::optional<double>> mean_occupancy) {
    return count_pressure(obs, kAlwaysOne, mean_occupancy);
}

PressureTable eocc_pressure(const NodeObservation& obs, const BetaParams& beta_of,
                            std::span<const std::optional<double>> mean_occupancy) {
    return count_pressure(obs, beta_of, mean_occupancy);
}

int select_phase(const PressureTable& table, int active_phase) {
    const auto& p = table.phases;
    if (p.empty()) return 0;
    const double best = *std::max_element(p.begin(), p.end());
    if (active_phase >= 0 && active_phase < static_cast<int>(p.size()) && p[active_phase] == best) return active_phase;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] == best) return static_cast<int>(i);
    return 0;
}

SignalDecision select_phases(std::span<const PressureTable> tables, std::span<const int> active_phase) {
    SignalDecision d;
    d.phase.reserve(tables.size());
    for (std::size_t n = 0; n < tables.size(); ++n)
        d.phase.push_back(select_phase(tables[n], n < active_phase.size() ? active_phase[n] : 0));
    return d;
}

}  // namespace transitmp
