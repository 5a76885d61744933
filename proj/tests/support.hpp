// Helpers shared by the unit tests: fixture paths and hand-built observations.
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "transitmp/controllers.hpp"
#include "transitmp/scenario_io.hpp"

namespace testsupport {

// One node: a 100 m entry link (storage 10) feeding a 30 m exit link (storage 3),
// plus an idle side approach served by the second phase.
// The movement discharges up to 10 veh/s, so the exit link's space is the binding limit.
inline const char* kBottleneck = R"({
  "name": "bottleneck",
  "links": [
    {"id": "in",  "length_m": 100, "jam_density_veh_per_km": 100, "speed_kmh": 36},
    {"id": "side", "length_m": 100, "jam_density_veh_per_km": 100, "speed_kmh": 36},
    {"id": "out", "length_m": 30,  "jam_density_veh_per_km": 100, "speed_kmh": 36}
  ],
  "sources": [{"id": "src", "link": "in"}, {"id": "src_side", "link": "side"}],
  "nodes": [{"id": "n", "movements": [
      {"id": "through", "from": "in", "to": "out", "saturation_flow_veh_per_h": 36000, "turning_ratio": 1.0},
      {"id": "side_through", "from": "side", "to": "out", "saturation_flow_veh_per_h": 1800, "turning_ratio": 1.0}],
    "phases": [["through"], ["side_through"]]}],
  "demand": {"mode": "poisson", "profiles": [{"source": "src", "segments": [{"until_s": 3600, "rate_veh_per_h": 0}]}]},
  "controller": {"variant": "transit-mp"},
  "simulation": {"horizon_s": 3600, "penetration": 0.0}
})";

inline std::filesystem::path scenario_path(const std::string& name) {
    return std::filesystem::path(TRANSITMP_SCENARIO_DIR) / name;
}

inline transitmp::Scenario load(const std::string& name) { return transitmp::load_scenario(scenario_path(name)); }

inline transitmp::ObservedVehicle car(double tau_value, double occupancy = 1.0, double ett = 1.0) {
    transitmp::ObservedVehicle v;
    v.link_travel_time = tau_value * ett;
    v.occupancy = occupancy;
    return v;
}

inline transitmp::ObservedVehicle bus(double position, double tau_value, double occupancy, double ett = 1.0) {
    auto v = car(tau_value, occupancy, ett);
    v.cls = transitmp::VehicleClass::Transit;
    v.position = position;
    return v;
}

inline transitmp::LinkGeometry geometry(double length, std::optional<double> station = std::nullopt,
                                        double speed = 10.0) {
    transitmp::LinkGeometry g;
    g.length = length;
    g.free_flow_speed = speed;
    g.station = station;
    g.window = transitmp::Window{0.0, length};
    return g;
}

/// A movement with unit expected travel time, so a vehicle's tau equals its travel time.
inline transitmp::MovementObservation movement(double saturation, std::vector<transitmp::ObservedVehicle> up,
                                               double length = 100.0) {
    transitmp::MovementObservation mo;
    mo.saturation = saturation;
    mo.expected_travel_time = 1.0;
    mo.link = geometry(length);
    mo.vehicles = std::move(up);
    return mo;
}

inline void add_downstream(transitmp::MovementObservation& mo, double ratio,
                           std::vector<transitmp::ObservedVehicle> down, double length = 100.0) {
    transitmp::DownstreamObservation d;
    d.turning_ratio = ratio;
    d.expected_travel_time = 1.0;
    d.link = geometry(length);
    d.vehicles = std::move(down);
    mo.downstream.push_back(std::move(d));
}

inline transitmp::NodeObservation single(transitmp::MovementObservation mo) {
    transitmp::NodeObservation obs;
    obs.movements.push_back(std::move(mo));
    obs.phases = {{0}};
    return obs;
}

}  // namespace testsupport
