// Max-pressure calculators and per-node phase selection.
//
// Controllers only see connected vehicles inside the segmentation window of
// each link. Every calculator is a pure function of a NodeObservation, so
// nodes can be evaluated independently.
#pragma once

#include <optional>
#include <span>
#include <vector>

#include "transitmp/network.hpp"
#include "transitmp/simulation.hpp"

namespace transitmp {

struct ObservedVehicle {
    double position = 0.0;
    double link_travel_time = 0.0;
    double occupancy = 1.0;
    VehicleClass cls = VehicleClass::Car;
    // Remaining (or, before the stop, expected) dwell at the link's last
    // station; 0 once the vehicle is past it.
    double remaining_dwell = 0.0;
};

struct LinkGeometry {
    double length = 0.0;
    double free_flow_speed = 0.0;
    std::optional<double> station;  // nearest to the stopline
    Window window;
};

struct DownstreamObservation {
    MovementIndex movement = kNone;
    double turning_ratio = 0.0;
    double expected_travel_time = 0.0;
    LinkGeometry link;
    std::vector<ObservedVehicle> vehicles;
};

struct MovementObservation {
    MovementIndex movement = kNone;
    double saturation = 0.0;  // veh/s
    double expected_travel_time = 0.0;
    LinkGeometry link;
    std::vector<ObservedVehicle> vehicles;  // upstream CVs in the window
    std::vector<DownstreamObservation> downstream;
};

struct NodeObservation {
    NodeIndex node = kNone;
    std::vector<MovementObservation> movements;
    std::vector<std::vector<int>> phases;  // local movement indices
    int active_phase = 0;
};

struct ObservationOptions {
    SegmentationStrategy segmentation;
    bool observe_all = false;  // full observation, ignoring CV flags
};

NodeObservation observe_node(const Scenario& scenario, const WorldState& world, NodeIndex node,
                             const ObservationOptions& options);

/// Normalized link travel time. Throws ConfigError when ett <= 0.
double tau(double link_travel_time, double expected_travel_time);

/// Station gating: cars always count, transit only once at or past the last station.
int beta(const ObservedVehicle& v, std::optional<double> station);

/// Arrival-time gating: transit counts only if expected at the stopline within one decision step.
int beta_eta(const ObservedVehicle& v, const LinkGeometry& link, double decision_step, double theta);

struct BetaParams {
    BetaMode mode = BetaMode::Position;
    double decision_step = 10.0;
    double theta = 2.0;

    int operator()(const ObservedVehicle& v, const LinkGeometry& link) const {
        return mode == BetaMode::Position ? beta(v, link.station) : beta_eta(v, link, decision_step, theta);
    }
};

struct MovementPressure {
    double upstream = 0.0;    // upstream traffic state as weighted by the controller
    double downstream = 0.0;  // turning-ratio weighted downstream state
    double unweighted_diff = 0.0;  // occupancy-free difference used by the forced-zero rule
    double saturation = 0.0;  // effective c after the forced-zero rule
    double pressure = 0.0;    // saturation * (upstream - downstream)
    bool forced_zero = false;
    bool fallback = false;    // upstream came from historical estimates
};

struct PressureTable {
    NodeIndex node = kNone;
    std::vector<MovementPressure> movements;  // aligned with NodeObservation::movements
    std::vector<double> phases;
};

/// Historical substitute for a movement's upstream state.
struct FallbackState {
    double occupancy = 1.0;  // p-hat
    double tau_hat = 0.0;
};

PressureTable cvmp_pressure(const NodeObservation& obs);
PressureTable transit_pressure(const NodeObservation& obs, const BetaParams& beta);
PressureTable mtransit_pressure(const NodeObservation& obs, const BetaParams& beta,
                                std::span<const FallbackState> fallback, bool clamp_on_fallback = true);
/// mean_occupancy: per-movement historical p-bar, used only when no CV is visible
/// upstream; otherwise p-bar is the mean occupancy of the visible CVs the count includes.
PressureTable occ_pressure(const NodeObservation& obs, std::span<const std::optional<double>> mean_occupancy);
PressureTable eocc_pressure(const NodeObservation& obs, const BetaParams& beta,
                            std::span<const std::optional<double>> mean_occupancy);

/// Phase with maximal pressure; ties go to the active phase, then the lowest index.
int select_phase(const PressureTable& table, int active_phase);
SignalDecision select_phases(std::span<const PressureTable> tables, std::span<const int> active_phase);

}  // namespace transitmp
