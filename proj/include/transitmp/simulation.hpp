// Time-stepped mesoscopic traffic dynamics.
//
// Each link keeps its vehicles ordered by position. Vehicles advance at the
// link free-flow speed until they reach the back of their movement's queue;
// queues are packed at jam spacing from the stopline, so a link holds at most
// Link::storage() vehicles. Entry demand waits in point queues at fictitious
// source links while the entry link is full.
#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <map>
#include <optional>
#include <vector>

#include "transitmp/network.hpp"
#include "transitmp/rng.hpp"

namespace transitmp {

enum class VehicleClass { Car, Transit };
enum class Motion { Moving, Queued, Dwelling };

struct Vehicle {
    std::uint64_t id = 0;
    VehicleClass cls = VehicleClass::Car;
    bool is_cv = false;
    int occupancy = 1;  // persons, driver included

    // Transit bookkeeping.
    int line = kNone;
    std::size_t route_pos = 0;
    std::size_t next_stop = 0;
    std::vector<int> onboard;  // riders by alighting stop; last slot = end of route

    MovementIndex movement = kNone;  // taken at the end of the current link; kNone leaves the network
    double generated_at = 0.0;
    double link_entry_time = 0.0;
    double position = 0.0;  // m from inlet
    Motion motion = Motion::Moving;
    double remaining_dwell = 0.0;
    double delay = 0.0;  // accumulated time loss, s

    bool is_transit() const { return cls == VehicleClass::Transit; }
    double link_travel_time(double now) const { return now - link_entry_time; }
};

struct LinkState {
    std::vector<Vehicle> vehicles;  // descending position
};

struct SourceQueue {
    std::deque<Vehicle> backlog;
    long cumulative_blocked = 0;  // vehicle-steps refused for lack of downstream space
    double demand_credit = 0.0;
    double service_credit = 0.0;
};

/// Per-node phase choice for the coming interval.
struct SignalDecision {
    std::vector<int> phase;
};

/// Saturation flow after the phase-transition discount.
double effective_saturation(double saturation, bool switching, double decision_step, double yellow, double lost);

/// Result of serving one stop.
struct StopService {
    int boarded = 0;
    int alighted = 0;
    int occupancy = 1;
    double dwell = 0.0;
};

/// Boarding/alighting at a stop. Occupancy is clamped to [1, capacity];
/// boarders beyond the spare capacity stay behind.
StopService serve_stop(int occupancy, int capacity, int waiting, int alighting, double base, double per_passenger);

/// CV flag for a new vehicle; transit vehicles are always connected.
bool sample_cv(VehicleClass cls, double penetration, Rng& rng);

/// Running totals, all monotone.
struct Counters {
    long generated = 0;
    long generated_cv = 0;
    long generated_nv = 0;
    long generated_transit = 0;
    long exited = 0;
    long passengers_carried = 0;
    double delay_cv = 0.0;
    double delay_nv = 0.0;
    double delay_transit = 0.0;
    double passenger_delay = 0.0;  // person-s on transit vehicles
};

/// Per-movement observations collected for historical calibration, bucketed
/// by time-of-day window.
struct MovementTally {
    std::vector<long> arrivals;
    std::vector<long> cv_arrivals;
    std::vector<double> occupancy_sum;
    std::vector<long> departures;
    std::vector<double> saturated_green;  // s of green with a standing queue
    std::vector<long> saturated_departures;
};

struct WorldState {
    double t = 0.0;
    long step_index = 0;
    std::vector<LinkState> links;
    std::vector<SourceQueue> sources;
    std::vector<int> active_phase;       // per node
    std::vector<double> phase_start;     // per node
    std::vector<double> discharge_credit;  // per movement
    std::vector<std::vector<std::vector<int>>> waiting;  // per line, stop, destination stop
    std::vector<double> next_departure;  // per line
    std::uint64_t next_id = 1;
    Counters counters;
    std::vector<MovementTally> tally;
    double tally_window = 1800.0;

    long vehicles_on_network() const;
    long backlog() const;
};

struct SimulationOptions {
    std::map<LinkIndex, double> link_penetration;  // overrides the scenario
    std::optional<double> penetration;             // overrides the scenario global rate
    double tally_window = 1800.0;
    std::optional<int> car_occupancy;              // forces every car to this occupancy
};

struct Violation {
    NodeIndex node = kNone;
    int phase = kNone;
    double t = 0.0;
};

class Simulation {
public:
    Simulation(const Scenario& scenario, std::uint64_t seed, SimulationOptions options = {});

    /// Advance one substep of length scenario.simulation.dt under `decision`.
    void step(const SignalDecision& decision);

    const WorldState& state() const { return world_; }
    WorldState& mutable_state() { return world_; }
    const Scenario& scenario() const { return scenario_; }

    double penetration_for(LinkIndex entry) const;
    /// Departures per movement during the most recent step.
    const std::vector<int>& last_departures() const { return last_departures_; }
    /// Vehicles refused entry to a real link because it was full, most recent step.
    long last_blocked() const { return last_blocked_; }

    /// Vehicles of movement m on its incoming link (all motion states).
    int movement_count(MovementIndex m) const;
    int movement_queue(MovementIndex m) const;
    int link_count(LinkIndex l) const;

    /// Phases whose movements all sit on jammed links without any CV.
    std::vector<Violation> necessary_condition_monitor() const;

    /// One CSV row: step, per-movement counts and CV counts, active phases.
    void write_snapshot_header(std::ostream& os) const;
    void write_snapshot_row(std::ostream& os) const;

private:
    MovementIndex choose_movement(const Vehicle& v, LinkIndex link);
    void enter_link(Vehicle& v, LinkIndex link, double when);
    void discharge(std::vector<std::vector<Vehicle>>& arrivals, std::vector<int>& inbound);
    void move_vehicles();
    void load_sources(std::vector<std::vector<Vehicle>>& arrivals, std::vector<int>& inbound);
    void generate_demand();
    void add_passengers();
    void finish(Vehicle& v);
    void charge_delay(Vehicle& v, double amount);
    void reslot_queues(LinkIndex l);
    int tally_bucket() const;

    Scenario scenario_;
    SimulationOptions options_;
    WorldState world_;
    Rng demand_rng_, cv_rng_, turn_rng_, passenger_rng_, occupancy_rng_;
    std::vector<int> last_departures_;
    long last_blocked_ = 0;
};

}  // namespace transitmp
