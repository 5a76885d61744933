// Road network description: links, movements, signal phases and the
// scenario-level configuration that sits on top of them.
#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace transitmp {

using LinkIndex = int;
using MovementIndex = int;
using NodeIndex = int;
using SourceIndex = int;

inline constexpr int kNone = -1;

/// Raised when a scenario document cannot be parsed or fails validation.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
    ConfigError(const std::string& what, std::vector<std::string> details)
        : std::runtime_error(what), details_(std::move(details)) {}

    const std::vector<std::string>& details() const { return details_; }

private:
    std::vector<std::string> details_;
};

struct Link {
    std::string id;
    double length = 0.0;           // m
    double jam_density = 0.0;      // veh/m per lane
    double free_flow_speed = 0.0;  // m/s
    int lanes = 1;
    std::vector<double> stations;  // m from inlet, ascending
    std::optional<double> penetration;  // per-link CV rate for vehicles entering here

    /// Vehicles the link can physically hold.
    int storage() const;
    /// Free-flow traversal time; zero-length links report 0.
    double free_flow_time() const;
    /// Position of the station nearest to the stopline, if any.
    std::optional<double> last_station() const;
};

/// Fictitious zero-length source link feeding a real entry link.
struct Source {
    std::string id;
    LinkIndex link = kNone;
    double saturation_flow = 0.0;  // veh/s
};

struct Movement {
    std::string id;
    NodeIndex node = kNone;
    LinkIndex from = kNone;
    LinkIndex to = kNone;
    double saturation_flow = 0.0;  // veh/s
    double turning_ratio = 0.0;
};

struct Phase {
    std::vector<MovementIndex> movements;
};

struct Node {
    std::string id;
    std::vector<MovementIndex> movements;
    std::vector<Phase> phases;
};

/// Window of link positions whose vehicles count toward pressure.
struct Window {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double x) const { return x >= lo && x <= hi; }
    double length() const { return hi - lo; }
};

/// S0 disables segmentation; S1..S5 are fixed window lengths; Custom uses
/// an explicit length.
struct SegmentationStrategy {
    enum class Tag { S0, S1, S2, S3, S4, S5, Custom };
    Tag tag = Tag::S0;
    double custom_length = 0.0;

    static SegmentationStrategy parse(const std::string& text);
    std::string name() const;
    /// Segment length in metres; infinity for S0.
    double segment_length() const;
};

Window segment_vehicle_window(const Link& link, const SegmentationStrategy& strategy);

struct Network {
    std::vector<Link> links;
    std::vector<Source> sources;
    std::vector<Node> nodes;
    std::vector<Movement> movements;

    // Derived indices, filled by index().
    std::vector<std::vector<MovementIndex>> outgoing;  // per link
    std::vector<SourceIndex> source_of_link;           // per link, kNone if not an entry

    void index();
    LinkIndex link_index(const std::string& id) const;
    MovementIndex movement_index(const std::string& id) const;
    NodeIndex node_index(const std::string& id) const;
    /// Movement from link `from` into link `to`, kNone if absent.
    MovementIndex find_movement(LinkIndex from, LinkIndex to) const;
    /// Expected free-flow travel time of a movement (upstream link traversal).
    double expected_travel_time(MovementIndex m) const;
};

/// Piecewise-constant entry demand for one source.
struct DemandProfile {
    SourceIndex source = kNone;
    struct Segment {
        double until = 0.0;  // s, exclusive upper bound
        double rate = 0.0;   // veh/s
    };
    std::vector<Segment> segments;

    double rate_at(double t) const;
};

enum class DemandMode { Poisson, Deterministic };

struct TransitStop {
    LinkIndex link = kNone;
    double position = 0.0;
};

struct TransitLine {
    std::string id;
    std::vector<LinkIndex> route;
    std::vector<TransitStop> stops;  // in route order
    double headway = 0.0;            // s
    double first_departure = 0.0;    // s
    double dwell_base = 0.0;         // s
    double dwell_per_passenger = 0.0;
    int capacity = 1;                // persons including the driver
    int initial_passengers = 0;
    // rate[from][to] in persons/s, only from < to used
    std::vector<std::vector<double>> passenger_rates;
};

enum class ControllerVariant { CvMp, TransitMp, MTransitMp, OccMp, EoccMp };

ControllerVariant parse_variant(const std::string& text);
std::string variant_name(ControllerVariant v);

enum class BetaMode { Position, Eta };

enum class QueueAnchor { StoppedCvExpansion, GroundTruth, None };

struct ControllerConfig {
    ControllerVariant variant = ControllerVariant::TransitMp;
    SegmentationStrategy segmentation;
    BetaMode beta_mode = BetaMode::Position;
    double theta = 2.0;           // s, ETA buffer
    double decision_step = 10.0;  // T0, s
    double yellow = 3.0;          // Ty, s
    double lost = 1.0;            // Tl, s
    bool clamp_on_fallback = true;
    QueueAnchor anchor = QueueAnchor::StoppedCvExpansion;
};

struct SimulationConfig {
    double dt = 1.0;
    double horizon = 10800.0;
    double warmup = 600.0;
    double penetration = 1.0;
    DemandMode demand_mode = DemandMode::Poisson;
    // Car occupancy distribution: weight of 1, 2, 3, ... persons.
    std::vector<double> car_occupancy_weights{1.0};
};

struct Scenario {
    std::string name;
    Network network;
    std::vector<DemandProfile> demand;
    std::vector<TransitLine> transit_lines;
    ControllerConfig controller;
    SimulationConfig simulation;
    std::string historical_path;  // optional, resolved relative to the scenario file
};

/// Every violated invariant, phrased for a human; empty when the scenario is valid.
std::vector<std::string> validate_network(const Scenario& scenario);

}  // namespace transitmp
