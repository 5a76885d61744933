// Run instrumentation: metric frames, the Lyapunov function, the stability
// slope test, the admissible demand region LP and the queue-starvation detector.
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "transitmp/controllers.hpp"
#include "transitmp/network.hpp"
#include "transitmp/simulation.hpp"

namespace transitmp {

struct MetricsFrame {
    double t = 0.0;
    long vehicle_count = 0;    // vehicles on real links
    long spillover_count = 0;  // vehicles waiting at sources
    long unserved_count = 0;   // vehicle_count + spillover_count
    double delay_cv = 0.0;     // cumulative, s
    double delay_nv = 0.0;
    double delay_transit = 0.0;
    double passenger_delay = 0.0;  // person-s on transit vehicles
    double lyapunov = 0.0;
    // Cumulative counters so run summaries can be recomputed from the CSV.
    long generated_cv = 0;
    long generated_nv = 0;
    long generated_transit = 0;
    long passengers_carried = 0;
};

/// Counters of the world at its current clock; `lyapunov` is left at 0.
MetricsFrame metrics_frame(const WorldState& world);

void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const MetricsFrame& f);
/// Parses a metrics CSV produced by write_metrics_*; throws std::runtime_error on malformed input.
std::vector<MetricsFrame> read_metrics_csv(std::istream& is);

struct LyapunovSample {
    double t = 0.0;
    double value = 0.0;
    double source_term = 0.0;           // 1/2 * sum of squared source backlogs
    std::vector<double> per_movement;   // N * w^d for each movement
    double exit_term = 0.0;             // same form for vehicles leaving the network at link ends
};

/// Count-times-weight form of the pairwise travel-time integral for one
/// movement: N * sum(beta * tau).
double movement_lyapunov_term(std::span<const double> beta_tau);

/// Full-observation Lyapunov value; transit gating uses `beta_of`.
LyapunovSample lyapunov_value(const Scenario& scenario, const WorldState& world, const BetaParams& beta_of);

enum class Verdict { Stable, Unstable, Inconclusive };
const char* verdict_name(Verdict v);

struct StabilityThresholds {
    double stable_slope = 0.005;   // veh/s
    double unstable_slope = 0.05;  // veh/s
    double min_span = 1200.0;      // s of post-warmup data required
    std::size_t min_points = 10;
};

/// Ordinary least-squares slope of y against x; 0 for fewer than 2 distinct x.
double ols_slope(std::span<const double> x, std::span<const double> y);

/// Slope test on the unserved count over frames with t >= from.
Verdict stability_verdict(std::span<const MetricsFrame> frames, double from, const StabilityThresholds& th = {});
/// Slope of the unserved count over frames with t >= from.
double unserved_slope(std::span<const MetricsFrame> frames, double from);
double lyapunov_slope(std::span<const MetricsFrame> frames, double from);

struct RegionCertificate {
    bool feasible = false;
    double epsilon = 0.0;  // veh/s; feasible iff > 0
    double kappa = 1.0;
    std::vector<std::vector<double>> weights;  // per node, per phase time share
    std::vector<double> movement_demand;       // veh/s routed through each movement
    std::vector<double> movement_margin;       // kappa * c * share - demand
    std::vector<double> source_margin;         // saturation - demand for each source
    std::string diagnostic;
};

/// Flow through every movement for the given per-source car demand, routed by
/// turning ratios, plus transit flow along each line's route.
std::vector<double> movement_demand(const Scenario& scenario, std::span<const double> source_rates);
/// Per-source car demand at time t.
std::vector<double> source_rates_at(const Scenario& scenario, double t);

/// maximize eps s.t. demand + eps <= kappa * c * (time share of phases serving the movement),
/// time shares forming a distribution per node, and source demand + eps <= source saturation.
RegionCertificate admissible_region_check(const Network& net, std::span<const double> movement_demand,
                                          std::span<const double> source_demand, double kappa = 1.0);
/// kappa for the reduced region: pi_min / pi_max when both are given, else 1.
double region_scale(std::optional<double> pi_min, std::optional<double> pi_max);
std::string region_report(const Network& net, const RegionCertificate& cert);

/// Signal and queue state recorded once per decision step.
struct SignalHistory {
    std::vector<double> t;
    std::vector<std::vector<char>> green;     // [step][movement]
    std::vector<std::vector<double>> queue;   // [step][movement]

    void record(double time, std::vector<char> g, std::vector<double> q);
};

struct Starvation {
    MovementIndex movement = kNone;
    double t0 = 0.0;  // first start of a starved interval
};

/// Movements with a recorded time t0 where the queue was positive and the
/// movement saw no green at any recorded step in [t0, t0 + window].
std::vector<Starvation> detect_starvation(const SignalHistory& history, double window = 600.0);

/// Longest recorded red run, in seconds, that started while the movement had a queue.
double longest_queued_red(const SignalHistory& history, MovementIndex m);

}  // namespace transitmp
