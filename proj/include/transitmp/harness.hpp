// Experiment runner: closed-loop runs (simulator + controller + estimator),
// seed repetition, sweeps, historical calibration and report emission.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "transitmp/analysis.hpp"
#include "transitmp/estimation.hpp"
#include "transitmp/network.hpp"
#include "transitmp/simulation.hpp"

namespace transitmp {

/// Options for one closed-loop run of an already-resolved scenario.
struct SeedOptions {
    std::optional<HistoricalStats> historical;   // required by mTransit-MP
    std::optional<ErrorModel> error;             // perturbs arrival rate and queue anchors
    std::map<LinkIndex, double> link_penetration;
    std::optional<int> car_occupancy;            // forces every car occupancy
    bool observe_all = false;                    // controllers see every vehicle as connected
    bool check_invariants = true;                // non-negative selected pressure (Transit-MP family)
    bool record_decisions = false;
    double starvation_window = 600.0;
    StabilityThresholds thresholds;
    double tally_window = 1800.0;
};

struct RunSummary {
    std::uint64_t seed = 0;
    long max_vehicle_count = 0;
    long max_spillover = 0;
    long max_unserved = 0;
    double mean_vehicle_delay = 0.0;    // s per generated vehicle after warmup
    double mean_cv_delay = 0.0;
    double mean_nv_delay = 0.0;
    double mean_transit_delay = 0.0;
    double mean_passenger_delay = 0.0;  // s per transit passenger after warmup
    double unserved_slope = 0.0;        // veh/s after warmup
    double lyapunov_slope = 0.0;
    Verdict verdict = Verdict::Inconclusive;
};

/// Summary statistics of a metrics series; a pure function of the CSV content.
RunSummary summarize(std::span<const MetricsFrame> frames, double warmup, const StabilityThresholds& th = {});

struct PressureViolation {
    NodeIndex node = kNone;
    MovementIndex movement = kNone;
    double t = 0.0;
    double value = 0.0;
};

struct SeedResult {
    RunSummary summary;
    std::vector<MetricsFrame> frames;
    SignalHistory history;
    std::vector<std::vector<int>> decisions;       // per decision step, per node
    std::vector<PressureViolation> pressure_violations;
    long decision_steps = 0;
    std::vector<Violation> monitor;                // every record from every decision step
    std::vector<Starvation> starved;
    std::vector<MovementIndex> floored_movements;  // historical arrival rate was floored
    std::string error;                             // non-empty if the run failed
};

/// One closed-loop run. The scenario must already be validated.
SeedResult run_seed(const Scenario& scenario, std::uint64_t seed, const SeedOptions& options = {});

struct CalibrationOptions {
    double horizon = 0.0;  // 0 = scenario horizon
    std::uint64_t seed = 1;
    double period = 1800.0;  // T_tod
    std::map<LinkIndex, double> link_penetration;
};

/// Full-observation Transit-MP run tallying per-movement arrival, CV, occupancy
/// and saturated-departure statistics in T_tod windows.
HistoricalStats calibrate(const Scenario& scenario, const CalibrationOptions& options = {});

/// Statistics from the tallies of a finished calibration simulation.
HistoricalStats stats_from_tally(const Network& net, const WorldState& world, double horizon, double period);

struct RunDescriptor {
    std::filesystem::path scenario_path;
    std::optional<Scenario> scenario;  // used instead of loading scenario_path when set
    std::optional<ControllerVariant> variant;
    std::optional<double> penetration;
    std::map<std::string, double> link_penetration;  // by link id
    std::optional<SegmentationStrategy> segmentation;
    std::optional<ErrorModel> error;
    std::optional<QueueAnchor> anchor;
    std::vector<std::uint64_t> seeds{1};
    std::optional<double> horizon;
    std::optional<double> warmup;
    std::filesystem::path out_dir;  // empty: no files
    int workers = 1;
    std::optional<HistoricalStats> historical;
    std::uint64_t calibration_seed = 1000003;
};

/// Scenario with the descriptor's overrides applied and revalidated.
Scenario resolve_scenario(const RunDescriptor& d);
SeedOptions seed_options(const Scenario& sc, const RunDescriptor& d);

/// Historical stats for a run: the descriptor's, else the scenario's file, else a calibration run.
HistoricalStats historical_for(const Scenario& sc, const RunDescriptor& d);

struct RunReport {
    Scenario scenario;
    std::vector<SeedResult> seeds;
    RunSummary mean;               // field-wise mean over successful seeds
    Verdict majority = Verdict::Inconclusive;
    std::vector<std::filesystem::path> files;
};

/// Runs every seed (in parallel, bounded by workers) and writes artifacts when out_dir is set.
RunReport run(const RunDescriptor& d);

enum class SweepAxis { Penetration, Segmentation, ErrorLevel, Controller };
SweepAxis parse_axis(const std::string& text);
const char* axis_name(SweepAxis a);

struct SweepDescriptor {
    RunDescriptor base;
    SweepAxis axis = SweepAxis::Penetration;
    std::vector<std::string> values;
    std::vector<ControllerVariant> controllers;  // empty: the base variant only
};

struct SweepGroup {
    std::string value;
    ControllerVariant controller = ControllerVariant::TransitMp;
    std::vector<RunSummary> runs;
    RunSummary mean;
};

struct SweepReport {
    SweepAxis axis = SweepAxis::Penetration;
    std::vector<SweepGroup> groups;
    std::vector<std::filesystem::path> files;
};

SweepReport sweep(const SweepDescriptor& d);

/// Error-level table: one row per level (means over seeds) and a sample-STD row.
std::string error_table_csv(const SweepReport& report);
/// Sample standard deviation (n - 1 denominator).
double sample_std(std::span<const double> values);

std::string summary_csv_header();
std::string summary_csv_row(const std::string& label, const RunSummary& s);

}  // namespace transitmp
