// Historical-data estimates used when a movement has no visible CVs:
// penetration from historical CV counts, the incremental queue accumulation
// (IQA) recursion, and the normalized travel-time substitute tau-hat.
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "transitmp/network.hpp"
#include "transitmp/rng.hpp"

namespace transitmp {

inline constexpr double kPenetrationFloor = 0.01;
inline constexpr double kArrivalRateFloor = 1.0 / 3600.0;  // 1 veh/h

/// Per-movement historical statistics for one time-of-day window.
struct HistoricalEntry {
    double arrival_rate = kArrivalRateFloor;  // lambda-hat, veh/s
    double penetration = 1.0;                 // psi-hat
    double occupancy = 1.0;                   // p-hat
    double departure_rate = 0.5;              // veh/s at the stopline
    bool floored = false;                     // arrival rate was floored (no observations)
};

struct HistoricalStats {
    double period = 1800.0;  // T_tod, s
    std::vector<std::string> movement_ids;
    std::vector<std::vector<HistoricalEntry>> entries;  // [movement][window]

    /// Entry for movement m at time t; windows beyond the table reuse the last one.
    const HistoricalEntry& at(MovementIndex m, double t) const;
};

/// Reads a historical stats file and aligns it with the network's movement order.
HistoricalStats load_historical(const std::filesystem::path& path, const Network& net);
void save_historical(const std::filesystem::path& path, const HistoricalStats& stats);
std::string historical_to_json(const HistoricalStats& stats);
HistoricalStats historical_from_json(const std::string& text, const Network& net);

/// Fraction of historical arrivals that were CVs, clamped to (0, 1]; zero
/// historical CVs gives kPenetrationFloor.
double estimate_penetration(double historical_cv_count, double arrival_rate, double period);

/// One decision step of the expected-queue recursion. `anchor` replaces the
/// previous estimate when a CV-based queue estimate is available.
double iqa_step(double expected_queue, double previous_signal, double arrival_rate, double departure_rate,
                double decision_step, std::optional<double> anchor = std::nullopt);

/// Expected queue of one movement, advanced once per decision step.
struct IqaState {
    double expected_queue = 0.0;  // veh
    double last_anchor = -1.0;    // s; negative until the first anchor
};

/// Penetration-scaled normalized total travel time of the IQA queue: the
/// queue's free-flow time plus the triangular accumulated delay.
double tau_hat(double expected_queue, double penetration, double arrival_rate, double expected_travel_time);

/// Parameter error: realized multiplier is 1 + u, u ~ U[level - jitter, level + jitter].
struct ErrorModel {
    double level = 0.0;
    double jitter = 0.05;
    bool arrival_rate = true;
    bool queue = true;

    bool active() const { return level != 0.0 || jitter != 0.0; }
    static bool supported_level(double level);
};

double inject_error(double value, const ErrorModel& model, Rng& rng);

/// Error levels swept by default (the -40% and +40% levels are skipped).
std::vector<double> default_error_levels();

}  // namespace transitmp
