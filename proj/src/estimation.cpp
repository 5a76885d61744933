#include "transitmp/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace transitmp {

using nlohmann::json;

const HistoricalEntry& HistoricalStats::at(MovementIndex m, double t) const {
    const auto& row = entries.at(m);
    if (row.empty()) throw ConfigError("no historical statistics for movement '" + movement_ids.at(m) + "'");
    const auto w = static_cast<std::size_t>(std::max(0.0, std::floor(t / period)));
    return row[std::min(w, row.size() - 1)];
}

std::string historical_to_json(const HistoricalStats& stats) {
    json doc;
    doc["period_s"] = stats.period;
    json moves = json::array();
    for (std::size_t m = 0; m < stats.entries.size(); ++m) {
        json windows = json::array();
        for (const auto& e : stats.entries[m]) {
            windows.push_back({{"arrival_rate_veh_per_h", e.arrival_rate * 3600.0},
                               {"penetration", e.penetration},
                               {"occupancy", e.occupancy},
                               {"departure_rate_veh_per_h", e.departure_rate * 3600.0},
                               {"floored", e.floored}});
        }
        moves.push_back({{"movement", stats.movement_ids[m]}, {"windows", windows}});
    }
    doc["movements"] = moves;
    return doc.dump(2);
}

HistoricalStats historical_from_json(const std::string& text, const Network& net) {
    HistoricalStats stats;
    json doc;
    try {
        doc = json::parse(text);
        stats.period = doc.value("period_s", 1800.0);
        if (!(stats.period > 0.0)) throw ConfigError("historical stats: period_s must be > 0");
        stats.movement_ids.resize(net.movements.size());
        stats.entries.resize(net.movements.size());
        for (std::size_t m = 0; m < net.movements.size(); ++m) stats.movement_ids[m] = net.movements[m].id;
        for (const auto& mj : doc.at("movements")) {
            const auto id = mj.at("movement").get<std::string>();
            const auto m = net.movement_index(id);
            if (m == kNone) throw ConfigError("historical stats: unknown movement '" + id + "'");
            auto& row = stats.entries[m];
            row.clear();
            for (const auto& w : mj.at("windows")) {
                HistoricalEntry e;
                e.arrival_rate = w.at("arrival_rate_veh_per_h").get<double>() / 3600.0;
                e.penetration = w.at("penetration").get<double>();
                e.occupancy = w.value("occupancy", 1.0);
                e.departure_rate = w.at("departure_rate_veh_per_h").get<double>() / 3600.0;
                e.floored = w.value("floored", false);
                if (!(e.arrival_rate > 0.0) || !(e.penetration > 0.0 && e.penetration <= 1.0) || !(e.occupancy >= 1.0) ||
                    !(e.departure_rate > 0.0))
                    throw ConfigError("historical stats for movement '" + id +
                                      "': need arrival rate > 0, penetration in (0,1], occupancy >= 1, departure rate > 0");
                row.push_back(e);
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed historical stats: ") + e.what());
    }
    for (std::size_t m = 0; m < stats.entries.size(); ++m)
        if (stats.entries[m].empty())
            throw ConfigError("historical stats: missing movement '" + stats.movement_ids[m] + "'");
    return stats;
}

HistoricalStats load_historical(const std::filesystem::path& path, const Network& net) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open historical stats file '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return historical_from_json(buf.str(), net);
}

void save_historical(const std::filesystem::path& path, const HistoricalStats& stats) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << historical_to_json(stats) << '\n';
}

double estimate_penetration(double historical_cv_count, double arrival_rate, double period) {
    const double denom = arrival_rate * period;
    if (!(denom > 0.0)) throw ConfigError("penetration estimate needs arrival_rate * period > 0");
    if (historical_cv_count <= 0.0) return kPenetrationFloor;
    return std::clamp(historical_cv_count / denom, kPenetrationFloor, 1.0);
}

double iqa_step(double expected_queue, double previous_signal, double arrival_rate, double departure_rate,
                double decision_step, std::optional<double> anchor) {
    const double base = anchor ? *anchor : expected_queue;
    return std::max(0.0, base + arrival_rate * decision_step - previous_signal * departure_rate * decision_step);
}

double tau_hat(double expected_queue, double penetration, double arrival_rate, double expected_travel_time) {
    return penetration * expected_queue +
           penetration * expected_queue * expected_queue / (2.0 * arrival_rate * expected_travel_time);
}

bool ErrorModel::supported_level(double level) {
    const double tenths = level * 10.0;
    return std::abs(level) <= 0.5 + 1e-9 && std::abs(tenths - std::round(tenths)) < 1e-6;
}

double inject_error(double value, const ErrorModel& model, Rng& rng) {
    if (!model.active()) return value;
    const double u = rng.uniform(model.level - model.jitter, model.level + model.jitter);
    return value * (1.0 + u);
}

std::vector<double> default_error_levels() { return {-0.5, -0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3, 0.5}; }

}  // namespace transitmp
