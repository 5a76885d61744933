#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "transitmp/estimation.hpp"
#include "transitmp/harness.hpp"
#include "transitmp/scenario_io.hpp"

using namespace transitmp;

namespace {

// Two approaches at one node: "busy" carries a steady 0.2 veh/s, "idle" never
// sees traffic, and "tram_in" is used only by a stopless transit line.
const char* kCalibration = R"({
  "name": "calibration",
  "links": [
    {"id": "busy_in", "length_m": 200, "jam_density_veh_per_km": 133, "speed_kmh": 50},
    {"id": "idle_in", "length_m": 200, "jam_density_veh_per_km": 133, "speed_kmh": 50},
    {"id": "tram_in", "length_m": 200, "jam_density_veh_per_km": 133, "speed_kmh": 50},
    {"id": "out",     "length_m": 200, "jam_density_veh_per_km": 133, "speed_kmh": 50}
  ],
  "sources": [{"id": "busy", "link": "busy_in"}, {"id": "idle", "link": "idle_in"}, {"id": "tram", "link": "tram_in"}],
  "nodes": [{"id": "n", "movements": [
      {"id": "busy_out", "from": "busy_in", "to": "out", "saturation_flow_veh_per_h": 1800, "turning_ratio": 1.0},
      {"id": "idle_out", "from": "idle_in", "to": "out", "saturation_flow_veh_per_h": 1800, "turning_ratio": 1.0},
      {"id": "tram_out", "from": "tram_in", "to": "out", "saturation_flow_veh_per_h": 1800, "turning_ratio": 1.0}],
    "phases": [["busy_out"], ["idle_out", "tram_out"]]}],
  "demand": {"mode": "deterministic", "profiles": [
      {"source": "busy", "segments": [{"until_s": 3600, "rate_veh_per_h": 720}]}]},
  "transit_lines": [{"id": "tram", "route": ["tram_in", "out"], "stops": [], "headway_s": 300,
      "first_departure_s": 0, "dwell": {"base_s": 0, "per_passenger_s": 0}, "capacity": 60,
      "initial_passengers": 19}],
  "controller": {"variant": "transit-mp"},
  "simulation": {"horizon_s": 3600, "warmup_s": 0, "penetration": 0.3}
})";

}  // namespace

TEST_CASE("penetration estimate from historical CV counts") {
    CHECK(estimate_penetration(90.0, 0.1, 900.0) == doctest::Approx(1.0));
    CHECK(estimate_penetration(9.0, 0.1, 900.0) == doctest::Approx(0.1));
    CHECK(estimate_penetration(0.0, 0.1, 900.0) == doctest::Approx(kPenetrationFloor));
}

TEST_CASE("expected-queue recursion") {
    CHECK(iqa_step(5.0, 0.0, 0.2, 0.5, 10.0) == doctest::Approx(7.0));
    CHECK(iqa_step(5.0, 1.0, 0.2, 0.5, 10.0) == doctest::Approx(2.0));
    CHECK(iqa_step(0.0, 1.0, 0.0, 0.5, 10.0) == 0.0);
    CHECK(iqa_step(5.0, 0.0, 0.2, 0.5, 10.0, 3.0) == doctest::Approx(5.0));
}

TEST_CASE("expected queue under permanent red grows linearly") {
    double q = 1.5;
    for (int n = 1; n <= 50; ++n) {
        q = iqa_step(q, 0.0, 0.13, 0.5, 10.0);
        CHECK(q == doctest::Approx(1.5 + n * 0.13 * 10.0));
    }
}

TEST_CASE("expected queue is monotone in arrivals and antitone in departures") {
    for (double q : {0.0, 2.0, 9.0})
        for (double s : {0.0, 1.0}) {
            CHECK(iqa_step(q, s, 0.3, 0.5, 10.0) >= iqa_step(q, s, 0.2, 0.5, 10.0));
            CHECK(iqa_step(q, s, 0.2, 0.6, 10.0) <= iqa_step(q, s, 0.2, 0.4, 10.0));
            CHECK(iqa_step(q, s, 0.2, 0.9, 10.0) >= 0.0);
        }
}

TEST_CASE("travel-time substitute from the expected queue") {
    CHECK(tau_hat(7.0, 0.1, 0.2, 30.0) == doctest::Approx(0.7 + 0.1 * 49.0 / 12.0).epsilon(1e-12));
    CHECK(tau_hat(7.0, 0.1, 0.2, 30.0) == doctest::Approx(1.108333).epsilon(1e-6));
    CHECK(tau_hat(0.0, 0.1, 0.2, 30.0) == 0.0);
    CHECK(tau_hat(1.0, 1.0, 0.5, 1.0) == doctest::Approx(2.0));
    double previous = 0.0;
    for (double q = 0.5; q < 40.0; q += 0.5) {
        const double t = tau_hat(q, 0.1, 0.2, 30.0);
        CHECK(t > previous);
        previous = t;
    }
}

TEST_CASE("travel-time substitute grows quadratically under red") {
    double q = 0.0;
    std::vector<double> values;
    for (int n = 0; n < 200; ++n) {
        q = iqa_step(q, 0.0, 0.05, 0.5, 10.0);
        values.push_back(tau_hat(q, 0.01, 0.05, 4.0));
    }
    // Second differences of a quadratic in n are constant and positive.
    const double d2a = values[102] - 2 * values[101] + values[100];
    const double d2b = values[192] - 2 * values[191] + values[190];
    CHECK(d2a > 0.0);
    CHECK(d2a == doctest::Approx(d2b).epsilon(1e-9));
}

TEST_CASE("error injection draws within level +- jitter") {
    ErrorModel model;
    model.level = -0.2;
    Rng rng(3);
    for (int k = 0; k < 1000; ++k) {
        const double m = inject_error(1.0, model, rng);
        CHECK(m >= 0.75);
        CHECK(m <= 0.85);
    }
    model.level = 0.0;
    model.jitter = 0.0;
    CHECK(inject_error(4.2, model, rng) == 4.2);

    model.level = 0.3;
    model.jitter = 0.05;
    double sum = 0.0;
    const int n = 100000;
    for (int k = 0; k < n; ++k) sum += inject_error(1.0, model, rng);
    CHECK(sum / n == doctest::Approx(1.3).epsilon(0.005 / 1.3));
}

TEST_CASE("supported error levels and the default sweep") {
    CHECK(ErrorModel::supported_level(-0.5));
    CHECK(ErrorModel::supported_level(0.3));
    CHECK_FALSE(ErrorModel::supported_level(0.25));
    CHECK_FALSE(ErrorModel::supported_level(0.6));
    const auto levels = default_error_levels();
    REQUIRE(levels.size() == 9);
    CHECK(levels.front() == doctest::Approx(-0.5));
    CHECK(levels.back() == doctest::Approx(0.5));
}

TEST_CASE("calibration recovers arrival rate, floors empty movements and averages transit occupancy") {
    const auto sc = parse_scenario(kCalibration);
    CalibrationOptions opt;
    opt.period = 1800.0;
    const auto stats = calibrate(sc, opt);
    const auto busy = sc.network.movement_index("busy_out");
    const auto idle = sc.network.movement_index("idle_out");
    const auto tram = sc.network.movement_index("tram_out");
    CHECK(stats.at(busy, 900.0).arrival_rate == doctest::Approx(0.2).epsilon(0.05));
    CHECK(stats.at(busy, 2700.0).arrival_rate == doctest::Approx(0.2).epsilon(0.05));
    CHECK(stats.at(busy, 900.0).penetration == doctest::Approx(0.3).epsilon(0.35));
    CHECK(stats.at(idle, 900.0).floored);
    CHECK(stats.at(idle, 900.0).arrival_rate == doctest::Approx(kArrivalRateFloor));
    CHECK_FALSE(stats.at(tram, 900.0).floored);
    CHECK(stats.at(tram, 900.0).occupancy == doctest::Approx(20.0));
    CHECK(stats.at(tram, 900.0).penetration == doctest::Approx(1.0));
}

TEST_CASE("historical statistics survive a JSON round trip") {
    const auto sc = testsupport::load("minimal.json");
    HistoricalStats s;
    s.period = 900.0;
    for (const auto& m : sc.network.movements) {
        s.movement_ids.push_back(m.id);
        s.entries.push_back({HistoricalEntry{0.1, 0.2, 1.3, 0.45, false}, HistoricalEntry{}});
    }
    s.entries[2][1].floored = true;
    const auto back = historical_from_json(historical_to_json(s), sc.network);
    CHECK(back.period == 900.0);
    REQUIRE(back.entries.size() == s.entries.size());
    CHECK(back.at(0, 100.0).arrival_rate == doctest::Approx(0.1));
    CHECK(back.at(0, 100.0).penetration == doctest::Approx(0.2));
    CHECK(back.at(0, 100.0).occupancy == doctest::Approx(1.3));
    CHECK(back.at(0, 100.0).departure_rate == doctest::Approx(0.45));
    CHECK(back.at(2, 1000.0).floored);
    CHECK(&back.at(1, 1e6) == &back.entries[1].back());
}
