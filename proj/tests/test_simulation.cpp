#include <doctest.h>

#include <map>
#include <sstream>

#include "support.hpp"
#include "transitmp/rng.hpp"
#include "transitmp/scenario_io.hpp"
#include "transitmp/simulation.hpp"

using namespace transitmp;

namespace {

Vehicle queued_car(std::uint64_t id, MovementIndex m, double position) {
    Vehicle v;
    v.id = id;
    v.movement = m;
    v.position = position;
    v.motion = Motion::Queued;
    return v;
}

void fill_queue(Simulation& sim, int n) {
    auto& vs = sim.mutable_state().links[0].vehicles;
    for (int k = 0; k < n; ++k) vs.push_back(queued_car(100 + k, 0, 100.0 - 10.0 * k));
}

SignalDecision phase(int p) { return SignalDecision{{p}}; }

}  // namespace

TEST_CASE("effective saturation discounts lost time only when switching") {
    CHECK(effective_saturation(0.5, true, 10.0, 3.0, 1.0) == doctest::Approx(0.3));
    CHECK(effective_saturation(0.5, false, 10.0, 3.0, 1.0) == doctest::Approx(0.5));
    CHECK(effective_saturation(0.5, true, 10.0, 0.0, 0.0) == doctest::Approx(0.5));
}

TEST_CASE("stop service: dwell follows boarders and alighters, occupancy is clamped") {
    auto s = serve_stop(10, 80, 4, 2, 10.0, 2.0);
    CHECK(s.dwell == doctest::Approx(22.0));
    CHECK(s.occupancy == 12);
    s = serve_stop(10, 80, 0, 0, 10.0, 2.0);
    CHECK(s.dwell == doctest::Approx(10.0));
    s = serve_stop(80, 80, 3, 0, 10.0, 2.0);
    CHECK(s.boarded == 0);
    CHECK(s.occupancy == 80);
}

TEST_CASE("CV sampling: full and zero penetration, and the empirical rate") {
    Rng rng(7);
    CHECK(sample_cv(VehicleClass::Car, 1.0, rng));
    CHECK_FALSE(sample_cv(VehicleClass::Car, 0.0, rng));
    CHECK(sample_cv(VehicleClass::Transit, 0.0, rng));
    int hits = 0;
    const int n = 100000;
    for (int k = 0; k < n; ++k) hits += sample_cv(VehicleClass::Car, 0.1, rng) ? 1 : 0;
    CHECK(static_cast<double>(hits) / n == doctest::Approx(0.1).epsilon(0.1));
}

TEST_CASE("stepping an empty network only advances the clock") {
    const auto sc = parse_scenario(testsupport::kBottleneck);
    Simulation sim(sc, 1);
    sim.step(phase(0));
    CHECK(sim.state().t == doctest::Approx(1.0));
    CHECK(sim.state().vehicles_on_network() == 0);
    CHECK(sim.state().counters.generated == 0);
}

TEST_CASE("a queued vehicle under green moves downstream with its travel time reset") {
    const auto sc = parse_scenario(testsupport::kBottleneck);
    Simulation sim(sc, 1);
    fill_queue(sim, 1);
    sim.step(phase(0));
    REQUIRE(sim.state().links[2].vehicles.size() == 1);
    CHECK(sim.state().links[0].vehicles.empty());
    CHECK(sim.state().links[2].vehicles[0].link_travel_time(sim.state().t) == doctest::Approx(0.0));
}

TEST_CASE("discharge is limited by downstream spare capacity") {
    const auto sc = parse_scenario(testsupport::kBottleneck);
    Simulation sim(sc, 1);
    fill_queue(sim, 10);
    sim.step(phase(0));
    CHECK(sim.last_departures()[0] == 3);
    CHECK(sim.state().links[2].vehicles.size() == 3);
    CHECK(sim.state().links[0].vehicles.size() == 7);
}

TEST_CASE("red holds the queue") {
    const auto sc = parse_scenario(testsupport::kBottleneck);
    Simulation sim(sc, 1);
    fill_queue(sim, 4);
    sim.step(phase(1));
    CHECK(sim.last_departures()[0] == 0);
    CHECK(sim.state().links[0].vehicles.size() == 4);
}

TEST_CASE("necessary-condition monitor flags a jammed link without CVs") {
    const auto sc = parse_scenario(testsupport::kBottleneck);
    Simulation sim(sc, 1);
    CHECK(sim.necessary_condition_monitor().empty());
    fill_queue(sim, 10);
    const auto v = sim.necessary_condition_monitor();
    REQUIRE(v.size() == 1);
    CHECK(v[0].phase == 0);
    sim.mutable_state().links[0].vehicles[3].is_cv = true;
    CHECK(sim.necessary_condition_monitor().empty());
}

TEST_CASE("corridor dynamics: conservation, storage, discharge rate and travel times") {
    const auto sc = testsupport::load("corridor.json");
    const auto& net = sc.network;
    Simulation sim(sc, 3);
    Rng pick(11);
    std::map<std::uint64_t, std::pair<LinkIndex, double>> last_seen;  // id -> (link, travel time)
    std::vector<long> departures(net.movements.size(), 0);
    std::vector<long> green_steps(net.movements.size(), 0);
    bool conserved = true, within_storage = true, travel_time_monotone = true;
    SignalDecision d;
    d.phase.assign(net.nodes.size(), 0);
    const int steps = 2400;
    for (int k = 0; k < steps; ++k) {
        if (k % 10 == 0)
            for (std::size_t n = 0; n < net.nodes.size(); ++n)
                d.phase[n] = static_cast<int>(pick.uniform() * net.nodes[n].phases.size());
        sim.step(d);
        const auto& w = sim.state();
        const auto& c = w.counters;
        conserved = conserved && c.generated == w.vehicles_on_network() + w.backlog() + c.exited;
        for (std::size_t l = 0; l < net.links.size(); ++l) {
            within_storage = within_storage && static_cast<int>(w.links[l].vehicles.size()) <= net.links[l].storage();
            for (const auto& v : w.links[l].vehicles) {
                const double ltt = v.link_travel_time(w.t);
                auto it = last_seen.find(v.id);
                if (it != last_seen.end() && it->second.first == static_cast<LinkIndex>(l))
                    travel_time_monotone = travel_time_monotone && ltt >= it->second.second;
                last_seen[v.id] = {static_cast<LinkIndex>(l), ltt};
            }
        }
        for (std::size_t m = 0; m < net.movements.size(); ++m) departures[m] += sim.last_departures()[m];
        for (std::size_t n = 0; n < net.nodes.size(); ++n)
            for (auto m : net.nodes[n].phases[w.active_phase[n]].movements) ++green_steps[m];
    }
    CHECK(conserved);
    CHECK(within_storage);
    CHECK(travel_time_monotone);
    for (std::size_t m = 0; m < net.movements.size(); ++m)
        CHECK(departures[m] <= net.movements[m].saturation_flow * green_steps[m] * sc.simulation.dt + 1.0 + 1e-9);
}

TEST_CASE("full penetration makes every car connected") {
    auto sc = testsupport::load("minimal.json");
    sc.simulation.penetration = 1.0;
    Simulation sim(sc, 5);
    for (int k = 0; k < 600; ++k) sim.step(phase(k / 30 % 2));
    CHECK(sim.state().counters.generated_nv == 0);
    CHECK(sim.state().counters.generated_cv == sim.state().counters.generated);
    for (const auto& l : sim.state().links)
        for (const auto& v : l.vehicles) CHECK(v.is_cv);
}

TEST_CASE("same seed and decisions give identical trajectories; segmentation does not touch dynamics") {
    auto a = testsupport::load("corridor.json");
    auto b = a;
    b.controller.segmentation = SegmentationStrategy::parse("S3");
    Simulation sa(a, 9), sb(b, 9);
    std::ostringstream oa, ob;
    SignalDecision d;
    d.phase.assign(a.network.nodes.size(), 0);
    for (int k = 0; k < 1200; ++k) {
        for (auto& p : d.phase) p = (k / 40) % 4;
        sa.step(d);
        sb.step(d);
        if (k % 60 == 0) {
            sa.write_snapshot_row(oa);
            sb.write_snapshot_row(ob);
        }
    }
    CHECK(oa.str() == ob.str());
}

TEST_CASE("buses dwell at stops and carry passengers") {
    const auto sc = testsupport::load("corridor.json");
    Simulation sim(sc, 2);
    SignalDecision d;
    d.phase.assign(sc.network.nodes.size(), 0);
    bool saw_dwell = false;
    for (int k = 0; k < 1800; ++k) {
        sim.step(d);
        for (const auto& l : sim.state().links)
            for (const auto& v : l.vehicles)
                if (v.motion == Motion::Dwelling) {
                    saw_dwell = true;
                    CHECK(v.is_transit());
                    CHECK(v.occupancy >= 1);
                    CHECK(v.occupancy <= 80);
                }
    }
    CHECK(saw_dwell);
    CHECK(sim.state().counters.generated_transit > 0);
    CHECK(sim.state().counters.passengers_carried > 0);
}
