#include <doctest.h>

#include <cmath>
#include <sstream>

#include "support.hpp"
#include "transitmp/analysis.hpp"
#include "transitmp/lp.hpp"
#include "transitmp/rng.hpp"
#include "transitmp/scenario_io.hpp"
#include "transitmp/simulation.hpp"

using namespace transitmp;

namespace {

// One node, one phase serving one movement with c = 0.5 veh/s.
Network one_phase_node() {
    Network net;
    Link in;
    in.id = "in";
    in.length = 100.0;
    in.jam_density = 0.1;
    in.free_flow_speed = 10.0;
    Link out = in;
    out.id = "out";
    net.links = {in, out};
    Movement m;
    m.id = "m";
    m.node = 0;
    m.from = 0;
    m.to = 1;
    m.saturation_flow = 0.5;
    m.turning_ratio = 1.0;
    net.movements = {m};
    Node node;
    node.id = "n";
    node.movements = {0};
    node.phases = {Phase{{0}}};
    net.nodes = {node};
    net.index();
    return net;
}

double epsilon_at(const Network& net, double a, double kappa = 1.0) {
    const std::vector<double> demand{a};
    return admissible_region_check(net, demand, {}, kappa).epsilon;
}

Vehicle placed(std::uint64_t id, MovementIndex m, double position, double entered, Motion motion = Motion::Moving) {
    Vehicle v;
    v.id = id;
    v.movement = m;
    v.position = position;
    v.link_entry_time = entered;
    v.motion = motion;
    return v;
}

std::vector<MetricsFrame> series(double slope, double noise_seed = 0.0) {
    std::vector<MetricsFrame> frames;
    Rng rng(static_cast<std::uint64_t>(noise_seed) + 1);
    for (int k = 0; k <= 360; ++k) {
        MetricsFrame f;
        f.t = 10.0 * k;
        f.vehicle_count = 50 + static_cast<long>(slope * f.t) + static_cast<long>(noise_seed > 0 ? rng.uniform() * 4 : 0);
        f.unserved_count = f.vehicle_count;
        f.lyapunov = static_cast<double>(f.vehicle_count);
        frames.push_back(f);
    }
    return frames;
}

}  // namespace

TEST_CASE("dense simplex solves small textbook programs") {
    LpProblem lp;
    lp.objective = {1.0, 1.0};
    lp.add_row({1.0, 2.0}, RowSense::LessEqual, 4.0);
    lp.add_row({3.0, 1.0}, RowSense::LessEqual, 6.0);
    auto r = solve_lp(lp);
    REQUIRE(r.status == LpStatus::Optimal);
    CHECK(r.value == doctest::Approx(2.8));
    CHECK(r.x[0] == doctest::Approx(1.6));
    CHECK(r.x[1] == doctest::Approx(1.2));

    LpProblem infeasible;
    infeasible.objective = {1.0};
    infeasible.add_row({1.0}, RowSense::GreaterEqual, 2.0);
    infeasible.add_row({1.0}, RowSense::LessEqual, 1.0);
    CHECK(solve_lp(infeasible).status == LpStatus::Infeasible);

    LpProblem unbounded;
    unbounded.objective = {1.0, 0.0};
    unbounded.add_row({1.0, -1.0}, RowSense::LessEqual, 1.0);
    CHECK(solve_lp(unbounded).status == LpStatus::Unbounded);

    LpProblem free_var;  // maximize -x with x free and x >= -3 -> x = -3
    free_var.objective = {-1.0};
    free_var.free_vars = {0};
    free_var.add_row({1.0}, RowSense::GreaterEqual, -3.0);
    r = solve_lp(free_var);
    REQUIRE(r.status == LpStatus::Optimal);
    CHECK(r.x[0] == doctest::Approx(-3.0));
}

TEST_CASE("admissible region of a single one-phase node") {
    const auto net = one_phase_node();
    CHECK(epsilon_at(net, 0.2) == doctest::Approx(0.3));
    const std::vector<double> over{0.6};
    const auto cert = admissible_region_check(net, over, {});
    CHECK_FALSE(cert.feasible);
    CHECK(cert.epsilon <= -0.1 + 1e-9);
    CHECK(epsilon_at(net, 0.0) == doctest::Approx(0.5));
}

TEST_CASE("the reduced region shrinks by pi_min / pi_max") {
    const auto net = one_phase_node();
    const double kappa = region_scale(0.1, 0.5);
    CHECK(kappa == doctest::Approx(0.2));
    CHECK(region_scale(std::nullopt, 0.5) == 1.0);
    CHECK(epsilon_at(net, 0.0, kappa) == doctest::Approx(epsilon_at(net, 0.0) / 5.0));
    CHECK(epsilon_at(net, 0.09, kappa) > 0.0);
    CHECK(epsilon_at(net, 0.11, kappa) < 0.0);
}

TEST_CASE("two-phase fixture boundary sits at a quarter vehicle per second") {
    const auto sc = testsupport::load("single_node_two_phase.json");
    const auto rates = source_rates_at(sc, 100.0);
    const auto demand = movement_demand(sc, rates);
    REQUIRE(demand.size() == 2);
    CHECK(demand[0] == doctest::Approx(0.225));
    const auto cert = admissible_region_check(sc.network, demand, rates);
    CHECK(cert.feasible);
    CHECK(cert.epsilon == doctest::Approx(0.025));
    const std::vector<double> boundary{0.25, 0.25};
    CHECK(admissible_region_check(sc.network, boundary, {}).epsilon == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("metric frames track delay by class and passenger delay on transit only") {
    const auto sc = parse_scenario(testsupport::kBottleneck);
    Simulation sim(sc, 1);
    CHECK(metrics_frame(sim.state()).vehicle_count == 0);
    CHECK(metrics_frame(sim.state()).passenger_delay == 0.0);

    auto& vs = sim.mutable_state().links[0].vehicles;
    vs.push_back(placed(1, 0, 100.0, 0.0, Motion::Queued));
    for (int k = 0; k < 30; ++k) sim.step(SignalDecision{{1}});
    auto f = metrics_frame(sim.state());
    CHECK(f.delay_nv == doctest::Approx(30.0));
    CHECK(f.passenger_delay == 0.0);

    auto b = placed(2, 0, 90.0, 0.0, Motion::Queued);
    b.cls = VehicleClass::Transit;
    b.is_cv = true;
    b.occupancy = 20;
    sim.mutable_state().links[0].vehicles.push_back(b);
    for (int k = 0; k < 10; ++k) sim.step(SignalDecision{{1}});
    f = metrics_frame(sim.state());
    CHECK(f.delay_transit == doctest::Approx(10.0));
    CHECK(f.passenger_delay == doctest::Approx(200.0));
    CHECK(f.unserved_count == f.vehicle_count + f.spillover_count);
}

TEST_CASE("Lyapunov value: source backlog and travel-time pair sums") {
    const auto sc = parse_scenario(testsupport::kBottleneck);
    Simulation sim(sc, 1);
    const BetaParams beta_of{};
    CHECK(lyapunov_value(sc, sim.state(), beta_of).value == 0.0);

    for (int k = 0; k < 4; ++k) sim.mutable_state().sources[0].backlog.push_back(Vehicle{});
    CHECK(lyapunov_value(sc, sim.state(), beta_of).value == doctest::Approx(8.0));

    Simulation two(sc, 1);
    auto& w = two.mutable_state();
    w.t = 100.0;  // link ETT is 10 s, so entry times 95 and 85 give tau 0.5 and 1.5
    w.links[0].vehicles.push_back(placed(1, 0, 50.0, 95.0));
    w.links[0].vehicles.push_back(placed(2, 0, 20.0, 85.0));
    const auto s = lyapunov_value(sc, two.state(), beta_of);
    CHECK(s.per_movement[0] == doctest::Approx(4.0));
    CHECK(s.value == doctest::Approx(4.0));
    const std::vector<double> bt{0.5, 1.5};
    CHECK(movement_lyapunov_term(bt) == doctest::Approx(4.0));
}

TEST_CASE("Lyapunov pair-sum form matches the explicit double sum on random states") {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> bt;
        for (int k = 0, n = static_cast<int>(rng.uniform() * 40); k < n; ++k)
            bt.push_back(rng.bernoulli(0.8) ? rng.uniform(0.0, 5.0) : 0.0);
        double pairs = 0.0;
        for (double a : bt)
            for (double b : bt) pairs += 0.5 * (a + b);
        const double formula = movement_lyapunov_term(bt);
        CHECK(std::abs(formula - pairs) <= 1e-12 * std::max(1.0, std::abs(pairs)));
    }
}

TEST_CASE("stability verdicts from the unserved-count slope") {
    CHECK(stability_verdict(series(0.0), 0.0) == Verdict::Stable);
    CHECK(stability_verdict(series(0.0, 5.0), 0.0) == Verdict::Stable);
    CHECK(stability_verdict(series(0.1), 0.0) == Verdict::Unstable);
    CHECK(stability_verdict(series(0.02), 0.0) == Verdict::Inconclusive);
    // Too little data after the cut-off is inconclusive.
    CHECK(stability_verdict(series(0.1), 3000.0) == Verdict::Inconclusive);
    CHECK(unserved_slope(series(0.1), 0.0) == doctest::Approx(0.1).epsilon(0.01));
    const std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
    CHECK(ols_slope(x, y) == doctest::Approx(2.0));
}

TEST_CASE("metrics CSV round trip") {
    std::vector<MetricsFrame> frames;
    for (int k = 0; k < 5; ++k) {
        MetricsFrame f;
        f.t = 10.0 * k;
        f.vehicle_count = 3 * k;
        f.spillover_count = k;
        f.unserved_count = 4 * k;
        f.delay_cv = 1.25 * k;
        f.delay_nv = 2.5 * k;
        f.delay_transit = 0.125 * k;
        f.passenger_delay = 10.0 * k;
        f.lyapunov = 7.75 * k;
        f.generated_cv = k;
        f.generated_nv = 2 * k;
        f.generated_transit = k / 2;
        f.passengers_carried = 30 * k;
        frames.push_back(f);
    }
    std::stringstream ss;
    write_metrics_header(ss);
    for (const auto& f : frames) write_metrics_row(ss, f);
    const auto back = read_metrics_csv(ss);
    REQUIRE(back.size() == frames.size());
    for (std::size_t k = 0; k < frames.size(); ++k) {
        CHECK(back[k].t == frames[k].t);
        CHECK(back[k].unserved_count == frames[k].unserved_count);
        CHECK(back[k].delay_nv == frames[k].delay_nv);
        CHECK(back[k].lyapunov == frames[k].lyapunov);
        CHECK(back[k].passengers_carried == frames[k].passengers_carried);
    }
    std::stringstream bad("t,vehicle_count\n1,x\n");
    CHECK_THROWS((void)read_metrics_csv(bad));
}

TEST_CASE("starvation detector") {
    SignalHistory h;
    for (int k = 0; k <= 120; ++k) {
        const double t = 10.0 * k;
        // Movement 0 gets green every 300 s; movement 1 never does.
        h.record(t, {static_cast<char>(k % 30 == 0), 0}, {5.0, 5.0});
    }
    const auto starved = detect_starvation(h, 600.0);
    REQUIRE(starved.size() == 1);
    CHECK(starved[0].movement == 1);
    CHECK(starved[0].t0 == 0.0);
    CHECK(longest_queued_red(h, 0) <= 300.0);
    CHECK(longest_queued_red(h, 1) >= 1200.0 - 1e-9);

    SignalHistory empty_queue;
    for (int k = 0; k <= 120; ++k) empty_queue.record(10.0 * k, {0}, {0.0});
    CHECK(detect_starvation(empty_queue, 600.0).empty());
}
