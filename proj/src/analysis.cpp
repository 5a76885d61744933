#include "transitmp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "transitmp/lp.hpp"

namespace transitmp {

MetricsFrame metrics_frame(const WorldState& world) {
    MetricsFrame f;
    f.t = world.t;
    f.vehicle_count = world.vehicles_on_network();
    f.spillover_count = world.backlog();
    f.unserved_count = f.vehicle_count + f.spillover_count;
    const auto& c = world.counters;
    f.delay_cv = c.delay_cv;
    f.delay_nv = c.delay_nv;
    f.delay_transit = c.delay_transit;
    f.passenger_delay = c.passenger_delay;
    f.generated_cv = c.generated_cv;
    f.generated_nv = c.generated_nv;
    f.generated_transit = c.generated_transit;
    f.passengers_carried = c.passengers_carried;
    return f;
}

namespace {
constexpr const char* kMetricsHeader =
    "t,vehicle_count,spillover_count,unserved_count,delay_cv,delay_nv,delay_transit,passenger_delay,lyapunov,"
    "generated_cv,generated_nv,generated_transit,passengers_carried";
}

void write_metrics_header(std::ostream& os) { os << kMetricsHeader << '\n'; }

void write_metrics_row(std::ostream& os, const MetricsFrame& f) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%.0f,%ld,%ld,%ld,%.3f,%.3f,%.3f,%.3f,%.6g,%ld,%ld,%ld,%ld\n", f.t, f.vehicle_count,
                  f.spillover_count, f.unserved_count, f.delay_cv, f.delay_nv, f.delay_transit, f.passenger_delay,
                  f.lyapunov, f.generated_cv, f.generated_nv, f.generated_transit, f.passengers_carried);
    os << buf;
}

std::vector<MetricsFrame> read_metrics_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != kMetricsHeader) throw std::runtime_error("metrics CSV: unexpected header");
    std::vector<MetricsFrame> out;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        MetricsFrame f;
        const int n = std::sscanf(line.c_str(), "%lf,%ld,%ld,%ld,%lf,%lf,%lf,%lf,%lf,%ld,%ld,%ld,%ld", &f.t,
                                  &f.vehicle_count, &f.spillover_count, &f.unserved_count, &f.delay_cv, &f.delay_nv,
                                  &f.delay_transit, &f.passenger_delay, &f.lyapunov, &f.generated_cv, &f.generated_nv,
                                  &f.generated_transit, &f.passengers_carried);
        if (n != 13) throw std::runtime_error("metrics CSV: malformed line " + std::to_string(lineno));
        out.push_back(f);
    }
    return out;
}

double movement_lyapunov_term(std::span<const double> beta_tau) {
    double w = 0.0;
    for (double x : beta_tau) w += x;
    return static_cast<double>(beta_tau.size()) * w;
}

LyapunovSample lyapunov_value(const Scenario& sc, const WorldState& world, const BetaParams& beta_of) {
    const auto& net = sc.network;
    LyapunovSample s;
    s.t = world.t;
    for (const auto& src : world.sources) {
        const double b = static_cast<double>(src.backlog.size());
        s.source_term += 0.5 * b * b;
    }
    s.per_movement.assign(net.movements.size(), 0.0);
    std::vector<std::vector<double>> weights(net.movements.size());
    for (std::size_t l = 0; l < net.links.size(); ++l) {
        const auto& link = net.links[l];
        const LinkGeometry geo{link.length, link.free_flow_speed, link.last_station(), Window{0.0, link.length}};
        const double ett = link.free_flow_time();
        std::vector<double> exiting;
        for (const auto& v : world.links[l].vehicles) {
            ObservedVehicle o;
            o.position = v.position;
            o.link_travel_time = v.link_travel_time(world.t);
            o.occupancy = v.occupancy;
            o.cls = v.cls;
            o.remaining_dwell = v.motion == Motion::Dwelling ? v.remaining_dwell : 0.0;
            const double bt = beta_of(o, geo) * tau(o.link_travel_time, ett);
            if (v.movement == kNone)
                exiting.push_back(bt);
            else
                weights[v.movement].push_back(bt);
        }
        s.exit_term += movement_lyapunov_term(exiting);
    }
    s.value = s.source_term + s.exit_term;
    for (std::size_t m = 0; m < weights.size(); ++m) {
        s.per_movement[m] = movement_lyapunov_term(weights[m]);
        s.value += s.per_movement[m];
    }
    return s;
}

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Stable: return "stable";
        case Verdict::Unstable: return "unstable";
        case Verdict::Inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

double ols_slope(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = std::min(x.size(), y.size());
    if (n < 2) return 0.0;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxx > 0.0 ? sxy / sxx : 0.0;
}

namespace {

template <typename Get>
double slope_from(std::span<const MetricsFrame> frames, double from, Get get) {
    std::vector<double> x, y;
    for (const auto& f : frames) {
        if (f.t < from) continue;
        x.push_back(f.t);
        y.push_back(get(f));
    }
    return ols_slope(x, y);
}

}  // namespace

double unserved_slope(std::span<const MetricsFrame> frames, double from) {
    return slope_from(frames, from, [](const MetricsFrame& f) { return static_cast<double>(f.unserved_count); });
}

double lyapunov_slope(std::span<const MetricsFrame> frames, double from) {
    return slope_from(frames, from, [](const MetricsFrame& f) { return f.lyapunov; });
}

Verdict stability_verdict(std::span<const MetricsFrame> frames, double from, const StabilityThresholds& th) {
    std::size_t count = 0;
    double first = 0.0, last = 0.0;
    for (const auto& f : frames) {
        if (f.t < from) continue;
        if (count == 0) first = f.t;
        last = f.t;
        ++count;
    }
    if (count < th.min_points || last - first < th.min_span) return Verdict::Inconclusive;
    const double slope = unserved_slope(frames, from);
    if (slope <= th.stable_slope) return Verdict::Stable;
    if (slope >= th.unstable_slope) return Verdict::Unstable;
    return Verdict::Inconclusive;
}

std::vector<double> source_rates_at(const Scenario& sc, double t) {
    std::vector<double> rates(sc.network.sources.size(), 0.0);
    for (const auto& p : sc.demand) rates[p.source] += p.rate_at(t);
    return rates;
}

std::vector<double> movement_demand(const Scenario& sc, std::span<const double> source_rates) {
    const auto& net = sc.network;
    std::vector<double> external(net.links.size(), 0.0);
    for (std::size_t s = 0; s < net.sources.size() && s < source_rates.size(); ++s)
        external[net.sources[s].link] += source_rates[s];

    // Link inflow solves inflow = external + R^T inflow; iterate to the fixed point.
    std::vector<double> inflow = external;
    for (int it = 0; it < 100000; ++it) {
        std::vector<double> next = external;
        for (const auto& mv : net.movements) next[mv.to] += mv.turning_ratio * inflow[mv.from];
        double diff = 0.0;
        for (std::size_t l = 0; l < next.size(); ++l) diff = std::max(diff, std::abs(next[l] - inflow[l]));
        inflow = std::move(next);
        if (diff < 1e-13) break;
    }
    std::vector<double> flows(net.movements.size(), 0.0);
    for (std::size_t m = 0; m < net.movements.size(); ++m)
        flows[m] = net.movements[m].turning_ratio * inflow[net.movements[m].from];

    for (const auto& line : sc.transit_lines) {
        const double rate = 1.0 / line.headway;
        for (std::size_t i = 0; i + 1 < line.route.size(); ++i) {
            const auto m = net.find_movement(line.route[i], line.route[i + 1]);
            if (m != kNone) flows[m] += rate;
        }
    }
    return flows;
}

double region_scale(std::optional<double> pi_min, std::optional<double> pi_max) {
    if (!pi_min || !pi_max) return 1.0;
    if (!(*pi_max > 0.0) || *pi_min < 0.0 || *pi_min > *pi_max)
        throw ConfigError("reduced region needs 0 <= pi_min <= pi_max and pi_max > 0");
    return *pi_min / *pi_max;
}

RegionCertificate admissible_region_check(const Network& net, std::span<const double> demand,
                                          std::span<const double> source_demand, double kappa) {
    if (demand.size() != net.movements.size())
        throw ConfigError("region check: demand vector must cover every movement");
    RegionCertificate cert;
    cert.kappa = kappa;
    cert.movement_demand.assign(demand.begin(), demand.end());

    // Variables: one time share per (node, phase), then eps (free).
    std::vector<std::vector<std::size_t>> var(net.nodes.size());
    std::size_t nvars = 0;
    for (std::size_t n = 0; n < net.nodes.size(); ++n)
        for (std::size_t p = 0; p < net.nodes[n].phases.size(); ++p) var[n].push_back(nvars++);
    const std::size_t eps = nvars++;

    LpProblem lp;
    lp.objective.assign(nvars, 0.0);
    lp.objective[eps] = 1.0;
    lp.free_vars = {eps};
    for (std::size_t n = 0; n < net.nodes.size(); ++n) {
        std::vector<double> row(nvars, 0.0);
        for (auto v : var[n]) row[v] = 1.0;
        lp.add_row(std::move(row), RowSense::Equal, 1.0);
    }
    for (std::size_t m = 0; m < net.movements.size(); ++m) {
        const auto& mv = net.movements[m];
        std::vector<double> row(nvars, 0.0);
        row[eps] = 1.0;
        const auto& node = net.nodes[mv.node];
        for (std::size_t p = 0; p < node.phases.size(); ++p) {
            const auto& members = node.phases[p].movements;
            if (std::find(members.begin(), members.end(), static_cast<MovementIndex>(m)) != members.end())
                row[var[mv.node][p]] = -kappa * mv.saturation_flow;
        }
        lp.add_row(std::move(row), RowSense::LessEqual, -demand[m]);
    }
    // Source loading is unsignalized but still capacity-limited.
    cert.source_margin.assign(net.sources.size(), 0.0);
    double source_cap = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < net.sources.size(); ++s) {
        const double a = s < source_demand.size() ? source_demand[s] : 0.0;
        cert.source_margin[s] = net.sources[s].saturation_flow - a;
        source_cap = std::min(source_cap, cert.source_margin[s]);
    }
    if (std::isfinite(source_cap)) {
        std::vector<double> row(nvars, 0.0);
        row[eps] = 1.0;
        lp.add_row(std::move(row), RowSense::LessEqual, source_cap);
    }
    // Keep eps bounded when the network has no rows that limit it.
    {
        std::vector<double> row(nvars, 0.0);
        row[eps] = 1.0;
        double bound = 1.0;
        for (const auto& mv : net.movements) bound += std::abs(kappa) * mv.saturation_flow;
        lp.add_row(std::move(row), RowSense::LessEqual, bound);
    }

    const auto res = solve_lp(lp);
    if (res.status != LpStatus::Optimal) {
        cert.feasible = false;
        cert.diagnostic = "LP solver failed: " + res.diagnostic;
        cert.epsilon = -std::numeric_limits<double>::infinity();
        return cert;
    }
    cert.epsilon = res.x[eps];
    cert.feasible = cert.epsilon > 1e-12;
    cert.weights.resize(net.nodes.size());
    for (std::size_t n = 0; n < net.nodes.size(); ++n)
        for (auto v : var[n]) cert.weights[n].push_back(std::max(0.0, res.x[v]));
    cert.movement_margin.assign(net.movements.size(), 0.0);
    for (std::size_t m = 0; m < net.movements.size(); ++m) {
        const auto& mv = net.movements[m];
        double share = 0.0;
        const auto& node = net.nodes[mv.node];
        for (std::size_t p = 0; p < node.phases.size(); ++p) {
            const auto& members = node.phases[p].movements;
            if (std::find(members.begin(), members.end(), static_cast<MovementIndex>(m)) != members.end())
                share += cert.weights[mv.node][p];
        }
        cert.movement_margin[m] = kappa * mv.saturation_flow * share - demand[m];
    }
    return cert;
}

std::string region_report(const Network& net, const RegionCertificate& cert) {
    using nlohmann::json;
    json doc;
    doc["feasible"] = cert.feasible;
    doc["epsilon_veh_per_s"] = std::isfinite(cert.epsilon) ? json(cert.epsilon) : json(nullptr);
    doc["kappa"] = cert.kappa;
    if (!cert.diagnostic.empty()) doc["diagnostic"] = cert.diagnostic;
    json nodes = json::array();
    for (std::size_t n = 0; n < cert.weights.size(); ++n) {
        json phases = json::array();
        for (std::size_t p = 0; p < cert.weights[n].size(); ++p) phases.push_back(cert.weights[n][p]);
        nodes.push_back({{"node", net.nodes[n].id}, {"phase_shares", phases}});
    }
    doc["nodes"] = nodes;
    json moves = json::array();
    for (std::size_t m = 0; m < cert.movement_margin.size(); ++m)
        moves.push_back({{"movement", net.movements[m].id},
                         {"demand_veh_per_s", cert.movement_demand[m]},
                         {"margin_veh_per_s", cert.movement_margin[m]}});
    doc["movements"] = moves;
    json sources = json::array();
    for (std::size_t s = 0; s < cert.source_margin.size(); ++s)
        sources.push_back({{"source", net.sources[s].id}, {"margin_veh_per_s", cert.source_margin[s]}});
    doc["sources"] = sources;
    return doc.dump(2);
}

void SignalHistory::record(double time, std::vector<char> g, std::vector<double> q) {
    t.push_back(time);
    green.push_back(std::move(g));
    queue.push_back(std::move(q));
}

std::vector<Starvation> detect_starvation(const SignalHistory& h, double window) {
    std::vector<Starvation> out;
    if (h.t.empty()) return out;
    const std::size_t steps = h.t.size();
    const std::size_t moves = h.green.front().size();
    const double last = h.t.back();
    for (std::size_t m = 0; m < moves; ++m) {
        // next_green[k]: first recorded step >= k with green, or steps if none.
        std::vector<std::size_t> next_green(steps + 1, steps);
        for (std::size_t k = steps; k-- > 0;) next_green[k] = h.green[k][m] ? k : next_green[k + 1];
        for (std::size_t k = 0; k < steps; ++k) {
            const double t0 = h.t[k];
            if (t0 + window > last + 1e-9) break;
            if (!(h.queue[k][m] > 0.0)) continue;
            const std::size_t g = next_green[k];
            if (g == steps || h.t[g] > t0 + window + 1e-9) {
                out.push_back({static_cast<MovementIndex>(m), t0});
                break;
            }
        }
    }
    return out;
}

double longest_queued_red(const SignalHistory& h, MovementIndex m) {
    double best = 0.0;
    bool open = false;
    double start = 0.0;
    for (std::size_t k = 0; k < h.t.size(); ++k) {
        if (h.green[k][m]) {
            if (open) best = std::max(best, h.t[k] - start);
            open = false;
        } else if (!open && h.queue[k][m] > 0.0) {
            open = true;
            start = h.t[k];
        }
    }
    if (open) best = std::max(best, h.t.back() - start);
    return best;
}

}  // namespace transitmp
