#include "transitmp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "transitmp/controllers.hpp"
#include "transitmp/scenario_io.hpp"

namespace transitmp {

namespace {

template <typename F>
void parallel_for(std::size_t n, int workers, F&& f) {
    const std::size_t w = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, std::max<std::size_t>(n, 1));
    if (w <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < w; ++k)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) f(i);
        });
    for (auto& t : pool) t.join();
}

bool uses_transit_clamp(const ControllerConfig& cc) {
    return cc.variant == ControllerVariant::TransitMp ||
           (cc.variant == ControllerVariant::MTransitMp && cc.clamp_on_fallback);
}

// Queue anchor measured at the current clock, before error injection.
std::optional<double> measure_anchor(const Simulation& sim, MovementIndex m, double penetration) {
    const auto& sc = sim.scenario();
    const auto& mv = sc.network.movements[m];
    switch (sc.controller.anchor) {
        case QueueAnchor::None: return std::nullopt;
        case QueueAnchor::GroundTruth: return static_cast<double>(sim.movement_queue(m));
        case QueueAnchor::StoppedCvExpansion: {
            int stopped = 0;
            for (const auto& v : sim.state().links[mv.from].vehicles)
                if (v.movement == m && v.is_cv && v.motion == Motion::Queued) ++stopped;
            if (stopped == 0) return std::nullopt;
            const double storage = static_cast<double>(sc.network.links[mv.from].storage());
            return std::min(stopped / penetration, storage);
        }
    }
    return std::nullopt;
}

SeedResult drive(Simulation& sim, std::uint64_t seed, const SeedOptions& opt) {
    const auto& sc = sim.scenario();
    const auto& net = sc.network;
    const auto& cc = sc.controller;
    const std::size_t nm = net.movements.size();
    const int per_decision = static_cast<int>(std::lround(cc.decision_step / sc.simulation.dt));
    const BetaParams beta_of{cc.beta_mode, cc.decision_step, cc.theta};
    const ObservationOptions obs_opt{cc.segmentation, opt.observe_all};
    const bool mtransit = cc.variant == ControllerVariant::MTransitMp;
    if (mtransit && !opt.historical) throw ConfigError("mTransit-MP needs historical statistics");
    const bool check = opt.check_invariants && uses_transit_clamp(cc);

    SeedResult out;
    out.summary.seed = seed;

    Rng err_rng = Rng::stream(seed, stream::kError);
    std::vector<double> arrival_multiplier(nm, 1.0);
    const bool perturb_arrival = opt.error && opt.error->arrival_rate;
    const bool perturb_queue = opt.error && opt.error->queue;
    if (perturb_arrival)
        for (auto& x : arrival_multiplier) x = inject_error(1.0, *opt.error, err_rng);

    std::vector<IqaState> iqa(nm);
    std::vector<std::optional<double>> pending_anchor(nm);
    std::vector<char> green(nm, 0);
    if (opt.historical)
        for (std::size_t m = 0; m < nm; ++m)
            if (opt.historical->at(static_cast<MovementIndex>(m), 0.0).floored)
                out.floored_movements.push_back(static_cast<MovementIndex>(m));

    SignalDecision decision;
    decision.phase = sim.state().active_phase;
    std::vector<PressureTable> tables(net.nodes.size());
    std::vector<NodeObservation> observations(net.nodes.size());

    while (true) {
        const auto& w = sim.state();
        auto frame = metrics_frame(w);
        frame.lyapunov = lyapunov_value(sc, w, beta_of).value;
        out.frames.push_back(frame);
        if (w.t >= sc.simulation.horizon - 1e-9) break;

        if (mtransit) {
            const auto& hist = *opt.historical;
            for (std::size_t m = 0; m < nm; ++m) {
                const auto mi = static_cast<MovementIndex>(m);
                const auto& h = hist.at(mi, w.t);
                if (w.step_index > 0) {
                    iqa[m].expected_queue = iqa_step(iqa[m].expected_queue, green[m] ? 1.0 : 0.0,
                                                     h.arrival_rate * arrival_multiplier[m], h.departure_rate,
                                                     cc.decision_step, pending_anchor[m]);
                    if (pending_anchor[m]) iqa[m].last_anchor = w.t - cc.decision_step;
                }
                pending_anchor[m] = measure_anchor(sim, mi, h.penetration);
                if (pending_anchor[m] && perturb_queue) pending_anchor[m] = inject_error(*pending_anchor[m], *opt.error, err_rng);
            }
        }

        for (std::size_t n = 0; n < net.nodes.size(); ++n) {
            observations[n] = observe_node(sc, w, static_cast<NodeIndex>(n), obs_opt);
            const auto& obs = observations[n];
            std::vector<std::optional<double>> mean_occ(obs.movements.size());
            if (opt.historical)
                for (std::size_t k = 0; k < obs.movements.size(); ++k)
                    mean_occ[k] = opt.historical->at(obs.movements[k].movement, w.t).occupancy;
            switch (cc.variant) {
                case ControllerVariant::CvMp: tables[n] = cvmp_pressure(obs); break;
                case ControllerVariant::TransitMp: tables[n] = transit_pressure(obs, beta_of); break;
                case ControllerVariant::OccMp: tables[n] = occ_pressure(obs, mean_occ); break;
                case ControllerVariant::EoccMp: tables[n] = eocc_pressure(obs, beta_of, mean_occ); break;
                case ControllerVariant::MTransitMp: {
                    std::vector<FallbackState> fb(obs.movements.size());
                    for (std::size_t k = 0; k < obs.movements.size(); ++k) {
                        const auto m = obs.movements[k].movement;
                        const auto& h = opt.historical->at(m, w.t);
                        fb[k].occupancy = h.occupancy;
                        fb[k].tau_hat = tau_hat(iqa[m].expected_queue, h.penetration,
                                                h.arrival_rate * arrival_multiplier[m], obs.movements[k].expected_travel_time);
                    }
                    tables[n] = mtransit_pressure(obs, beta_of, fb, cc.clamp_on_fallback);
                    break;
                }
            }
        }
        decision = select_phases(tables, w.active_phase);
        ++out.decision_steps;
        if (opt.record_decisions) out.decisions.push_back(decision.phase);

        std::fill(green.begin(), green.end(), 0);
        for (std::size_t n = 0; n < net.nodes.size(); ++n) {
            const int p = decision.phase[n];
            for (auto m : net.nodes[n].phases[p].movements) green[m] = 1;
            if (!check) continue;
            for (int k : observations[n].phases[p]) {
                const auto& mp = tables[n].movements[k];
                const double unweighted = mp.saturation * mp.unweighted_diff;
                const double worst = std::min(unweighted, mp.pressure);
                if (worst < -1e-9)
                    out.pressure_violations.push_back(
                        {static_cast<NodeIndex>(n), observations[n].movements[k].movement, w.t, worst});
            }
        }
        std::vector<double> queue(nm);
        for (std::size_t m = 0; m < nm; ++m) queue[m] = sim.movement_queue(static_cast<MovementIndex>(m));
        out.history.record(w.t, green, std::move(queue));
        for (const auto& v : sim.necessary_condition_monitor()) out.monitor.push_back(v);

        for (int k = 0; k < per_decision && sim.state().t < sc.simulation.horizon - 1e-9; ++k) sim.step(decision);
    }
    out.summary = summarize(out.frames, sc.simulation.warmup, opt.thresholds);
    out.summary.seed = seed;
    out.starved = detect_starvation(out.history, opt.starvation_window);
    return out;
}

SimulationOptions sim_options(const SeedOptions& opt) {
    SimulationOptions so;
    so.link_penetration = opt.link_penetration;
    so.tally_window = opt.tally_window;
    so.car_occupancy = opt.car_occupancy;
    return so;
}

double mean_of(const std::vector<RunSummary>& runs, double RunSummary::*field) {
    if (runs.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : runs) s += r.*field;
    return s / static_cast<double>(runs.size());
}

double mean_of(const std::vector<RunSummary>& runs, long RunSummary::*field) {
    if (runs.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : runs) s += static_cast<double>(r.*field);
    return s / static_cast<double>(runs.size());
}

// Means are stored rounded only for the integer maxima; the CSV keeps one decimal for them.
struct MeanSummary {
    RunSummary s;
    double max_vehicle_count = 0.0, max_spillover = 0.0, max_unserved = 0.0;
};

Verdict majority_verdict(const std::vector<RunSummary>& runs) {
    int stable = 0, unstable = 0;
    for (const auto& r : runs) {
        stable += r.verdict == Verdict::Stable;
        unstable += r.verdict == Verdict::Unstable;
    }
    const int half = static_cast<int>(runs.size()) / 2;
    if (stable > half) return Verdict::Stable;
    if (unstable > half) return Verdict::Unstable;
    return Verdict::Inconclusive;
}

MeanSummary mean_summary(const std::vector<RunSummary>& runs) {
    MeanSummary m;
    m.max_vehicle_count = mean_of(runs, &RunSummary::max_vehicle_count);
    m.max_spillover = mean_of(runs, &RunSummary::max_spillover);
    m.max_unserved = mean_of(runs, &RunSummary::max_unserved);
    m.s.max_vehicle_count = std::lround(m.max_vehicle_count);
    m.s.max_spillover = std::lround(m.max_spillover);
    m.s.max_unserved = std::lround(m.max_unserved);
    m.s.mean_vehicle_delay = mean_of(runs, &RunSummary::mean_vehicle_delay);
    m.s.mean_cv_delay = mean_of(runs, &RunSummary::mean_cv_delay);
    m.s.mean_nv_delay = mean_of(runs, &RunSummary::mean_nv_delay);
    m.s.mean_transit_delay = mean_of(runs, &RunSummary::mean_transit_delay);
    m.s.mean_passenger_delay = mean_of(runs, &RunSummary::mean_passenger_delay);
    m.s.unserved_slope = mean_of(runs, &RunSummary::unserved_slope);
    m.s.lyapunov_slope = mean_of(runs, &RunSummary::lyapunov_slope);
    m.s.verdict = majority_verdict(runs);
    return m;
}

std::string fmt(double x, int prec = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, x);
    return buf;
}

std::string summary_row_with_means(const std::string& label, const MeanSummary& m) {
    const auto& s = m.s;
    return label + "," + fmt(m.max_vehicle_count, 1) + "," + fmt(m.max_spillover, 1) + "," + fmt(m.max_unserved, 1) + "," +
           fmt(s.mean_vehicle_delay) + "," + fmt(s.mean_cv_delay) + "," + fmt(s.mean_nv_delay) + "," +
           fmt(s.mean_transit_delay) + "," + fmt(s.mean_passenger_delay) + "," + fmt(s.unserved_slope, 6) + "," +
           fmt(s.lyapunov_slope, 6) + "," + verdict_name(s.verdict);
}

void write_file(const std::filesystem::path& path, const std::string& text, std::vector<std::filesystem::path>& files) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
    files.push_back(path);
}

std::string metrics_csv(const std::vector<MetricsFrame>& frames) {
    std::ostringstream os;
    write_metrics_header(os);
    for (const auto& f : frames) write_metrics_row(os, f);
    return os.str();
}

std::string slug(std::string s) {
    for (auto& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.') c = '_';
    return s;
}

std::string run_json(const RunReport& r) {
    using nlohmann::json;
    json doc;
    doc["scenario"] = r.scenario.name;
    doc["controller"] = variant_name(r.scenario.controller.variant);
    doc["penetration"] = r.scenario.simulation.penetration;
    doc["segmentation"] = r.scenario.controller.segmentation.name();
    doc["majority_verdict"] = verdict_name(r.majority);
    json seeds = json::array();
    for (const auto& s : r.seeds) {
        json j;
        j["seed"] = s.summary.seed;
        if (!s.error.empty()) {
            j["error"] = s.error;
            seeds.push_back(j);
            continue;
        }
        j["verdict"] = verdict_name(s.summary.verdict);
        j["max_vehicle_count"] = s.summary.max_vehicle_count;
        j["max_spillover"] = s.summary.max_spillover;
        j["max_unserved"] = s.summary.max_unserved;
        j["mean_vehicle_delay_s"] = s.summary.mean_vehicle_delay;
        j["mean_passenger_delay_s"] = s.summary.mean_passenger_delay;
        j["decision_steps"] = s.decision_steps;
        j["pressure_violations"] = s.pressure_violations.size();
        j["monitor_records"] = s.monitor.size();
        json starved = json::array();
        for (const auto& st : s.starved)
            starved.push_back({{"movement", r.scenario.network.movements[st.movement].id}, {"t0", st.t0}});
        j["starved"] = starved;
        json floored = json::array();
        for (auto m : s.floored_movements) floored.push_back(r.scenario.network.movements[m].id);
        j["floored_arrival_rates"] = floored;
        seeds.push_back(j);
    }
    doc["seeds"] = seeds;
    return doc.dump(2) + "\n";
}

double parse_error_level(const std::string& text) {
    std::string t = text;
    bool percent = false;
    if (!t.empty() && t.back() == '%') {
        percent = true;
        t.pop_back();
    }
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(t, &pos);
    } catch (const std::exception&) {
        throw ConfigError("invalid error level '" + text + "'");
    }
    if (pos != t.size()) throw ConfigError("invalid error level '" + text + "'");
    if (percent) v /= 100.0;
    if (!ErrorModel::supported_level(v))
        throw ConfigError("error level '" + text + "' must be a multiple of 10% within [-50%, 50%]");
    return v;
}

}  // namespace

RunSummary summarize(std::span<const MetricsFrame> frames, double warmup, const StabilityThresholds& th) {
    RunSummary s;
    if (frames.empty()) return s;
    for (const auto& f : frames) {
        s.max_vehicle_count = std::max(s.max_vehicle_count, f.vehicle_count);
        s.max_spillover = std::max(s.max_spillover, f.spillover_count);
        s.max_unserved = std::max(s.max_unserved, f.unserved_count);
    }
    const MetricsFrame* first = &frames.front();
    for (const auto& f : frames)
        if (f.t >= warmup - 1e-9) {
            first = &f;
            break;
        }
    const auto& last = frames.back();
    auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
    const double gen_cv = static_cast<double>(last.generated_cv - first->generated_cv);
    const double gen_nv = static_cast<double>(last.generated_nv - first->generated_nv);
    const double gen_tr = static_cast<double>(last.generated_transit - first->generated_transit);
    const double d_cv = last.delay_cv - first->delay_cv;
    const double d_nv = last.delay_nv - first->delay_nv;
    const double d_tr = last.delay_transit - first->delay_transit;
    s.mean_vehicle_delay = ratio(d_cv + d_nv + d_tr, gen_cv + gen_nv + gen_tr);
    s.mean_cv_delay = ratio(d_cv, gen_cv);
    s.mean_nv_delay = ratio(d_nv, gen_nv);
    s.mean_transit_delay = ratio(d_tr, gen_tr);
    s.mean_passenger_delay = ratio(last.passenger_delay - first->passenger_delay,
                                   static_cast<double>(last.passengers_carried - first->passengers_carried));
    s.unserved_slope = unserved_slope(frames, warmup);
    s.lyapunov_slope = lyapunov_slope(frames, warmup);
    s.verdict = stability_verdict(frames, warmup, th);
    return s;
}

SeedResult run_seed(const Scenario& scenario, std::uint64_t seed, const SeedOptions& options) {
    Simulation sim(scenario, seed, sim_options(options));
    return drive(sim, seed, options);
}

HistoricalStats stats_from_tally(const Network& net, const WorldState& world, double horizon, double period) {
    HistoricalStats stats;
    stats.period = period;
    const auto windows = static_cast<std::size_t>(std::max(1.0, std::ceil(horizon / period - 1e-9)));
    stats.movement_ids.resize(net.movements.size());
    stats.entries.assign(net.movements.size(), std::vector<HistoricalEntry>(windows));
    auto get = [](const auto& v, std::size_t i) { return i < v.size() ? v[i] : 0; };
    for (std::size_t m = 0; m < net.movements.size(); ++m) {
        stats.movement_ids[m] = net.movements[m].id;
        const auto& t = world.tally[m];
        for (std::size_t w = 0; w < windows; ++w) {
            auto& e = stats.entries[m][w];
            const double span = std::min(period, horizon - static_cast<double>(w) * period);
            const auto arrivals = static_cast<double>(get(t.arrivals, w));
            if (arrivals > 0.0) {
                e.arrival_rate = arrivals / span;
                e.penetration = estimate_penetration(static_cast<double>(get(t.cv_arrivals, w)), e.arrival_rate, span);
                e.occupancy = std::max(1.0, get(t.occupancy_sum, w) / arrivals);
            } else {
                e.arrival_rate = kArrivalRateFloor;
                e.penetration = kPenetrationFloor;
                e.occupancy = 1.0;
                e.floored = true;
            }
            const double green = get(t.saturated_green, w);
            const auto departed = static_cast<double>(get(t.saturated_departures, w));
            e.departure_rate = green > 0.0 && departed > 0.0 ? departed / green : net.movements[m].saturation_flow;
        }
    }
    return stats;
}

HistoricalStats calibrate(const Scenario& scenario, const CalibrationOptions& options) {
    Scenario sc = scenario;
    sc.controller.variant = ControllerVariant::TransitMp;
    if (options.horizon > 0.0) sc.simulation.horizon = options.horizon;
    sc.simulation.warmup = std::min(sc.simulation.warmup, sc.simulation.horizon / 2.0);
    SeedOptions opt;
    opt.observe_all = true;
    opt.check_invariants = false;
    opt.link_penetration = options.link_penetration;
    opt.tally_window = options.period;
    Simulation sim(sc, options.seed, sim_options(opt));
    drive(sim, options.seed, opt);
    return stats_from_tally(sc.network, sim.state(), sc.simulation.horizon, options.period);
}

Scenario resolve_scenario(const RunDescriptor& d) {
    Scenario sc = d.scenario ? *d.scenario : load_scenario(d.scenario_path);
    if (d.variant) sc.controller.variant = *d.variant;
    if (d.penetration) sc.simulation.penetration = *d.penetration;
    if (d.segmentation) sc.controller.segmentation = *d.segmentation;
    if (d.anchor) sc.controller.anchor = *d.anchor;
    if (d.horizon) sc.simulation.horizon = *d.horizon;
    if (d.warmup) sc.simulation.warmup = *d.warmup;
    std::vector<std::string> problems = validate_network(sc);
    if (d.seeds.empty()) problems.push_back("at least one seed is required");
    for (const auto& [id, p] : d.link_penetration) {
        if (sc.network.link_index(id) == kNone) problems.push_back("penetration given for unknown link '" + id + "'");
        if (!(p >= 0.0 && p <= 1.0)) problems.push_back("penetration for link '" + id + "' must lie in [0, 1]");
    }
    if (d.error && !ErrorModel::supported_level(d.error->level))
        problems.push_back("error level must be a multiple of 10% within [-50%, 50%]");
    if (!problems.empty()) throw ConfigError("invalid run configuration", problems);
    return sc;
}

SeedOptions seed_options(const Scenario& sc, const RunDescriptor& d) {
    SeedOptions opt;
    for (const auto& [id, p] : d.link_penetration) opt.link_penetration[sc.network.link_index(id)] = p;
    opt.error = d.error;
    return opt;
}

HistoricalStats historical_for(const Scenario& sc, const RunDescriptor& d) {
    if (d.historical) return *d.historical;
    if (!sc.historical_path.empty()) return load_historical(sc.historical_path, sc.network);
    CalibrationOptions co;
    co.seed = d.calibration_seed;
    for (const auto& [id, p] : d.link_penetration) co.link_penetration[sc.network.link_index(id)] = p;
    return calibrate(sc, co);
}

RunReport run(const RunDescriptor& d) {
    RunReport report;
    report.scenario = resolve_scenario(d);
    const auto& sc = report.scenario;
    SeedOptions opt = seed_options(sc, d);
    const auto variant = sc.controller.variant;
    if (variant == ControllerVariant::MTransitMp) opt.historical = historical_for(sc, d);
    else if (d.historical) opt.historical = d.historical;
    else if (!sc.historical_path.empty()) opt.historical = load_historical(sc.historical_path, sc.network);

    report.seeds.resize(d.seeds.size());
    parallel_for(d.seeds.size(), d.workers, [&](std::size_t i) {
        try {
            report.seeds[i] = run_seed(sc, d.seeds[i], opt);
        } catch (const std::exception& e) {
            report.seeds[i] = SeedResult{};
            report.seeds[i].summary.seed = d.seeds[i];
            report.seeds[i].error = e.what();
        }
    });
    std::vector<RunSummary> ok;
    for (const auto& s : report.seeds)
        if (s.error.empty()) ok.push_back(s.summary);
    const auto means = mean_summary(ok);
    report.mean = means.s;
    report.majority = means.s.verdict;

    if (!d.out_dir.empty()) {
        std::filesystem::create_directories(d.out_dir);
        const std::string base = slug(sc.name) + "_" + variant_name(variant);
        std::string summary = summary_csv_header();
        for (const auto& s : report.seeds) {
            if (!s.error.empty()) continue;
            write_file(d.out_dir / (base + "_seed" + std::to_string(s.summary.seed) + ".csv"), metrics_csv(s.frames),
                       report.files);
            summary += summary_csv_row("seed" + std::to_string(s.summary.seed), s.summary);
        }
        summary += summary_row_with_means("mean", means) + "\n";
        write_file(d.out_dir / (base + "_summary.csv"), summary, report.files);
        write_file(d.out_dir / (base + "_run.json"), run_json(report), report.files);
    }
    return report;
}

SweepAxis parse_axis(const std::string& text) {
    if (text == "penetration") return SweepAxis::Penetration;
    if (text == "segmentation") return SweepAxis::Segmentation;
    if (text == "error_level" || text == "error-level") return SweepAxis::ErrorLevel;
    if (text == "controller") return SweepAxis::Controller;
    throw ConfigError("unknown sweep axis '" + text + "' (penetration, segmentation, error_level, controller)");
}

const char* axis_name(SweepAxis a) {
    switch (a) {
        case SweepAxis::Penetration: return "penetration";
        case SweepAxis::Segmentation: return "segmentation";
        case SweepAxis::ErrorLevel: return "error_level";
        case SweepAxis::Controller: return "controller";
    }
    return "penetration";
}

SweepReport sweep(const SweepDescriptor& d) {
    SweepReport report;
    report.axis = d.axis;
    if (d.values.empty()) throw ConfigError("sweep needs at least one axis value");

    struct Point {
        RunDescriptor rd;
        Scenario sc;
        SeedOptions opt;
    };
    std::vector<Point> points;
    const auto base_variant = d.base.variant ? std::vector<ControllerVariant>{*d.base.variant}
                                             : std::vector<ControllerVariant>{};
    const auto controllers = d.axis == SweepAxis::Controller ? std::vector<ControllerVariant>{ControllerVariant::TransitMp}
                             : d.controllers.empty()         ? base_variant
                                                             : d.controllers;
    std::map<std::string, HistoricalStats> calibrations;
    for (const auto& value : d.values) {
        const std::size_t n_ctrl = std::max<std::size_t>(controllers.size(), 1);
        for (std::size_t c = 0; c < n_ctrl; ++c) {
            RunDescriptor rd = d.base;
            rd.out_dir.clear();
            if (!controllers.empty()) rd.variant = controllers[c];
            switch (d.axis) {
                case SweepAxis::Penetration: {
                    double p = -1.0;
                    try {
                        p = std::stod(value);
                    } catch (const std::exception&) {
                    }
                    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("penetration value '" + value + "' must lie in [0, 1]");
                    rd.penetration = p;
                    break;
                }
                case SweepAxis::Segmentation: rd.segmentation = SegmentationStrategy::parse(value); break;
                case SweepAxis::ErrorLevel: {
                    ErrorModel em = d.base.error.value_or(ErrorModel{});
                    em.level = parse_error_level(value);
                    rd.error = em;
                    break;
                }
                case SweepAxis::Controller: rd.variant = parse_variant(value); break;
            }
            Point pt{rd, resolve_scenario(rd), {}};
            pt.opt = seed_options(pt.sc, rd);
            if (pt.sc.controller.variant == ControllerVariant::MTransitMp) {
                std::ostringstream key;
                key << pt.sc.simulation.penetration << "|" << pt.sc.simulation.horizon;
                auto it = calibrations.find(key.str());
                if (it == calibrations.end()) it = calibrations.emplace(key.str(), historical_for(pt.sc, rd)).first;
                pt.opt.historical = it->second;
            }
            points.push_back(std::move(pt));
        }
    }

    struct Job {
        std::size_t point;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (std::size_t p = 0; p < points.size(); ++p)
        for (auto s : points[p].rd.seeds) jobs.push_back({p, s});
    std::vector<SeedResult> results(jobs.size());
    parallel_for(jobs.size(), d.base.workers, [&](std::size_t i) {
        const auto& pt = points[jobs[i].point];
        try {
            results[i] = run_seed(pt.sc, jobs[i].seed, pt.opt);
        } catch (const std::exception& e) {
            results[i].summary.seed = jobs[i].seed;
            results[i].error = e.what();
        }
    });

    report.groups.resize(points.size());
    const std::size_t n_ctrl = std::max<std::size_t>(controllers.size(), 1);
    for (std::size_t p = 0; p < points.size(); ++p) {
        report.groups[p].value = d.values[p / n_ctrl];
        report.groups[p].controller = points[p].sc.controller.variant;
    }
    for (std::size_t i = 0; i < jobs.size(); ++i)
        if (results[i].error.empty()) report.groups[jobs[i].point].runs.push_back(results[i].summary);
    for (auto& g : report.groups) {
        g.mean = mean_summary(g.runs).s;
    }

    if (!d.base.out_dir.empty()) {
        const auto& out = d.base.out_dir;
        std::filesystem::create_directories(out);
        std::string rows = "axis_value,controller," + summary_csv_header();
        std::string groups = "axis_value,controller," + summary_csv_header();
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            const auto& g = report.groups[jobs[i].point];
            const std::string prefix = g.value + "," + variant_name(g.controller) + ",";
            if (!results[i].error.empty()) continue;
            const auto dir = out / (std::string(axis_name(d.axis)) + "_" + slug(g.value) + "_" + variant_name(g.controller));
            std::filesystem::create_directories(dir);
            write_file(dir / ("seed" + std::to_string(jobs[i].seed) + ".csv"), metrics_csv(results[i].frames), report.files);
            rows += prefix + summary_csv_row("seed" + std::to_string(jobs[i].seed), results[i].summary);
        }
        for (const auto& g : report.groups)
            groups += g.value + "," + variant_name(g.controller) + "," +
                      summary_row_with_means("mean", mean_summary(g.runs)) + "\n";
        write_file(out / "sweep_runs.csv", rows, report.files);
        write_file(out / "sweep_groups.csv", groups, report.files);
        if (d.axis == SweepAxis::ErrorLevel) write_file(out / "error_table.csv", error_table_csv(report), report.files);
    }
    return report;
}

double sample_std(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 2) return 0.0;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(n - 1));
}

std::string error_table_csv(const SweepReport& report) {
    std::string out = "method,error_level,vehicle_delay_s,passenger_delay_s,max_spillover_veh,max_unserved_veh\n";
    std::vector<ControllerVariant> order;
    for (const auto& g : report.groups)
        if (std::find(order.begin(), order.end(), g.controller) == order.end()) order.push_back(g.controller);
    for (auto c : order) {
        std::vector<double> vd, pd, sp, un;
        for (const auto& g : report.groups) {
            if (g.controller != c) continue;
            const auto m = mean_summary(g.runs);
            vd.push_back(m.s.mean_vehicle_delay);
            pd.push_back(m.s.mean_passenger_delay);
            sp.push_back(m.max_spillover);
            un.push_back(m.max_unserved);
            out += variant_name(c) + "," + g.value + "," + fmt(vd.back(), 1) + "," + fmt(pd.back(), 1) + "," +
                   fmt(sp.back(), 1) + "," + fmt(un.back(), 1) + "\n";
        }
        out += variant_name(c) + ",STD," + fmt(sample_std(vd), 1) + "," + fmt(sample_std(pd), 1) + "," +
               fmt(sample_std(sp), 1) + "," + fmt(sample_std(un), 1) + "\n";
    }
    return out;
}

std::string summary_csv_header() {
    return "label,max_vehicle_count,max_spillover,max_unserved,mean_vehicle_delay_s,mean_cv_delay_s,mean_nv_delay_s,"
           "mean_transit_delay_s,mean_passenger_delay_s,unserved_slope_veh_per_s,lyapunov_slope,verdict\n";
}

std::string summary_csv_row(const std::string& label, const RunSummary& s) {
    return label + "," + std::to_string(s.max_vehicle_count) + "," + std::to_string(s.max_spillover) + "," +
           std::to_string(s.max_unserved) + "," + fmt(s.mean_vehicle_delay) + "," + fmt(s.mean_cv_delay) + "," +
           fmt(s.mean_nv_delay) + "," + fmt(s.mean_transit_delay) + "," + fmt(s.mean_passenger_delay) + "," +
           fmt(s.unserved_slope, 6) + "," + fmt(s.lyapunov_slope, 6) + "," + verdict_name(s.verdict) + "\n";
}

}  // namespace transitmp
