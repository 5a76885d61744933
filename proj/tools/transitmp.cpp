// Command-line front end: run, sweep, calibrate, check-region, validate.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "transitmp/analysis.hpp"
#include "transitmp/harness.hpp"
#include "transitmp/scenario_io.hpp"

using namespace transitmp;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::filesystem::path default_out_dir() {
    if (const char* env = std::getenv("TRANSITMP_OUT_DIR"); env && *env) return env;
    return "out";
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep))
        if (!item.empty()) out.push_back(item);
    return out;
}

double to_double(const std::string& text, const std::string& what) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != text.size()) throw ConfigError("invalid " + what + " '" + text + "'");
    return v;
}

// Options shared by `run` and `sweep`.
struct RunFlags {
    std::string scenario;
    std::string controller;
    std::string penetration;  // "0.3" or "link=0.1,link2=0.5"
    std::string segmentation;
    std::string error_level;
    std::string seeds = "1";
    std::string anchor;
    std::string historical;
    double horizon = 0.0;
    double warmup = -1.0;
    std::string out;
    int workers = 1;

    void attach(CLI::App* app) {
        app->add_option("--scenario", scenario, "Scenario JSON file")->required();
        app->add_option("--controller", controller, "cv-mp | transit-mp | mtransit-mp | occ-mp | eocc-mp");
        app->add_option("--penetration", penetration, "Global CV rate, or per-link list link=rate,...");
        app->add_option("--segmentation", segmentation, "S0..S5 or a segment length in metres");
        app->add_option("--error-level", error_level, "Parameter error level, e.g. -20% or -0.2");
        app->add_option("--seeds", seeds, "Comma-separated seeds, or a range a-b")->capture_default_str();
        app->add_option("--queue-anchor", anchor, "stopped-cv | ground-truth | none");
        app->add_option("--historical", historical, "Historical statistics file (overrides the scenario)");
        app->add_option("--horizon", horizon, "Simulated horizon, s");
        app->add_option("--warmup", warmup, "Warmup excluded from averages, s");
        app->add_option("--out", out, "Output directory (default $TRANSITMP_OUT_DIR or ./out)");
        app->add_option("--workers", workers, "Parallel runs")->capture_default_str()->check(CLI::PositiveNumber);
    }

    RunDescriptor descriptor() const {
        RunDescriptor d;
        d.scenario_path = scenario;
        if (!controller.empty()) d.variant = parse_variant(controller);
        if (!penetration.empty()) {
            if (penetration.find('=') == std::string::npos) {
                d.penetration = to_double(penetration, "penetration");
                if (!(*d.penetration >= 0.0 && *d.penetration <= 1.0))
                    throw ConfigError("penetration must lie in [0, 1]");
            } else {
                for (const auto& item : split(penetration, ',')) {
                    const auto eq = item.find('=');
                    if (eq == std::string::npos) throw ConfigError("invalid per-link penetration '" + item + "'");
                    d.link_penetration[item.substr(0, eq)] = to_double(item.substr(eq + 1), "penetration");
                }
            }
        }
        if (!segmentation.empty()) d.segmentation = SegmentationStrategy::parse(segmentation);
        if (!error_level.empty()) {
            ErrorModel em;
            std::string t = error_level;
            const bool percent = !t.empty() && t.back() == '%';
            if (percent) t.pop_back();
            em.level = to_double(t, "error level") / (percent ? 100.0 : 1.0);
            d.error = em;
        }
        d.seeds.clear();
        for (const auto& part : split(seeds, ',')) {
            const auto dash = part.find('-', 1);
            if (dash == std::string::npos) {
                d.seeds.push_back(static_cast<std::uint64_t>(to_double(part, "seed")));
            } else {
                const auto a = static_cast<std::uint64_t>(to_double(part.substr(0, dash), "seed"));
                const auto b = static_cast<std::uint64_t>(to_double(part.substr(dash + 1), "seed"));
                for (auto s = a; s <= b; ++s) d.seeds.push_back(s);
            }
        }
        if (!anchor.empty()) {
            if (anchor == "stopped-cv") d.anchor = QueueAnchor::StoppedCvExpansion;
            else if (anchor == "ground-truth") d.anchor = QueueAnchor::GroundTruth;
            else if (anchor == "none") d.anchor = QueueAnchor::None;
            else throw ConfigError("--queue-anchor must be stopped-cv, ground-truth or none");
        }
        if (horizon > 0.0) d.horizon = horizon;
        if (warmup >= 0.0) d.warmup = warmup;
        d.out_dir = out.empty() ? default_out_dir() : std::filesystem::path(out);
        d.workers = workers;
        return d;
    }
};

void attach_historical(RunDescriptor& d, const std::string& path) {
    if (path.empty()) return;
    const auto sc = resolve_scenario(d);
    d.historical = load_historical(path, sc.network);
}

int cmd_run(const RunFlags& f) {
    auto d = f.descriptor();
    attach_historical(d, f.historical);
    const auto report = run(d);
    int failed = 0;
    for (const auto& s : report.seeds) {
        if (!s.error.empty()) {
            std::cerr << "seed " << s.summary.seed << " failed: " << s.error << "\n";
            ++failed;
            continue;
        }
        std::cout << "seed " << s.summary.seed << ": verdict " << verdict_name(s.summary.verdict) << ", max spillover "
                  << s.summary.max_spillover << ", max unserved " << s.summary.max_unserved << ", vehicle delay "
                  << s.summary.mean_vehicle_delay << " s, passenger delay " << s.summary.mean_passenger_delay << " s\n";
    }
    for (const auto& p : report.files) std::cout << "wrote " << p.string() << "\n";
    return failed ? kExitRuntime : 0;
}

int cmd_sweep(const RunFlags& f, const std::string& axis, const std::string& values, const std::string& controllers) {
    SweepDescriptor sd;
    sd.base = f.descriptor();
    attach_historical(sd.base, f.historical);
    sd.axis = parse_axis(axis);
    if (values.empty()) {
        if (sd.axis != SweepAxis::ErrorLevel) throw ConfigError("--values is required for this axis");
        for (double v : default_error_levels()) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%+.0f%%", v * 100.0);
            sd.values.push_back(buf);
        }
    } else {
        sd.values = split(values, ',');
    }
    for (const auto& c : split(controllers, ',')) sd.controllers.push_back(parse_variant(c));
    const auto report = sweep(sd);
    std::cout << "axis_value,controller," << summary_csv_header();
    for (const auto& g : report.groups) std::cout << g.value << "," << variant_name(g.controller) << "," << summary_csv_row("mean", g.mean);
    if (sd.axis == SweepAxis::ErrorLevel) std::cout << "\n" << error_table_csv(report);
    for (const auto& p : report.files) std::cout << "wrote " << p.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Max-pressure signal control with transit priority under partial CV observation"};
    app.require_subcommand(1);

    RunFlags run_flags;
    auto* run_cmd = app.add_subcommand("run", "Run one controller over one or more seeds");
    run_flags.attach(run_cmd);

    RunFlags sweep_flags;
    std::string axis = "penetration", values, controllers;
    auto* sweep_cmd = app.add_subcommand("sweep", "Sweep one axis across controllers and seeds");
    sweep_flags.attach(sweep_cmd);
    sweep_cmd->add_option("--axis", axis, "penetration | segmentation | error_level | controller")->capture_default_str();
    sweep_cmd->add_option("--values", values, "Comma-separated axis values (error levels default to the standard nine)");
    sweep_cmd->add_option("--controllers", controllers, "Comma-separated controller variants");

    std::string cal_scenario, cal_out, cal_penetration;
    double cal_horizon = 0.0, cal_period = 1800.0;
    std::uint64_t cal_seed = 1000003;
    auto* cal_cmd = app.add_subcommand("calibrate", "Full-observation run emitting historical statistics");
    cal_cmd->add_option("--scenario", cal_scenario, "Scenario JSON file")->required();
    cal_cmd->add_option("--horizon", cal_horizon, "Simulated horizon, s");
    cal_cmd->add_option("--period", cal_period, "Time-of-day window, s")->capture_default_str();
    cal_cmd->add_option("--seed", cal_seed, "Calibration seed")->capture_default_str();
    cal_cmd->add_option("--penetration", cal_penetration, "CV rate used to sample historical CV counts");
    cal_cmd->add_option("--out", cal_out, "Output file (default <out dir>/historical.json)");

    std::string reg_scenario, reg_out;
    double reg_at = 0.0;
    std::optional<double> pi_min, pi_max;
    auto* reg_cmd = app.add_subcommand("check-region", "Admissible demand region LP for the scenario demand");
    reg_cmd->add_option("--scenario", reg_scenario, "Scenario JSON file")->required();
    reg_cmd->add_option("--at", reg_at, "Time whose demand rates are checked, s")->capture_default_str();
    reg_cmd->add_option("--pi-min", pi_min, "Minimum CV penetration (reduced region)");
    reg_cmd->add_option("--pi-max", pi_max, "Maximum CV penetration (reduced region)");
    reg_cmd->add_option("--out", reg_out, "Report file (default: stdout)");

    std::string val_scenario;
    auto* val_cmd = app.add_subcommand("validate", "Check a scenario file and list every violation");
    val_cmd->add_option("--scenario", val_scenario, "Scenario JSON file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) return cmd_run(run_flags);
        if (sweep_cmd->parsed()) return cmd_sweep(sweep_flags, axis, values, controllers);
        if (cal_cmd->parsed()) {
            auto sc = load_scenario(cal_scenario);
            if (!cal_penetration.empty()) sc.simulation.penetration = to_double(cal_penetration, "penetration");
            const auto problems = validate_network(sc);
            if (!problems.empty()) throw ConfigError("invalid scenario", problems);
            CalibrationOptions co;
            co.horizon = cal_horizon;
            co.seed = cal_seed;
            co.period = cal_period;
            const auto stats = calibrate(sc, co);
            const std::filesystem::path out = cal_out.empty() ? default_out_dir() / "historical.json" : std::filesystem::path(cal_out);
            if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
            save_historical(out, stats);
            for (std::size_t m = 0; m < stats.entries.size(); ++m)
                for (std::size_t w = 0; w < stats.entries[m].size(); ++w)
                    if (stats.entries[m][w].floored)
                        std::cout << "movement " << stats.movement_ids[m] << " window " << w
                                  << ": no arrivals, arrival rate floored\n";
            std::cout << "wrote " << out.string() << "\n";
            return 0;
        }
        if (reg_cmd->parsed()) {
            const auto sc = load_scenario(reg_scenario);
            const auto rates = source_rates_at(sc, reg_at);
            const auto demand = movement_demand(sc, rates);
            const auto cert = admissible_region_check(sc.network, demand, rates, region_scale(pi_min, pi_max));
            const auto text = region_report(sc.network, cert) + "\n";
            if (reg_out.empty()) {
                std::cout << text;
            } else {
                std::ofstream(reg_out) << text;
                std::cout << "wrote " << reg_out << "\n";
            }
            if (!cert.diagnostic.empty()) {
                std::cerr << cert.diagnostic << "\n";
                return kExitRuntime;
            }
            return 0;
        }
        if (val_cmd->parsed()) {
            std::ifstream in(val_scenario);
            if (!in) throw ConfigError("cannot open scenario file '" + val_scenario + "'");
            std::stringstream buf;
            buf << in.rdbuf();
            const auto sc = parse_scenario_unchecked(buf.str(), std::filesystem::path(val_scenario).parent_path());
            const auto problems = validate_network(sc);
            for (const auto& p : problems) std::cout << p << "\n";
            if (!problems.empty()) return kExitConfig;
            std::cout << "ok: " << sc.network.nodes.size() << " nodes, " << sc.network.movements.size() << " movements\n";
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        for (const auto& d : e.details()) std::cerr << "  - " << d << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
