#include "transitmp/scenario_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace transitmp {

using nlohmann::json;

namespace {

// Field accessors that name the offending JSON path on failure.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

    bool has(const char* key) const { return j_.is_object() && j_.contains(key); }

    Reader at(const char* key) const {
        if (!has(key)) throw ConfigError("missing field '" + sub(key) + "'");
        return {j_.at(key), sub(key)};
    }
    Reader at(std::size_t i) const { return {j_.at(i), path_ + "[" + std::to_string(i) + "]"}; }

    std::size_t size() const {
        if (!j_.is_array()) throw ConfigError("field '" + path_ + "' must be an array");
        return j_.size();
    }

    double num() const {
        if (!j_.is_number()) throw ConfigError("field '" + path_ + "' must be a number");
        return j_.get<double>();
    }
    int integer() const {
        if (!j_.is_number_integer()) throw ConfigError("field '" + path_ + "' must be an integer");
        return j_.get<int>();
    }
    bool boolean() const {
        if (!j_.is_boolean()) throw ConfigError("field '" + path_ + "' must be true or false");
        return j_.get<bool>();
    }
    std::string str() const {
        if (!j_.is_string()) throw ConfigError("field '" + path_ + "' must be a string");
        return j_.get<std::string>();
    }

    double num_or(const char* key, double fallback) const { return has(key) ? at(key).num() : fallback; }
    int int_or(const char* key, int fallback) const { return has(key) ? at(key).integer() : fallback; }
    std::string str_or(const char* key, const std::string& fallback) const {
        return has(key) ? at(key).str() : fallback;
    }

    const std::string& path() const { return path_; }

private:
    std::string sub(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    const json& j_;
    std::string path_;
};

constexpr double kPerHour = 1.0 / 3600.0;

void parse_network(const Reader& root, Scenario& sc) {
    auto& net = sc.network;

    const auto links = root.at("links");
    for (std::size_t i = 0; i < links.size(); ++i) {
        const auto r = links.at(i);
        Link l;
        l.id = r.at("id").str();
        l.length = r.at("length_m").num();
        l.jam_density = r.at("jam_density_veh_per_km").num() / 1000.0;
        l.free_flow_speed = r.at("speed_kmh").num() / 3.6;
        l.lanes = r.int_or("lanes", 1);
        if (r.has("stations_m")) {
            const auto st = r.at("stations_m");
            for (std::size_t k = 0; k < st.size(); ++k) l.stations.push_back(st.at(k).num());
            std::sort(l.stations.begin(), l.stations.end());
        }
        if (r.has("penetration")) l.penetration = r.at("penetration").num();
        net.links.push_back(std::move(l));
    }

    if (root.has("sources")) {
        const auto sources = root.at("sources");
        for (std::size_t i = 0; i < sources.size(); ++i) {
            const auto r = sources.at(i);
            Source s;
            s.id = r.at("id").str();
            s.link = net.link_index(r.at("link").str());
            s.saturation_flow = r.num_or("saturation_flow_veh_per_h", 1800.0) * kPerHour;
            net.sources.push_back(std::move(s));
        }
    }

    const auto nodes = root.at("nodes");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto r = nodes.at(i);
        Node node;
        node.id = r.at("id").str();
        const NodeIndex ni = static_cast<NodeIndex>(net.nodes.size());
        const auto moves = r.at("movements");
        for (std::size_t k = 0; k < moves.size(); ++k) {
            const auto mr = moves.at(k);
            Movement mv;
            mv.id = mr.at("id").str();
            mv.node = ni;
            mv.from = net.link_index(mr.at("from").str());
            mv.to = net.link_index(mr.at("to").str());
            mv.saturation_flow = mr.at("saturation_flow_veh_per_h").num() * kPerHour;
            mv.turning_ratio = mr.at("turning_ratio").num();
            node.movements.push_back(static_cast<MovementIndex>(net.movements.size()));
            net.movements.push_back(std::move(mv));
        }
        const auto phases = r.at("phases");
        for (std::size_t p = 0; p < phases.size(); ++p) {
            const auto pr = phases.at(p);
            Phase phase;
            for (std::size_t k = 0; k < pr.size(); ++k) {
                const auto id = pr.at(k).str();
                const auto m = net.movement_index(id);
                if (m == kNone) throw ConfigError("field '" + pr.at(k).path() + "' names unknown movement '" + id + "'");
                phase.movements.push_back(m);
            }
            node.phases.push_back(std::move(phase));
        }
        net.nodes.push_back(std::move(node));
    }
    net.index();
}

void parse_demand(const Reader& root, Scenario& sc) {
    if (!root.has("demand")) return;
    const auto d = root.at("demand");
    const auto mode = d.str_or("mode", "poisson");
    if (mode == "poisson") sc.simulation.demand_mode = DemandMode::Poisson;
    else if (mode == "deterministic") sc.simulation.demand_mode = DemandMode::Deterministic;
    else throw ConfigError("field 'demand.mode' must be 'poisson' or 'deterministic'");
    const auto profiles = d.at("profiles");
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        const auto r = profiles.at(i);
        DemandProfile prof;
        const auto src = r.at("source").str();
        for (SourceIndex s = 0; s < static_cast<int>(sc.network.sources.size()); ++s)
            if (sc.network.sources[s].id == src) prof.source = s;
        const auto segs = r.at("segments");
        for (std::size_t k = 0; k < segs.size(); ++k) {
            const auto sr = segs.at(k);
            prof.segments.push_back({sr.at("until_s").num(), sr.at("rate_veh_per_h").num() * kPerHour});
        }
        sc.demand.push_back(std::move(prof));
    }
}

void parse_transit(const Reader& root, Scenario& sc) {
    if (!root.has("transit_lines")) return;
    const auto& net = sc.network;
    const auto lines = root.at("transit_lines");
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto r = lines.at(i);
        TransitLine line;
        line.id = r.at("id").str();
        const auto route = r.at("route");
        for (std::size_t k = 0; k < route.size(); ++k) line.route.push_back(net.link_index(route.at(k).str()));
        if (r.has("stops")) {
            const auto stops = r.at("stops");
            for (std::size_t k = 0; k < stops.size(); ++k) {
                const auto s = stops.at(k);
                line.stops.push_back({net.link_index(s.at("link").str()), s.at("position_m").num()});
            }
        }
        line.headway = r.at("headway_s").num();
        line.first_departure = r.num_or("first_departure_s", 0.0);
        if (r.has("dwell")) {
            const auto dw = r.at("dwell");
            line.dwell_base = dw.num_or("base_s", 0.0);
            line.dwell_per_passenger = dw.num_or("per_passenger_s", 0.0);
        }
        line.capacity = r.int_or("capacity", 100);
        line.initial_passengers = r.int_or("initial_passengers", 0);
        const std::size_t n = line.stops.size();
        line.passenger_rates.assign(n, std::vector<double>(n, 0.0));
        if (r.has("passenger_demand")) {
            const auto pd = r.at("passenger_demand");
            for (std::size_t k = 0; k < pd.size(); ++k) {
                const auto e = pd.at(k);
                const int from = e.at("from_stop").integer();
                const int to = e.at("to_stop").integer();
                if (from < 0 || to <= from || to >= static_cast<int>(n))
                    throw ConfigError("field '" + e.path() + "' needs 0 <= from_stop < to_stop < #stops");
                line.passenger_rates[from][to] += e.at("rate_per_h").num() * kPerHour;
            }
        }
        sc.transit_lines.push_back(std::move(line));
    }
}

void parse_controller(const Reader& root, Scenario& sc) {
    if (!root.has("controller")) return;
    const auto r = root.at("controller");
    auto& c = sc.controller;
    if (r.has("variant")) c.variant = parse_variant(r.at("variant").str());
    if (r.has("segmentation")) c.segmentation = SegmentationStrategy::parse(r.at("segmentation").str());
    if (r.has("beta_mode")) {
        const auto m = r.at("beta_mode").str();
        if (m == "position") c.beta_mode = BetaMode::Position;
        else if (m == "eta") c.beta_mode = BetaMode::Eta;
        else throw ConfigError("field 'controller.beta_mode' must be 'position' or 'eta'");
    }
    c.theta = r.num_or("theta_s", c.theta);
    c.decision_step = r.num_or("decision_step_s", c.decision_step);
    c.yellow = r.num_or("yellow_s", c.yellow);
    c.lost = r.num_or("lost_s", c.lost);
    if (r.has("clamp_on_fallback")) c.clamp_on_fallback = r.at("clamp_on_fallback").boolean();
    if (r.has("queue_anchor")) {
        const auto a = r.at("queue_anchor").str();
        if (a == "stopped-cv") c.anchor = QueueAnchor::StoppedCvExpansion;
        else if (a == "ground-truth") c.anchor = QueueAnchor::GroundTruth;
        else if (a == "none") c.anchor = QueueAnchor::None;
        else throw ConfigError("field 'controller.queue_anchor' must be 'stopped-cv', 'ground-truth' or 'none'");
    }
}

void parse_simulation(const Reader& root, Scenario& sc) {
    if (!root.has("simulation")) return;
    const auto r = root.at("simulation");
    auto& s = sc.simulation;
    s.dt = r.num_or("dt_s", s.dt);
    s.horizon = r.num_or("horizon_s", s.horizon);
    s.warmup = r.num_or("warmup_s", s.warmup);
    s.penetration = r.num_or("penetration", s.penetration);
    if (r.has("car_occupancy_weights")) {
        const auto w = r.at("car_occupancy_weights");
        s.car_occupancy_weights.clear();
        for (std::size_t k = 0; k < w.size(); ++k) s.car_occupancy_weights.push_back(w.at(k).num());
    }
}

}  // namespace

Scenario parse_scenario_unchecked(const std::string& text, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
    }
    Scenario sc;
    const Reader root(doc, "");
    try {
        sc.name = root.str_or("name", "scenario");
        parse_network(root, sc);
        parse_demand(root, sc);
        parse_transit(root, sc);
        parse_controller(root, sc);
        parse_simulation(root, sc);
        if (root.has("historical")) {
            std::filesystem::path p = root.at("historical").str();
            sc.historical_path = (p.is_relative() && !base_dir.empty() ? base_dir / p : p).string();
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed scenario: ") + e.what());
    }
    return sc;
}

Scenario parse_scenario(const std::string& text, const std::filesystem::path& base_dir) {
    auto sc = parse_scenario_unchecked(text, base_dir);
    auto violations = validate_network(sc);
    if (!violations.empty()) {
        std::ostringstream os;
        os << "scenario '" << sc.name << "' failed validation (" << violations.size() << " violation"
           << (violations.size() == 1 ? "" : "s") << ")";
        for (const auto& v : violations) os << "\n  - " << v;
        throw ConfigError(os.str(), std::move(violations));
    }
    return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path.parent_path());
}

}  // namespace transitmp
