#include "transitmp/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace transitmp {

int Link::storage() const {
    return static_cast<int>(std::floor(jam_density * length * lanes + 1e-9));
}

double Link::free_flow_time() const {
    return free_flow_speed > 0.0 ? length / free_flow_speed : 0.0;
}

std::optional<double> Link::last_station() const {
    if (stations.empty()) return std::nullopt;
    return *std::max_element(stations.begin(), stations.end());
}

SegmentationStrategy SegmentationStrategy::parse(const std::string& text) {
    static const std::map<std::string, Tag> tags{
        {"S0", Tag::S0}, {"S1", Tag::S1}, {"S2", Tag::S2},
        {"S3", Tag::S3}, {"S4", Tag::S4}, {"S5", Tag::S5}};
    if (auto it = tags.find(text); it != tags.end()) return {it->second, 0.0};
    // Anything else must be a custom length in metres.
    std::size_t used = 0;
    double length = 0.0;
    try {
        length = std::stod(text, &used);
    } catch (const std::exception&) {
        throw ConfigError("unknown segmentation strategy '" + text + "'");
    }
    if (used != text.size() || !(length > 0.0))
        throw ConfigError("segmentation length must be a positive number of metres, got '" + text + "'");
    return {Tag::Custom, length};
}

std::string SegmentationStrategy::name() const {
    switch (tag) {
        case Tag::S0: return "S0";
        case Tag::S1: return "S1";
        case Tag::S2: return "S2";
        case Tag::S3: return "S3";
        case Tag::S4: return "S4";
        case Tag::S5: return "S5";
        case Tag::Custom: {
            std::ostringstream os;
            os << custom_length;
            return os.str();
        }
    }
    return "S0";
}

double SegmentationStrategy::segment_length() const {
    switch (tag) {
        case Tag::S0: return std::numeric_limits<double>::infinity();
        case Tag::S1: return 90.0;
        case Tag::S2: return 140.0;
        case Tag::S3: return 280.0;
        case Tag::S4: return 420.0;
        case Tag::S5: return 560.0;
        case Tag::Custom: return custom_length;
    }
    return std::numeric_limits<double>::infinity();
}

Window segment_vehicle_window(const Link& link, const SegmentationStrategy& strategy) {
    const double seg = strategy.segment_length();
    return {std::max(0.0, link.length - seg), link.length};
}

void Network::index() {
    outgoing.assign(links.size(), {});
    source_of_link.assign(links.size(), kNone);
    for (MovementIndex m = 0; m < static_cast<int>(movements.size()); ++m) {
        const auto from = movements[m].from;
        if (from >= 0 && from < static_cast<int>(links.size())) outgoing[from].push_back(m);
    }
    for (SourceIndex s = 0; s < static_cast<int>(sources.size()); ++s) {
        const auto l = sources[s].link;
        if (l >= 0 && l < static_cast<int>(links.size()) && source_of_link[l] == kNone)
            source_of_link[l] = s;
    }
}

namespace {
template <typename T>
int find_by_id(const std::vector<T>& items, const std::string& id) {
    for (int i = 0; i < static_cast<int>(items.size()); ++i)
        if (items[i].id == id) return i;
    return kNone;
}
}  // namespace

LinkIndex Network::link_index(const std::string& id) const { return find_by_id(links, id); }
MovementIndex Network::movement_index(const std::string& id) const { return find_by_id(movements, id); }
NodeIndex Network::node_index(const std::string& id) const { return find_by_id(nodes, id); }

MovementIndex Network::find_movement(LinkIndex from, LinkIndex to) const {
    if (from < 0 || from >= static_cast<int>(outgoing.size())) return kNone;
    for (auto m : outgoing[from])
        if (movements[m].to == to) return m;
    return kNone;
}

double Network::expected_travel_time(MovementIndex m) const {
    return links.at(movements.at(m).from).free_flow_time();
}

double DemandProfile::rate_at(double t) const {
    for (const auto& seg : segments)
        if (t < seg.until) return seg.rate;
    return 0.0;
}

ControllerVariant parse_variant(const std::string& text) {
    std::string key;
    for (char c : text)
        if (c != '-' && c != '_' && c != ' ') key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (key == "cvmp") return ControllerVariant::CvMp;
    if (key == "transitmp") return ControllerVariant::TransitMp;
    if (key == "mtransitmp") return ControllerVariant::MTransitMp;
    if (key == "occmp") return ControllerVariant::OccMp;
    if (key == "eoccmp") return ControllerVariant::EoccMp;
    throw ConfigError("unknown controller variant '" + text + "'");
}

std::string variant_name(ControllerVariant v) {
    switch (v) {
        case ControllerVariant::CvMp: return "CV-MP";
        case ControllerVariant::TransitMp: return "Transit-MP";
        case ControllerVariant::MTransitMp: return "mTransit-MP";
        case ControllerVariant::OccMp: return "OCC-MP";
        case ControllerVariant::EoccMp: return "eOCC-MP";
    }
    return "?";
}

std::vector<std::string> validate_network(const Scenario& scenario) {
    std::vector<std::string> out;
    const auto& net = scenario.network;
    const int n_links = static_cast<int>(net.links.size());
    const int n_moves = static_cast<int>(net.movements.size());
    auto link_ok = [&](LinkIndex l) { return l >= 0 && l < n_links; };
    auto report = [&](const std::string& s) { out.push_back(s); };

    std::set<std::string> link_ids;
    for (const auto& link : net.links) {
        const std::string where = "link '" + link.id + "': ";
        if (!link_ids.insert(link.id).second) report(where + "duplicate id");
        if (!(link.length > 0.0)) report(where + "length must be > 0");
        if (!(link.jam_density > 0.0)) report(where + "jam density must be > 0");
        if (!(link.free_flow_speed > 0.0)) report(where + "free-flow speed must be > 0");
        if (link.lanes < 1) report(where + "lanes must be >= 1");
        if (link.length > 0.0 && link.jam_density > 0.0 && link.lanes >= 1 && link.storage() < 1)
            report(where + "storage below one vehicle");
        for (double s : link.stations)
            if (s < 0.0 || s > link.length) {
                std::ostringstream os;
                os << where << "station at " << s << " m outside [0, " << link.length << "]";
                report(os.str());
            }
        if (link.penetration && (*link.penetration < 0.0 || *link.penetration > 1.0))
            report(where + "penetration must lie in [0, 1]");
    }

    std::set<LinkIndex> fed;
    for (const auto& src : net.sources) {
        const std::string where = "source '" + src.id + "': ";
        if (!link_ok(src.link)) {
            report(where + "references a missing link");
            continue;
        }
        if (!fed.insert(src.link).second) report(where + "link already has a source");
        if (!(src.saturation_flow > 0.0)) report(where + "saturation flow must be > 0");
    }

    std::vector<int> owner(n_moves, 0);
    for (const auto& node : net.nodes) {
        const std::string where = "node '" + node.id + "': ";
        std::set<MovementIndex> own(node.movements.begin(), node.movements.end());
        for (auto m : node.movements)
            if (m >= 0 && m < n_moves) ++owner[m];
        if (node.phases.empty()) report(where + "has no phases");
        std::set<MovementIndex> phased;
        for (std::size_t p = 0; p < node.phases.size(); ++p)
            for (auto m : node.phases[p].movements) {
                if (!own.count(m))
                    report(where + "phase " + std::to_string(p) + " references a movement not at this node");
                phased.insert(m);
            }
        for (auto m : node.movements)
            if (!phased.count(m) && m >= 0 && m < n_moves)
                report(where + "movement '" + net.movements[m].id + "' belongs to no phase");
    }

    std::vector<double> ratio_sum(n_links, 0.0);
    for (MovementIndex m = 0; m < n_moves; ++m) {
        const auto& mv = net.movements[m];
        const std::string where = "movement '" + mv.id + "': ";
        if (!link_ok(mv.from)) report(where + "incoming link missing");
        if (!link_ok(mv.to)) report(where + "outgoing link missing");
        if (!(mv.saturation_flow > 0.0)) report(where + "saturation flow must be > 0");
        if (mv.turning_ratio < 0.0 || mv.turning_ratio > 1.0) report(where + "turning ratio outside [0, 1]");
        if (owner[m] != 1) report(where + "must belong to exactly one node");
        if (link_ok(mv.from)) ratio_sum[mv.from] += mv.turning_ratio;
    }
    for (LinkIndex l = 0; l < n_links; ++l)
        if (ratio_sum[l] > 1.0 + 1e-9) {
            std::ostringstream os;
            os << "link '" << net.links[l].id << "': turning ratios sum to " << ratio_sum[l] << " > 1";
            report(os.str());
        }

    for (const auto& prof : scenario.demand) {
        if (prof.source < 0 || prof.source >= static_cast<int>(net.sources.size())) {
            report("demand profile references a missing source");
            continue;
        }
        double prev = 0.0;
        for (const auto& seg : prof.segments) {
            if (seg.rate < 0.0) report("demand for source '" + net.sources[prof.source].id + "': negative rate");
            if (seg.until <= prev)
                report("demand for source '" + net.sources[prof.source].id + "': segments must be strictly increasing");
            prev = seg.until;
        }
    }

    for (const auto& line : scenario.transit_lines) {
        const std::string where = "transit line '" + line.id + "': ";
        if (!(line.headway > 0.0)) report(where + "headway must be > 0");
        if (line.capacity < 1) report(where + "capacity must be >= 1");
        if (line.dwell_base < 0.0 || line.dwell_per_passenger < 0.0) report(where + "dwell parameters must be >= 0");
        if (line.route.empty()) {
            report(where + "empty route");
            continue;
        }
        bool route_ok = true;
        for (auto l : line.route)
            if (!link_ok(l)) {
                report(where + "route references a missing link");
                route_ok = false;
            }
        if (!route_ok) continue;
        if (net.source_of_link.size() == net.links.size() && net.source_of_link[line.route.front()] == kNone)
            report(where + "first route link has no source");
        for (std::size_t k = 0; k + 1 < line.route.size(); ++k)
            if (net.find_movement(line.route[k], line.route[k + 1]) == kNone)
                report(where + "no movement from '" + net.links[line.route[k]].id + "' to '" +
                       net.links[line.route[k + 1]].id + "'");
        std::size_t cursor = 0;
        for (const auto& stop : line.stops) {
            auto it = std::find(line.route.begin() + static_cast<long>(cursor), line.route.end(), stop.link);
            if (it == line.route.end()) {
                report(where + "stop not on route (or out of order)");
                continue;
            }
            cursor = static_cast<std::size_t>(it - line.route.begin());
            const auto& st = net.links[stop.link].stations;
            if (std::none_of(st.begin(), st.end(), [&](double s) { return std::abs(s - stop.position) < 1e-9; }))
                report(where + "stop at a position that is not a station of link '" + net.links[stop.link].id + "'");
        }
    }

    const auto& cc = scenario.controller;
    if (!(cc.yellow >= 0.0 && cc.lost >= 0.0 && cc.decision_step > cc.yellow + cc.lost))
        report("controller: need decision_step > yellow + lost >= 0");
    if (!(cc.theta >= 0.0)) report("controller: theta must be >= 0");

    const auto& sc = scenario.simulation;
    if (!(sc.dt > 0.0)) report("simulation: dt must be > 0");
    if (sc.dt > 0.0 && cc.decision_step > 0.0) {
        const double ratio = cc.decision_step / sc.dt;
        if (std::abs(ratio - std::round(ratio)) > 1e-9)
            report("simulation: decision_step must be a multiple of dt");
    }
    if (!(sc.horizon > sc.warmup && sc.warmup >= 0.0)) report("simulation: need horizon > warmup >= 0");
    if (sc.penetration < 0.0 || sc.penetration > 1.0) report("simulation: penetration must lie in [0, 1]");
    if (sc.car_occupancy_weights.empty()) report("simulation: empty car occupancy distribution");
    return out;
}

}  // namespace transitmp
