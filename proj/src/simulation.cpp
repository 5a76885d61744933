#include "transitmp/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace transitmp {

double effective_saturation(double saturation, bool switching, double decision_step, double yellow, double lost) {
    if (!switching) return saturation;
    return saturation * (decision_step - yellow - lost) / decision_step;
}

StopService serve_stop(int occupancy, int capacity, int waiting, int alighting, double base, double per_passenger) {
    StopService s;
    s.alighted = std::clamp(alighting, 0, std::max(occupancy - 1, 0));
    const int after_alight = std::max(occupancy - s.alighted, 1);
    const int room = std::max(capacity - after_alight, 0);
    s.boarded = std::clamp(waiting, 0, room);
    s.occupancy = std::clamp(after_alight + s.boarded, 1, std::max(capacity, 1));
    s.dwell = base + per_passenger * (s.boarded + s.alighted);
    return s;
}

bool sample_cv(VehicleClass cls, double penetration, Rng& rng) {
    if (cls == VehicleClass::Transit) return true;
    return rng.bernoulli(penetration);
}

long WorldState::vehicles_on_network() const {
    long n = 0;
    for (const auto& l : links) n += static_cast<long>(l.vehicles.size());
    return n;
}

long WorldState::backlog() const {
    long n = 0;
    for (const auto& s : sources) n += static_cast<long>(s.backlog.size());
    return n;
}

Simulation::Simulation(const Scenario& scenario, std::uint64_t seed, SimulationOptions options)
    : scenario_(scenario),
      options_(std::move(options)),
      demand_rng_(Rng::stream(seed, stream::kDemand)),
      cv_rng_(Rng::stream(seed, stream::kConnected)),
      turn_rng_(Rng::stream(seed, stream::kTurning)),
      passenger_rng_(Rng::stream(seed, stream::kPassengers)),
      occupancy_rng_(Rng::stream(seed, stream::kOccupancy)) {
    const auto& net = scenario_.network;
    if (net.outgoing.size() != net.links.size()) scenario_.network.index();
    world_.links.resize(net.links.size());
    world_.sources.resize(net.sources.size());
    world_.active_phase.assign(net.nodes.size(), 0);
    world_.phase_start.assign(net.nodes.size(), -1e18);
    world_.discharge_credit.assign(net.movements.size(), 0.0);
    world_.tally_window = options_.tally_window;
    world_.tally.resize(net.movements.size());
    for (const auto& line : scenario_.transit_lines) {
        const auto n = line.stops.size();
        world_.waiting.emplace_back(n, std::vector<int>(n, 0));
        world_.next_departure.push_back(line.first_departure);
    }
    last_departures_.assign(net.movements.size(), 0);
}

double Simulation::penetration_for(LinkIndex entry) const {
    if (auto it = options_.link_penetration.find(entry); it != options_.link_penetration.end()) return it->second;
    const auto& link = scenario_.network.links.at(entry);
    if (link.penetration) return *link.penetration;
    if (options_.penetration) return *options_.penetration;
    return scenario_.simulation.penetration;
}

int Simulation::tally_bucket() const {
    return static_cast<int>(std::floor(world_.t / world_.tally_window));
}

namespace {
template <typename T>
T& bucket(std::vector<T>& v, int b) {
    if (static_cast<int>(v.size()) <= b) v.resize(b + 1, T{});
    return v[b];
}
}  // namespace

MovementIndex Simulation::choose_movement(const Vehicle& v, LinkIndex link) {
    const auto& net = scenario_.network;
    if (v.is_transit()) {
        const auto& route = scenario_.transit_lines[v.line].route;
        if (v.route_pos + 1 >= route.size()) return kNone;
        return net.find_movement(route[v.route_pos], route[v.route_pos + 1]);
    }
    const auto& out = net.outgoing[link];
    if (out.empty()) return kNone;
    std::vector<double> weights;
    double sum = 0.0;
    for (auto m : out) {
        weights.push_back(net.movements[m].turning_ratio);
        sum += net.movements[m].turning_ratio;
    }
    weights.push_back(std::max(0.0, 1.0 - sum));
    const auto pick = turn_rng_.categorical(weights);
    return pick < out.size() ? out[pick] : kNone;
}

void Simulation::enter_link(Vehicle& v, LinkIndex link, double when) {
    v.position = 0.0;
    v.link_entry_time = when;
    v.motion = Motion::Moving;
    v.remaining_dwell = 0.0;
    v.movement = choose_movement(v, link);
    if (v.movement != kNone) {
        auto& tally = world_.tally[v.movement];
        const int b = tally_bucket();
        ++bucket(tally.arrivals, b);
        if (v.is_cv) ++bucket(tally.cv_arrivals, b);
        bucket(tally.occupancy_sum, b) += v.occupancy;
    }
}

void Simulation::charge_delay(Vehicle& v, double amount) {
    if (amount <= 0.0) return;
    v.delay += amount;
    auto& c = world_.counters;
    if (v.is_transit()) {
        c.delay_transit += amount;
        c.passenger_delay += amount * v.occupancy;
    } else if (v.is_cv) {
        c.delay_cv += amount;
    } else {
        c.delay_nv += amount;
    }
}

void Simulation::finish(Vehicle&) { ++world_.counters.exited; }

void Simulation::generate_demand() {
    const double dt = scenario_.simulation.dt;
    const auto& weights = scenario_.simulation.car_occupancy_weights;
    for (const auto& prof : scenario_.demand) {
        auto& src = world_.sources[prof.source];
        const double mean = prof.rate_at(world_.t) * dt;
        int n = 0;
        if (scenario_.simulation.demand_mode == DemandMode::Poisson) {
            n = demand_rng_.poisson(mean);
        } else {
            src.demand_credit += mean;
            n = static_cast<int>(std::floor(src.demand_credit + 1e-9));
            src.demand_credit -= n;
        }
        const LinkIndex entry = scenario_.network.sources[prof.source].link;
        const double pen = penetration_for(entry);
        for (int k = 0; k < n; ++k) {
            Vehicle v;
            v.id = world_.next_id++;
            v.cls = VehicleClass::Car;
            v.is_cv = sample_cv(v.cls, pen, cv_rng_);
            v.occupancy = options_.car_occupancy ? *options_.car_occupancy
                                                 : 1 + static_cast<int>(occupancy_rng_.categorical(weights));
            v.generated_at = world_.t;
            auto& c = world_.counters;
            ++c.generated;
            ++(v.is_cv ? c.generated_cv : c.generated_nv);
            src.backlog.push_back(std::move(v));
        }
    }
    for (std::size_t li = 0; li < scenario_.transit_lines.size(); ++li) {
        const auto& line = scenario_.transit_lines[li];
        while (world_.t + 1e-9 >= world_.next_departure[li]) {
            world_.next_departure[li] += line.headway;
            Vehicle v;
            v.id = world_.next_id++;
            v.cls = VehicleClass::Transit;
            v.is_cv = true;
            v.line = static_cast<int>(li);
            v.onboard.assign(line.stops.size() + 1, 0);
            const int riders = std::clamp(line.initial_passengers, 0, std::max(line.capacity - 1, 0));
            v.onboard.back() = riders;
            v.occupancy = 1 + riders;
            v.generated_at = world_.t;
            auto& c = world_.counters;
            ++c.generated;
            ++c.generated_transit;
            c.passengers_carried += v.occupancy;
            const auto src = scenario_.network.source_of_link[line.route.front()];
            world_.sources[src].backlog.push_back(std::move(v));
        }
    }
}

void Simulation::discharge(std::vector<std::vector<Vehicle>>& arrivals, std::vector<int>& inbound) {
    const auto& net = scenario_.network;
    const auto& cc = scenario_.controller;
    const double dt = scenario_.simulation.dt;
    std::fill(last_departures_.begin(), last_departures_.end(), 0);
    for (NodeIndex n = 0; n < static_cast<int>(net.nodes.size()); ++n) {
        const auto& node = net.nodes[n];
        const auto& green = node.phases[world_.active_phase[n]].movements;
        const bool switching = world_.t - world_.phase_start[n] < cc.decision_step - 1e-9;
        for (auto m : node.movements) {
            double& credit = world_.discharge_credit[m];
            if (std::find(green.begin(), green.end(), m) == green.end()) {
                credit = 0.0;
                continue;
            }
            const auto& mv = net.movements[m];
            const double c_eff = effective_saturation(mv.saturation_flow, switching, cc.decision_step, cc.yellow, cc.lost);
            credit = std::min(credit + c_eff * dt, std::max(1.0, c_eff * dt));

            auto& here = world_.links[mv.from].vehicles;
            int queued = 0;
            for (const auto& v : here)
                if (v.movement == m && v.motion == Motion::Queued) ++queued;
            if (queued == 0) continue;

            const auto& out_link = net.links[mv.to];
            const int spare = out_link.storage() - static_cast<int>(world_.links[mv.to].vehicles.size()) - inbound[mv.to];
            const int n_go = std::min({static_cast<int>(std::floor(credit + 1e-9)), queued, std::max(spare, 0)});

            auto& tally = world_.tally[m];
            const int b = tally_bucket();
            bucket(tally.saturated_green, b) += dt;
            bucket(tally.saturated_departures, b) += n_go;
            bucket(tally.departures, b) += n_go;
            if (n_go == 0) continue;

            int moved = 0;
            for (auto it = here.begin(); it != here.end() && moved < n_go;) {
                if (it->movement == m && it->motion == Motion::Queued) {
                    Vehicle v = std::move(*it);
                    it = here.erase(it);
                    if (v.is_transit()) ++v.route_pos;
                    enter_link(v, mv.to, world_.t + dt);
                    arrivals[mv.to].push_back(std::move(v));
                    ++inbound[mv.to];
                    ++moved;
                } else {
                    ++it;
                }
            }
            credit -= n_go;
            last_departures_[m] = n_go;
        }
    }
}

void Simulation::reslot_queues(LinkIndex l) {
    const auto& link = scenario_.network.links[l];
    const double spacing = 1.0 / (link.jam_density * link.lanes);
    auto& vs = world_.links[l].vehicles;
    for (auto m : scenario_.network.outgoing[l]) {
        std::vector<Vehicle*> q;
        for (auto& v : vs)
            if (v.movement == m && v.motion == Motion::Queued) q.push_back(&v);
        std::stable_sort(q.begin(), q.end(), [](const Vehicle* a, const Vehicle* b) { return a->position > b->position; });
        for (std::size_t k = 0; k < q.size(); ++k) {
            const double slot = std::max(0.0, link.length - static_cast<double>(k) * spacing);
            // Transit keeps its forward progress so station-based gating never regresses.
            q[k]->position = q[k]->is_transit() ? std::max(slot, q[k]->position) : slot;
        }
    }
    std::stable_sort(vs.begin(), vs.end(), [](const Vehicle& a, const Vehicle& b) {
        if (a.position != b.position) return a.position > b.position;
        return a.id < b.id;
    });
}

void Simulation::move_vehicles() {
    const auto& net = scenario_.network;
    const double dt = scenario_.simulation.dt;
    std::vector<int> queue_len(net.movements.size(), 0);
    for (LinkIndex l = 0; l < static_cast<int>(net.links.size()); ++l) {
        auto& vs = world_.links[l].vehicles;
        if (vs.empty()) continue;
        const auto& link = net.links[l];
        const double spacing = 1.0 / (link.jam_density * link.lanes);
        const double speed = link.free_flow_speed;
        for (auto m : net.outgoing[l]) queue_len[m] = 0;
        for (const auto& v : vs)
            if (v.motion == Motion::Queued && v.movement != kNone) ++queue_len[v.movement];

        std::vector<char> leaving(vs.size(), 0);
        bool any_exit = false;
        for (std::size_t i = 0; i < vs.size(); ++i) {
            auto& v = vs[i];
            switch (v.motion) {
                case Motion::Queued:
                    charge_delay(v, dt);
                    break;
                case Motion::Dwelling:
                    v.remaining_dwell -= dt;
                    if (v.remaining_dwell <= 1e-9) {
                        v.remaining_dwell = 0.0;
                        v.motion = Motion::Moving;
                        ++v.next_stop;
                    }
                    break;
                case Motion::Moving: {
                    const double x0 = v.position;
                    const double target = x0 + speed * dt;
                    if (v.is_transit()) {
                        const auto& line = scenario_.transit_lines[v.line];
                        if (v.next_stop < line.stops.size() && line.stops[v.next_stop].link == l &&
                            line.stops[v.next_stop].position >= x0 - 1e-9 && target >= line.stops[v.next_stop].position) {
                            const std::size_t k = v.next_stop;
                            auto& waiting = world_.waiting[v.line][k];
                            const int total_waiting = std::accumulate(waiting.begin(), waiting.end(), 0);
                            const auto s = serve_stop(v.occupancy, line.capacity, total_waiting, v.onboard[k],
                                                      line.dwell_base, line.dwell_per_passenger);
                            v.onboard[k] -= s.alighted;
                            int left = s.boarded;
                            for (std::size_t d = k + 1; d < waiting.size() && left > 0; ++d) {
                                const int take = std::min(waiting[d], left);
                                waiting[d] -= take;
                                v.onboard[d] += take;
                                left -= take;
                            }
                            v.occupancy = s.occupancy;
                            world_.counters.passengers_carried += s.boarded;
                            v.position = line.stops[k].position;
                            if (s.dwell > 0.0) {
                                v.motion = Motion::Dwelling;
                                v.remaining_dwell = s.dwell;
                            } else {
                                ++v.next_stop;
                            }
                            break;
                        }
                    }
                    if (v.movement == kNone) {
                        if (target >= link.length) {
                            v.position = link.length;
                            leaving[i] = 1;
                            any_exit = true;
                        } else {
                            v.position = target;
                        }
                        break;
                    }
                    const double back = link.length - queue_len[v.movement] * spacing;
                    if (target >= back) {
                        v.position = std::max(x0, back);
                        v.motion = Motion::Queued;
                        ++queue_len[v.movement];
                        charge_delay(v, dt - std::max(0.0, v.position - x0) / speed);
                    } else {
                        v.position = target;
                    }
                    break;
                }
            }
        }
        if (any_exit) {
            std::vector<Vehicle> kept;
            kept.reserve(vs.size());
            for (std::size_t i = 0; i < vs.size(); ++i) {
                if (leaving[i]) finish(vs[i]);
                else kept.push_back(std::move(vs[i]));
            }
            vs = std::move(kept);
        }
        reslot_queues(l);
    }
}

void Simulation::load_sources(std::vector<std::vector<Vehicle>>& arrivals, std::vector<int>& inbound) {
    const auto& net = scenario_.network;
    const double dt = scenario_.simulation.dt;
    last_blocked_ = 0;
    for (SourceIndex s = 0; s < static_cast<int>(net.sources.size()); ++s) {
        auto& src = world_.sources[s];
        const auto& def = net.sources[s];
        src.service_credit = std::min(src.service_credit + def.saturation_flow * dt, std::max(1.0, def.saturation_flow * dt));
        const int allowance = static_cast<int>(std::floor(src.service_credit + 1e-9));
        const int want = std::min(allowance, static_cast<int>(src.backlog.size()));
        const int spare = net.links[def.link].storage() - static_cast<int>(world_.links[def.link].vehicles.size()) -
                          inbound[def.link];
        const int n_go = std::min(want, std::max(spare, 0));
        for (int k = 0; k < n_go; ++k) {
            Vehicle v = std::move(src.backlog.front());
            src.backlog.pop_front();
            v.route_pos = 0;
            enter_link(v, def.link, world_.t + dt);
            arrivals[def.link].push_back(std::move(v));
            ++inbound[def.link];
        }
        src.service_credit -= n_go;
        if (want > n_go) {
            src.cumulative_blocked += want - n_go;
            last_blocked_ += want - n_go;
        }
        for (auto& v : src.backlog) charge_delay(v, dt);
    }
}

void Simulation::add_passengers() {
    const double dt = scenario_.simulation.dt;
    for (std::size_t li = 0; li < scenario_.transit_lines.size(); ++li) {
        const auto& rates = scenario_.transit_lines[li].passenger_rates;
        for (std::size_t a = 0; a < rates.size(); ++a)
            for (std::size_t b = a + 1; b < rates.size(); ++b)
                if (rates[a][b] > 0.0) world_.waiting[li][a][b] += passenger_rng_.poisson(rates[a][b] * dt);
    }
}

void Simulation::step(const SignalDecision& decision) {
    const auto& net = scenario_.network;
    for (NodeIndex n = 0; n < static_cast<int>(net.nodes.size()); ++n) {
        const int p = n < static_cast<int>(decision.phase.size()) ? decision.phase[n] : world_.active_phase[n];
        if (p < 0 || p >= static_cast<int>(net.nodes[n].phases.size())) continue;
        if (p != world_.active_phase[n]) {
            world_.active_phase[n] = p;
            world_.phase_start[n] = world_.t;
        }
    }

    generate_demand();
    std::vector<std::vector<Vehicle>> arrivals(net.links.size());
    std::vector<int> inbound(net.links.size(), 0);
    discharge(arrivals, inbound);
    move_vehicles();
    load_sources(arrivals, inbound);
    for (LinkIndex l = 0; l < static_cast<int>(net.links.size()); ++l) {
        auto& vs = world_.links[l].vehicles;
        for (auto& v : arrivals[l]) vs.push_back(std::move(v));
    }
    add_passengers();
    world_.t += scenario_.simulation.dt;
    ++world_.step_index;
}

int Simulation::movement_count(MovementIndex m) const {
    const auto& vs = world_.links[scenario_.network.movements[m].from].vehicles;
    return static_cast<int>(std::count_if(vs.begin(), vs.end(), [m](const Vehicle& v) { return v.movement == m; }));
}

int Simulation::movement_queue(MovementIndex m) const {
    const auto& vs = world_.links[scenario_.network.movements[m].from].vehicles;
    return static_cast<int>(std::count_if(vs.begin(), vs.end(), [m](const Vehicle& v) {
        return v.movement == m && v.motion == Motion::Queued;
    }));
}

int Simulation::link_count(LinkIndex l) const { return static_cast<int>(world_.links[l].vehicles.size()); }

std::vector<Violation> Simulation::necessary_condition_monitor() const {
    std::vector<Violation> out;
    const auto& net = scenario_.network;
    for (NodeIndex n = 0; n < static_cast<int>(net.nodes.size()); ++n) {
        const auto& phases = net.nodes[n].phases;
        for (int p = 0; p < static_cast<int>(phases.size()); ++p) {
            if (phases[p].movements.empty()) continue;
            bool all = true;
            for (auto m : phases[p].movements) {
                const auto from = net.movements[m].from;
                const auto& vs = world_.links[from].vehicles;
                const bool jammed = static_cast<int>(vs.size()) >= net.links[from].storage();
                const bool no_cv = std::none_of(vs.begin(), vs.end(),
                                                [m](const Vehicle& v) { return v.movement == m && v.is_cv; });
                if (!(jammed && no_cv)) {
                    all = false;
                    break;
                }
            }
            if (all) out.push_back({n, p, world_.t});
        }
    }
    return out;
}

void Simulation::write_snapshot_header(std::ostream& os) const {
    const auto& net = scenario_.network;
    os << "step,t";
    for (const auto& m : net.movements) os << ',' << m.id << "_count";
    for (const auto& m : net.movements) os << ',' << m.id << "_cv";
    for (const auto& n : net.nodes) os << ',' << n.id << "_phase";
    os << '\n';
}

void Simulation::write_snapshot_row(std::ostream& os) const {
    const auto& net = scenario_.network;
    std::vector<int> count(net.movements.size(), 0), cv(net.movements.size(), 0);
    for (const auto& l : world_.links)
        for (const auto& v : l.vehicles)
            if (v.movement != kNone) {
                ++count[v.movement];
                if (v.is_cv) ++cv[v.movement];
            }
    os << world_.step_index << ',' << world_.t;
    for (int c : count) os << ',' << c;
    for (int c : cv) os << ',' << c;
    for (int p : world_.active_phase) os << ',' << p;
    os << '\n';
}

}  // namespace transitmp
