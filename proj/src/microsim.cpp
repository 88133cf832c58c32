#include "poisonlab/microsim.hpp"

#include "poisonlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace poisonlab {

void CarFollowingParams::validate() const {
    if (!(accel > 0.0) || !(decel > 0.0) || !(tau > 0.0))
        throw ConfigError("car following: accel, decel and tau must be positive");
    if (!(sigma >= 0.0 && sigma <= 1.0)) throw ConfigError("car following: sigma must lie in [0, 1]");
    if (!(length > 0.0) || !(min_gap >= 0.0)) throw ConfigError("car following: bad vehicle length or min gap");
}

void TurnSplit::validate() const {
    if (through < 0.0 || left < 0.0 || right < 0.0) throw ConfigError("turn split: negative share");
    if (std::abs(through + left + right - 1.0) > 1e-9) throw ConfigError("turn split: shares must sum to 1");
}

Turn TurnSplit::sample(double u) const {
    if (u < left) return Turn::Left;
    if (u < left + right) return Turn::Right;
    return Turn::Through;
}

void SimulationParams::validate() const {
    if (!(dt > 0.0) || dt > 1.0) throw ConfigError("dt must lie in (0, 1]");
    double per_second = 1.0 / dt;
    if (std::abs(per_second - std::round(per_second)) > 1e-9)
        throw ConfigError("dt must divide one second evenly");
    car.validate();
    demand.split.validate();
    if (demand.vph_per_entry < 0.0) throw ConfigError("demand must be non-negative");
    if (demand.vph_per_entry / 3600.0 * dt > 1.0) throw ConfigError("demand exceeds one arrival per step");
    if (!(lookahead > 0.0)) throw ConfigError("lookahead must be positive");
}

double krauss_safe_speed(double v_follower, double v_leader, double gap, const CarFollowingParams& p) {
    const double v_mean = 0.5 * (v_follower + v_leader);
    const double v_safe = v_leader + (gap - v_leader * p.tau) / (v_mean / p.decel + p.tau);
    return std::max(0.0, v_safe);
}

void update_waiting(VehicleState& v, double dt) {
    if (v.speed <= kWaitingSpeedThreshold) {
        v.waiting_timer += dt;
        v.cumulative_waiting += dt;
    } else {
        v.waiting_timer = 0.0;
    }
}

Lane target_lane(const Edge& edge, Turn intent) {
    return (intent == Turn::Left && edge.left_pocket > 0.0) ? Lane::Pocket : Lane::Main;
}

Lane physical_lane(const Edge& edge, double position, Turn intent) {
    if (target_lane(edge, intent) == Lane::Pocket && position >= edge.pocket_start()) return Lane::Pocket;
    return Lane::Main;
}

Turn intent_of(const RoadNetwork& net, const VehicleState& v) {
    auto next = v.next_edge();
    if (!next) return Turn::Through;
    auto t = turn_between(net.edge(v.edge()).heading, net.edge(*next).heading);
    return t.value_or(Turn::Through);
}

void Occupancy::add(const Occupant& o) { by_edge_.at(o.edge).push_back(o); }

void Occupancy::finalize() {
    for (auto& lane : by_edge_) {
        std::stable_sort(lane.begin(), lane.end(),
                         [](const Occupant& a, const Occupant& b) { return a.position < b.position; });
    }
}

bool stop_line_barred(SignalColor color, bool committed, double speed, double distance, double decel) {
    if (committed) return false;
    switch (color) {
    case SignalColor::Green: return false;
    case SignalColor::Red: return true;
    case SignalColor::Yellow: return speed * speed / (2.0 * decel) <= distance;
    }
    return true;
}

namespace {

/// A follower in the shared section is blocked by any body still reaching
/// into that section, whichever lane its front has taken.
bool in_followers_lane(const Edge& edge, const Occupant& o, Lane follower_target, bool follower_shared) {
    Lane lane = physical_lane(edge, o.position, o.intent);
    bool shared_section = lane == Lane::Main && o.position < edge.pocket_start();
    if (follower_shared && o.position - o.length < edge.pocket_start()) return true;
    return shared_section || lane == follower_target;
}

} // namespace

std::optional<Leader> find_leader(const RoadNetwork& net, const Occupancy& occupancy, const Follower& f,
                                  std::span<const RightOfWay> signals, const CarFollowingParams& p,
                                  double lookahead) {
    const Edge& edge = net.edge(f.edge);
    const Lane target = target_lane(edge, f.intent);

    for (const Occupant& o : occupancy.on(f.edge)) {
        if (f.self && o.index == *f.self) continue;
        if (o.position <= f.position) continue;
        if (!in_followers_lane(edge, o, target, f.position < edge.pocket_start())) continue;
        return Leader{o.index, o.position - o.length - f.position, o.speed};
    }

    const double to_end = edge.length - f.position;
    if (net.ends_at_signal(f.edge)) {
        SignalColor color = signals.empty() ? SignalColor::Green
                                            : signals[edge.to].color_of(Maneuver{edge.heading, f.intent});
        if (stop_line_barred(color, f.committed, f.speed, to_end, p.decel)) return Leader{std::nullopt, to_end, 0.0};
    }

    if (f.next_edge && to_end < lookahead) {
        const Edge& next = net.edge(*f.next_edge);
        const Lane next_target = target_lane(next, f.next_intent);
        for (const Occupant& o : occupancy.on(next.id)) {
            if (f.self && o.index == *f.self) continue;
            if (!in_followers_lane(next, o, next_target, true)) continue;
            double gap = to_end + o.position - o.length;
            if (gap > lookahead) break;
            return Leader{o.index, gap, o.speed};
        }
    }
    return std::nullopt;
}

std::vector<EdgeId> sample_route(const RoadNetwork& net, EdgeId entry, const TurnSplit& split,
                                 const SeededStream& stream, std::uint64_t serial) {
    std::vector<EdgeId> route{entry};
    std::uint64_t hop = 0;
    while (net.ends_at_signal(route.back())) {
        Turn t = split.sample(stream.uniform(SeededStream::Route, serial, hop++));
        auto next = net.next_edge(route.back(), t);
        if (!next) throw LookupError("route sampling hit a missing turn");
        route.push_back(*next);
    }
    return route;
}

std::vector<VehicleState> spawn_arrivals(const RoadNetwork& net, const SeededStream& stream,
                                         const DemandConfig& demand, std::int64_t step_index, double dt,
                                         std::uint64_t& next_serial, const CarFollowingParams& p) {
    std::vector<VehicleState> out;
    const double prob = demand.vph_per_entry / 3600.0 * dt;
    if (prob <= 0.0) return out;
    for (EdgeId entry : net.entries()) {
        double u = stream.uniform(SeededStream::Arrival, entry, static_cast<std::uint64_t>(step_index));
        if (u >= prob) continue;
        VehicleState v;
        v.id = {Provenance::Real, next_serial++};
        v.route = sample_route(net, entry, demand.split, stream, v.id.serial);
        v.length = p.length;
        v.min_gap = p.min_gap;
        v.entry_time = static_cast<double>(step_index) * dt;
        out.push_back(std::move(v));
    }
    return out;
}

bool entry_cell_clear(const Occupancy& occupancy, EdgeId edge, double cell_length) {
    for (const Occupant& o : occupancy.on(edge)) {
        if (o.position - o.length < cell_length) return false;
    }
    return true;
}

World::World(const RoadNetwork& net, SimulationParams params, std::uint64_t seed)
    : net_(&net), params_(params), stream_(seed), insertion_queues_(net.entries().size()) {
    params_.validate();
}

std::size_t World::pending_insertions() const {
    std::size_t n = 0;
    for (const auto& q : insertion_queues_) n += q.size();
    return n;
}

Occupancy World::occupancy() const {
    Occupancy occ(net_->edges().size());
    for (std::size_t i = 0; i < vehicles_.size(); ++i) {
        const VehicleState& v = vehicles_[i];
        occ.add({v.edge(), v.position, v.speed, v.length, intent_of(*net_, v), i});
    }
    occ.finalize();
    return occ;
}

Follower World::follower_of(const VehicleState& v, std::optional<std::size_t> self) const {
    Follower f{v.edge(), v.position, v.speed, intent_of(*net_, v), v.next_edge(), Turn::Through, v.committed, self};
    if (v.route_index + 2 < v.route.size()) {
        auto t = turn_between(net_->edge(v.route[v.route_index + 1]).heading,
                              net_->edge(v.route[v.route_index + 2]).heading);
        f.next_intent = t.value_or(Turn::Through);
    }
    return f;
}

std::optional<Leader> World::leader_of(std::size_t index, std::span<const RightOfWay> signals) const {
    Occupancy occ = occupancy();
    return find_leader(*net_, occ, follower_of(vehicles_.at(index), index), signals, params_.car,
                       params_.lookahead);
}

void World::insert_vehicle(VehicleState v) {
    if (v.route.empty()) throw ConfigError("inserted vehicle has an empty route");
    vehicles_.push_back(std::move(v));
    ++entered_;
}

bool World::try_insert(const VehicleState& candidate, const Occupancy& occ) {
    const Edge& entry = net_->edge(candidate.route.front());
    if (!entry_cell_clear(occ, entry.id, candidate.length + candidate.min_gap)) return false;
    VehicleState v = candidate;
    v.position = v.length;
    double speed = entry.speed_limit;
    Follower f = follower_of(v, std::nullopt);
    auto leader = find_leader(*net_, occ, f, {}, params_.car, params_.lookahead);
    if (leader && !leader->is_virtual()) {
        speed = std::min(speed, krauss_safe_speed(speed, leader->speed,
                                                  std::max(0.0, leader->gap - v.min_gap), params_.car));
    }
    v.speed = speed;
    vehicles_.push_back(std::move(v));
    ++entered_;
    return true;
}

void World::step(std::span<const RightOfWay> signals) {
    const CarFollowingParams& p = params_.car;
    const double dt = params_.dt;
    const std::size_t n = vehicles_.size();
    exited_last_.clear();

    // Yellow-onset decisions: vehicles that cannot stop in time clear the line.
    for (VehicleState& v : vehicles_) {
        if (v.committed || !net_->ends_at_signal(v.edge())) continue;
        const Edge& e = net_->edge(v.edge());
        SignalColor c = signals[e.to].color_of(Maneuver{e.heading, intent_of(*net_, v)});
        if (c == SignalColor::Yellow && !stop_line_barred(c, false, v.speed, e.length - v.position, p.decel))
            v.committed = true;
    }

    const Occupancy occ = occupancy();
    std::vector<std::optional<Leader>> leaders(n);
    std::vector<double> to_stop_line(n, std::numeric_limits<double>::infinity());
    std::vector<double> next_speed(n);
    for (std::size_t i = 0; i < n; ++i) {
        const VehicleState& v = vehicles_[i];
        Follower f = follower_of(v, i);
        leaders[i] = find_leader(*net_, occ, f, signals, p, params_.lookahead);
        const Edge& e = net_->edge(v.edge());
        if (net_->ends_at_signal(e.id)) {
            SignalColor c = signals[e.to].color_of(Maneuver{e.heading, f.intent});
            if (stop_line_barred(c, v.committed, v.speed, e.length - v.position, p.decel))
                to_stop_line[i] = e.length - v.position;
        }

        double v_safe = std::numeric_limits<double>::infinity();
        if (const auto& l = leaders[i]) {
            double gap = l->is_virtual() ? l->gap : l->gap - v.min_gap;
            v_safe = krauss_safe_speed(v.speed, l->speed, std::max(0.0, gap), p);
        }
        const std::uint64_t key = (static_cast<std::uint64_t>(v.id.provenance) << 63) ^ v.id.serial;
        const double eta = stream_.uniform(SeededStream::Dawdle, key, static_cast<std::uint64_t>(step_index_));
        double v_next = std::min({v.speed + p.accel * dt, v_safe, e.speed_limit});
        next_speed[i] = std::max(0.0, v_next - p.sigma * p.accel * eta * dt);
    }

    // Resolve travel distances leader-first so no follower overruns the
    // leader's new rear bumper.
    std::vector<double> travel(n, -1.0);
    std::vector<std::size_t> stack;
    for (std::size_t root = 0; root < n; ++root) {
        if (travel[root] >= 0.0) continue;
        stack.push_back(root);
        while (!stack.empty()) {
            std::size_t i = stack.back();
            const auto& l = leaders[i];
            if (l && l->index && travel[*l->index] < 0.0) {
                stack.push_back(*l->index);
                continue;
            }
            double d = next_speed[i] * dt;
            if (l) {
                double room = l->is_virtual() ? l->gap : l->gap + travel[*l->index];
                d = std::min(d, std::max(0.0, room));
            }
            d = std::min(d, to_stop_line[i]);
            travel[i] = std::max(0.0, d);
            stack.pop_back();
        }
    }

    std::vector<bool> gone(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        VehicleState& v = vehicles_[i];
        v.speed = travel[i] / dt;
        v.position += travel[i];
        while (v.position > net_->edge(v.edge()).length) {
            if (!v.next_edge()) {
                gone[i] = true;
                break;
            }
            v.position -= net_->edge(v.edge()).length;
            ++v.route_index;
            v.committed = false;
        }
        update_waiting(v, dt);
    }

    std::vector<VehicleState> kept;
    kept.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (gone[i]) {
            exited_last_.push_back(std::move(vehicles_[i]));
            ++exited_;
        } else {
            kept.push_back(std::move(vehicles_[i]));
        }
    }
    vehicles_ = std::move(kept);
    ++step_index_;

    auto arrivals = spawn_arrivals(*net_, stream_, params_.demand, step_index_, dt, next_serial_, p);
    const auto& entries = net_->entries();
    for (VehicleState& a : arrivals) {
        auto it = std::find(entries.begin(), entries.end(), a.route.front());
        insertion_queues_[static_cast<std::size_t>(it - entries.begin())].push_back(std::move(a));
    }
    Occupancy after = occupancy();
    for (auto& queue : insertion_queues_) {
        if (queue.empty()) continue;
        if (try_insert(queue.front(), after)) {
            const VehicleState& v = vehicles_.back();
            after.add({v.edge(), v.position, v.speed, v.length, intent_of(*net_, v), vehicles_.size() - 1});
            after.finalize();
            queue.pop_front();
        }
    }
}

} // namespace poisonlab
