#include "poisonlab/attacker.hpp"

#include "poisonlab/csv.hpp"
#include "poisonlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace poisonlab {

void AttackConfig::validate() const {
    if (start < 0) throw ConfigError("attack start must be non-negative");
    if (max_concurrent < 0) throw ConfigError("attack max_concurrent must be non-negative");
    if (min_headway < 0.0) throw ConfigError("attack min_headway must be non-negative");
    if (!(initial_speed_factor > 0.0 && initial_speed_factor <= 1.0))
        throw ConfigError("attack initial_speed_factor must lie in (0, 1]");
    if (const auto* f = std::get_if<FixedRate>(&policy); f && f->vph < 0.0)
        throw ConfigError("attack rate must be non-negative");
    if (const auto* c = std::get_if<ControllerAware>(&policy); c && (c->margin < 0.0 || c->max_rate_vph < 0.0))
        throw ConfigError("controller-aware margin and rate must be non-negative");
}

std::string_view to_string(AttackMode m) { return m == AttackMode::Physical ? "physical" : "phantom"; }

bool can_insert(const RoadNetwork& net, EdgeId entry, const Occupancy& merged, double initial_speed,
                const CarFollowingParams& p, double lookahead) {
    if (!entry_cell_clear(merged, entry, p.length + p.min_gap)) return false;
    Follower f{entry, p.length, initial_speed, Turn::Through, std::nullopt, Turn::Through, false, std::nullopt};
    auto leader = find_leader(net, merged, f, {}, p, lookahead);
    if (!leader || leader->is_virtual()) return true;
    double v_safe = krauss_safe_speed(initial_speed, leader->speed, std::max(0.0, leader->gap - p.min_gap), p);
    return v_safe >= initial_speed;
}

Occupancy occupancy_from(const RoadNetwork& net, std::span<const BsmRecord> records,
                         std::span<const VehicleState> extras, double assumed_length) {
    Occupancy occ(net.edges().size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const BsmRecord& r = records[i];
        occ.add({r.edge, r.position, r.speed, assumed_length, r.intent, i});
    }
    for (std::size_t k = 0; k < extras.size(); ++k) {
        const VehicleState& v = extras[k];
        occ.add({v.edge(), v.position, v.speed, v.length, intent_of(net, v), records.size() + k});
    }
    occ.finalize();
    return occ;
}

void write_attack_header(std::ostream& os) { os << "t,fake_id,action,mode,policy_state\n"; }

void write_attack_row(std::ostream& os, const AttackEvent& e) {
    os << e.t << ',' << e.fake_id << ',' << (e.action == AttackAction::Inject ? "inject" : "despawn") << ','
       << to_string(e.mode) << ',' << e.policy_state << '\n';
}

std::vector<AttackEvent> read_attack_log(const std::string& path) {
    csv::Table table = csv::read(path);
    std::vector<AttackEvent> out;
    for (const auto& row : table.rows) {
        AttackEvent e;
        e.t = csv::to_int(row[0]);
        e.fake_id = static_cast<std::uint32_t>(csv::to_int(row[1]));
        e.action = row[2] == "inject" ? AttackAction::Inject : AttackAction::Despawn;
        e.mode = row[3] == "physical" ? AttackMode::Physical : AttackMode::Phantom;
        e.policy_state = row[4];
        out.push_back(std::move(e));
    }
    return out;
}

Attacker::Attacker(const RoadNetwork& net, AttackConfig config, CarFollowingParams car)
    : net_(&net), config_(config), car_(car) {
    config_.validate();
    NodeId node = config_.target_node.value_or(net.subject());
    const Approach& approach = net.approach(node, config_.target_approach);
    route_ = approach.edges;
    auto out = net.next_edge(route_.back(), Turn::Through);
    if (!out) throw ConfigError("target approach has no through movement");
    route_.push_back(*out);
}

Movement Attacker::target_movement() const { return *signal_movement({config_.target_approach, Turn::Through}); }

std::optional<FakeVehiclePlan> Attacker::plan_injection(const AawtVector& aawt, std::int64_t t,
                                                        const Occupancy& merged, int active_fakes) {
    if (t < config_.start) {
        policy_state_ = "idle";
        return std::nullopt;
    }
    double spacing = config_.min_headway;
    bool wanted = false;
    char state[96];
    if (const auto* fixed = std::get_if<FixedRate>(&config_.policy)) {
        if (fixed->vph <= 0.0) return std::nullopt;
        spacing = std::max(spacing, 3600.0 / fixed->vph);
        wanted = true;
        std::snprintf(state, sizeof state, "fixed_vph=%g", fixed->vph);
    } else {
        const auto& aware = std::get<ControllerAware>(config_.policy);
        if (aware.max_rate_vph <= 0.0) return std::nullopt;
        spacing = std::max(spacing, 3600.0 / aware.max_rate_vph);
        const Movement target = target_movement();
        double best_other = 0.0;
        for (Movement m : kAllMovements) {
            if (m != target) best_other = std::max(best_other, aawt[index_of(m)]);
        }
        wanted = aawt[index_of(target)] >= best_other - aware.margin;
        std::snprintf(state, sizeof state, "target=%.3f;best_other=%.3f;need=%d", aawt[index_of(target)],
                      best_other, wanted ? 1 : 0);
    }
    policy_state_ = state;

    if (!wanted) return std::nullopt;
    if (active_fakes >= config_.max_concurrent) return std::nullopt;
    if (last_injection_ && static_cast<double>(t - *last_injection_) < spacing) return std::nullopt;

    const Edge& entry = net_->edge(route_.front());
    const double v0 = config_.initial_speed_factor * entry.speed_limit;
    if (!can_insert(*net_, entry.id, merged, v0, car_)) return std::nullopt;

    FakeVehiclePlan plan;
    plan.t = t;
    plan.initial_speed = v0;
    plan.route = route_;
    plan.vehicle.id = {Provenance::Fake, next_serial_};
    plan.vehicle.route = route_;
    plan.vehicle.position = car_.length;
    plan.vehicle.speed = v0;
    plan.vehicle.length = car_.length;
    plan.vehicle.min_gap = car_.min_gap;
    plan.vehicle.entry_time = static_cast<double>(t);
    return plan;
}

void Attacker::commit(const FakeVehiclePlan& plan) {
    last_injection_ = plan.t;
    next_serial_ = std::max(next_serial_, plan.vehicle.id.serial + 1);
    events_.push_back({plan.t, temporary_id(plan.vehicle.id), AttackAction::Inject, config_.mode, policy_state_});
    if (config_.mode == AttackMode::Phantom) phantoms_.push_back(plan.vehicle);
}

void Attacker::record_despawn(std::int64_t t, VehicleId id) {
    events_.push_back({t, temporary_id(id), AttackAction::Despawn, config_.mode, policy_state_});
}

void Attacker::advance_fakes(std::span<const BsmRecord> real, std::span<const RightOfWay> signals, double dt,
                             std::int64_t t) {
    const std::size_t n = phantoms_.size();
    if (n == 0) return;
    const std::size_t base = real.size();

    for (VehicleState& v : phantoms_) {
        if (v.committed || !net_->ends_at_signal(v.edge())) continue;
        const Edge& e = net_->edge(v.edge());
        SignalColor c = signals[e.to].color_of(Maneuver{e.heading, intent_of(*net_, v)});
        if (c == SignalColor::Yellow && !stop_line_barred(c, false, v.speed, e.length - v.position, car_.decel))
            v.committed = true;
    }

    const Occupancy occ = occupancy_from(*net_, real, phantoms_, car_.length);
    std::vector<std::optional<Leader>> leaders(n);
    std::vector<double> next_speed(n);
    for (std::size_t k = 0; k < n; ++k) {
        const VehicleState& v = phantoms_[k];
        Follower f{v.edge(), v.position, v.speed, intent_of(*net_, v), v.next_edge(), Turn::Through, v.committed,
                   base + k};
        leaders[k] = find_leader(*net_, occ, f, signals, car_, 150.0);
        double v_safe = std::numeric_limits<double>::infinity();
        if (const auto& l = leaders[k]) {
            double gap = l->is_virtual() ? l->gap : l->gap - v.min_gap;
            v_safe = krauss_safe_speed(v.speed, l->speed, std::max(0.0, gap), car_);
        }
        double vn = std::min({v.speed + car_.accel * dt, v_safe, net_->edge(v.edge()).speed_limit});
        next_speed[k] = std::max({0.0, vn, v.speed - car_.decel * dt});
    }

    // Leader-first resolution among fakes; real vehicles are treated as
    // already at their reported positions.
    std::vector<double> travel(n, -1.0);
    std::vector<std::size_t> stack;
    for (std::size_t root = 0; root < n; ++root) {
        if (travel[root] >= 0.0) continue;
        stack.push_back(root);
        while (!stack.empty()) {
            std::size_t k = stack.back();
            const auto& l = leaders[k];
            bool fake_leader = l && l->index && *l->index >= base;
            if (fake_leader && travel[*l->index - base] < 0.0) {
                stack.push_back(*l->index - base);
                continue;
            }
            double d = next_speed[k] * dt;
            if (l) {
                double room = l->gap;
                if (fake_leader) room += travel[*l->index - base];
                d = std::min(d, std::max(0.0, room));
            }
            travel[k] = d;
            stack.pop_back();
        }
    }

    std::vector<VehicleState> kept;
    kept.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        VehicleState v = phantoms_[k];
        v.speed = travel[k] / dt;
        v.position += travel[k];
        bool gone = false;
        while (v.position > net_->edge(v.edge()).length) {
            if (!v.next_edge()) {
                gone = true;
                break;
            }
            v.position -= net_->edge(v.edge()).length;
            ++v.route_index;
            v.committed = false;
        }
        update_waiting(v, dt);
        if (gone) record_despawn(t, v.id);
        else kept.push_back(std::move(v));
    }
    phantoms_ = std::move(kept);
}

std::vector<BsmRecord> Attacker::fake_bsms(std::int64_t t_bsm, WaitingSemantics semantics) const {
    std::vector<BsmRecord> out;
    out.reserve(phantoms_.size());
    for (const VehicleState& v : phantoms_) out.push_back(emit_bsm(*net_, v, t_bsm, semantics));
    return out;
}

} // namespace poisonlab
