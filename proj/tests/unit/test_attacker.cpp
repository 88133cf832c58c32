#include <doctest.h>

#include "poisonlab/attacker.hpp"
#include "poisonlab/errors.hpp"

#include <algorithm>

using namespace poisonlab;

namespace {

RoadNetwork default_net() { return RoadNetwork::build_arterial(GeometryConfig{}); }

Occupancy empty_occupancy(const RoadNetwork& net) {
    Occupancy o(net.edges().size());
    o.finalize();
    return o;
}

AawtVector eb_vs_other(double eb, double other) {
    AawtVector a{};
    a[index_of(Movement::EBT)] = eb;
    a[index_of(Movement::NBT)] = other;
    return a;
}

std::vector<RightOfWay> signals(const RoadNetwork& net, SignalColor c) {
    return std::vector<RightOfWay>(net.nodes().size(), RightOfWay::all(c));
}

} // namespace

TEST_CASE("insertion check: empty edge, blocked cell, safe leader") {
    RoadNetwork net = default_net();
    CarFollowingParams p;
    EdgeId entry = net.edge_by_name("J0-J1");
    CHECK(can_insert(net, entry, empty_occupancy(net), 10.0, p));

    Occupancy blocked(net.edges().size());
    blocked.add({entry, 7.0, 0.0, 5.0, Turn::Through, 0});
    blocked.finalize();
    CHECK_FALSE(can_insert(net, entry, blocked, 10.0, p));

    Occupancy ahead(net.edges().size());
    ahead.add({entry, 5.0 + 50.0 + 5.0, 10.0, 5.0, Turn::Through, 0});
    ahead.finalize();
    // Oracle: follower front at 5 m, leader rear at 55 m, net gap 50 - 2.5.
    const double g = 47.5, v = 10.0;
    const double v_safe = v + (g - v * p.tau) / (v / p.decel + p.tau);
    REQUIRE(v_safe >= v);
    CHECK(can_insert(net, entry, ahead, 10.0, p));

    Occupancy close(net.edges().size());
    close.add({entry, 20.0, 0.0, 5.0, Turn::Through, 0});
    close.finalize();
    CHECK_FALSE(can_insert(net, entry, close, 10.0, p));
}

TEST_CASE("no injection before the attack start") {
    RoadNetwork net = default_net();
    Attacker a(net, AttackConfig{}, CarFollowingParams{});
    CHECK_FALSE(a.plan_injection(eb_vs_other(9.8, 10.0), 399, empty_occupancy(net), 0).has_value());
    CHECK(a.policy_state() == "idle");
}

TEST_CASE("controller-aware policy injects when the target is within the margin") {
    RoadNetwork net = default_net();
    Attacker a(net, AttackConfig{}, CarFollowingParams{});
    auto plan = a.plan_injection(eb_vs_other(9.8, 10.0), 400, empty_occupancy(net), 0);
    REQUIRE(plan.has_value());
    CHECK(plan->vehicle.id.provenance == Provenance::Fake);
    CHECK(plan->route.front() == net.approach(net.subject(), Heading::East).edges.front());
    CHECK(plan->initial_speed == doctest::Approx(0.8 * 13.89));

    Attacker b(net, AttackConfig{}, CarFollowingParams{});
    CHECK_FALSE(b.plan_injection(eb_vs_other(9.4, 10.0), 400, empty_occupancy(net), 0).has_value());
}

TEST_CASE("concurrency cap and headway") {
    RoadNetwork net = default_net();
    AttackConfig cfg;
    cfg.max_concurrent = 2;
    Attacker a(net, cfg, CarFollowingParams{});
    CHECK_FALSE(a.plan_injection(eb_vs_other(10, 1), 500, empty_occupancy(net), 2).has_value());
    auto p = a.plan_injection(eb_vs_other(10, 1), 500, empty_occupancy(net), 0);
    REQUIRE(p);
    a.commit(*p);
    // 360 vph cap: 10 s spacing.
    CHECK_FALSE(a.plan_injection(eb_vs_other(10, 1), 505, empty_occupancy(net), 1).has_value());
    CHECK(a.plan_injection(eb_vs_other(10, 1), 510, empty_occupancy(net), 1).has_value());
    REQUIRE(a.events().size() == 1);
    CHECK(a.events()[0].action == AttackAction::Inject);
    CHECK(a.events()[0].t == 500);
}

TEST_CASE("fixed-rate policy spaces injections by 3600/vph") {
    RoadNetwork net = default_net();
    AttackConfig cfg;
    cfg.policy = FixedRate{120.0};
    Attacker a(net, cfg, CarFollowingParams{});
    std::vector<std::int64_t> times;
    for (std::int64_t t = 400; t < 520; ++t) {
        if (auto p = a.plan_injection({}, t, empty_occupancy(net), 0)) {
            a.commit(*p);
            times.push_back(t);
        }
    }
    CHECK(times == std::vector<std::int64_t>{400, 430, 460, 490});
}

TEST_CASE("phantom fake without a leader accelerates to the limit") {
    RoadNetwork net = default_net();
    AttackConfig cfg;
    cfg.mode = AttackMode::Phantom;
    CarFollowingParams car;
    Attacker a(net, cfg, car);
    auto p = a.plan_injection(eb_vs_other(10, 1), 400, empty_occupancy(net), 0);
    REQUIRE(p);
    a.commit(*p);
    auto green = signals(net, SignalColor::Green);
    a.advance_fakes({}, green, 1.0, 401);
    REQUIRE(a.phantoms().size() == 1);
    CHECK(a.phantoms()[0].speed == doctest::Approx(0.8 * 13.89 + 2.6));
    a.advance_fakes({}, green, 1.0, 402);
    CHECK(a.phantoms()[0].speed == doctest::Approx(13.89));
}

TEST_CASE("phantom fake queues behind a stopped real vehicle and accrues waiting") {
    RoadNetwork net = default_net();
    AttackConfig cfg;
    cfg.mode = AttackMode::Phantom;
    Attacker a(net, cfg, CarFollowingParams{});
    auto p = a.plan_injection(eb_vs_other(10, 1), 400, empty_occupancy(net), 0);
    REQUIRE(p);
    a.commit(*p);
    BsmRecord tail;
    tail.edge = net.edge_by_name("J0-J1");
    tail.position = 300.0;
    tail.speed = 0.0;
    auto red = signals(net, SignalColor::Red);
    for (std::int64_t t = 401; t < 460; ++t) {
        tail.t = t;
        a.advance_fakes(std::span<const BsmRecord>(&tail, 1), red, 1.0, t);
    }
    REQUIRE(a.phantoms().size() == 1);
    const VehicleState& f = a.phantoms()[0];
    CHECK(f.speed <= kWaitingSpeedThreshold);
    CHECK(f.waiting_timer > 10.0);
    CHECK(300.0 - 5.0 - f.position >= 0.0);
    auto bsm = a.fake_bsms(460);
    REQUIRE(bsm.size() == 1);
    CHECK(bsm[0].waiting == f.waiting_timer);
}

TEST_CASE("phantom platoon never overlaps over 500 steps") {
    RoadNetwork net = default_net();
    AttackConfig cfg;
    cfg.mode = AttackMode::Phantom;
    cfg.policy = FixedRate{720.0};
    Attacker a(net, cfg, CarFollowingParams{});
    bool ok = true;
    for (std::int64_t t = 400; t < 900; ++t) {
        // Alternate red and green every 30 s at the subject.
        auto sig = signals(net, ((t / 30) % 2) ? SignalColor::Green : SignalColor::Red);
        a.advance_fakes({}, sig, 1.0, t);
        Occupancy occ = occupancy_from(net, {}, a.phantoms(), 5.0);
        if (auto p = a.plan_injection({}, t, occ, static_cast<int>(a.phantoms().size()))) a.commit(*p);
        std::vector<std::pair<EdgeId, double>> pos;
        for (const auto& v : a.phantoms()) pos.emplace_back(v.edge(), v.position);
        std::sort(pos.begin(), pos.end());
        for (std::size_t i = 1; i < pos.size(); ++i) {
            if (pos[i].first == pos[i - 1].first && pos[i].second - 5.0 - pos[i - 1].second < -1e-9) ok = false;
        }
    }
    CHECK(ok);
    int despawns = 0;
    for (const auto& e : a.events()) despawns += e.action == AttackAction::Despawn ? 1 : 0;
    CHECK(despawns > 0);
}

TEST_CASE("attack config validation") {
    AttackConfig c;
    c.initial_speed_factor = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.policy = FixedRate{-1.0};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.start = -5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}
