#include <doctest.h>

#include "poisonlab/atsc.hpp"
#include "poisonlab/errors.hpp"

#include <random>

using namespace poisonlab;

namespace {

MovementStats stats_with(Movement m, int n, double awt) {
    MovementStats s;
    s.counts[index_of(m)] = n;
    s.awt[index_of(m)] = awt;
    return s;
}

AawtVector only(std::initializer_list<std::pair<Movement, double>> v) {
    AawtVector a{};
    for (auto [m, x] : v) a[index_of(m)] = x;
    return a;
}

} // namespace

TEST_CASE("AAWT is AWT over count, zero when empty") {
    CHECK(compute_aawt(stats_with(Movement::EBT, 3, 30.0), Movement::EBT) == 10.0);
    CHECK(compute_aawt(stats_with(Movement::EBT, 0, 0.0), Movement::EBT) == 0.0);
    CHECK(compute_aawt(stats_with(Movement::EBT, 4, 30.0), Movement::EBT) == 7.5);
}

TEST_CASE("select_green argmax and tie rules") {
    CHECK(select_green(only({{Movement::EBT, 10}}), Movement::NBT) == Movement::EBT);
    CHECK(select_green(only({{Movement::EBT, 10}, {Movement::WBT, 10}}), Movement::EBT) == Movement::EBT);
    CHECK(select_green(only({{Movement::EBT, 10}, {Movement::WBT, 10}}), Movement::SBL) == Movement::EBT);
    CHECK(select_green(only({{Movement::EBT, 10}, {Movement::WBT, 10}}), Movement::WBT) == Movement::WBT);
    CHECK(select_green(AawtVector{}, std::nullopt) == Movement::EBL);
}

TEST_CASE("argmax is invariant to positive scaling") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> small(0, 6);
    for (int trial = 0; trial < 200; ++trial) {
        AawtVector a{};
        for (auto& x : a) x = small(rng);
        std::optional<Movement> cur;
        if (trial % 3) cur = kAllMovements[static_cast<std::size_t>(trial % 8)];
        AawtVector b = a;
        for (auto& x : b) x *= 3.5;
        CHECK(select_green(a, cur) == select_green(b, cur));
    }
}

TEST_CASE("a zero-waiting vehicle dilutes AAWT") {
    for (double awt : {0.0, 1.0, 30.0}) {
        for (int n = 1; n < 6; ++n) {
            double before = compute_aawt(stats_with(Movement::WBL, n, awt), Movement::WBL);
            double after = compute_aawt(stats_with(Movement::WBL, n + 1, awt), Movement::WBL);
            CHECK(after <= before);
            if (awt > 0) CHECK(after < before);
        }
    }
}

TEST_CASE("controller starts with one second of all-red, then serves the argmax") {
    SignalController c(0);
    auto r0 = c.tick(stats_with(Movement::NBT, 1, 5.0), 0);
    CHECK(r0.movements_with_right_of_way() == 0);
    CHECK(c.state().phase == PhaseKind::AllRed);
    auto r1 = c.tick(stats_with(Movement::NBT, 1, 5.0), 1);
    CHECK(c.state().phase == PhaseKind::Green);
    CHECK(c.state().movement == Movement::NBT);
    CHECK(r1.color_of(Movement::NBT) == SignalColor::Green);
}

TEST_CASE("change at a checkpoint: 2 s yellow, 1 s all-red, new green") {
    SignalController c(0);
    const auto eb = stats_with(Movement::EBT, 1, 5.0);
    const auto nb = stats_with(Movement::NBT, 1, 9.0);
    c.tick(eb, 0);
    c.tick(eb, 1); // green EBT from t0 = 1
    REQUIRE(c.state().green_start == 1);
    for (std::int64_t t = 2; t < 6; ++t) {
        c.tick(nb, t); // not a checkpoint
        CHECK(c.state().phase == PhaseKind::Green);
    }
    c.tick(nb, 6);
    CHECK(c.state().phase == PhaseKind::Yellow);
    c.tick(nb, 7);
    CHECK(c.state().phase == PhaseKind::Yellow);
    c.tick(nb, 8);
    CHECK(c.state().phase == PhaseKind::AllRed);
    auto r = c.tick(nb, 9);
    CHECK(c.state().phase == PhaseKind::Green);
    CHECK(c.state().movement == Movement::NBT);
    CHECK(c.state().green_start == 9);
    CHECK(r.color_of(Maneuver{Heading::North, Turn::Right}) == SignalColor::Green);
}

TEST_CASE("green extends when it is still the maximum at a checkpoint") {
    SignalController c(0);
    const auto eb = stats_with(Movement::EBT, 1, 5.0);
    for (std::int64_t t = 0; t <= 6; ++t) c.tick(eb, t);
    CHECK(c.state().phase == PhaseKind::Green);
    CHECK(c.state().next_checkpoint == 11);
}

TEST_CASE("ticks must be consecutive") {
    SignalController c(0);
    c.tick({}, 0);
    CHECK_THROWS_AS(c.tick({}, 2), SequencingError);
}

TEST_CASE("replaying a recorded stats log reproduces the phase sequence") {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> pick(0, 7), cnt(0, 4);
    std::vector<MovementStats> log;
    for (int t = 0; t < 600; ++t) {
        MovementStats s;
        for (int k = 0; k < 3; ++k) {
            auto m = static_cast<std::size_t>(pick(rng));
            s.counts[m] += cnt(rng);
            s.awt[m] += s.counts[m] * 2.0;
        }
        log.push_back(s);
    }
    auto run = [&] {
        SignalController c(0);
        std::vector<std::pair<PhaseKind, Movement>> out;
        for (int t = 0; t < 600; ++t) {
            c.tick(log[static_cast<std::size_t>(t)], t);
            out.emplace_back(c.state().phase, c.state().movement);
        }
        return out;
    };
    CHECK(run() == run());
}
