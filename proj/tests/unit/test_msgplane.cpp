#include <doctest.h>

#include "poisonlab/errors.hpp"
#include "poisonlab/msgplane.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace poisonlab;

namespace {

RoadNetwork default_net() { return RoadNetwork::build_arterial(GeometryConfig{}); }

BsmRecord rec(const RoadNetwork& net, std::int64_t t, std::uint32_t id, const std::string& edge, double pos,
              double waiting, Turn intent = Turn::Through) {
    BsmRecord r;
    r.t = t;
    r.temp_id = id;
    r.edge = net.edge_by_name(edge);
    r.position = pos;
    r.speed = 0.0;
    r.waiting = waiting;
    r.intent = intent;
    return r;
}

} // namespace

TEST_CASE("BSM copies the kinematic fields") {
    RoadNetwork net = default_net();
    VehicleState v;
    v.id = {Provenance::Real, 7};
    v.route = {net.edge_by_name("W-J0"), net.edge_by_name("J0-J1"), net.edge_by_name("J1-E")};
    v.position = 120.0;
    v.speed = 8.0;
    BsmRecord r = emit_bsm(net, v, 33);
    CHECK(r.t == 33);
    CHECK(r.edge == v.route[0]);
    CHECK(r.position == 120.0);
    CHECK(r.speed == 8.0);
    CHECK(r.waiting == 0.0);
    CHECK(r.intent == Turn::Through);
    CHECK(r.temp_id == temporary_id(v.id));
}

TEST_CASE("fake and real records differ only in the pseudonym") {
    RoadNetwork net = default_net();
    VehicleState real, fake;
    real.id = {Provenance::Real, 5};
    fake.id = {Provenance::Fake, 5};
    real.route = fake.route = {net.edge_by_name("J0-J1"), net.edge_by_name("J1-E")};
    real.position = fake.position = 40.0;
    BsmRecord a = emit_bsm(net, real, 1), b = emit_bsm(net, fake, 1);
    CHECK(a.temp_id != b.temp_id);
    b.temp_id = a.temp_id;
    CHECK(a == b);
}

TEST_CASE("waiting semantics select timer or cumulative") {
    RoadNetwork net = default_net();
    VehicleState v;
    v.route = {net.edge_by_name("W-J0")};
    v.waiting_timer = 2.0;
    v.cumulative_waiting = 9.0;
    CHECK(emit_bsm(net, v, 0, WaitingSemantics::Resetting).waiting == 2.0);
    CHECK(emit_bsm(net, v, 0, WaitingSemantics::Cumulative).waiting == 9.0);
}

TEST_CASE("empty network samples to zero") {
    RoadNetwork net = default_net();
    FeatureSampler s(net);
    FeatureSample f = s.sample({}, 12);
    CHECK(f.t == 12);
    FeatureSample zero;
    zero.t = 12;
    CHECK(f == zero);
}

TEST_CASE("AWT and AAWT arithmetic on the subject EB through movement") {
    RoadNetwork net = default_net();
    FeatureSampler s(net);
    std::vector<BsmRecord> bsm{rec(net, 5, 1, "J0-J1", 290, 10), rec(net, 5, 2, "J0-J1", 280, 12),
                               rec(net, 5, 3, "J0-J1", 270, 8)};
    FeatureSample f = s.sample(bsm, 5);
    CHECK(f.subject.counts[index_of(Movement::EBT)] == 3);
    CHECK(f.subject.awt[index_of(Movement::EBT)] == 30.0);
    CHECK(f.approach_aawt[index_of(Heading::East)] == 10.0);

    bsm.push_back(rec(net, 5, 99, "J0-J1", 20, 0));
    FeatureSample g = s.sample(bsm, 5);
    CHECK(g.approach_count(Heading::East) == 4);
    CHECK(g.approach_aawt[index_of(Heading::East)] == 7.5);
}

TEST_CASE("right turns count with through; left turns on their own movement") {
    RoadNetwork net = default_net();
    std::vector<BsmRecord> bsm{rec(net, 0, 1, "J0-J1", 100, 1, Turn::Right),
                               rec(net, 0, 2, "J0-J1", 290, 2, Turn::Left)};
    MovementStats st = movement_stats(bsm, net, net.subject());
    CHECK(st.counts[index_of(Movement::EBT)] == 1);
    CHECK(st.counts[index_of(Movement::EBL)] == 1);
    CHECK(st.awt[index_of(Movement::EBL)] == 2.0);
}

TEST_CASE("upstream feeder columns track the three feeding streams") {
    RoadNetwork net = default_net();
    FeatureSampler s(net);
    REQUIRE(s.feeders().size() == 3);
    std::vector<BsmRecord> bsm{rec(net, 0, 1, "N0-J0", 290, 4, Turn::Left),    // SBL
                               rec(net, 0, 2, "S0-J0", 290, 6, Turn::Right),   // NBR
                               rec(net, 0, 3, "W-J0", 290, 1, Turn::Through),  // EBT
                               rec(net, 0, 4, "W-J0", 280, 2, Turn::Through),  // EBT
                               rec(net, 0, 5, "W-J0", 270, 9, Turn::Left)};    // not a feeder
    FeatureSample f = s.sample(bsm, 0);
    for (std::size_t k = 0; k < 3; ++k) {
        std::string name = maneuver_name(s.feeders()[k].maneuver);
        if (name == "SBL") CHECK((f.upstream_counts[k] == 1 && f.upstream_awt[k] == 4.0));
        if (name == "NBR") CHECK((f.upstream_counts[k] == 1 && f.upstream_awt[k] == 6.0));
        if (name == "EBT") CHECK((f.upstream_counts[k] == 2 && f.upstream_awt[k] == 3.0));
    }
    CHECK(f.approach_count(Heading::East) == 0);
}

TEST_CASE("counts are conserved per node") {
    RoadNetwork net = default_net();
    std::vector<BsmRecord> bsm;
    std::uint32_t id = 1;
    for (const Edge& e : net.edges()) {
        for (double p : {10.0, 100.0, 200.0}) bsm.push_back(rec(net, 0, id++, e.name, p, 1.0, Turn::Left));
    }
    for (NodeId n : net.signalized_nodes()) {
        MovementStats st = movement_stats(bsm, net, n);
        int total = 0;
        for (int c : st.counts) total += c;
        int expected = 0;
        for (const BsmRecord& r : bsm) {
            auto a = net.approach_of_edge(r.edge);
            expected += (a && a->node == n) ? 1 : 0;
        }
        CHECK(total == expected);
        CHECK(total == 12);
    }
}

TEST_CASE("mixed timestamps and unknown edges are data errors") {
    RoadNetwork net = default_net();
    std::vector<BsmRecord> bsm{rec(net, 0, 1, "W-J0", 1, 0), rec(net, 1, 2, "W-J0", 2, 0)};
    CHECK_THROWS_AS(movement_stats(bsm, net, net.subject()), DataError);
    bsm[1].t = 0;
    bsm[1].edge = 999;
    CHECK_THROWS_AS(movement_stats(bsm, net, net.subject()), DataError);
}

TEST_CASE("feature log round-trips bit-exactly") {
    RoadNetwork net = default_net();
    FeatureSample a;
    a.t = -3;
    a.subject.counts[1] = 4;
    a.subject.awt[1] = 1.0 / 3.0;
    a.approach_aawt[0] = 0.1 + 0.2;
    a.upstream_counts = {1, 2, 3};
    a.upstream_awt = {0.5, 1e-17, 123456.789};
    a.attack_active = true;
    const auto dir = std::filesystem::path(POISONLAB_TEST_TMP);
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "features_rt.csv").string();
    {
        std::ofstream os(path);
        write_feature_header(os, net);
        write_feature_row(os, a);
    }
    auto back = read_feature_log(path);
    REQUIRE(back.size() == 1);
    CHECK(back[0] == a);
}

TEST_CASE("BSM log round-trips") {
    RoadNetwork net = default_net();
    BsmRecord r = rec(net, 9, 77, "J0-J1", 1.0 / 7.0, 3.25, Turn::Left);
    r.speed = 0.3;
    const auto dir = std::filesystem::path(POISONLAB_TEST_TMP);
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "bsm_rt.csv").string();
    {
        std::ofstream os(path);
        write_bsm_header(os);
        write_bsm_row(os, r);
    }
    auto back = read_bsm_log(path);
    REQUIRE(back.size() == 1);
    CHECK(back[0] == r);
}
