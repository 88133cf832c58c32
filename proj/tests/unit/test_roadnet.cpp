#include <doctest.h>

#include "poisonlab/errors.hpp"
#include "poisonlab/roadnet.hpp"

#include <map>
#include <set>

using namespace poisonlab;

namespace {

RoadNetwork default_net() { return RoadNetwork::build_arterial(GeometryConfig{}); }

} // namespace

TEST_CASE("default arterial has two signalized nodes, subject to the east") {
    RoadNetwork net = default_net();
    auto sig = net.signalized_nodes();
    REQUIRE(sig.size() == 2);
    CHECK(net.node(net.subject()).name == "J1");
    REQUIRE(net.upstream().has_value());
    CHECK(net.node(*net.upstream()).name == "J0");
    CHECK(net.entries().size() == 6);
    CHECK(net.exits().size() == 6);
}

TEST_CASE("turn geometry") {
    CHECK(heading_after(Heading::East, Turn::Left) == Heading::North);
    CHECK(heading_after(Heading::East, Turn::Right) == Heading::South);
    CHECK(heading_after(Heading::South, Turn::Left) == Heading::East);
    CHECK(heading_after(Heading::North, Turn::Right) == Heading::East);
    CHECK(turn_between(Heading::East, Heading::West) == std::nullopt);
    for (Heading h : kAllHeadings) {
        for (Turn t : {Turn::Left, Turn::Through, Turn::Right}) CHECK(turn_between(h, heading_after(h, t)) == t);
    }
}

TEST_CASE("right turns ride with the through phase") {
    CHECK(phase_movement({Heading::East, Turn::Right}) == Movement::EBT);
    CHECK(signal_movement({Heading::East, Turn::Right}) == std::nullopt);
    for (Movement m : kAllMovements) CHECK(signal_movement(maneuver_of(m)) == m);
    CHECK(parse_movement("SBL") == Movement::SBL);
    CHECK_THROWS_AS(parse_movement("XYZ"), LookupError);
}

TEST_CASE("subject EB approach is fed by three upstream movements") {
    RoadNetwork net = default_net();
    const Approach& eb = net.approach(net.subject(), Heading::East);
    auto feeders = net.upstream_feeders(eb);
    REQUIRE(feeders.size() == 3);
    std::set<std::string> names;
    for (const auto& f : feeders) {
        CHECK(f.node == *net.upstream());
        names.insert(maneuver_name(f.maneuver));
    }
    CHECK(names == std::set<std::string>{"SBL", "NBR", "EBT"});
}

TEST_CASE("peripheral and WB subject approaches have no upstream feeders") {
    RoadNetwork net = default_net();
    CHECK(net.upstream_feeders(net.approach(*net.upstream(), Heading::East)).empty());
    CHECK(net.upstream_feeders(net.approach(net.subject(), Heading::West)).empty());
    CHECK(net.upstream_feeders(net.approach(net.subject(), Heading::North)).empty());
}

TEST_CASE("feeder out-edge equals the approach's first edge, by brute force") {
    RoadNetwork net = default_net();
    for (NodeId n : net.signalized_nodes()) {
        for (const Approach& a : net.approaches(n)) {
            std::set<std::pair<NodeId, std::string>> expected;
            if (net.node(net.edge(a.edges.front()).from).signalized) {
                for (const Connection& c : net.connections()) {
                    if (c.out == a.edges.front()) expected.insert({c.node, maneuver_name(net.movement_of(c))});
                }
            }
            std::set<std::pair<NodeId, std::string>> got;
            for (const auto& f : net.upstream_feeders(a)) got.insert({f.node, maneuver_name(f.maneuver)});
            CHECK(got == expected);
        }
    }
}

TEST_CASE("movement_of partitions each node's connections into 8 movements and 4 right turns") {
    RoadNetwork net = default_net();
    for (NodeId n : net.signalized_nodes()) {
        std::map<std::string, int> seen;
        for (const Connection& c : net.connections()) {
            if (c.node != n) continue;
            Maneuver m = net.movement_of(c);
            CHECK(m == c.maneuver);
            seen[maneuver_name(m)] += 1;
        }
        CHECK(seen.size() == 12);
        int rights = 0;
        for (const auto& [name, k] : seen) {
            CHECK(k == 1);
            rights += name.back() == 'R' ? 1 : 0;
        }
        CHECK(rights == 4);
    }
}

TEST_CASE("unknown ids and connections are lookup errors") {
    RoadNetwork net = default_net();
    CHECK_THROWS_AS(net.edge(9999), LookupError);
    CHECK_THROWS_AS(net.node(9999), LookupError);
    CHECK_THROWS_AS(net.edge_by_name("nowhere"), LookupError);
    EdgeId w_in = net.edge_by_name("W-J0");
    CHECK_THROWS_AS(net.connection(w_in, w_in), LookupError);
}

TEST_CASE("next_edge follows connections and stops at the periphery") {
    RoadNetwork net = default_net();
    EdgeId w_in = net.edge_by_name("W-J0");
    CHECK(net.next_edge(w_in, Turn::Through) == net.edge_by_name("J0-J1"));
    CHECK(net.next_edge(w_in, Turn::Left) == net.edge_by_name("J0-N0"));
    CHECK(net.next_edge(net.edge_by_name("J1-E"), Turn::Through) == std::nullopt);
}

TEST_CASE("geometry validation") {
    GeometryConfig g;
    g.intersections = 0;
    CHECK_THROWS_AS(RoadNetwork::build_arterial(g), ConfigError);
    g = {};
    g.left_pocket = 400.0;
    CHECK_THROWS_AS(RoadNetwork::build_arterial(g), ConfigError);
    g = {};
    g.intersections = 3;
    RoadNetwork net = RoadNetwork::build_arterial(g);
    CHECK(net.signalized_nodes().size() == 3);
    CHECK(net.node(net.subject()).name == "J2");
}

TEST_CASE("edges carry the left pocket only where they end at a signal") {
    RoadNetwork net = default_net();
    for (const Edge& e : net.edges()) {
        if (net.ends_at_signal(e.id)) CHECK(e.left_pocket == doctest::Approx(50.0));
        else CHECK(e.left_pocket == 0.0);
    }
}
