#include "poisonlab/roadnet.hpp"

#include "poisonlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace poisonlab {

namespace {

Heading heading_between(const Node& a, const Node& b) {
    double dx = b.x - a.x;
    double dy = b.y - a.y;
    if (std::abs(dx) >= std::abs(dy)) return dx > 0 ? Heading::East : Heading::West;
    return dy > 0 ? Heading::North : Heading::South;
}

int turn_rank(Turn t) {
    // Feeder order: left, right, through.
    switch (t) {
    case Turn::Left: return 0;
    case Turn::Right: return 1;
    case Turn::Through: return 2;
    }
    return 3;
}

} // namespace

std::optional<Movement> signal_movement(Maneuver m) {
    if (m.turn == Turn::Right) return std::nullopt;
    auto base = static_cast<std::uint8_t>(index_of(m.approach) * 2);
    return static_cast<Movement>(base + (m.turn == Turn::Through ? 1 : 0));
}

Movement phase_movement(Maneuver m) {
    if (m.turn == Turn::Right) return *signal_movement({m.approach, Turn::Through});
    return *signal_movement(m);
}

Maneuver maneuver_of(Movement m) {
    auto i = index_of(m);
    return {static_cast<Heading>(i / 2), (i % 2) ? Turn::Through : Turn::Left};
}

Heading heading_after(Heading in, Turn turn) {
    if (turn == Turn::Through) return in;
    bool left = turn == Turn::Left;
    switch (in) {
    case Heading::East: return left ? Heading::North : Heading::South;
    case Heading::North: return left ? Heading::West : Heading::East;
    case Heading::West: return left ? Heading::South : Heading::North;
    case Heading::South: return left ? Heading::East : Heading::West;
    }
    return in;
}

std::optional<Turn> turn_between(Heading in, Heading out) {
    for (Turn t : {Turn::Left, Turn::Through, Turn::Right}) {
        if (heading_after(in, t) == out) return t;
    }
    return std::nullopt;
}

std::string_view to_string(Heading h) {
    switch (h) {
    case Heading::East: return "EB";
    case Heading::West: return "WB";
    case Heading::North: return "NB";
    case Heading::South: return "SB";
    }
    return "?";
}

std::string_view to_string(Turn t) {
    switch (t) {
    case Turn::Left: return "L";
    case Turn::Through: return "T";
    case Turn::Right: return "R";
    }
    return "?";
}

std::string_view to_string(Movement m) {
    static constexpr std::array<std::string_view, kMovementCount> names{
        "EBL", "EBT", "WBL", "WBT", "NBL", "NBT", "SBL", "SBT"};
    return names[index_of(m)];
}

std::string maneuver_name(Maneuver m) {
    return std::string(to_string(m.approach)) + std::string(to_string(m.turn));
}

Movement parse_movement(std::string_view name) {
    for (Movement m : kAllMovements) {
        if (to_string(m) == name) return m;
    }
    throw LookupError("unknown movement '" + std::string(name) + "'");
}

RightOfWay RightOfWay::all(SignalColor c) {
    RightOfWay r;
    r.colors.fill(c);
    return r;
}

int RightOfWay::movements_with_right_of_way() const {
    return static_cast<int>(std::count_if(colors.begin(), colors.end(),
                                          [](SignalColor c) { return c != SignalColor::Red; }));
}

void GeometryConfig::validate() const {
    if (intersections < 1) throw ConfigError("geometry: need at least one intersection");
    if (!(leg_length > 0.0)) throw ConfigError("geometry: leg length must be positive");
    if (!(spacing > 0.0)) throw ConfigError("geometry: intersection spacing must be positive");
    if (!(speed_limit > 0.0)) throw ConfigError("geometry: speed limit must be positive");
    if (through_lanes < 1) throw ConfigError("geometry: through lane count must be positive");
    if (through_lanes != 1) throw ConfigError("geometry: only single-lane through approaches are supported");
    if (left_pocket < 0.0 || left_pocket >= std::min(leg_length, spacing))
        throw ConfigError("geometry: left pocket must lie in [0, edge length)");
}

EdgeId RoadNetwork::add_edge(NodeId from, NodeId to, double length, double left_pocket) {
    Edge e;
    e.id = static_cast<EdgeId>(edges_.size());
    e.name = nodes_[from].name + "-" + nodes_[to].name;
    e.from = from;
    e.to = to;
    e.length = length;
    e.speed_limit = geometry_.speed_limit;
    e.through_lanes = geometry_.through_lanes;
    e.left_pocket = nodes_[to].signalized ? left_pocket : 0.0;
    e.heading = heading_between(nodes_[from], nodes_[to]);
    edges_.push_back(e);
    return e.id;
}

RoadNetwork RoadNetwork::build_arterial(const GeometryConfig& g) {
    g.validate();
    RoadNetwork net;
    net.geometry_ = g;

    auto add_node = [&](std::string name, double x, double y, bool signalized) {
        auto id = static_cast<NodeId>(net.nodes_.size());
        net.nodes_.push_back({id, std::move(name), x, y, signalized});
        return id;
    };

    std::vector<NodeId> junctions;
    for (int i = 0; i < g.intersections; ++i) {
        junctions.push_back(add_node("J" + std::to_string(i), i * g.spacing, 0.0, true));
    }
    const double east_x = (g.intersections - 1) * g.spacing;

    auto add_leg = [&](NodeId junction, NodeId outer) {
        EdgeId in = net.add_edge(outer, junction, g.leg_length, g.left_pocket);
        EdgeId out = net.add_edge(junction, outer, g.leg_length, 0.0);
        net.entries_.push_back(in);
        net.exits_.push_back(out);
    };

    add_leg(junctions.front(), add_node("W", -g.leg_length, 0.0, false));
    for (int i = 0; i + 1 < g.intersections; ++i) {
        net.add_edge(junctions[i], junctions[i + 1], g.spacing, g.left_pocket);
        net.add_edge(junctions[i + 1], junctions[i], g.spacing, g.left_pocket);
    }
    add_leg(junctions.back(), add_node("E", east_x + g.leg_length, 0.0, false));
    for (int i = 0; i < g.intersections; ++i) {
        const Node& j = net.nodes_[junctions[i]];
        double x = j.x;
        add_leg(junctions[i], add_node("N" + std::to_string(i), x, g.leg_length, false));
        add_leg(junctions[i], add_node("S" + std::to_string(i), x, -g.leg_length, false));
    }

    for (NodeId j : junctions) {
        for (const Edge& in : net.edges_) {
            if (in.to != j) continue;
            net.approaches_.push_back({j, in.heading, {in.id}});
            for (const Edge& out : net.edges_) {
                if (out.from != j) continue;
                auto turn = turn_between(in.heading, out.heading);
                if (!turn) continue;
                net.connections_.push_back({in.id, out.id, j, {in.heading, *turn}});
            }
        }
    }

    net.subject_ = junctions.back();
    if (junctions.size() >= 2) net.upstream_ = junctions[junctions.size() - 2];
    net.validate();
    return net;
}

const Node& RoadNetwork::node(NodeId id) const {
    if (id >= nodes_.size()) throw LookupError("unknown node id " + std::to_string(id));
    return nodes_[id];
}

const Edge& RoadNetwork::edge(EdgeId id) const {
    if (id >= edges_.size()) throw LookupError("unknown edge id " + std::to_string(id));
    return edges_[id];
}

EdgeId RoadNetwork::edge_by_name(std::string_view name) const {
    for (const Edge& e : edges_) {
        if (e.name == name) return e.id;
    }
    throw LookupError("unknown edge '" + std::string(name) + "'");
}

NodeId RoadNetwork::node_by_name(std::string_view name) const {
    for (const Node& n : nodes_) {
        if (n.name == name) return n.id;
    }
    throw LookupError("unknown node '" + std::string(name) + "'");
}

std::vector<NodeId> RoadNetwork::signalized_nodes() const {
    std::vector<NodeId> out;
    for (const Node& n : nodes_) {
        if (n.signalized) out.push_back(n.id);
    }
    return out;
}

const Connection& RoadNetwork::connection(EdgeId in, EdgeId out) const {
    for (const Connection& c : connections_) {
        if (c.in == in && c.out == out) return c;
    }
    throw LookupError("no connection " + std::to_string(in) + " -> " + std::to_string(out));
}

Maneuver RoadNetwork::movement_of(const Connection& c) const {
    const Connection& known = connection(c.in, c.out);
    Heading in = edge(known.in).heading;
    auto turn = turn_between(in, edge(known.out).heading);
    if (!turn) throw LookupError("connection is a U-turn");
    return {in, *turn};
}

std::optional<EdgeId> RoadNetwork::next_edge(EdgeId in, Turn turn) const {
    for (const Connection& c : connections_) {
        if (c.in == in && c.maneuver.turn == turn) return c.out;
    }
    return std::nullopt;
}

const Approach& RoadNetwork::approach(NodeId node, Heading heading) const {
    for (const Approach& a : approaches_) {
        if (a.node == node && a.heading == heading) return a;
    }
    throw LookupError("no " + std::string(to_string(heading)) + " approach at node " + std::to_string(node));
}

std::vector<Approach> RoadNetwork::approaches(NodeId node) const {
    std::vector<Approach> out;
    for (const Approach& a : approaches_) {
        if (a.node == node) out.push_back(a);
    }
    return out;
}

std::optional<Approach> RoadNetwork::approach_of_edge(EdgeId e) const {
    for (const Approach& a : approaches_) {
        if (std::find(a.edges.begin(), a.edges.end(), e) != a.edges.end()) return a;
    }
    return std::nullopt;
}

std::vector<FeederMovement> RoadNetwork::upstream_feeders(const Approach& approach) const {
    std::vector<FeederMovement> out;
    if (approach.edges.empty()) return out;
    const Edge& first = edge(approach.edges.front());
    if (!node(first.from).signalized) return out;
    for (const Connection& c : connections_) {
        if (c.out == first.id) out.push_back({c.node, movement_of(c)});
    }
    std::sort(out.begin(), out.end(), [](const FeederMovement& a, const FeederMovement& b) {
        return turn_rank(a.maneuver.turn) < turn_rank(b.maneuver.turn);
    });
    return out;
}

bool RoadNetwork::is_entry(EdgeId e) const {
    return std::find(entries_.begin(), entries_.end(), e) != entries_.end();
}

void RoadNetwork::validate() const {
    for (const Edge& e : edges_) {
        if (!(e.length > 0.0)) throw ConfigError("edge " + e.name + " has non-positive length");
        if (!(e.speed_limit > 0.0)) throw ConfigError("edge " + e.name + " has non-positive speed limit");
    }
    for (const Connection& c : connections_) {
        if (edge(c.in).to != c.node || edge(c.out).from != c.node)
            throw ConfigError("connection does not meet at its node");
    }
    for (NodeId n : signalized_nodes()) {
        std::set<std::pair<int, int>> seen;
        for (const Connection& c : connections_) {
            if (c.node != n) continue;
            seen.insert({static_cast<int>(c.maneuver.approach), static_cast<int>(c.maneuver.turn)});
        }
        if (seen.size() != 12)
            throw ConfigError("node " + node(n).name + " lacks the 8 movements and 4 right turns");
    }
}

} // namespace poisonlab
