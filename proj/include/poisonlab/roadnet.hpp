#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace poisonlab {

/// Direction of travel. Approaches and movements are named by heading, so the
/// "EB approach" carries vehicles travelling east.
enum class Heading : std::uint8_t { East, West, North, South };

enum class Turn : std::uint8_t { Left, Through, Right };

/// The eight signal movements, in the fixed tie-break order used by the
/// controller.
enum class Movement : std::uint8_t { EBL, EBT, WBL, WBT, NBL, NBT, SBL, SBT };

inline constexpr std::size_t kMovementCount = 8;
inline constexpr std::size_t kApproachCount = 4;

inline constexpr std::array<Movement, kMovementCount> kAllMovements{
    Movement::EBL, Movement::EBT, Movement::WBL, Movement::WBT,
    Movement::NBL, Movement::NBT, Movement::SBL, Movement::SBT};

inline constexpr std::array<Heading, kApproachCount> kAllHeadings{
    Heading::East, Heading::West, Heading::North, Heading::South};

constexpr std::size_t index_of(Movement m) { return static_cast<std::size_t>(m); }
constexpr std::size_t index_of(Heading h) { return static_cast<std::size_t>(h); }

/// A turn taken from an approach. Right turns are maneuvers but not signal
/// movements; they ride with the through phase of their approach.
struct Maneuver {
    Heading approach;
    Turn turn;

    friend bool operator==(const Maneuver&, const Maneuver&) = default;
};

std::optional<Movement> signal_movement(Maneuver m);
/// Movement whose phase governs this maneuver (right turn -> same-approach through).
Movement phase_movement(Maneuver m);
Maneuver maneuver_of(Movement m);

Heading heading_after(Heading in, Turn turn);
/// nullopt for a U-turn.
std::optional<Turn> turn_between(Heading in, Heading out);

std::string_view to_string(Heading h);
std::string_view to_string(Turn t);
std::string_view to_string(Movement m);
/// "EBL", "EBT" or "EBR" style short name.
std::string maneuver_name(Maneuver m);
Movement parse_movement(std::string_view name);

enum class SignalColor : std::uint8_t { Green, Yellow, Red };

/// Per-movement signal indication at one node for one second.
struct RightOfWay {
    std::array<SignalColor, kMovementCount> colors{};

    static RightOfWay all(SignalColor c);
    SignalColor color_of(Maneuver m) const { return colors[index_of(phase_movement(m))]; }
    SignalColor color_of(Movement m) const { return colors[index_of(m)]; }
    /// Movements currently showing green or yellow.
    int movements_with_right_of_way() const;
};

using NodeId = std::uint32_t;
using EdgeId = std::uint32_t;

struct Node {
    NodeId id;
    std::string name;
    double x;
    double y;
    bool signalized;
};

struct Edge {
    EdgeId id;
    std::string name;
    NodeId from;
    NodeId to;
    double length;
    double speed_limit;
    int through_lanes;
    double left_pocket;
    Heading heading;

    double pocket_start() const { return length - left_pocket; }
};

struct Connection {
    EdgeId in;
    EdgeId out;
    NodeId node;
    Maneuver maneuver;
};

struct Approach {
    NodeId node;
    Heading heading;
    std::vector<EdgeId> edges; // upstream-most first; the last one ends at the node
};

struct FeederMovement {
    NodeId node;
    Maneuver maneuver;

    friend bool operator==(const FeederMovement&, const FeederMovement&) = default;
};

struct GeometryConfig {
    int intersections = 2;
    double leg_length = 300.0;     // peripheral entry/exit legs
    double spacing = 300.0;        // arterial link between neighbouring intersections
    double speed_limit = 13.89;
    int through_lanes = 1;
    double left_pocket = 50.0;

    void validate() const;
};

/// Immutable arterial road network: a west-east chain of signalized 4-leg
/// intersections with peripheral legs. The easternmost intersection is the
/// subject; its western neighbour (if any) is the upstream intersection.
class RoadNetwork {
public:
    static RoadNetwork build_arterial(const GeometryConfig& geometry);

    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<Connection>& connections() const { return connections_; }
    const std::vector<EdgeId>& entries() const { return entries_; }
    const std::vector<EdgeId>& exits() const { return exits_; }

    const Node& node(NodeId id) const;
    const Edge& edge(EdgeId id) const;
    bool has_edge(EdgeId id) const { return id < edges_.size(); }
    EdgeId edge_by_name(std::string_view name) const;
    NodeId node_by_name(std::string_view name) const;

    std::vector<NodeId> signalized_nodes() const;
    NodeId subject() const { return subject_; }
    std::optional<NodeId> upstream() const { return upstream_; }

    /// Throws LookupError when (in, out) is not a connection of this network.
    const Connection& connection(EdgeId in, EdgeId out) const;
    /// Compass classification from the in/out edge headings.
    Maneuver movement_of(const Connection& c) const;
    /// Out-edge reached by taking `turn` at the end of `in`; nullopt at
    /// unsignalized ends or when the turn does not exist.
    std::optional<EdgeId> next_edge(EdgeId in, Turn turn) const;

    const Approach& approach(NodeId node, Heading heading) const;
    std::vector<Approach> approaches(NodeId node) const;
    /// The signalized node an edge feeds and the heading it arrives with.
    std::optional<Approach> approach_of_edge(EdgeId edge) const;

    std::vector<FeederMovement> upstream_feeders(const Approach& approach) const;

    bool is_entry(EdgeId e) const;
    bool ends_at_signal(EdgeId e) const { return node(edge(e).to).signalized; }

    void validate() const;

private:
    EdgeId add_edge(NodeId from, NodeId to, double length, double left_pocket);

    GeometryConfig geometry_{};
    std::vector<Node> nodes_;
    std::vector<Edge> edges_;
    std::vector<Connection> connections_;
    std::vector<Approach> approaches_;
    std::vector<EdgeId> entries_;
    std::vector<EdgeId> exits_;
    NodeId subject_ = 0;
    std::optional<NodeId> upstream_;
};

} // namespace poisonlab
