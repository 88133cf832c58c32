#pragma once

#include "poisonlab/rng.hpp"
#include "poisonlab/roadnet.hpp"

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

namespace poisonlab {

enum class Provenance : std::uint8_t { Real, Fake };

struct VehicleId {
    Provenance provenance = Provenance::Real;
    std::uint64_t serial = 0;

    friend bool operator==(const VehicleId&, const VehicleId&) = default;
};

struct VehicleState {
    VehicleId id;
    std::vector<EdgeId> route;
    std::size_t route_index = 0;
    double position = 0.0; // front bumper, metres from the edge start
    double speed = 0.0;
    double length = 5.0;
    double min_gap = 2.5;
    double waiting_timer = 0.0;      // resets whenever the vehicle moves
    double cumulative_waiting = 0.0; // never decreases
    double entry_time = 0.0;
    bool committed = false;          // decided to clear the stop line on yellow

    EdgeId edge() const { return route[route_index]; }
    std::optional<EdgeId> next_edge() const {
        if (route_index + 1 < route.size()) return route[route_index + 1];
        return std::nullopt;
    }
};

struct CarFollowingParams {
    double accel = 2.6;  // m/s^2
    double decel = 4.5;  // m/s^2
    double tau = 1.0;    // s
    double sigma = 0.5;  // dawdling factor
    double length = 5.0;
    double min_gap = 2.5;

    void validate() const;
};

struct TurnSplit {
    double through = 0.70;
    double left = 0.15;
    double right = 0.15;

    void validate() const;
    Turn sample(double u) const;
};

struct DemandConfig {
    double vph_per_entry = 150.0;
    TurnSplit split;
};

enum class WaitingSemantics : std::uint8_t { Resetting, Cumulative };

inline constexpr double kWaitingSpeedThreshold = 0.1; // m/s, inclusive

struct SimulationParams {
    double dt = 1.0;
    CarFollowingParams car;
    DemandConfig demand;
    double lookahead = 150.0;

    void validate() const;
};

/// Krauss safe speed for a follower closing on a leader with the given net
/// gap (caller subtracts the minimum gap). Clamped at zero.
double krauss_safe_speed(double v_follower, double v_leader, double gap, const CarFollowingParams& p);

/// Applies the 0.1 m/s waiting rule to the vehicle's current speed.
void update_waiting(VehicleState& v, double dt);

enum class Lane : std::uint8_t { Main, Pocket };

/// Lane the vehicle is bound for on `edge` given its next turn.
Lane target_lane(const Edge& edge, Turn intent);
/// Lane the vehicle physically occupies: the shared section upstream of the
/// pocket counts as Main for everyone.
Lane physical_lane(const Edge& edge, double position, Turn intent);

/// Next turn at the end of the current edge (Through on exit edges).
Turn intent_of(const RoadNetwork& net, const VehicleState& v);

/// Position snapshot of one road user, independent of where it came from
/// (simulator state or received BSMs).
struct Occupant {
    EdgeId edge;
    double position;
    double speed;
    double length;
    Turn intent;
    std::size_t index; // caller-defined back-reference
};

class Occupancy {
public:
    explicit Occupancy(std::size_t edge_count) : by_edge_(edge_count) {}

    void add(const Occupant& o);
    /// Sorts every edge by position; call once after all add() calls.
    void finalize();
    std::span<const Occupant> on(EdgeId e) const { return by_edge_.at(e); }

private:
    std::vector<std::vector<Occupant>> by_edge_;
};

struct Follower {
    EdgeId edge;
    double position;
    double speed;
    Turn intent;
    std::optional<EdgeId> next_edge;
    Turn next_intent = Turn::Through;
    bool committed = false;
    std::optional<std::size_t> self; // excluded from the candidate set
};

struct Leader {
    std::optional<std::size_t> index; // nullopt: stop-line virtual leader
    double gap;                       // bumper-to-bumper, metres
    double speed;

    bool is_virtual() const { return !index.has_value(); }
};

/// True when the signal forbids crossing the stop line: red for uncommitted
/// vehicles, and yellow for vehicles that can still stop within `distance`.
bool stop_line_barred(SignalColor color, bool committed, double speed, double distance, double decel);

/// Nearest constraint ahead of the follower: a same-lane vehicle on its edge,
/// the stop line when the signal bars its maneuver, or the tail of the next
/// route edge when within `lookahead`. `signals` is indexed by node id.
std::optional<Leader> find_leader(const RoadNetwork& net, const Occupancy& occupancy, const Follower& f,
                                  std::span<const RightOfWay> signals, const CarFollowingParams& p,
                                  double lookahead);

/// Route from `entry` to a peripheral exit, one turn sampled per signalized node.
std::vector<EdgeId> sample_route(const RoadNetwork& net, EdgeId entry, const TurnSplit& split,
                                 const SeededStream& stream, std::uint64_t serial);

/// Bernoulli(demand/3600 * dt) arrival per entry edge at step `step_index`.
/// Serial numbers are assigned from `next_serial` in entry order.
std::vector<VehicleState> spawn_arrivals(const RoadNetwork& net, const SeededStream& stream,
                                         const DemandConfig& demand, std::int64_t step_index, double dt,
                                         std::uint64_t& next_serial, const CarFollowingParams& p);

/// Entry cell [0, length + min_gap] of `edge` is free of any vehicle.
bool entry_cell_clear(const Occupancy& occupancy, EdgeId edge, double cell_length);

/// Deterministic fixed-timestep microsimulation of one road network.
class World {
public:
    World(const RoadNetwork& net, SimulationParams params, std::uint64_t seed);

    /// Advances one dt. `signals` is indexed by node id; unsignalized nodes are ignored.
    void step(std::span<const RightOfWay> signals);

    /// Places a vehicle directly (physical-mode fake injection). The caller
    /// is responsible for the insertion check.
    void insert_vehicle(VehicleState v);

    std::int64_t step_index() const { return step_index_; }
    double time() const { return static_cast<double>(step_index_) * params_.dt; }
    const SimulationParams& params() const { return params_; }
    const RoadNetwork& network() const { return *net_; }

    const std::vector<VehicleState>& vehicles() const { return vehicles_; }
    /// Vehicles that left the network during the last step.
    const std::vector<VehicleState>& exited_last_step() const { return exited_last_; }
    std::uint64_t entered() const { return entered_; }
    std::uint64_t exited() const { return exited_; }
    std::size_t pending_insertions() const;

    Occupancy occupancy() const;
    Follower follower_of(const VehicleState& v, std::optional<std::size_t> self) const;
    std::optional<Leader> leader_of(std::size_t index, std::span<const RightOfWay> signals) const;

private:
    bool try_insert(const VehicleState& v, const Occupancy& occ);

    const RoadNetwork* net_;
    SimulationParams params_;
    SeededStream stream_;
    std::int64_t step_index_ = 0;
    std::uint64_t next_serial_ = 1;
    std::vector<VehicleState> vehicles_;
    std::vector<VehicleState> exited_last_;
    std::vector<std::deque<VehicleState>> insertion_queues_; // by entry order
    std::uint64_t entered_ = 0;
    std::uint64_t exited_ = 0;
};

} // namespace poisonlab
