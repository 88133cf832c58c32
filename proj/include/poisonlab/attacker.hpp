#pragma once

#include "poisonlab/atsc.hpp"
#include "poisonlab/microsim.hpp"
#include "poisonlab/msgplane.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace poisonlab {

enum class AttackMode : std::uint8_t {
    Physical, // fakes are inserted into the simulator and occupy the road
    Phantom,  // fakes exist only as BSMs; the attacker simulates their motion
};

/// Phantom mode only: whether actuated signals react to the poisoned stream.
/// Open keeps real traffic untouched (signals follow the real-vehicle stream
/// while a shadow controller consumes the poisoned one); Closed lets the
/// poisoned decisions drive the actual signals.
enum class PhantomFeedback : std::uint8_t { Open, Closed };

struct FixedRate {
    double vph = 120.0;
};

/// Inject only when the target movement is close enough to winning green that
/// dilution is needed to deny it.
struct ControllerAware {
    double margin = 0.5;          // s/veh
    double max_rate_vph = 360.0;
};

using AttackPolicy = std::variant<FixedRate, ControllerAware>;

struct AttackConfig {
    std::int64_t start = 400; // analysis-window seconds
    std::optional<NodeId> target_node; // default: subject intersection
    Heading target_approach = Heading::East;
    AttackMode mode = AttackMode::Physical;
    AttackPolicy policy = ControllerAware{};
    int max_concurrent = 30;
    double min_headway = 1.0; // s
    double initial_speed_factor = 0.8;
    PhantomFeedback phantom_feedback = PhantomFeedback::Open;

    void validate() const;
};

std::string_view to_string(AttackMode m);

struct FakeVehiclePlan {
    std::int64_t t;
    double initial_speed;
    std::vector<EdgeId> route;
    VehicleState vehicle; // provenance Fake
};

/// Entry cell (length + min gap) clear, and the nearest downstream vehicle
/// lets Krauss keep `initial_speed` at the insertion point.
bool can_insert(const RoadNetwork& net, EdgeId entry, const Occupancy& merged, double initial_speed,
                const CarFollowingParams& p, double lookahead = 150.0);

enum class AttackAction : std::uint8_t { Inject, Despawn };

struct AttackEvent {
    std::int64_t t;
    std::uint32_t fake_id;
    AttackAction action;
    AttackMode mode;
    std::string policy_state;
};

void write_attack_header(std::ostream& os);
void write_attack_row(std::ostream& os, const AttackEvent& e);
std::vector<AttackEvent> read_attack_log(const std::string& path);

/// Builds an occupancy view from received BSMs (assumed standard length)
/// plus extra vehicles. Indices: records first, then extras.
Occupancy occupancy_from(const RoadNetwork& net, std::span<const BsmRecord> records,
                         std::span<const VehicleState> extras, double assumed_length);

/// "Slow poisoning" adversary: decides when to add fake vehicles at the
/// start of the target approach and, in phantom mode, flies them.
class Attacker {
public:
    Attacker(const RoadNetwork& net, AttackConfig config, CarFollowingParams car);

    /// `t` is analysis-window time; `aawt` the controller-visible AAWT at the
    /// target node; `merged` the eavesdropped real traffic plus live fakes.
    std::optional<FakeVehiclePlan> plan_injection(const AawtVector& aawt, std::int64_t t, const Occupancy& merged,
                                                  int active_fakes);

    /// Records an injection the caller carried out (physical mode) or adopts
    /// the fake into the phantom fleet.
    void commit(const FakeVehiclePlan& plan);
    void record_despawn(std::int64_t t, VehicleId id);

    /// Phantom mode: one Krauss step per fake against the merged view
    /// (real BSMs + other fakes). Fakes finishing their route despawn.
    void advance_fakes(std::span<const BsmRecord> real, std::span<const RightOfWay> signals, double dt, std::int64_t t);
    std::vector<BsmRecord> fake_bsms(std::int64_t t_bsm,
                                     WaitingSemantics semantics = WaitingSemantics::Resetting) const;

    const std::vector<VehicleState>& phantoms() const { return phantoms_; }
    const std::vector<AttackEvent>& events() const { return events_; }
    const AttackConfig& config() const { return config_; }
    EdgeId entry_edge() const { return route_.front(); }
    Movement target_movement() const;
    std::string policy_state() const { return policy_state_; }

private:
    const RoadNetwork* net_;
    AttackConfig config_;
    CarFollowingParams car_;
    std::vector<EdgeId> route_;
    std::optional<std::int64_t> last_injection_;
    std::uint64_t next_serial_ = 1;
    std::vector<VehicleState> phantoms_;
    std::vector<AttackEvent> events_;
    std::string policy_state_;
};

} // namespace poisonlab
