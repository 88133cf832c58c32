#pragma once

#include "poisonlab/microsim.hpp"
#include "poisonlab/roadnet.hpp"

#include <array>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace poisonlab {

/// One basic safety message. Carries no provenance: a fake vehicle's record
/// is indistinguishable from a real one.
struct BsmRecord {
    std::int64_t t = 0;
    std::uint32_t temp_id = 0;
    EdgeId edge = 0;
    double position = 0.0;
    double speed = 0.0;
    double waiting = 0.0;
    Turn intent = Turn::Through; // lane-level turn intent for the next junction

    friend bool operator==(const BsmRecord&, const BsmRecord&) = default;
};

/// Pseudonymous 32-bit BSM identifier, stable for a vehicle's lifetime.
std::uint32_t temporary_id(VehicleId id);

BsmRecord emit_bsm(const RoadNetwork& net, const VehicleState& v, std::int64_t t,
                   WaitingSemantics semantics = WaitingSemantics::Resetting);

/// Per-movement totals at one signalized node.
struct MovementStats {
    std::array<int, kMovementCount> counts{};
    std::array<double, kMovementCount> awt{};

    friend bool operator==(const MovementStats&, const MovementStats&) = default;
};

inline constexpr std::size_t kFeederCount = 3;

struct FeatureSample {
    std::int64_t t = 0;
    MovementStats subject;
    std::array<double, kApproachCount> approach_aawt{}; // EB, WB, NB, SB
    std::array<int, kFeederCount> upstream_counts{};
    std::array<double, kFeederCount> upstream_awt{};
    bool attack_active = false; // ground truth, never read by controller or detector

    int approach_count(Heading h) const;
    double approach_awt(Heading h) const;

    friend bool operator==(const FeatureSample&, const FeatureSample&) = default;
};

/// Totals at `node` over vehicles on its approaches. Right turns count with the
/// through movement of their approach. Throws DataError on unknown edges or
/// mixed timestamps.
MovementStats movement_stats(std::span<const BsmRecord> records, const RoadNetwork& net, NodeId node);

/// Builds subject-node features plus the upstream feeder streams.
class FeatureSampler {
public:
    explicit FeatureSampler(const RoadNetwork& net);

    FeatureSample sample(std::span<const BsmRecord> records, std::int64_t t) const;

    const std::vector<FeederMovement>& feeders() const { return feeders_; }
    NodeId subject() const { return subject_; }

private:
    const RoadNetwork* net_;
    NodeId subject_;
    std::vector<FeederMovement> feeders_;
};

/// Fixed column names of the per-second feature log.
std::vector<std::string> feature_columns(const RoadNetwork& net);
void write_feature_header(std::ostream& os, const RoadNetwork& net);
void write_feature_row(std::ostream& os, const FeatureSample& s);
/// Reads a feature CSV written by write_feature_row. Throws DataError.
std::vector<FeatureSample> read_feature_log(const std::string& path);

void write_bsm_header(std::ostream& os);
void write_bsm_row(std::ostream& os, const BsmRecord& r);
std::vector<BsmRecord> read_bsm_log(const std::string& path);

} // namespace poisonlab
