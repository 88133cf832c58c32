#pragma once

#include "poisonlab/msgplane.hpp"
#include "poisonlab/roadnet.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string_view>

namespace poisonlab {

using AawtVector = std::array<double, kMovementCount>;

/// AWT / n for one movement; 0 when the movement has no vehicles.
double compute_aawt(const MovementStats& stats, Movement m);
AawtVector aawt_vector(const MovementStats& stats);

/// Argmax over the eight movements. Ties keep the current green if it is
/// among the maxima, otherwise the earliest in EBL..SBT order wins.
Movement select_green(const AawtVector& aawt, std::optional<Movement> current);

enum class PhaseKind : std::uint8_t { Green, Yellow, AllRed };

std::string_view to_string(PhaseKind k);

struct SignalTiming {
    int checkpoint = 5; // s after green start, repeating
    int yellow = 2;
    int all_red = 1;
};

struct SignalControllerState {
    NodeId node = 0;
    PhaseKind phase = PhaseKind::AllRed;
    Movement movement = Movement::EBL; // Green: served; Yellow: ending
    std::int64_t phase_entry = 0;
    std::int64_t green_start = 0;
    std::int64_t next_checkpoint = 0;
};

/// Waiting-time-based adaptive controller for one node, ticked once per
/// simulated second with that second's movement statistics.
class SignalController {
public:
    explicit SignalController(NodeId node, SignalTiming timing = {});

    /// Returns the indication in force for [t, t+1). Throws SequencingError
    /// unless t is exactly one second after the previous tick.
    RightOfWay tick(const MovementStats& stats, std::int64_t t);

    const SignalControllerState& state() const { return state_; }
    bool started() const { return last_tick_.has_value(); }
    RightOfWay right_of_way() const;
    std::int64_t seconds_in_phase(std::int64_t t) const { return t - state_.phase_entry; }

private:
    void enter_green(Movement m, std::int64_t t);

    SignalTiming timing_;
    SignalControllerState state_;
    std::optional<std::int64_t> last_tick_;
};

struct PhaseLogRow {
    std::int64_t t;
    std::string node;
    PhaseKind phase;
    std::optional<Movement> movement;
    std::int64_t seconds_in_phase;
};

void write_phase_header(std::ostream& os);
void write_phase_row(std::ostream& os, const PhaseLogRow& row);
std::vector<PhaseLogRow> read_phase_log(const std::string& path);

} // namespace poisonlab
