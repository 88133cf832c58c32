#include "poisonlab/atsc.hpp"

#include "poisonlab/csv.hpp"
#include "poisonlab/errors.hpp"

namespace poisonlab {

double compute_aawt(const MovementStats& stats, Movement m) {
    auto i = index_of(m);
    return stats.counts[i] > 0 ? stats.awt[i] / stats.counts[i] : 0.0;
}

AawtVector aawt_vector(const MovementStats& stats) {
    AawtVector out{};
    for (Movement m : kAllMovements) out[index_of(m)] = compute_aawt(stats, m);
    return out;
}

Movement select_green(const AawtVector& aawt, std::optional<Movement> current) {
    Movement best = Movement::EBL;
    for (Movement m : kAllMovements) {
        if (aawt[index_of(m)] > aawt[index_of(best)]) best = m;
    }
    if (current && aawt[index_of(*current)] == aawt[index_of(best)]) return *current;
    return best;
}

std::string_view to_string(PhaseKind k) {
    switch (k) {
    case PhaseKind::Green: return "green";
    case PhaseKind::Yellow: return "yellow";
    case PhaseKind::AllRed: return "allred";
    }
    return "?";
}

SignalController::SignalController(NodeId node, SignalTiming timing) : timing_(timing) {
    if (timing.checkpoint < 1 || timing.yellow < 0 || timing.all_red < 0)
        throw ConfigError("signal timing must be non-negative with a positive checkpoint");
    state_.node = node;
}

void SignalController::enter_green(Movement m, std::int64_t t) {
    state_.phase = PhaseKind::Green;
    state_.movement = m;
    state_.phase_entry = t;
    state_.green_start = t;
    state_.next_checkpoint = t + timing_.checkpoint;
}

RightOfWay SignalController::tick(const MovementStats& stats, std::int64_t t) {
    if (last_tick_ && t != *last_tick_ + 1)
        throw SequencingError("controller tick at t=" + std::to_string(t) + " after t=" + std::to_string(*last_tick_));

    if (!last_tick_) {
        state_.phase = PhaseKind::AllRed;
        state_.phase_entry = t;
        last_tick_ = t;
        if (timing_.all_red == 0) enter_green(select_green(aawt_vector(stats), std::nullopt), t);
        return right_of_way();
    }
    last_tick_ = t;

    switch (state_.phase) {
    case PhaseKind::Green:
        if (t == state_.next_checkpoint) {
            Movement winner = select_green(aawt_vector(stats), state_.movement);
            if (winner == state_.movement) {
                state_.next_checkpoint += timing_.checkpoint;
            } else {
                state_.phase = PhaseKind::Yellow;
                state_.phase_entry = t;
            }
        }
        break;
    case PhaseKind::Yellow:
        if (t - state_.phase_entry >= timing_.yellow) {
            state_.phase = PhaseKind::AllRed;
            state_.phase_entry = t;
        }
        break;
    case PhaseKind::AllRed:
        break;
    }
    if (state_.phase == PhaseKind::AllRed && t - state_.phase_entry >= timing_.all_red) {
        enter_green(select_green(aawt_vector(stats), std::nullopt), t);
    }
    return right_of_way();
}

RightOfWay SignalController::right_of_way() const {
    RightOfWay r = RightOfWay::all(SignalColor::Red);
    if (!last_tick_) return r;
    if (state_.phase == PhaseKind::Green) r.colors[index_of(state_.movement)] = SignalColor::Green;
    if (state_.phase == PhaseKind::Yellow) r.colors[index_of(state_.movement)] = SignalColor::Yellow;
    return r;
}

void write_phase_header(std::ostream& os) { os << "t,node,phase,movement,seconds_in_phase\n"; }

void write_phase_row(std::ostream& os, const PhaseLogRow& row) {
    os << row.t << ',' << row.node << ',' << to_string(row.phase) << ','
       << (row.movement ? to_string(*row.movement) : std::string_view{}) << ',' << row.seconds_in_phase << '\n';
}

std::vector<PhaseLogRow> read_phase_log(const std::string& path) {
    csv::Table table = csv::read(path);
    std::vector<PhaseLogRow> out;
    out.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        PhaseLogRow r;
        r.t = csv::to_int(row[0]);
        r.node = row[1];
        if (row[2] == "green") r.phase = PhaseKind::Green;
        else if (row[2] == "yellow") r.phase = PhaseKind::Yellow;
        else if (row[2] == "allred") r.phase = PhaseKind::AllRed;
        else throw DataError("unknown phase '" + row[2] + "'");
        if (!row[3].empty()) r.movement = parse_movement(row[3]);
        r.seconds_in_phase = csv::to_int(row[4]);
        out.push_back(r);
    }
    return out;
}

} // namespace poisonlab
