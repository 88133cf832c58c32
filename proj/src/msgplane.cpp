#include "poisonlab/msgplane.hpp"

#include "poisonlab/csv.hpp"
#include "poisonlab/errors.hpp"
#include "poisonlab/rng.hpp"

namespace poisonlab {

std::uint32_t temporary_id(VehicleId id) {
    const std::uint64_t salt = id.provenance == Provenance::Real ? 0x5EEDC0DE00000000ULL : 0x0DDBA11500000000ULL;
    return static_cast<std::uint32_t>(splitmix64(salt ^ id.serial) >> 32);
}

BsmRecord emit_bsm(const RoadNetwork& net, const VehicleState& v, std::int64_t t, WaitingSemantics semantics) {
    BsmRecord r;
    r.t = t;
    r.temp_id = temporary_id(v.id);
    r.edge = v.edge();
    r.position = v.position;
    r.speed = v.speed;
    r.waiting = semantics == WaitingSemantics::Resetting ? v.waiting_timer : v.cumulative_waiting;
    r.intent = intent_of(net, v);
    return r;
}

int FeatureSample::approach_count(Heading h) const {
    auto i = index_of(h) * 2;
    return subject.counts[i] + subject.counts[i + 1];
}

double FeatureSample::approach_awt(Heading h) const {
    auto i = index_of(h) * 2;
    return subject.awt[i] + subject.awt[i + 1];
}

MovementStats movement_stats(std::span<const BsmRecord> records, const RoadNetwork& net, NodeId node) {
    MovementStats s;
    if (records.empty()) return s;
    const std::int64_t t = records.front().t;
    for (const BsmRecord& r : records) {
        if (r.t != t) throw DataError("BSM batch mixes timestamps");
        if (!net.has_edge(r.edge)) throw DataError("BSM on unknown edge " + std::to_string(r.edge));
        auto approach = net.approach_of_edge(r.edge);
        if (!approach || approach->node != node) continue;
        auto i = index_of(phase_movement({net.edge(r.edge).heading, r.intent}));
        s.counts[i] += 1;
        s.awt[i] += r.waiting;
    }
    return s;
}

FeatureSampler::FeatureSampler(const RoadNetwork& net) : net_(&net), subject_(net.subject()) {
    feeders_ = net.upstream_feeders(net.approach(subject_, Heading::East));
    if (feeders_.size() > kFeederCount) feeders_.resize(kFeederCount);
}

FeatureSample FeatureSampler::sample(std::span<const BsmRecord> records, std::int64_t t) const {
    for (const BsmRecord& r : records) {
        if (r.t != t) throw DataError("BSM timestamp " + std::to_string(r.t) + " in sample for t=" + std::to_string(t));
    }
    FeatureSample s;
    s.t = t;
    s.subject = movement_stats(records, *net_, subject_);
    for (Heading h : kAllHeadings) {
        int n = s.approach_count(h);
        s.approach_aawt[index_of(h)] = n > 0 ? s.approach_awt(h) / n : 0.0;
    }
    for (const BsmRecord& r : records) {
        const Edge& e = net_->edge(r.edge);
        auto approach = net_->approach_of_edge(r.edge);
        if (!approach) continue;
        Maneuver m{e.heading, r.intent};
        for (std::size_t k = 0; k < feeders_.size(); ++k) {
            if (feeders_[k].node == approach->node && feeders_[k].maneuver == m) {
                s.upstream_counts[k] += 1;
                s.upstream_awt[k] += r.waiting;
            }
        }
    }
    return s;
}

std::vector<std::string> feature_columns(const RoadNetwork& net) {
    std::vector<std::string> cols{"t"};
    for (Movement m : kAllMovements) cols.push_back("count_" + std::string(to_string(m)));
    for (Movement m : kAllMovements) cols.push_back("awt_" + std::string(to_string(m)));
    for (Heading h : kAllHeadings) cols.push_back("aawt_" + std::string(to_string(h)));
    FeatureSampler sampler(net);
    std::vector<std::string> names;
    for (std::size_t k = 0; k < kFeederCount; ++k) {
        names.push_back(k < sampler.feeders().size() ? "up_" + maneuver_name(sampler.feeders()[k].maneuver)
                                                     : "up_" + std::to_string(k + 1));
    }
    for (const auto& n : names) cols.push_back("count_" + n);
    for (const auto& n : names) cols.push_back("awt_" + n);
    cols.push_back("attack");
    return cols;
}

void write_feature_header(std::ostream& os, const RoadNetwork& net) {
    auto cols = feature_columns(net);
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << '\n';
}

void write_feature_row(std::ostream& os, const FeatureSample& s) {
    os << s.t;
    for (int c : s.subject.counts) os << ',' << c;
    for (double w : s.subject.awt) os << ',' << csv::num(w);
    for (double a : s.approach_aawt) os << ',' << csv::num(a);
    for (int c : s.upstream_counts) os << ',' << c;
    for (double w : s.upstream_awt) os << ',' << csv::num(w);
    os << ',' << (s.attack_active ? 1 : 0) << '\n';
}

std::vector<FeatureSample> read_feature_log(const std::string& path) {
    csv::Table table = csv::read(path);
    constexpr std::size_t kColumns = 1 + 8 + 8 + 4 + 3 + 3 + 1;
    if (table.header.size() != kColumns || table.header.front() != "t")
        throw DataError(path + " is not a feature log");
    std::vector<FeatureSample> out;
    out.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        FeatureSample s;
        std::size_t c = 0;
        s.t = csv::to_int(row[c++]);
        for (auto& v : s.subject.counts) v = static_cast<int>(csv::to_int(row[c++]));
        for (auto& v : s.subject.awt) v = csv::to_double(row[c++]);
        for (auto& v : s.approach_aawt) v = csv::to_double(row[c++]);
        for (auto& v : s.upstream_counts) v = static_cast<int>(csv::to_int(row[c++]));
        for (auto& v : s.upstream_awt) v = csv::to_double(row[c++]);
        s.attack_active = csv::to_int(row[c++]) != 0;
        out.push_back(s);
    }
    return out;
}

void write_bsm_header(std::ostream& os) { os << "t,temp_id,edge,position,speed,waiting,intent\n"; }

void write_bsm_row(std::ostream& os, const BsmRecord& r) {
    os << r.t << ',' << r.temp_id << ',' << r.edge << ',' << csv::num(r.position) << ',' << csv::num(r.speed)
       << ',' << csv::num(r.waiting) << ',' << to_string(r.intent) << '\n';
}

std::vector<BsmRecord> read_bsm_log(const std::string& path) {
    csv::Table table = csv::read(path);
    std::vector<BsmRecord> out;
    out.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        BsmRecord r;
        r.t = csv::to_int(row[0]);
        r.temp_id = static_cast<std::uint32_t>(csv::to_int(row[1]));
        r.edge = static_cast<EdgeId>(csv::to_int(row[2]));
        r.position = csv::to_double(row[3]);
        r.speed = csv::to_double(row[4]);
        r.waiting = csv::to_double(row[5]);
        r.intent = row[6] == "L" ? Turn::Left : row[6] == "R" ? Turn::Right : Turn::Through;
        out.push_back(r);
    }
    return out;
}

} // namespace poisonlab
