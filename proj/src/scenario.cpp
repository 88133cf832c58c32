#include "poisonlab/scenario.hpp"

#include "poisonlab/csv.hpp"
#include "poisonlab/errors.hpp"
#include "poisonlab/microsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace poisonlab {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

bool on_edges(const std::vector<EdgeId>& edges, EdgeId e) {
    return std::find(edges.begin(), edges.end(), e) != edges.end();
}

PhaseLogRow phase_row(const RoadNetwork& net, const SignalController& c, std::int64_t t) {
    const auto& s = c.state();
    PhaseLogRow row;
    row.t = t;
    row.node = net.node(s.node).name;
    row.phase = s.phase;
    if (s.phase != PhaseKind::AllRed) row.movement = s.movement;
    row.seconds_in_phase = c.seconds_in_phase(t);
    return row;
}

} // namespace

RunResult simulate(const ScenarioConfig& cfg) {
    cfg.validate();
    const RoadNetwork net = RoadNetwork::build_arterial(cfg.geometry);
    World world(net, cfg.sim, cfg.seed);
    FeatureSampler sampler(net);
    const std::vector<NodeId> signalized = net.signalized_nodes();
    const std::vector<EdgeId> eb_edges = net.approach(net.subject(), Heading::East).edges;

    std::optional<Attacker> attacker;
    if (cfg.attack) attacker.emplace(net, *cfg.attack, cfg.sim.car);
    const bool phantom = attacker && cfg.attack->mode == AttackMode::Phantom;
    const bool shadowed = phantom && cfg.attack->phantom_feedback == PhantomFeedback::Open;
    const NodeId target_node = cfg.attack && cfg.attack->target_node ? *cfg.attack->target_node : net.subject();

    std::vector<SignalController> actuated, shadow;
    for (NodeId n : signalized) {
        actuated.emplace_back(n, cfg.timing);
        if (shadowed) shadow.emplace_back(n, cfg.timing);
    }
    std::vector<RightOfWay> signals(net.nodes().size(), RightOfWay::all(SignalColor::Red));

    RunResult out;
    out.config_hash = config_hash(cfg);
    const auto substeps = static_cast<int>(std::lround(1.0 / cfg.sim.dt));
    const std::int64_t analysis_end = cfg.duration - cfg.cooldown;
    std::vector<BsmRecord> previous_merged;
    double waiting_cum = 0.0;

    auto world_bsms = [&](std::int64_t t) {
        std::vector<BsmRecord> r;
        r.reserve(world.vehicles().size());
        for (const VehicleState& v : world.vehicles()) r.push_back(emit_bsm(net, v, t, cfg.waiting));
        return r;
    };
    auto count_world_fakes = [&] {
        return static_cast<int>(std::count_if(world.vehicles().begin(), world.vehicles().end(),
                                              [](const VehicleState& v) { return v.id.provenance == Provenance::Fake; }));
    };

    for (std::int64_t s = 0; s < cfg.duration; ++s) {
        const std::int64_t t = s - cfg.warmup;
        const bool in_window = s >= cfg.warmup && s < analysis_end;

        if (s > 0) {
            for (int k = 0; k < substeps; ++k) {
                world.step(signals);
                if (attacker && !phantom) {
                    for (const VehicleState& v : world.exited_last_step()) {
                        if (v.id.provenance == Provenance::Fake) attacker->record_despawn(t, v.id);
                    }
                }
                if (phantom) {
                    std::vector<BsmRecord> real = world_bsms(t);
                    attacker->advance_fakes(real, signals, cfg.sim.dt, t);
                }
            }
        }

        if (attacker) {
            const AawtVector view = aawt_vector(movement_stats(previous_merged, net, target_node));
            std::vector<BsmRecord> now = world_bsms(t);
            const Occupancy merged = occupancy_from(net, now, attacker->phantoms(), cfg.sim.car.length);
            const int active = phantom ? static_cast<int>(attacker->phantoms().size()) : count_world_fakes();
            if (auto plan = attacker->plan_injection(view, t, merged, active)) {
                if (!phantom) world.insert_vehicle(plan->vehicle);
                attacker->commit(*plan);
            }
        }

        std::vector<BsmRecord> real_records;
        std::vector<BsmRecord> merged = world_bsms(t);
        if (phantom) {
            real_records = merged;
            std::vector<BsmRecord> fakes = attacker->fake_bsms(t, cfg.waiting);
            merged.insert(merged.end(), fakes.begin(), fakes.end());
        }
        FeatureSample sample = sampler.sample(merged, t);
        const int fakes_present = phantom ? static_cast<int>(attacker->phantoms().size()) : count_world_fakes();
        sample.attack_active = fakes_present > 0;

        std::vector<AawtVector> controller_view;
        for (std::size_t k = 0; k < signalized.size(); ++k) {
            const NodeId n = signalized[k];
            const MovementStats poisoned = movement_stats(merged, net, n);
            const MovementStats& actuating = shadowed ? movement_stats(real_records, net, n) : poisoned;
            signals[n] = actuated[k].tick(actuating, t);
            if (shadowed) shadow[k].tick(poisoned, t);
            if (cfg.output.bsm_log && in_window) controller_view.push_back(aawt_vector(actuating));
            out.phases.push_back(phase_row(net, actuated[k], t));
            if (shadowed) out.shadow_phases.push_back(phase_row(net, shadow[k], t));
        }

        out.features_full.push_back(sample);
        if (in_window) {
            out.features.push_back(sample);
            TruthRow truth;
            truth.t = t;
            for (const VehicleState& v : world.vehicles()) {
                if (!on_edges(eb_edges, v.edge())) continue;
                if (v.id.provenance == Provenance::Fake) {
                    ++truth.fake_eb;
                    continue;
                }
                ++truth.real_eb;
                if (v.speed <= kWaitingSpeedThreshold) ++truth.real_eb_stopped;
            }
            if (phantom) {
                for (const VehicleState& v : attacker->phantoms()) {
                    if (on_edges(eb_edges, v.edge())) ++truth.fake_eb;
                }
            }
            waiting_cum += truth.real_eb_stopped;
            truth.real_eb_waiting_cum = waiting_cum;
            out.truth.push_back(truth);
            if (cfg.output.bsm_log) {
                out.bsm.insert(out.bsm.end(), merged.begin(), merged.end());
                out.controller_aawt.push_back(std::move(controller_view));
            }
        }
        if (cfg.output.trajectory_log) {
            for (const VehicleState& v : world.vehicles()) {
                if (v.id.provenance == Provenance::Real)
                    out.trajectories.push_back({t, v.id.serial, v.edge(), v.position, v.speed});
            }
        }
        previous_merged = std::move(merged);
    }
    if (attacker) out.attack_events = attacker->events();
    return out;
}

void write_truth_header(std::ostream& os) { os << "t,real_eb,fake_eb,real_eb_stopped,real_eb_waiting_cum\n"; }

void write_truth_row(std::ostream& os, const TruthRow& r) {
    os << r.t << ',' << r.real_eb << ',' << r.fake_eb << ',' << r.real_eb_stopped << ','
       << csv::num(r.real_eb_waiting_cum) << '\n';
}

std::vector<TruthRow> read_truth_log(const std::string& path) {
    csv::Table table = csv::read(path);
    if (table.header.size() != 5 || table.header.front() != "t") throw DataError(path + " is not a truth log");
    std::vector<TruthRow> out;
    for (const auto& row : table.rows) {
        TruthRow r;
        r.t = csv::to_int(row[0]);
        r.real_eb = static_cast<int>(csv::to_int(row[1]));
        r.fake_eb = static_cast<int>(csv::to_int(row[2]));
        r.real_eb_stopped = static_cast<int>(csv::to_int(row[3]));
        r.real_eb_waiting_cum = csv::to_double(row[4]);
        out.push_back(r);
    }
    return out;
}

void write_trajectory_header(std::ostream& os) { os << "t,serial,edge,position,speed\n"; }

void write_trajectory_row(std::ostream& os, const TrajectoryRow& r) {
    os << r.t << ',' << r.serial << ',' << r.edge << ',' << csv::num(r.position) << ',' << csv::num(r.speed) << '\n';
}

std::string resolve_output_dir(const ScenarioConfig& cfg) {
    if (!cfg.output.dir.empty()) return cfg.output.dir;
    return (fs::path(default_output_root()) / cfg.name).string();
}

namespace {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

class ArtifactWriter {
public:
    explicit ArtifactWriter(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

    std::string write(const std::string& name, const std::string& bytes) {
        fs::path p = dir_ / name;
        std::ofstream os(p, std::ios::binary);
        if (!os) throw DataError("cannot write " + p.string());
        os << bytes;
        if (!os) throw DataError("write failed for " + p.string());
        hashes_[name] = hex64(fnv1a64(bytes));
        return p.string();
    }

    const json& hashes() const { return hashes_; }

private:
    fs::path dir_;
    json hashes_ = json::object();
};

} // namespace

RunArtifacts write_run(const RunResult& run, const ScenarioConfig& cfg, const std::string& dir) {
    const RoadNetwork net = RoadNetwork::build_arterial(cfg.geometry);
    ArtifactWriter w(dir);
    RunArtifacts a;
    a.dir = dir;

    auto features_csv = [&](const std::vector<FeatureSample>& rows) {
        std::ostringstream os;
        write_feature_header(os, net);
        for (const auto& r : rows) write_feature_row(os, r);
        return os.str();
    };
    a.features = w.write("features.csv", features_csv(run.features));
    a.features_full = w.write("features_full.csv", features_csv(run.features_full));
    {
        std::ostringstream os;
        write_phase_header(os);
        for (const auto& r : run.phases) write_phase_row(os, r);
        a.phases = w.write("phases.csv", os.str());
    }
    if (!run.shadow_phases.empty()) {
        std::ostringstream os;
        write_phase_header(os);
        for (const auto& r : run.shadow_phases) write_phase_row(os, r);
        a.shadow_phases = w.write("phases_shadow.csv", os.str());
    }
    {
        std::ostringstream os;
        write_attack_header(os);
        for (const auto& e : run.attack_events) write_attack_row(os, e);
        a.attack = w.write("attack.csv", os.str());
    }
    {
        std::ostringstream os;
        write_truth_header(os);
        for (const auto& r : run.truth) write_truth_row(os, r);
        a.truth = w.write("truth.csv", os.str());
    }
    if (cfg.output.bsm_log) {
        std::ostringstream os;
        write_bsm_header(os);
        for (const auto& r : run.bsm) write_bsm_row(os, r);
        a.bsm = w.write("bsm.csv", os.str());
    }
    if (cfg.output.trajectory_log) {
        std::ostringstream os;
        write_trajectory_header(os);
        for (const auto& r : run.trajectories) write_trajectory_row(os, r);
        a.trajectories = w.write("trajectories.csv", os.str());
    }

    json m;
    m["name"] = cfg.name;
    m["seed"] = cfg.seed;
    m["config_hash"] = run.config_hash;
    m["config"] = to_json(cfg);
    m["analysis_window"] = {{"first_sim_second", cfg.warmup}, {"end_sim_second", cfg.duration - cfg.cooldown}};
    m["time_origin"] = "t = 0 is the first second after warm-up";
    m["files"] = w.hashes();
    a.manifest = w.write("manifest.json", m.dump(2) + "\n");
    return a;
}

RunArtifacts run_scenario(const ScenarioConfig& cfg) {
    cfg.validate();
    return write_run(simulate(cfg), cfg, resolve_output_dir(cfg));
}

} // namespace poisonlab
