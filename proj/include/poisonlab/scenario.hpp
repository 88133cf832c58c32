#pragma once

#include "poisonlab/atsc.hpp"
#include "poisonlab/attacker.hpp"
#include "poisonlab/config.hpp"
#include "poisonlab/msgplane.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace poisonlab {

/// Ground truth for evaluation only; never fed to the controller or detector.
struct TruthRow {
    std::int64_t t = 0;
    int real_eb = 0;               // real vehicles on the subject EB approach
    int fake_eb = 0;               // fakes on the subject EB approach
    int real_eb_stopped = 0;       // real EB vehicles at or below 0.1 m/s
    double real_eb_waiting_cum = 0.0; // vehicle-seconds of real EB waiting since t = 0
};

struct TrajectoryRow {
    std::int64_t t;
    std::uint64_t serial;
    EdgeId edge;
    double position;
    double speed;
};

/// Everything a run produces, in memory. Times are analysis-window seconds:
/// t = 0 is the end of warm-up, negative t are warm-up seconds.
struct RunResult {
    std::string config_hash;
    std::vector<FeatureSample> features_full; // whole horizon
    std::vector<FeatureSample> features;      // analysis window only
    std::vector<PhaseLogRow> phases;          // actuated signals, whole horizon
    std::vector<PhaseLogRow> shadow_phases;   // open-loop phantom: poisoned-stream decisions
    std::vector<AttackEvent> attack_events;
    std::vector<TruthRow> truth;              // analysis window
    std::vector<BsmRecord> bsm;               // when enabled
    std::vector<TrajectoryRow> trajectories;  // when enabled
    std::vector<std::vector<AawtVector>> controller_aawt; // [second][signalized node order], when BSM log on
};

/// Runs the closed loop for the whole horizon: microsim step, attacker
/// callback, message-plane sampling, controller ticks.
RunResult simulate(const ScenarioConfig& cfg);

struct RunArtifacts {
    std::string dir;
    std::string features;
    std::string features_full;
    std::string phases;
    std::string shadow_phases; // empty when not produced
    std::string attack;
    std::string truth;
    std::string bsm;          // empty when not produced
    std::string trajectories; // empty when not produced
    std::string manifest;
};

/// Writes every log of `run` under `dir` plus manifest.json.
RunArtifacts write_run(const RunResult& run, const ScenarioConfig& cfg, const std::string& dir);

/// Validates, simulates and writes under cfg.output.dir (or the default root).
RunArtifacts run_scenario(const ScenarioConfig& cfg);

std::string resolve_output_dir(const ScenarioConfig& cfg);

void write_truth_header(std::ostream& os);
void write_truth_row(std::ostream& os, const TruthRow& r);
std::vector<TruthRow> read_truth_log(const std::string& path);

void write_trajectory_header(std::ostream& os);
void write_trajectory_row(std::ostream& os, const TrajectoryRow& r);

} // namespace poisonlab
