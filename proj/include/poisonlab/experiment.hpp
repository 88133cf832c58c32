#pragma once

#include "poisonlab/config.hpp"
#include "poisonlab/detector.hpp"
#include "poisonlab/scenario.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace poisonlab {

/// Throws ConfigError unless the two configs share the seed and every
/// setting except the attack block and output location.
void check_pairing(const ScenarioConfig& attack_free, const ScenarioConfig& attacked);

/// The same scenario with the attack removed.
ScenarioConfig attack_free_counterpart(const ScenarioConfig& cfg);

struct ModeOutcome {
    FeatureMode mode = FeatureMode::Baseline;
    DetectorSpec spec;
    std::string model_path;
    bool trained_now = false;
    std::optional<nn::TrainingHistory> history;
    ValidationStats validation;
    std::size_t validation_boundary = 0; // first validation row of the attack-free log
    int validation_flags = 0;            // flags on the attack-free validation segment
    std::vector<DetectionVerdict> attack_free_verdicts;
    std::vector<DetectionVerdict> attack_verdicts;
    DetectionReport report;
};

struct ProfileSummary {
    double mean_eb_count_free = 0.0;   // over the comparison span
    double mean_eb_count_attack = 0.0;
    double mean_eb_aawt_free = 0.0;
    double mean_eb_aawt_attack = 0.0;
    double real_waiting_free = 0.0;    // cumulative real EB vehicle-seconds stopped
    double real_waiting_attack = 0.0;
    int max_count_divergence = 0;      // max |EB count difference| over the analysis window
    std::int64_t span_begin = 1000;
    std::int64_t span_end = 2400;
};

struct ExperimentResult {
    ScenarioConfig attack_free_config;
    ScenarioConfig attack_config;
    RunResult attack_free;
    RunResult attack;
    RunArtifacts attack_free_artifacts;
    RunArtifacts attack_artifacts;
    std::vector<ModeOutcome> modes;
    ProfileSummary profile;
    std::string report_text;
    std::string report_path;
};

struct ExperimentOptions {
    std::string out_dir;          // empty: resolve_output_dir(attack config)
    bool retrain = false;         // ignore cached models
    bool plots = true;
    std::ostream* log = nullptr;  // progress lines
    int progress_every = 50;      // epochs between progress lines
};

ProfileSummary summarize_profiles(const RunResult& attack_free, const RunResult& attack, std::int64_t span_begin = 1000,
                                  std::int64_t span_end = 2400);

/// Simulates both runs, trains (or loads cached) detectors on the
/// attack-free log, replays them on both logs and writes report and plots.
ExperimentResult run_experiment(const ScenarioConfig& attack_free, const ScenarioConfig& attacked,
                                const ExperimentOptions& opt = {});

} // namespace poisonlab
