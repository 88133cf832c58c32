#pragma once

#include "poisonlab/atsc.hpp"
#include "poisonlab/attacker.hpp"
#include "poisonlab/detector.hpp"
#include "poisonlab/lstm.hpp"
#include "poisonlab/microsim.hpp"
#include "poisonlab/roadnet.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace poisonlab {

struct DetectorSettings {
    std::vector<FeatureMode> modes{FeatureMode::Baseline, FeatureMode::Upstream};
    int lookback = 10;
    double train_fraction = 0.7;
    UpstreamAwt upstream_awt = UpstreamAwt::Sum;
    std::int64_t report_interval = 100;
    nn::TrainingConfig training;

    DatasetOptions dataset(FeatureMode m) const { return {m, lookback, train_fraction, upstream_awt}; }
};

struct OutputSettings {
    std::string dir;             // empty: derived from POISONLAB_OUT and the scenario name
    bool bsm_log = false;        // large
    bool trajectory_log = false; // real vehicles only
};

struct ScenarioConfig {
    std::string name = "default";
    std::uint64_t seed = 1;
    std::int64_t duration = 3600; // s
    std::int64_t warmup = 600;
    std::int64_t cooldown = 600;
    GeometryConfig geometry;
    SimulationParams sim;
    SignalTiming timing;
    WaitingSemantics waiting = WaitingSemantics::Resetting;
    std::optional<AttackConfig> attack;
    DetectorSettings detector;
    OutputSettings output;

    std::int64_t analysis_length() const { return duration - warmup - cooldown; }
    /// Throws ConfigError naming the offending key.
    void validate() const;
};

nlohmann::json to_json(const ScenarioConfig& c);
/// Strict parse: unknown keys and wrong types are ConfigErrors.
ScenarioConfig config_from_json(const nlohmann::json& j);
ScenarioConfig load_config(const std::string& path);

/// Applies "dotted.key=value" to a config document. The value is parsed as
/// JSON when possible, otherwise taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Named training presets: "table1" (1000 epochs) and "ci" (100 epochs).
nn::TrainingConfig training_profile(const std::string& name);

/// FNV-1a 64 of the canonical JSON of every output-affecting setting.
std::string config_hash(const ScenarioConfig& c);
std::uint64_t fnv1a64(std::string_view bytes);

/// Root directory for outputs: $POISONLAB_OUT, else "runs".
std::string default_output_root();

} // namespace poisonlab
