#pragma once

#include "poisonlab/attacker.hpp"
#include "poisonlab/lstm.hpp"
#include "poisonlab/msgplane.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace poisonlab {

enum class FeatureMode : std::uint8_t {
    Baseline, // EB count, EB AAWT
    Upstream, // baseline + 3 upstream feeder counts + 3 upstream AWT values
};

/// How the upstream waiting-time columns are formed.
enum class UpstreamAwt : std::uint8_t { Sum, Average };

std::string_view to_string(FeatureMode m);
FeatureMode parse_feature_mode(std::string_view s);
std::string_view to_string(UpstreamAwt a);
UpstreamAwt parse_upstream_awt(std::string_view s);

int feature_dimension(FeatureMode m);
std::vector<double> feature_vector(const FeatureSample& s, FeatureMode m, UpstreamAwt awt = UpstreamAwt::Sum);
/// Prediction target: vehicles on the subject's EB approach.
double eb_count(const FeatureSample& s);

struct DatasetOptions {
    FeatureMode mode = FeatureMode::Baseline;
    int lookback = 10;
    double train_fraction = 0.7;
    UpstreamAwt upstream_awt = UpstreamAwt::Sum;
};

struct DatasetSplit {
    nn::SequenceDataset train; // windows ending in [L, boundary)
    nn::SequenceDataset val;   // windows ending in [boundary, N)
    nn::NormalizationSpec norm; // fitted on rows [0, boundary)
    std::size_t boundary = 0;
    std::vector<double> raw_targets; // un-normalized EB counts, one per row
};

/// Chronological windows over an analysis-window feature log. Throws
/// DataError when the log has fewer than L + 2 rows or is not contiguous.
DatasetSplit build_dataset(std::span<const FeatureSample> log, const DatasetOptions& opt);

struct DetectionThreshold {
    double raw = 0.0;   // max |prediction - observed| over validation windows, vehicles
    int effective = 0;  // ceil(raw)
};

DetectionThreshold threshold_from_raw(double raw);

struct DetectorSpec {
    FeatureMode mode = FeatureMode::Baseline;
    UpstreamAwt upstream_awt = UpstreamAwt::Sum;
    int lookback = 10;
    nn::LstmModel model{nn::LstmDims{}};
    nn::NormalizationSpec norm;
    DetectionThreshold threshold;
    nn::TrainingConfig training;
};

/// Denormalized EB-count prediction for one normalized (input x L) window.
/// The one code path used both for thresholds and for live verdicts.
double predict_count(const DetectorSpec& spec, const Eigen::MatrixXd& window);

struct ValidationStats {
    double rmse = 0.0;
    double mae = 0.0;
    double max_abs = 0.0;
    std::vector<double> errors; // signed prediction - observed, per val window
};

ValidationStats evaluate_windows(const DetectorSpec& spec, const nn::SequenceDataset& set,
                                 std::span<const double> raw_targets);

/// Raw = max absolute validation error; effective = ceiling. Throws DataError
/// on an empty validation set.
DetectionThreshold compute_threshold(const DetectorSpec& spec, const nn::SequenceDataset& val,
                                     std::span<const double> raw_targets);

struct TrainedDetector {
    DetectorSpec spec;
    nn::TrainingHistory history;
    ValidationStats validation;
    std::size_t train_windows = 0;
    std::size_t val_windows = 0;
};

TrainedDetector train_detector(std::span<const FeatureSample> log, const DatasetOptions& opt,
                               const nn::TrainingConfig& cfg, const nn::EpochCallback& on_epoch = {});

struct DetectionVerdict {
    std::int64_t t = 0;
    double observed = 0.0;
    double predicted = 0.0;
    double abs_error = 0.0;
    int threshold = 0;
    bool flagged = false;
};

inline bool is_flagged(double abs_error, int threshold) { return abs_error > static_cast<double>(threshold); }

enum class StreamStatus : std::uint8_t { Warmup, Verdict, Gap };

struct StreamEvent {
    StreamStatus status;
    std::int64_t t;
    std::optional<DetectionVerdict> verdict;
    std::string message;
};

/// Streaming fold over per-second samples. A verdict for second t uses the
/// L samples t-L..t-1; a missing second yields a Gap event and restarts the
/// history from the sample that revealed it.
class OnlineDetector {
public:
    explicit OnlineDetector(const DetectorSpec& spec);

    StreamEvent push(const FeatureSample& s);
    const DetectorSpec& spec() const { return *spec_; }

private:
    const DetectorSpec* spec_;
    std::vector<Eigen::VectorXd> history_; // normalized inputs, oldest first
    std::optional<std::int64_t> last_t_;
};

/// Replays a whole log; returns the verdicts only (gaps and warm-up skipped).
std::vector<DetectionVerdict> detect(const DetectorSpec& spec, std::span<const FeatureSample> log,
                                     std::vector<StreamEvent>* diagnostics = nullptr);

void write_verdict_header(std::ostream& os);
void write_verdict_row(std::ostream& os, const DetectionVerdict& v);
std::vector<DetectionVerdict> read_verdict_log(const std::string& path);

/// Span of closely spaced injections.
struct InjectionSurge {
    std::int64_t first = 0;
    std::int64_t last = 0;
    int injections = 0;

    std::int64_t span() const { return last - first; }
};

/// Groups inject events whose consecutive spacing is <= max_gap and keeps
/// groups spanning at least min_span seconds.
std::vector<InjectionSurge> injection_surges(std::span<const AttackEvent> events, std::int64_t max_gap = 20,
                                             std::int64_t min_span = 60);

struct SurgeCoverage {
    InjectionSurge surge;
    int flags = 0;
};

struct DetectionReport {
    std::string name;
    std::int64_t attack_start = 0;
    std::optional<std::int64_t> first_flag; // at or after attack start
    std::optional<std::int64_t> latency;
    int false_positives = 0; // flags before attack start
    int total_flags = 0;
    std::int64_t interval = 100;
    std::vector<std::pair<std::int64_t, int>> flags_per_interval; // (interval start, flags)
    std::vector<SurgeCoverage> surges;

    bool all_surges_flagged() const;
};

DetectionReport detection_report(std::string name, std::span<const DetectionVerdict> verdicts,
                                 std::span<const AttackEvent> events, std::int64_t attack_start,
                                 std::int64_t interval = 100);

void write_report_text(std::ostream& os, std::span<const DetectionReport> reports);
void write_report_csv(std::ostream& os, std::span<const DetectionReport> reports);

/// JSON checkpoint with dimensions, weights, normalization, threshold and
/// training settings.
void save_detector(const DetectorSpec& spec, const std::string& path);
DetectorSpec load_detector(const std::string& path);

void write_loss_curves(std::ostream& os, const nn::TrainingHistory& h);

} // namespace poisonlab
