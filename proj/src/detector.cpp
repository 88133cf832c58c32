#include "poisonlab/detector.hpp"

#include "poisonlab/csv.hpp"
#include "poisonlab/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

namespace poisonlab {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using json = nlohmann::json;

std::string_view to_string(FeatureMode m) { return m == FeatureMode::Baseline ? "baseline" : "upstream"; }

FeatureMode parse_feature_mode(std::string_view s) {
    if (s == "baseline") return FeatureMode::Baseline;
    if (s == "upstream") return FeatureMode::Upstream;
    throw ConfigError("unknown feature mode '" + std::string(s) + "' (expected baseline|upstream)");
}

std::string_view to_string(UpstreamAwt a) { return a == UpstreamAwt::Sum ? "sum" : "average"; }

UpstreamAwt parse_upstream_awt(std::string_view s) {
    if (s == "sum") return UpstreamAwt::Sum;
    if (s == "average") return UpstreamAwt::Average;
    throw ConfigError("unknown upstream waiting aggregate '" + std::string(s) + "' (expected sum|average)");
}

int feature_dimension(FeatureMode m) { return m == FeatureMode::Baseline ? 2 : 2 + 2 * static_cast<int>(kFeederCount); }

double eb_count(const FeatureSample& s) { return static_cast<double>(s.approach_count(Heading::East)); }

std::vector<double> feature_vector(const FeatureSample& s, FeatureMode m, UpstreamAwt awt) {
    std::vector<double> v{eb_count(s), s.approach_aawt[index_of(Heading::East)]};
    if (m == FeatureMode::Upstream) {
        for (std::size_t k = 0; k < kFeederCount; ++k) v.push_back(static_cast<double>(s.upstream_counts[k]));
        for (std::size_t k = 0; k < kFeederCount; ++k) {
            double w = s.upstream_awt[k];
            if (awt == UpstreamAwt::Average) w = s.upstream_counts[k] > 0 ? w / s.upstream_counts[k] : 0.0;
            v.push_back(w);
        }
    }
    return v;
}

namespace {

VectorXd normalized_input(const FeatureSample& s, FeatureMode mode, UpstreamAwt awt,
                          const nn::NormalizationSpec& norm) {
    std::vector<double> raw = feature_vector(s, mode, awt);
    if (raw.size() != norm.feature_min.size()) throw DataError("normalization spec does not match feature mode");
    VectorXd x(static_cast<Eigen::Index>(raw.size()));
    for (std::size_t j = 0; j < raw.size(); ++j)
        x(static_cast<Eigen::Index>(j)) = nn::normalize(raw[j], norm.feature_min[j], norm.feature_max[j]);
    return x;
}

void check_contiguous(std::span<const FeatureSample> log) {
    for (std::size_t i = 1; i < log.size(); ++i) {
        if (log[i].t != log[i - 1].t + 1)
            throw DataError("feature log is not contiguous at t=" + std::to_string(log[i].t));
    }
}

} // namespace

DatasetSplit build_dataset(std::span<const FeatureSample> log, const DatasetOptions& opt) {
    if (opt.lookback < 1) throw ConfigError("lookback must be at least 1");
    if (!(opt.train_fraction > 0.0 && opt.train_fraction < 1.0)) throw ConfigError("train fraction must lie in (0, 1)");
    const std::size_t N = log.size();
    const auto L = static_cast<std::size_t>(opt.lookback);
    if (N < L + 2)
        throw DataError("feature log has " + std::to_string(N) + " rows; at least " + std::to_string(L + 2) +
                        " are needed for lookback " + std::to_string(L));
    check_contiguous(log);

    DatasetSplit out;
    out.boundary = static_cast<std::size_t>(std::floor(opt.train_fraction * static_cast<double>(N) + 1e-9));
    out.boundary = std::clamp(out.boundary, L + 1, N - 1);

    std::vector<std::vector<double>> rows(N);
    out.raw_targets.resize(N);
    for (std::size_t r = 0; r < N; ++r) {
        rows[r] = feature_vector(log[r], opt.mode, opt.upstream_awt);
        out.raw_targets[r] = eb_count(log[r]);
    }
    out.norm = nn::NormalizationSpec::fit(rows, out.raw_targets, 0, out.boundary);

    const auto D = static_cast<Eigen::Index>(feature_dimension(opt.mode));
    MatrixXd feats(D, static_cast<Eigen::Index>(N));
    VectorXd targets(static_cast<Eigen::Index>(N));
    for (std::size_t r = 0; r < N; ++r) {
        feats.col(static_cast<Eigen::Index>(r)) = normalized_input(log[r], opt.mode, opt.upstream_awt, out.norm);
        targets(static_cast<Eigen::Index>(r)) =
            nn::normalize(out.raw_targets[r], out.norm.target_min, out.norm.target_max);
    }
    for (nn::SequenceDataset* d : {&out.train, &out.val}) {
        d->features = feats;
        d->targets = targets;
        d->lookback = opt.lookback;
    }
    for (std::size_t e = L; e < out.boundary; ++e) out.train.ends.push_back(e);
    for (std::size_t e = out.boundary; e < N; ++e) out.val.ends.push_back(e);
    return out;
}

DetectionThreshold threshold_from_raw(double raw) {
    if (!std::isfinite(raw) || raw < 0.0) throw NumericError("threshold must be a finite non-negative error");
    return {raw, static_cast<int>(std::ceil(raw))};
}

double predict_count(const DetectorSpec& spec, const MatrixXd& window) {
    double y = nn::forward_sequence(spec.model, window, spec.lookback);
    return nn::denormalize(y, spec.norm.target_min, spec.norm.target_max);
}

ValidationStats evaluate_windows(const DetectorSpec& spec, const nn::SequenceDataset& set,
                                 std::span<const double> raw_targets) {
    ValidationStats st;
    double sq = 0.0, ab = 0.0;
    for (std::size_t k = 0; k < set.size(); ++k) {
        double pred = predict_count(spec, set.window(k));
        double err = pred - raw_targets[set.ends[k]];
        st.errors.push_back(err);
        sq += err * err;
        ab += std::abs(err);
        st.max_abs = std::max(st.max_abs, std::abs(err));
    }
    if (!st.errors.empty()) {
        st.rmse = std::sqrt(sq / static_cast<double>(st.errors.size()));
        st.mae = ab / static_cast<double>(st.errors.size());
    }
    return st;
}

DetectionThreshold compute_threshold(const DetectorSpec& spec, const nn::SequenceDataset& val,
                                     std::span<const double> raw_targets) {
    if (val.size() == 0) throw DataError("cannot compute a threshold from an empty validation set");
    return threshold_from_raw(evaluate_windows(spec, val, raw_targets).max_abs);
}

TrainedDetector train_detector(std::span<const FeatureSample> log, const DatasetOptions& opt,
                               const nn::TrainingConfig& cfg, const nn::EpochCallback& on_epoch) {
    if (cfg.lookback != opt.lookback) throw ConfigError("training lookback differs from dataset lookback");
    DatasetSplit data = build_dataset(log, opt);
    TrainedDetector out;
    out.spec.mode = opt.mode;
    out.spec.upstream_awt = opt.upstream_awt;
    out.spec.lookback = opt.lookback;
    out.spec.norm = data.norm;
    out.spec.training = cfg;
    nn::LstmDims dims;
    dims.input = feature_dimension(opt.mode);
    out.spec.model = nn::LstmModel::initialized(dims, cfg.seed);
    out.history = nn::train(out.spec.model, data.train, &data.val, cfg, on_epoch);
    out.validation = evaluate_windows(out.spec, data.val, data.raw_targets);
    out.spec.threshold = compute_threshold(out.spec, data.val, data.raw_targets);
    out.train_windows = data.train.size();
    out.val_windows = data.val.size();
    return out;
}

OnlineDetector::OnlineDetector(const DetectorSpec& spec) : spec_(&spec) {
    if (spec.model.dims().input != feature_dimension(spec.mode))
        throw ConfigError("model input dimension does not match the detector's feature mode");
    spec.norm.validate();
}

StreamEvent OnlineDetector::push(const FeatureSample& s) {
    StreamEvent ev{StreamStatus::Warmup, s.t, std::nullopt, {}};
    if (last_t_ && s.t != *last_t_ + 1) {
        ev.status = StreamStatus::Gap;
        ev.message = "missing samples between t=" + std::to_string(*last_t_) + " and t=" + std::to_string(s.t) +
                     "; history restarted";
        history_.clear();
    }
    const auto L = static_cast<std::size_t>(spec_->lookback);
    if (ev.status != StreamStatus::Gap && history_.size() == L) {
        MatrixXd window(spec_->model.dims().input, spec_->lookback);
        for (std::size_t k = 0; k < L; ++k) window.col(static_cast<Eigen::Index>(k)) = history_[k];
        DetectionVerdict v;
        v.t = s.t;
        v.observed = eb_count(s);
        v.predicted = predict_count(*spec_, window);
        v.abs_error = std::abs(v.predicted - v.observed);
        v.threshold = spec_->threshold.effective;
        v.flagged = is_flagged(v.abs_error, v.threshold);
        ev.status = StreamStatus::Verdict;
        ev.verdict = v;
    }
    history_.push_back(normalized_input(s, spec_->mode, spec_->upstream_awt, spec_->norm));
    if (history_.size() > L) history_.erase(history_.begin());
    last_t_ = s.t;
    return ev;
}

std::vector<DetectionVerdict> detect(const DetectorSpec& spec, std::span<const FeatureSample> log,
                                     std::vector<StreamEvent>* diagnostics) {
    OnlineDetector det(spec);
    std::vector<DetectionVerdict> out;
    for (const FeatureSample& s : log) {
        StreamEvent ev = det.push(s);
        if (ev.verdict) out.push_back(*ev.verdict);
        else if (diagnostics) diagnostics->push_back(std::move(ev));
    }
    return out;
}

void write_verdict_header(std::ostream& os) { os << "t,observed,predicted,abs_error,threshold,flagged\n"; }

void write_verdict_row(std::ostream& os, const DetectionVerdict& v) {
    os << v.t << ',' << csv::num(v.observed) << ',' << csv::num(v.predicted) << ',' << csv::num(v.abs_error) << ','
       << v.threshold << ',' << (v.flagged ? 1 : 0) << '\n';
}

std::vector<DetectionVerdict> read_verdict_log(const std::string& path) {
    csv::Table table = csv::read(path);
    if (table.header.size() != 6 || table.header.front() != "t") throw DataError(path + " is not a verdict log");
    std::vector<DetectionVerdict> out;
    for (const auto& row : table.rows) {
        DetectionVerdict v;
        v.t = csv::to_int(row[0]);
        v.observed = csv::to_double(row[1]);
        v.predicted = csv::to_double(row[2]);
        v.abs_error = csv::to_double(row[3]);
        v.threshold = static_cast<int>(csv::to_int(row[4]));
        v.flagged = csv::to_int(row[5]) != 0;
        out.push_back(v);
    }
    return out;
}

std::vector<InjectionSurge> injection_surges(std::span<const AttackEvent> events, std::int64_t max_gap,
                                             std::int64_t min_span) {
    std::vector<std::int64_t> times;
    for (const AttackEvent& e : events) {
        if (e.action == AttackAction::Inject) times.push_back(e.t);
    }
    std::sort(times.begin(), times.end());
    std::vector<InjectionSurge> out;
    std::optional<InjectionSurge> cur;
    auto close = [&] {
        if (cur && cur->span() >= min_span) out.push_back(*cur);
        cur.reset();
    };
    for (std::int64_t t : times) {
        if (cur && t - cur->last > max_gap) close();
        if (!cur) cur = InjectionSurge{t, t, 0};
        cur->last = t;
        cur->injections += 1;
    }
    close();
    return out;
}

bool DetectionReport::all_surges_flagged() const {
    return std::all_of(surges.begin(), surges.end(), [](const SurgeCoverage& s) { return s.flags > 0; });
}

DetectionReport detection_report(std::string name, std::span<const DetectionVerdict> verdicts,
                                 std::span<const AttackEvent> events, std::int64_t attack_start,
                                 std::int64_t interval) {
    DetectionReport r;
    r.name = std::move(name);
    r.attack_start = attack_start;
    r.interval = std::max<std::int64_t>(1, interval);
    std::map<std::int64_t, int> buckets;
    for (const DetectionVerdict& v : verdicts) {
        std::int64_t b = (v.t >= 0 ? v.t / r.interval : (v.t - r.interval + 1) / r.interval) * r.interval;
        buckets.try_emplace(b, 0);
        if (!v.flagged) continue;
        ++buckets[b];
        ++r.total_flags;
        if (v.t < attack_start) ++r.false_positives;
        else if (!r.first_flag) r.first_flag = v.t;
    }
    r.flags_per_interval.assign(buckets.begin(), buckets.end());
    if (r.first_flag) r.latency = *r.first_flag - attack_start;
    // Surges are judged only where verdicts exist.
    std::vector<AttackEvent> covered;
    if (!verdicts.empty()) {
        const std::int64_t horizon = verdicts.back().t;
        for (const AttackEvent& e : events) {
            if (e.t <= horizon) covered.push_back(e);
        }
    }
    for (const InjectionSurge& s : injection_surges(covered)) {
        SurgeCoverage c{s, 0};
        for (const DetectionVerdict& v : verdicts) {
            if (v.flagged && v.t >= s.first && v.t <= s.last) ++c.flags;
        }
        r.surges.push_back(c);
    }
    return r;
}

void write_report_text(std::ostream& os, std::span<const DetectionReport> reports) {
    for (const DetectionReport& r : reports) {
        os << "detector " << r.name << '\n';
        os << "  attack start      " << r.attack_start << " s\n";
        if (r.first_flag) {
            os << "  first flag        " << *r.first_flag << " s\n";
            os << "  latency           " << *r.latency << " s\n";
        } else {
            os << "  first flag        not detected\n";
            os << "  latency           not detected\n";
        }
        os << "  false positives   " << r.false_positives << '\n';
        os << "  total flags       " << r.total_flags << '\n';
        os << "  flags per " << r.interval << " s:";
        for (const auto& [start, n] : r.flags_per_interval) {
            if (n > 0) os << ' ' << start << ':' << n;
        }
        os << '\n';
        for (const SurgeCoverage& s : r.surges) {
            os << "  surge [" << s.surge.first << ", " << s.surge.last << "] " << s.surge.injections
               << " injections, " << s.flags << " flags\n";
        }
    }
    if (reports.size() == 2) {
        const DetectionReport& a = reports[0];
        const DetectionReport& b = reports[1];
        os << "comparison " << a.name << " vs " << b.name << '\n';
        auto lat = [](const DetectionReport& r) {
            return r.latency ? std::to_string(*r.latency) + " s" : std::string("not detected");
        };
        os << "  latency           " << lat(a) << " vs " << lat(b) << '\n';
        if (a.latency && b.latency && *b.latency > 0) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.3f", static_cast<double>(*a.latency) / static_cast<double>(*b.latency));
            os << "  latency ratio     " << buf << '\n';
        }
        os << "  false positives   " << a.false_positives << " vs " << b.false_positives << '\n';
    }
}

void write_report_csv(std::ostream& os, std::span<const DetectionReport> reports) {
    os << "detector,attack_start,first_flag,latency,false_positives,total_flags,surges,surges_flagged\n";
    for (const DetectionReport& r : reports) {
        int flagged = 0;
        for (const auto& s : r.surges) flagged += s.flags > 0 ? 1 : 0;
        os << r.name << ',' << r.attack_start << ',' << (r.first_flag ? std::to_string(*r.first_flag) : "") << ','
           << (r.latency ? std::to_string(*r.latency) : "") << ',' << r.false_positives << ',' << r.total_flags << ','
           << r.surges.size() << ',' << flagged << '\n';
    }
}

void save_detector(const DetectorSpec& spec, const std::string& path) {
    const auto& d = spec.model.dims();
    json j;
    j["format"] = "poisonlab-detector";
    j["version"] = 1;
    j["mode"] = std::string(to_string(spec.mode));
    j["upstream_awt"] = std::string(to_string(spec.upstream_awt));
    j["lookback"] = spec.lookback;
    j["dims"] = {{"input", d.input}, {"hidden1", d.hidden1}, {"hidden2", d.hidden2}};
    j["params"] = std::vector<double>(spec.model.params().data(),
                                      spec.model.params().data() + spec.model.params().size());
    j["normalization"] = {{"feature_min", spec.norm.feature_min},
                          {"feature_max", spec.norm.feature_max},
                          {"target_min", spec.norm.target_min},
                          {"target_max", spec.norm.target_max}};
    j["threshold"] = {{"raw", spec.threshold.raw}, {"effective", spec.threshold.effective}};
    const auto& t = spec.training;
    j["training"] = {{"epochs", t.epochs},       {"batch_size", t.batch_size}, {"lr", t.adam.lr},
                     {"beta1", t.adam.beta1},    {"beta2", t.adam.beta2},      {"eps", t.adam.eps},
                     {"clip_norm", t.clip_norm}, {"lookback", t.lookback},     {"seed", t.seed}};
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write model checkpoint " + path);
    os << j.dump(1) << '\n';
}

DetectorSpec load_detector(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open model checkpoint " + path);
    try {
        json j = json::parse(is);
        if (j.at("format") != "poisonlab-detector" || j.at("version") != 1)
            throw DataError(path + " is not a version-1 detector checkpoint");
        DetectorSpec s;
        s.mode = parse_feature_mode(j.at("mode").get<std::string>());
        s.upstream_awt = parse_upstream_awt(j.at("upstream_awt").get<std::string>());
        s.lookback = j.at("lookback").get<int>();
        nn::LstmDims d{j.at("dims").at("input").get<int>(), j.at("dims").at("hidden1").get<int>(),
                       j.at("dims").at("hidden2").get<int>()};
        s.model = nn::LstmModel(d);
        auto p = j.at("params").get<std::vector<double>>();
        if (p.size() != static_cast<std::size_t>(s.model.params().size()))
            throw DataError(path + ": parameter count does not match dimensions");
        s.model.params() = Eigen::Map<const VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
        const json& n = j.at("normalization");
        s.norm.feature_min = n.at("feature_min").get<std::vector<double>>();
        s.norm.feature_max = n.at("feature_max").get<std::vector<double>>();
        s.norm.target_min = n.at("target_min").get<double>();
        s.norm.target_max = n.at("target_max").get<double>();
        s.norm.validate();
        s.threshold.raw = j.at("threshold").at("raw").get<double>();
        s.threshold.effective = j.at("threshold").at("effective").get<int>();
        const json& t = j.at("training");
        s.training.epochs = t.at("epochs").get<int>();
        s.training.batch_size = t.at("batch_size").get<int>();
        s.training.adam.lr = t.at("lr").get<double>();
        s.training.adam.beta1 = t.at("beta1").get<double>();
        s.training.adam.beta2 = t.at("beta2").get<double>();
        s.training.adam.eps = t.at("eps").get<double>();
        s.training.clip_norm = t.at("clip_norm").get<double>();
        s.training.lookback = t.at("lookback").get<int>();
        s.training.seed = t.at("seed").get<std::uint64_t>();
        if (d.input != feature_dimension(s.mode)) throw DataError(path + ": input dimension does not match mode");
        if (!s.model.finite()) throw NumericError(path + ": checkpoint contains non-finite weights");
        return s;
    } catch (const json::exception& e) {
        throw DataError(path + ": malformed checkpoint (" + e.what() + ")");
    }
}

void write_loss_curves(std::ostream& os, const nn::TrainingHistory& h) {
    os << "epoch,train_mae,val_mae\n";
    for (std::size_t e = 0; e < h.train_mae.size(); ++e) {
        os << (e + 1) << ',' << csv::num(h.train_mae[e]) << ',' << csv::num(h.val_mae[e]) << '\n';
    }
}

} // namespace poisonlab
