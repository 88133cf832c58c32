#include "poisonlab/experiment.hpp"

#include "poisonlab/errors.hpp"
#include "poisonlab/svg.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace poisonlab {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

json pairing_view(const ScenarioConfig& c) {
    json j = to_json(c);
    j.erase("attack");
    j.erase("output");
    j.erase("name");
    return j;
}

std::string f3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::vector<double> column(const std::vector<FeatureSample>& rows, double (*get)(const FeatureSample&)) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(get(r));
    return out;
}

double eb_aawt(const FeatureSample& s) { return s.approach_aawt[index_of(Heading::East)]; }
double time_of(const FeatureSample& s) { return static_cast<double>(s.t); }

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw DataError("cannot write " + p.string());
    os << s;
}

} // namespace

void check_pairing(const ScenarioConfig& a, const ScenarioConfig& b) {
    if (a.seed != b.seed)
        throw ConfigError("pairing error: seeds differ (" + std::to_string(a.seed) + " vs " + std::to_string(b.seed) + ")");
    json ja = pairing_view(a), jb = pairing_view(b);
    if (ja != jb) {
        json diff = json::diff(ja, jb);
        std::string where = diff.empty() ? "?" : diff.front().value("path", "?");
        throw ConfigError("pairing error: non-attack settings differ at " + where);
    }
}

ScenarioConfig attack_free_counterpart(const ScenarioConfig& cfg) {
    ScenarioConfig c = cfg;
    c.attack.reset();
    c.name = cfg.name + "-attack-free";
    c.output.dir.clear();
    return c;
}

ProfileSummary summarize_profiles(const RunResult& free, const RunResult& attack, std::int64_t span_begin,
                                  std::int64_t span_end) {
    ProfileSummary p;
    p.span_begin = span_begin;
    p.span_end = span_end;
    int n = 0;
    const std::size_t rows = std::min(free.features.size(), attack.features.size());
    for (std::size_t i = 0; i < rows; ++i) {
        const auto& a = free.features[i];
        const auto& b = attack.features[i];
        p.max_count_divergence =
            std::max(p.max_count_divergence, std::abs(a.approach_count(Heading::East) - b.approach_count(Heading::East)));
        if (a.t < span_begin || a.t >= span_end) continue;
        p.mean_eb_count_free += eb_count(a);
        p.mean_eb_count_attack += eb_count(b);
        p.mean_eb_aawt_free += eb_aawt(a);
        p.mean_eb_aawt_attack += eb_aawt(b);
        ++n;
    }
    if (n > 0) {
        p.mean_eb_count_free /= n;
        p.mean_eb_count_attack /= n;
        p.mean_eb_aawt_free /= n;
        p.mean_eb_aawt_attack /= n;
    }
    if (!free.truth.empty()) p.real_waiting_free = free.truth.back().real_eb_waiting_cum;
    if (!attack.truth.empty()) p.real_waiting_attack = attack.truth.back().real_eb_waiting_cum;
    return p;
}

ExperimentResult run_experiment(const ScenarioConfig& free_cfg, const ScenarioConfig& attack_cfg,
                                const ExperimentOptions& opt) {
    free_cfg.validate();
    attack_cfg.validate();
    check_pairing(free_cfg, attack_cfg);
    if (free_cfg.attack) throw ConfigError("pairing error: the attack-free configuration contains an attack");

    ExperimentResult r;
    r.attack_free_config = free_cfg;
    r.attack_config = attack_cfg;
    const fs::path root = opt.out_dir.empty() ? fs::path(resolve_output_dir(attack_cfg)) : fs::path(opt.out_dir);
    fs::create_directories(root / "models");
    auto log = [&](const std::string& line) {
        if (opt.log) *opt.log << line << std::endl;
    };

    log("simulating attack-free run");
    r.attack_free = simulate(free_cfg);
    r.attack_free_artifacts = write_run(r.attack_free, free_cfg, (root / "attack_free").string());
    log("simulating attack run");
    r.attack = simulate(attack_cfg);
    r.attack_artifacts = write_run(r.attack, attack_cfg, (root / "attack").string());
    r.profile = summarize_profiles(r.attack_free, r.attack);

    const std::int64_t attack_start = attack_cfg.attack ? attack_cfg.attack->start : 0;
    std::vector<DetectionReport> reports;
    for (FeatureMode mode : free_cfg.detector.modes) {
        ModeOutcome m;
        m.mode = mode;
        const DatasetOptions dopt = free_cfg.detector.dataset(mode);
        const std::string tag(to_string(mode));
        m.model_path = (root / "models" / (tag + "-" + r.attack_free.config_hash + ".json")).string();
        DatasetSplit data = build_dataset(r.attack_free.features, dopt);
        m.validation_boundary = data.boundary;

        if (!opt.retrain && fs::exists(m.model_path)) {
            log("loading cached " + tag + " model " + m.model_path);
            m.spec = load_detector(m.model_path);
            if (m.spec.mode != mode || m.spec.lookback != dopt.lookback)
                throw DataError(m.model_path + " does not match the configured detector");
            m.validation = evaluate_windows(m.spec, data.val, data.raw_targets);
        } else {
            log("training " + tag + " detector (" + std::to_string(free_cfg.detector.training.epochs) + " epochs)");
            const int every = std::max(1, opt.progress_every);
            TrainedDetector t = train_detector(r.attack_free.features, dopt, free_cfg.detector.training,
                                               [&](int epoch, double tr, double va) {
                                                   if (epoch % every == 0 || epoch == 1)
                                                       log("  " + tag + " epoch " + std::to_string(epoch) +
                                                           " train MAE " + f3(tr) + " val MAE " + f3(va));
                                               });
            m.spec = std::move(t.spec);
            m.history = std::move(t.history);
            m.validation = std::move(t.validation);
            m.trained_now = true;
            save_detector(m.spec, m.model_path);
            std::ostringstream curves;
            write_loss_curves(curves, *m.history);
            write_text(root / ("loss_" + tag + ".csv"), curves.str());
        }

        m.attack_free_verdicts = detect(m.spec, r.attack_free.features);
        m.attack_verdicts = detect(m.spec, r.attack.features);
        for (const DetectionVerdict& v : m.attack_free_verdicts) {
            if (v.flagged && v.t >= r.attack_free.features[m.validation_boundary].t) ++m.validation_flags;
        }
        for (const auto& [name, verdicts] :
             {std::pair{"verdicts_" + tag + ".csv", &m.attack_verdicts},
              std::pair{"verdicts_" + tag + "_attack_free.csv", &m.attack_free_verdicts}}) {
            std::ostringstream os;
            write_verdict_header(os);
            for (const auto& v : *verdicts) write_verdict_row(os, v);
            write_text(root / name, os.str());
        }
        m.report = detection_report(tag, m.attack_verdicts, r.attack.attack_events, attack_start,
                                    free_cfg.detector.report_interval);
        reports.push_back(m.report);
        r.modes.push_back(std::move(m));
    }

    std::ostringstream rep;
    rep << "paired experiment " << attack_cfg.name << " (seed " << attack_cfg.seed << ")\n";
    rep << "attack-free config hash " << r.attack_free.config_hash << ", attack config hash " << r.attack.config_hash
        << '\n';
    if (attack_cfg.attack) {
        int injects = 0;
        for (const auto& e : r.attack.attack_events) injects += e.action == AttackAction::Inject ? 1 : 0;
        rep << "attack: mode " << to_string(attack_cfg.attack->mode) << ", start " << attack_start << " s, "
            << injects << " injections\n";
    } else {
        rep << "attack: none\n";
    }
    const auto& p = r.profile;
    rep << "EB count mean over [" << p.span_begin << ", " << p.span_end << ") s: " << f3(p.mean_eb_count_free)
        << " attack-free vs " << f3(p.mean_eb_count_attack) << " attack";
    if (p.mean_eb_count_free > 0) rep << " (x" << f3(p.mean_eb_count_attack / p.mean_eb_count_free) << ")";
    rep << '\n';
    rep << "EB AAWT mean over the same span: " << f3(p.mean_eb_aawt_free) << " vs " << f3(p.mean_eb_aawt_attack)
        << " s/veh\n";
    rep << "real EB waiting (vehicle-seconds stopped): " << f3(p.real_waiting_free) << " vs "
        << f3(p.real_waiting_attack) << '\n';
    rep << "max EB count divergence: " << p.max_count_divergence << '\n';
    for (const ModeOutcome& m : r.modes) {
        rep << "detector " << to_string(m.mode) << ": threshold raw " << f3(m.spec.threshold.raw) << " -> "
            << m.spec.threshold.effective << ", validation RMSE " << f3(m.validation.rmse) << ", MAE "
            << f3(m.validation.mae) << ", validation flags " << m.validation_flags
            << (m.trained_now ? " (trained)" : " (cached)") << '\n';
    }
    write_report_text(rep, reports);
    r.report_text = rep.str();
    r.report_path = (root / "report.txt").string();
    write_text(r.report_path, r.report_text);
    {
        std::ostringstream os;
        write_report_csv(os, reports);
        write_text(root / "report.csv", os.str());
    }

    if (opt.plots) {
        const std::vector<double> tf = column(r.attack_free.features, time_of);
        const std::vector<double> ta = column(r.attack.features, time_of);
        ChartStyle st;
        st.vlines = {static_cast<double>(attack_start)};
        st.title = "EB vehicle count at the subject intersection";
        st.y_label = "vehicles";
        write_svg((root / "eb_count.svg").string(),
                  {{"attack free", tf, column(r.attack_free.features, eb_count), "", false},
                   {"under attack", ta, column(r.attack.features, eb_count), "", false}},
                  st);
        st.title = "EB average approach waiting time";
        st.y_label = "s/veh";
        write_svg((root / "eb_aawt.svg").string(),
                  {{"attack free", tf, column(r.attack_free.features, eb_aawt), "", false},
                   {"under attack", ta, column(r.attack.features, eb_aawt), "", false}},
                  st);
        for (const ModeOutcome& m : r.modes) {
            const std::string tag(to_string(m.mode));
            std::vector<double> t, obs, pred;
            std::vector<bool> flags;
            for (const auto& v : m.attack_verdicts) {
                t.push_back(static_cast<double>(v.t));
                obs.push_back(v.observed);
                pred.push_back(v.predicted);
                flags.push_back(v.flagged);
            }
            if (!t.empty()) {
                ChartStyle ps;
                ps.title = tag + " detector under attack (shaded: flagged)";
                ps.y_label = "EB vehicles";
                ps.shaded = spans_from_flags(t, flags);
                ps.vlines = {static_cast<double>(attack_start)};
                write_svg((root / ("prediction_" + tag + ".svg")).string(),
                          {{"observed", t, obs, "", false}, {"predicted", t, pred, "", true}}, ps);
            }
            if (m.history) {
                std::vector<double> e, tr, va;
                for (std::size_t k = 0; k < m.history->train_mae.size(); ++k) {
                    e.push_back(static_cast<double>(k + 1));
                    tr.push_back(m.history->train_mae[k]);
                    va.push_back(m.history->val_mae[k]);
                }
                ChartStyle ls;
                ls.title = tag + " model loss";
                ls.x_label = "epoch";
                ls.y_label = "MAE (normalized)";
                write_svg((root / ("loss_" + tag + ".svg")).string(),
                          {{"train", e, tr, "", false}, {"validation", e, va, "", false}}, ls);
            }
        }
    }
    log("report written to " + r.report_path);
    return r;
}

} // namespace poisonlab
