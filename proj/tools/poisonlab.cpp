// Command-line front end: simulate, train, detect, experiment, plot.

#include "poisonlab/config.hpp"
#include "poisonlab/csv.hpp"
#include "poisonlab/detector.hpp"
#include "poisonlab/errors.hpp"
#include "poisonlab/experiment.hpp"
#include "poisonlab/scenario.hpp"
#include "poisonlab/svg.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace poisonlab;

namespace {

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kData = 3, kNumeric = 4 };

json read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open " + path);
    try {
        return json::parse(is, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

ScenarioConfig load_with_overrides(const std::string& path, const std::vector<std::string>& sets) {
    json doc = read_json_file(path);
    for (const auto& s : sets) apply_override(doc, s);
    return config_from_json(doc);
}

void write_file(const fs::path& p, const std::string& s) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary);
    if (!os) throw DataError("cannot write " + p.string());
    os << s;
}

std::vector<Series> plot_series(const json& spec) {
    std::vector<Series> out;
    for (const json& s : spec.at("series")) {
        csv::Table t = csv::read(s.at("csv").get<std::string>());
        Series series;
        series.name = s.value("name", s.at("y").get<std::string>());
        const std::size_t xc = t.column(s.value("x", std::string("t")));
        const std::size_t yc = t.column(s.at("y").get<std::string>());
        for (const auto& row : t.rows) {
            series.x.push_back(csv::to_double(row[xc]));
            series.y.push_back(csv::to_double(row[yc]));
        }
        series.dashed = s.value("dashed", false);
        series.color = s.value("color", std::string());
        out.push_back(std::move(series));
    }
    return out;
}

int run(int argc, char** argv) {
    CLI::App app{"Traffic-signal poisoning laboratory: simulation, attack, and LSTM detection"};
    app.require_subcommand(1);

    std::string config_path, out_dir, features, mode = "baseline", model_path, profile, plot_spec, curves, report;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<int> epochs, lookback;
    bool retrain = false, quiet = false;

    auto* sim = app.add_subcommand("simulate", "Run one scenario and write its logs");
    sim->add_option("--config", config_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
    sim->add_option("--out", out_dir, "Output directory (default: $POISONLAB_OUT/<name>)");
    sim->add_option("--set", sets, "Override a key, e.g. --set attack.mode=\"phantom\"");
    sim->add_option("--seed", seed, "Override the seed");

    auto* train = app.add_subcommand("train", "Train a detector on an attack-free feature log");
    train->add_option("--features", features, "features.csv from an attack-free run")->required()->check(CLI::ExistingFile);
    train->add_option("--mode", mode, "baseline|upstream")->check(CLI::IsMember({"baseline", "upstream"}));
    train->add_option("--out", model_path, "Model checkpoint path")->required();
    train->add_option("--profile", profile, "table1|ci");
    train->add_option("--epochs", epochs, "Override epochs");
    train->add_option("--lookback", lookback, "Lookback window L");
    train->add_option("--seed", seed, "Training seed");
    train->add_option("--curves", curves, "Write loss curves CSV here");
    train->add_flag("--quiet", quiet, "No per-epoch progress");

    auto* det = app.add_subcommand("detect", "Replay a trained detector over a feature log");
    det->add_option("--model", model_path, "Model checkpoint")->required()->check(CLI::ExistingFile);
    det->add_option("--features", features, "features.csv to monitor")->required()->check(CLI::ExistingFile);
    det->add_option("--out", out_dir, "Verdict CSV path")->required();
    det->add_option("--report", report, "Also write a text report using this attack.csv");

    auto* exp = app.add_subcommand("experiment", "Paired attack-free vs attack run with both detectors");
    exp->add_option("--config", config_path, "Attack scenario JSON")->required()->check(CLI::ExistingFile);
    exp->add_option("--out", out_dir, "Output directory");
    exp->add_option("--set", sets, "Override a key");
    exp->add_option("--profile", profile, "Training profile: table1|ci");
    exp->add_flag("--retrain", retrain, "Ignore cached models");
    exp->add_flag("--quiet", quiet, "Less progress output");

    auto* plot = app.add_subcommand("plot", "Render an SVG chart from a JSON plot spec");
    plot->add_option("--spec", plot_spec, "Plot spec JSON")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfig;
    }

    if (sim->parsed()) {
        ScenarioConfig cfg = load_with_overrides(config_path, sets);
        if (seed) cfg.seed = *seed;
        if (!out_dir.empty()) cfg.output.dir = out_dir;
        RunArtifacts a = run_scenario(cfg);
        std::cout << "wrote " << a.dir << " (config hash " << config_hash(cfg) << ")\n";
        return kOk;
    }

    if (train->parsed()) {
        nn::TrainingConfig tc = profile.empty() ? nn::TrainingConfig{} : training_profile(profile);
        if (epochs) tc.epochs = *epochs;
        if (lookback) tc.lookback = *lookback;
        if (seed) tc.seed = *seed;
        DatasetOptions dopt;
        dopt.mode = parse_feature_mode(mode);
        dopt.lookback = tc.lookback;
        std::vector<FeatureSample> log = read_feature_log(features);
        TrainedDetector t = train_detector(log, dopt, tc, [&](int e, double tr, double va) {
            if (!quiet && (e == 1 || e % 50 == 0 || e == tc.epochs))
                std::cerr << "epoch " << e << " train MAE " << tr << " val MAE " << va << '\n';
        });
        if (fs::path(model_path).has_parent_path()) fs::create_directories(fs::path(model_path).parent_path());
        save_detector(t.spec, model_path);
        if (!curves.empty()) {
            std::ostringstream os;
            write_loss_curves(os, t.history);
            write_file(curves, os.str());
        }
        std::cout << "threshold raw " << t.spec.threshold.raw << " effective " << t.spec.threshold.effective
                  << ", validation RMSE " << t.validation.rmse << " (" << t.train_windows << " train / "
                  << t.val_windows << " val windows)\n";
        return kOk;
    }

    if (det->parsed()) {
        DetectorSpec spec = load_detector(model_path);
        std::vector<FeatureSample> log = read_feature_log(features);
        std::vector<StreamEvent> diag;
        std::vector<DetectionVerdict> verdicts = detect(spec, log, &diag);
        for (const auto& d : diag) {
            if (d.status == StreamStatus::Gap) std::cerr << "t=" << d.t << ": " << d.message << '\n';
        }
        std::ostringstream os;
        write_verdict_header(os);
        for (const auto& v : verdicts) write_verdict_row(os, v);
        write_file(out_dir, os.str());
        int flags = 0;
        for (const auto& v : verdicts) flags += v.flagged ? 1 : 0;
        std::cout << verdicts.size() << " verdicts, " << flags << " flagged\n";
        if (!report.empty()) {
            std::vector<AttackEvent> events = read_attack_log(report);
            std::int64_t start = 0;
            for (const auto& e : events) {
                if (e.action == AttackAction::Inject) {
                    start = e.t;
                    break;
                }
            }
            DetectionReport r = detection_report(std::string(to_string(spec.mode)), verdicts, events, start);
            write_report_text(std::cout, std::span<const DetectionReport>(&r, 1));
        }
        return kOk;
    }

    if (exp->parsed()) {
        ScenarioConfig cfg = load_with_overrides(config_path, sets);
        if (!profile.empty()) {
            nn::TrainingConfig tc = training_profile(profile);
            tc.lookback = cfg.detector.lookback;
            tc.seed = cfg.detector.training.seed;
            cfg.detector.training = tc;
        }
        if (!cfg.attack) throw ConfigError("experiment needs a configuration with an attack block");
        ExperimentOptions opt;
        opt.out_dir = out_dir;
        opt.retrain = retrain;
        opt.log = &std::cerr;
        opt.progress_every = quiet ? 1000000 : 50;
        ExperimentResult r = run_experiment(attack_free_counterpart(cfg), cfg, opt);
        std::cout << r.report_text;
        return kOk;
    }

    if (plot->parsed()) {
        json spec = read_json_file(plot_spec);
        ChartStyle st;
        st.title = spec.value("title", std::string());
        st.x_label = spec.value("x_label", st.x_label);
        st.y_label = spec.value("y_label", std::string());
        if (spec.contains("shade")) {
            const json& sh = spec.at("shade");
            csv::Table t = csv::read(sh.at("csv").get<std::string>());
            std::vector<double> x;
            std::vector<bool> f;
            const std::size_t xc = t.column(sh.value("x", std::string("t")));
            const std::size_t fc = t.column(sh.value("flag", std::string("flagged")));
            for (const auto& row : t.rows) {
                x.push_back(csv::to_double(row[xc]));
                f.push_back(csv::to_int(row[fc]) != 0);
            }
            st.shaded = spans_from_flags(x, f);
        }
        const std::string out = spec.at("output").get<std::string>();
        write_file(out, render_svg(plot_series(spec), st));
        std::cout << "wrote " << out << '\n';
        return kOk;
    }
    return kOther;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kNumeric;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kOther;
    }
}
