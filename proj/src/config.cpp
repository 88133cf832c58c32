#include "poisonlab/config.hpp"

#include "poisonlab/errors.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>

namespace poisonlab {

using json = nlohmann::json;

namespace {

std::string_view heading_key(Heading h) {
    switch (h) {
    case Heading::East: return "east";
    case Heading::West: return "west";
    case Heading::North: return "north";
    case Heading::South: return "south";
    }
    return "?";
}

Heading parse_heading_key(const std::string& s) {
    for (Heading h : kAllHeadings) {
        if (heading_key(h) == s) return h;
    }
    throw ConfigError("attack.approach: unknown approach '" + s + "' (expected east|west|north|south)");
}

/// Reads object members with type checking and rejects unknown keys.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + " must be an object");
    }
    void done() const {
        for (const auto& [k, _] : j_.items()) {
            if (!seen_.count(k)) throw ConfigError("unknown configuration key " + key(k));
        }
    }

    template <class T>
    void get(const char* k, T& out) {
        seen_.insert(k);
        auto it = j_.find(k);
        if (it == j_.end()) return;
        try {
            out = it->template get<T>();
        } catch (const json::exception&) {
            throw ConfigError(key(k) + " has the wrong type");
        }
    }

    const json* child(const char* k) {
        seen_.insert(k);
        auto it = j_.find(k);
        return it == j_.end() ? nullptr : &*it;
    }

    std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

private:
    std::string where() const { return path_.empty() ? "configuration" : path_; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

json training_json(const nn::TrainingConfig& t) {
    return {{"epochs", t.epochs},     {"batch_size", t.batch_size}, {"lr", t.adam.lr},
            {"beta1", t.adam.beta1},  {"beta2", t.adam.beta2},      {"eps", t.adam.eps},
            {"clip_norm", t.clip_norm}, {"seed", t.seed}};
}

json attack_json(const AttackConfig& a, const RoadNetwork* net) {
    json j;
    j["start"] = a.start;
    j["approach"] = std::string(heading_key(a.target_approach));
    if (a.target_node) j["node"] = net ? json(net->node(*a.target_node).name) : json(*a.target_node);
    j["mode"] = std::string(to_string(a.mode));
    j["phantom_feedback"] = a.phantom_feedback == PhantomFeedback::Open ? "open" : "closed";
    if (const auto* f = std::get_if<FixedRate>(&a.policy)) {
        j["policy"] = {{"type", "fixed_rate"}, {"vph", f->vph}};
    } else {
        const auto& c = std::get<ControllerAware>(a.policy);
        j["policy"] = {{"type", "controller_aware"}, {"margin", c.margin}, {"max_rate_vph", c.max_rate_vph}};
    }
    j["max_concurrent"] = a.max_concurrent;
    j["min_headway"] = a.min_headway;
    j["initial_speed_factor"] = a.initial_speed_factor;
    return j;
}

} // namespace

void ScenarioConfig::validate() const {
    if (duration <= 0) throw ConfigError("duration must be positive");
    if (warmup < 0 || cooldown < 0) throw ConfigError("warmup and cooldown must be non-negative");
    if (warmup + cooldown >= duration)
        throw ConfigError("warmup + cooldown (" + std::to_string(warmup + cooldown) + " s) must be less than duration (" +
                          std::to_string(duration) + " s)");
    geometry.validate();
    sim.validate();
    const double per_second = 1.0 / sim.dt;
    if (std::abs(per_second - std::round(per_second)) > 1e-9)
        throw ConfigError("dt must divide one second evenly");
    if (timing.checkpoint < 1 || timing.yellow < 0 || timing.all_red < 0)
        throw ConfigError("signal timing must be non-negative with a positive checkpoint");
    if (attack) {
        attack->validate();
        if (attack->start >= analysis_length())
            throw ConfigError("attack.start lies beyond the analysis window");
    }
    if (detector.modes.empty()) throw ConfigError("detector.modes must list at least one mode");
    if (detector.lookback < 1) throw ConfigError("detector.lookback must be at least 1");
    if (!(detector.train_fraction > 0.0 && detector.train_fraction < 1.0))
        throw ConfigError("detector.train_fraction must lie in (0, 1)");
    if (detector.report_interval < 1) throw ConfigError("detector.report_interval must be positive");
    nn::TrainingConfig t = detector.training;
    t.lookback = detector.lookback;
    t.validate();
}

json to_json(const ScenarioConfig& c) {
    json j;
    j["name"] = c.name;
    j["seed"] = c.seed;
    j["duration"] = c.duration;
    j["warmup"] = c.warmup;
    j["cooldown"] = c.cooldown;
    j["dt"] = c.sim.dt;
    j["lookahead"] = c.sim.lookahead;
    const auto& g = c.geometry;
    j["geometry"] = {{"intersections", g.intersections}, {"leg_length", g.leg_length},
                     {"spacing", g.spacing},             {"speed_limit", g.speed_limit},
                     {"through_lanes", g.through_lanes}, {"left_pocket", g.left_pocket}};
    const auto& d = c.sim.demand;
    j["demand"] = {{"vph_per_entry", d.vph_per_entry},
                   {"turn_split", {{"through", d.split.through}, {"left", d.split.left}, {"right", d.split.right}}}};
    const auto& p = c.sim.car;
    j["car_following"] = {{"accel", p.accel},   {"decel", p.decel},   {"tau", p.tau},
                          {"sigma", p.sigma},   {"length", p.length}, {"min_gap", p.min_gap}};
    j["signal"] = {{"checkpoint", c.timing.checkpoint}, {"yellow", c.timing.yellow}, {"all_red", c.timing.all_red}};
    j["waiting"] = c.waiting == WaitingSemantics::Resetting ? "resetting" : "cumulative";
    if (c.attack) {
        std::optional<RoadNetwork> net;
        if (c.attack->target_node) net = RoadNetwork::build_arterial(c.geometry);
        j["attack"] = attack_json(*c.attack, net ? &*net : nullptr);
    } else {
        j["attack"] = nullptr;
    }
    json modes = json::array();
    for (FeatureMode m : c.detector.modes) modes.push_back(std::string(to_string(m)));
    j["detector"] = {{"modes", modes},
                     {"lookback", c.detector.lookback},
                     {"train_fraction", c.detector.train_fraction},
                     {"upstream_awt", std::string(to_string(c.detector.upstream_awt))},
                     {"report_interval", c.detector.report_interval},
                     {"training", training_json(c.detector.training)}};
    j["output"] = {{"dir", c.output.dir}, {"bsm_log", c.output.bsm_log}, {"trajectory_log", c.output.trajectory_log}};
    return j;
}

ScenarioConfig config_from_json(const json& doc) {
    ScenarioConfig c;
    {
        Reader r(doc, "");
        r.get("name", c.name);
        r.get("seed", c.seed);
        r.get("duration", c.duration);
        r.get("warmup", c.warmup);
        r.get("cooldown", c.cooldown);
        r.get("dt", c.sim.dt);
        r.get("lookahead", c.sim.lookahead);
        if (const json* g = r.child("geometry")) {
            Reader rg(*g, "geometry");
            rg.get("intersections", c.geometry.intersections);
            rg.get("leg_length", c.geometry.leg_length);
            rg.get("spacing", c.geometry.spacing);
            rg.get("speed_limit", c.geometry.speed_limit);
            rg.get("through_lanes", c.geometry.through_lanes);
            rg.get("left_pocket", c.geometry.left_pocket);
            rg.done();
        }
        if (const json* d = r.child("demand")) {
            Reader rd(*d, "demand");
            rd.get("vph_per_entry", c.sim.demand.vph_per_entry);
            if (const json* s = rd.child("turn_split")) {
                Reader rs(*s, "demand.turn_split");
                rs.get("through", c.sim.demand.split.through);
                rs.get("left", c.sim.demand.split.left);
                rs.get("right", c.sim.demand.split.right);
                rs.done();
            }
            rd.done();
        }
        if (const json* p = r.child("car_following")) {
            Reader rp(*p, "car_following");
            rp.get("accel", c.sim.car.accel);
            rp.get("decel", c.sim.car.decel);
            rp.get("tau", c.sim.car.tau);
            rp.get("sigma", c.sim.car.sigma);
            rp.get("length", c.sim.car.length);
            rp.get("min_gap", c.sim.car.min_gap);
            rp.done();
        }
        if (const json* s = r.child("signal")) {
            Reader rs(*s, "signal");
            rs.get("checkpoint", c.timing.checkpoint);
            rs.get("yellow", c.timing.yellow);
            rs.get("all_red", c.timing.all_red);
            rs.done();
        }
        std::string waiting = "resetting";
        r.get("waiting", waiting);
        if (waiting == "resetting") c.waiting = WaitingSemantics::Resetting;
        else if (waiting == "cumulative") c.waiting = WaitingSemantics::Cumulative;
        else throw ConfigError("waiting: expected resetting|cumulative, got '" + waiting + "'");

        if (const json* a = r.child("attack"); a && !a->is_null()) {
            AttackConfig ac;
            Reader ra(*a, "attack");
            ra.get("start", ac.start);
            std::string approach = "east";
            ra.get("approach", approach);
            ac.target_approach = parse_heading_key(approach);
            if (const json* n = ra.child("node")) {
                if (!n->is_string()) throw ConfigError("attack.node must be a node name");
                RoadNetwork net = RoadNetwork::build_arterial(c.geometry);
                try {
                    ac.target_node = net.node_by_name(n->get<std::string>());
                } catch (const LookupError&) {
                    throw ConfigError("attack.node: no node named '" + n->get<std::string>() + "'");
                }
                if (!net.node(*ac.target_node).signalized) throw ConfigError("attack.node must be signalized");
            }
            std::string mode = "physical";
            ra.get("mode", mode);
            if (mode == "physical") ac.mode = AttackMode::Physical;
            else if (mode == "phantom") ac.mode = AttackMode::Phantom;
            else throw ConfigError("attack.mode: expected physical|phantom, got '" + mode + "'");
            std::string feedback = "open";
            ra.get("phantom_feedback", feedback);
            if (feedback == "open") ac.phantom_feedback = PhantomFeedback::Open;
            else if (feedback == "closed") ac.phantom_feedback = PhantomFeedback::Closed;
            else throw ConfigError("attack.phantom_feedback: expected open|closed, got '" + feedback + "'");
            if (const json* p = ra.child("policy")) {
                Reader rp(*p, "attack.policy");
                std::string type = "controller_aware";
                rp.get("type", type);
                if (type == "fixed_rate") {
                    FixedRate f;
                    rp.get("vph", f.vph);
                    rp.child("margin");
                    rp.child("max_rate_vph");
                    ac.policy = f;
                } else if (type == "controller_aware") {
                    ControllerAware ca;
                    rp.get("margin", ca.margin);
                    rp.get("max_rate_vph", ca.max_rate_vph);
                    rp.child("vph");
                    ac.policy = ca;
                } else {
                    throw ConfigError("attack.policy.type: expected fixed_rate|controller_aware, got '" + type + "'");
                }
                rp.done();
            }
            ra.get("max_concurrent", ac.max_concurrent);
            ra.get("min_headway", ac.min_headway);
            ra.get("initial_speed_factor", ac.initial_speed_factor);
            ra.done();
            c.attack = ac;
        }

        if (const json* d = r.child("detector")) {
            Reader rd(*d, "detector");
            std::vector<std::string> modes;
            rd.get("modes", modes);
            if (d->contains("modes")) {
                c.detector.modes.clear();
                for (const auto& m : modes) c.detector.modes.push_back(parse_feature_mode(m));
            }
            rd.get("lookback", c.detector.lookback);
            rd.get("train_fraction", c.detector.train_fraction);
            std::string awt = std::string(to_string(c.detector.upstream_awt));
            rd.get("upstream_awt", awt);
            c.detector.upstream_awt = parse_upstream_awt(awt);
            rd.get("report_interval", c.detector.report_interval);
            if (const json* t = rd.child("training")) {
                Reader rt(*t, "detector.training");
                auto& tc = c.detector.training;
                rt.get("epochs", tc.epochs);
                rt.get("batch_size", tc.batch_size);
                rt.get("lr", tc.adam.lr);
                rt.get("beta1", tc.adam.beta1);
                rt.get("beta2", tc.adam.beta2);
                rt.get("eps", tc.adam.eps);
                rt.get("clip_norm", tc.clip_norm);
                rt.get("seed", tc.seed);
                rt.done();
            }
            rd.done();
        }
        if (const json* o = r.child("output")) {
            Reader ro(*o, "output");
            ro.get("dir", c.output.dir);
            ro.get("bsm_log", c.output.bsm_log);
            ro.get("trajectory_log", c.output.trajectory_log);
            ro.done();
        }
        r.done();
    }
    c.detector.training.lookback = c.detector.lookback;
    c.validate();
    return c;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open configuration file " + path);
    try {
        return config_from_json(json::parse(is, nullptr, true, true));
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

void apply_override(json& doc, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    std::string key = assignment.substr(0, eq);
    std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        auto dot = key.find('.', start);
        std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("override key '" + key + "' is malformed");
        if (!node->is_object()) *node = json::object();
        if (dot == std::string::npos) {
            (*node)[part] = value;
            break;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

nn::TrainingConfig training_profile(const std::string& name) {
    nn::TrainingConfig t;
    if (name == "table1") return t;
    if (name == "ci") {
        t.epochs = 100;
        return t;
    }
    throw ConfigError("unknown training profile '" + name + "' (expected table1|ci)");
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string config_hash(const ScenarioConfig& c) {
    json j = to_json(c);
    j.erase("output");
    j.erase("name");
    j["bsm_log"] = c.output.bsm_log;
    j["trajectory_log"] = c.output.trajectory_log;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
    return buf;
}

std::string default_output_root() {
    const char* env = std::getenv("POISONLAB_OUT");
    return env && *env ? std::string(env) : std::string("runs");
}

} // namespace poisonlab
