#include "junctionq/config.hpp"

#include "junctionq/errors.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

namespace junctionq {

namespace {

using nlohmann::json;

/// A JSON node together with its path, for error messages.
class Node {
  public:
    Node(const json &j, std::string path) : j_(j), path_(std::move(path)) {}

    [[noreturn]] void fail(const std::string &msg) const {
        throw ValidationError((path_.empty() ? std::string("/") : path_) + ": " + msg);
    }

    const json &raw() const { return j_; }
    const std::string &path() const { return path_; }

    void expect_object(std::initializer_list<const char *> allowed) const {
        if (!j_.is_object())
            fail("expected an object");
        for (const auto &[key, value] : j_.items()) {
            bool known = false;
            for (const char *a : allowed)
                known = known || key == a;
            if (!known)
                fail("unknown key '" + key + "'");
        }
    }

    bool has(const char *key) const { return j_.contains(key) && !j_.at(key).is_null(); }
    Node at(const char *key) const {
        if (!j_.contains(key))
            fail(std::string("missing key '") + key + "'");
        return {j_.at(key), path_ + "/" + key};
    }
    Node at(std::size_t i) const { return {j_.at(i), path_ + "/" + std::to_string(i)}; }

    std::size_t array_size() const {
        if (!j_.is_array())
            fail("expected an array");
        return j_.size();
    }
    double number() const {
        if (!j_.is_number())
            fail("expected a number");
        return j_.get<double>();
    }
    std::int64_t integer() const {
        if (!j_.is_number_integer())
            fail("expected an integer");
        return j_.get<std::int64_t>();
    }
    std::string string() const {
        if (!j_.is_string())
            fail("expected a string");
        return j_.get<std::string>();
    }

    double number_or(const char *key, double fallback) const {
        return has(key) ? at(key).number() : fallback;
    }
    std::int64_t integer_or(const char *key, std::int64_t fallback) const {
        return has(key) ? at(key).integer() : fallback;
    }
    std::string string_or(const char *key, const std::string &fallback) const {
        return has(key) ? at(key).string() : fallback;
    }

  private:
    const json &j_;
    std::string path_;
};

void require(bool ok, const Node &n, const std::string &msg) {
    if (!ok)
        n.fail(msg);
}

std::vector<double> number_list(const Node &n) {
    std::vector<double> out;
    for (std::size_t i = 0; i < n.array_size(); ++i)
        out.push_back(n.at(i).number());
    return out;
}

RequestType request_type(const Junction &junction, const Node &n) {
    require(n.array_size() == 2, n, "expected [route, train_type]");
    const auto r = junction.find_route(n.at(std::size_t{0}).string());
    if (!r)
        n.at(std::size_t{0}).fail("unknown route");
    const auto t = junction.find_train_type(n.at(1).string());
    if (!t)
        n.at(1).fail("unknown train type");
    return {*r, *t};
}

void parse_junction(const Node &root, ScenarioConfig &cfg) {
    Junction &j = cfg.junction;
    const Node routes = root.at("routes");
    require(routes.array_size() > 0, routes, "at least one route is required");
    for (std::size_t i = 0; i < routes.array_size(); ++i) {
        const Node r = routes.at(i);
        r.expect_object({"name", "origin", "destination"});
        Route route{i, r.at("name").string(), r.string_or("origin", ""),
                    r.string_or("destination", "")};
        if (j.find_route(route.name))
            r.at("name").fail("duplicate route name '" + route.name + "'");
        j.routes.push_back(route);
    }

    const Node types = root.at("train_types");
    require(types.array_size() > 0, types, "at least one train type is required");
    for (std::size_t i = 0; i < types.array_size(); ++i) {
        const Node t = types.at(i);
        t.expect_object({"name", "class"});
        TrainType tt{i, t.at("name").string(), TrafficClass::passenger};
        const std::string cls = t.at("class").string();
        if (cls == "freight")
            tt.traffic_class = TrafficClass::freight;
        else if (cls != "passenger")
            t.at("class").fail("expected 'passenger' or 'freight'");
        if (j.find_train_type(tt.name))
            t.at("name").fail("duplicate train type '" + tt.name + "'");
        j.train_types.push_back(tt);
    }

    j.conflicts = ConflictMatrix(j.routes.size());
    if (root.has("conflicts")) {
        const Node conflicts = root.at("conflicts");
        for (std::size_t i = 0; i < conflicts.array_size(); ++i) {
            const Node c = conflicts.at(i);
            require(c.array_size() == 2, c, "expected a pair of route names");
            const auto a = j.find_route(c.at(std::size_t{0}).string());
            const auto b = j.find_route(c.at(1).string());
            if (!a || !b)
                c.fail("unknown route");
            j.conflicts.set(*a, *b);
        }
    }

    if (root.has("headways")) {
        const Node hw = root.at("headways");
        for (std::size_t i = 0; i < hw.array_size(); ++i) {
            const Node h = hw.at(i);
            h.expect_object({"leader", "follower", "minutes"});
            const RequestType leader = request_type(j, h.at("leader"));
            const RequestType follower = request_type(j, h.at("follower"));
            const double minutes = h.at("minutes").number();
            require(minutes > 0.0, h.at("minutes"), "headway must be positive");
            if (j.headways.get(leader, follower))
                h.fail("duplicate headway entry");
            j.headways.set(leader, follower, minutes);
        }
    }

    if (root.has("service_override")) {
        const Node so = root.at("service_override");
        so.expect_object({"rate", "cv"});
        ServiceOverride o{so.at("rate").number(), so.at("cv").number()};
        require(o.rate > 0.0, so.at("rate"), "rate must be positive");
        require(o.cv > 0.0 && o.cv <= 1.0, so.at("cv"), "cv must lie in (0, 1]");
        j.service_override = o;
    }
}

void parse_traffic(const Node &root, ScenarioConfig &cfg) {
    const Node t = root.at("traffic");
    t.expect_object({"n_total", "time_horizon", "p_main", "shares", "demand"});
    TrafficSpec &spec = cfg.traffic;
    spec.n_total = t.number_or("n_total", 0.0);
    require(spec.n_total >= 0.0, t, "n_total must be non-negative");
    spec.time_horizon = t.number_or("time_horizon", 60.0);
    require(spec.time_horizon > 0.0, t, "time_horizon must be positive");
    spec.p_main = t.number_or("p_main", 0.5);
    if (!(spec.p_main >= 0.0 && spec.p_main <= 1.0))
        t.at("p_main").fail("p_main outside [0, 1]");
    if (t.has("shares")) {
        const Node shares = t.at("shares");
        if (!shares.raw().is_object())
            shares.fail("expected an object");
        for (const auto &[key, value] : shares.raw().items()) {
            const double v = Node(value, shares.path() + "/" + key).number();
            if (!(v >= 0.0 && v <= 1.0))
                Node(value, shares.path() + "/" + key).fail("share outside [0, 1]");
            spec.shares[key] = v;
        }
    }
    const Node demand = t.at("demand");
    require(demand.array_size() > 0, demand, "at least one demand entry is required");
    std::set<RequestType> seen;
    for (std::size_t i = 0; i < demand.array_size(); ++i) {
        const Node d = demand.at(i);
        d.expect_object({"route", "train_type", "line", "share"});
        DemandEntry e;
        const auto r = cfg.junction.find_route(d.at("route").string());
        if (!r)
            d.at("route").fail("unknown route");
        const auto tt = cfg.junction.find_train_type(d.at("train_type").string());
        if (!tt)
            d.at("train_type").fail("unknown train type");
        e.type = {*r, *tt};
        if (!seen.insert(e.type).second)
            d.fail("duplicate demand entry");
        const std::string line = d.at("line").string();
        if (line == "branch")
            e.line = Line::branch;
        else if (line != "main")
            d.at("line").fail("expected 'main' or 'branch'");
        if (d.has("share")) {
            std::string share = d.at("share").string();
            if (share.starts_with("1-")) {
                e.share.complement = true;
                share = share.substr(2);
            }
            if (!spec.shares.contains(share))
                d.at("share").fail("unknown share parameter '" + share + "'");
            e.share.parameter = share;
        }
        spec.demand.push_back(e);
    }
}

void check_headway_coverage(const ScenarioConfig &cfg) {
    const Junction &j = cfg.junction;
    if (j.service_override)
        return;
    std::vector<std::string> missing;
    for (const auto &a : cfg.traffic.demand) {
        for (const auto &b : cfg.traffic.demand) {
            if (!j.conflicts(a.type.route, b.type.route) || j.headways.get(a.type, b.type))
                continue;
            missing.push_back("((" + j.routes[a.type.route].name + "," +
                              j.train_types[a.type.train_type].name + "),(" +
                              j.routes[b.type.route].name + "," +
                              j.train_types[b.type.train_type].name + "))");
        }
    }
    if (missing.empty())
        return;
    std::string msg = "/headways: missing entries for conflicting demand pairs:";
    for (const auto &m : missing)
        msg += " " + m;
    throw ValidationError(msg);
}

void parse_settings(const Node &root, ScenarioConfig &cfg) {
    cfg.arrival_cv = root.number_or("arrival_cv", 0.8);
    if (!(cfg.arrival_cv > 0.0 && cfg.arrival_cv <= 1.0))
        root.at("arrival_cv").fail("arrival_cv must lie in (0, 1]");

    if (root.has("model")) {
        const Node m = root.at("model");
        m.expect_object({"setting", "scaling", "waiting_slots", "choice_rate"});
        try {
            cfg.setting = parse_setting(m.string_or("setting", "PhPh"));
        } catch (const ValidationError &e) {
            m.at("setting").fail(e.what());
        }
        try {
            cfg.scaling = parse_scaling(m.string_or("scaling", "none"));
        } catch (const ValidationError &e) {
            m.at("scaling").fail(e.what());
        }
        cfg.waiting_slots = static_cast<int>(m.integer_or("waiting_slots", 5));
        require(cfg.waiting_slots >= 0 && cfg.waiting_slots <= 255, m,
                "waiting_slots must lie in [0, 255]");
        cfg.choice_rate = m.number_or("choice_rate", 600.0);
        require(cfg.choice_rate > 0.0, m, "choice_rate must be positive");
    }
    if (cfg.setting == ModelSetting::PhPh && cfg.scaling != Scaling::none)
        throw ValidationError("/model: the PhPh setting takes no scaling");

    if (root.has("solver")) {
        const Node s = root.at("solver");
        s.expect_object({"tolerance", "max_iterations"});
        cfg.tolerance = s.number_or("tolerance", 1e-10);
        require(cfg.tolerance > 0.0, s, "tolerance must be positive");
        const auto it = s.integer_or("max_iterations", 1'000'000);
        require(it > 0, s, "max_iterations must be positive");
        cfg.max_iterations = static_cast<std::size_t>(it);
    }

    if (root.has("capacity")) {
        const Node c = root.at("capacity");
        c.expect_object({"lower", "upper", "xtol", "rtol", "max_iterations"});
        CapacitySearch &cs = cfg.capacity;
        cs.lower = c.number_or("lower", 1.0);
        cs.upper = c.number_or("upper", 40.0);
        cs.xtol = c.number_or("xtol", 1e-3);
        cs.rtol = c.number_or("rtol", 1e-3);
        const auto it = c.integer_or("max_iterations", 100);
        require(cs.lower > 0.0 && cs.lower < cs.upper, c, "need 0 < lower < upper");
        require(cs.xtol > 0.0 && cs.rtol >= 0.0, c, "tolerances must be positive");
        require(it > 0, c, "max_iterations must be positive");
        cs.max_iterations = static_cast<std::size_t>(it);
    }

    if (root.has("sweep")) {
        const Node s = root.at("sweep");
        s.expect_object({"p_main", "n_total"});
        if (s.has("p_main"))
            cfg.sweep.p_main = number_list(s.at("p_main"));
        if (s.has("n_total"))
            cfg.sweep.n_total = number_list(s.at("n_total"));
        for (double p : cfg.sweep.p_main)
            if (!(p >= 0.0 && p <= 1.0))
                s.at("p_main").fail("p_main outside [0, 1]");
        for (double n : cfg.sweep.n_total)
            if (!(n >= 0.0))
                s.at("n_total").fail("n_total must be non-negative");
    }

    if (root.has("simulation")) {
        const Node s = root.at("simulation");
        s.expect_object({"horizon", "replications", "seed", "sample_interval", "queue_cap",
                         "warmup", "dispatch"});
        SimulationSettings &sim = cfg.simulation;
        sim.horizon = s.number_or("horizon", 1200.0);
        require(sim.horizon > 0.0, s, "horizon must be positive");
        const auto reps = s.integer_or("replications", 100);
        require(reps >= 1, s, "replications must be at least 1");
        sim.replications = static_cast<std::size_t>(reps);
        if (s.has("seed")) {
            const Node seed = s.at("seed");
            if (!seed.raw().is_number_unsigned() && !(seed.raw().is_number_integer() &&
                                                      seed.raw().get<std::int64_t>() >= 0))
                seed.fail("expected a non-negative integer");
            sim.seed = seed.raw().get<std::uint64_t>();
        }
        sim.sample_interval = s.number_or("sample_interval", 1.0);
        require(sim.sample_interval > 0.0, s, "sample_interval must be positive");
        if (s.has("queue_cap")) {
            const auto cap = s.at("queue_cap").integer();
            require(cap >= 0, s, "queue_cap must be non-negative");
            sim.queue_cap = static_cast<int>(cap);
        }
        sim.warmup = s.number_or("warmup", 0.0);
        require(sim.warmup >= 0.0 && sim.warmup < sim.horizon, s,
                "warmup must lie in [0, horizon)");
        if (s.has("dispatch")) {
            const Node d = s.at("dispatch");
            try {
                sim.dispatch = parse_dispatch(d.string());
            } catch (const ValidationError &e) {
                d.fail(e.what());
            }
        }
    }
}

std::string share_text(const ShareRef &s) {
    return (s.complement ? "1-" : "") + s.parameter;
}

} // namespace

Scenario ScenarioConfig::scenario() const {
    Scenario s;
    s.junction = junction;
    s.traffic = traffic;
    s.arrival_cv = arrival_cv;
    s.setting = setting;
    s.scaling = scaling;
    s.build.waiting_slots = waiting_slots;
    s.build.choice_rate = choice_rate;
    s.build.state_cap = state_cap_from_env(s.build.state_cap);
    s.solver.tolerance = tolerance;
    s.solver.max_iterations = max_iterations;
    return s;
}

ScenarioConfig parse_config(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error &e) {
        throw ValidationError(std::string("malformed JSON: ") + e.what());
    }
    const Node root(doc, "");
    root.expect_object({"name", "routes", "train_types", "conflicts", "headways",
                        "service_override", "traffic", "arrival_cv", "model", "solver",
                        "capacity", "sweep", "simulation"});
    ScenarioConfig cfg;
    cfg.name = root.string_or("name", "");
    parse_junction(root, cfg);
    parse_traffic(root, cfg);
    parse_settings(root, cfg);
    check_headway_coverage(cfg);
    return cfg;
}

ScenarioConfig load_config(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_config(buf.str());
    } catch (const ValidationError &e) {
        throw ValidationError(path + ": " + e.what());
    }
}

std::string canonical_json(const ScenarioConfig &cfg) {
    const Junction &j = cfg.junction;
    json doc;
    doc["name"] = cfg.name;
    doc["routes"] = json::array();
    for (const auto &r : j.routes)
        doc["routes"].push_back(
            {{"name", r.name}, {"origin", r.origin}, {"destination", r.destination}});
    doc["train_types"] = json::array();
    for (const auto &t : j.train_types)
        doc["train_types"].push_back({{"name", t.name}, {"class", to_string(t.traffic_class)}});
    doc["conflicts"] = json::array();
    for (std::size_t a = 0; a < j.route_count(); ++a)
        for (std::size_t b = a + 1; b < j.route_count(); ++b)
            if (j.conflicts(a, b))
                doc["conflicts"].push_back({j.routes[a].name, j.routes[b].name});
    doc["headways"] = json::array();
    for (const auto &[key, minutes] : j.headways.entries()) {
        const auto &[l, f] = key;
        doc["headways"].push_back(
            {{"leader", {j.routes[l.route].name, j.train_types[l.train_type].name}},
             {"follower", {j.routes[f.route].name, j.train_types[f.train_type].name}},
             {"minutes", minutes}});
    }
    if (j.service_override)
        doc["service_override"] = {{"rate", j.service_override->rate},
                                   {"cv", j.service_override->cv}};

    json traffic;
    traffic["n_total"] = cfg.traffic.n_total;
    traffic["time_horizon"] = cfg.traffic.time_horizon;
    traffic["p_main"] = cfg.traffic.p_main;
    traffic["shares"] = json::object();
    for (const auto &[k, v] : cfg.traffic.shares)
        traffic["shares"][k] = v;
    traffic["demand"] = json::array();
    for (const auto &d : cfg.traffic.demand) {
        json e = {{"route", j.routes[d.type.route].name},
                  {"train_type", j.train_types[d.type.train_type].name},
                  {"line", to_string(d.line)}};
        if (!d.share.parameter.empty())
            e["share"] = share_text(d.share);
        traffic["demand"].push_back(e);
    }
    doc["traffic"] = traffic;
    doc["arrival_cv"] = cfg.arrival_cv;
    doc["model"] = {{"setting", to_string(cfg.setting)},
                    {"scaling", to_string(cfg.scaling)},
                    {"waiting_slots", cfg.waiting_slots},
                    {"choice_rate", cfg.choice_rate}};
    doc["solver"] = {{"tolerance", cfg.tolerance}, {"max_iterations", cfg.max_iterations}};
    doc["capacity"] = {{"lower", cfg.capacity.lower},
                       {"upper", cfg.capacity.upper},
                       {"xtol", cfg.capacity.xtol},
                       {"rtol", cfg.capacity.rtol},
                       {"max_iterations", cfg.capacity.max_iterations}};
    doc["sweep"] = {{"p_main", cfg.sweep.p_main}, {"n_total", cfg.sweep.n_total}};
    const auto &sim = cfg.simulation;
    doc["simulation"] = {{"horizon", sim.horizon},
                         {"replications", sim.replications},
                         {"seed", sim.seed},
                         {"sample_interval", sim.sample_interval},
                         {"queue_cap", sim.queue_cap ? json(*sim.queue_cap) : json(nullptr)},
                         {"warmup", sim.warmup},
                         {"dispatch", to_string(sim.dispatch)}};
    return doc.dump(2);
}

std::string config_hash(const ScenarioConfig &config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical_json(config)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace junctionq
