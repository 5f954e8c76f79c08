#include "junctionq/config.hpp"
#include "junctionq/errors.hpp"
#include "junctionq/simulation.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace junctionq;
using nlohmann::json;

namespace {

struct Options {
    std::string config;
    std::string out = ".";
    std::string setting;
    std::string scaling;
    unsigned jobs = 1;
    std::optional<std::uint64_t> seed;
    std::optional<double> p_main;
    std::optional<double> n_total;
    std::optional<double> mean;
    std::optional<double> cv;
    std::string format = "edges";
    std::string reference;
    bool timings = false;
};

std::ofstream open_output(const Options &opt, const std::string &name) {
    fs::create_directories(opt.out);
    const fs::path path = fs::path(opt.out) / name;
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << std::setprecision(6);
    return out;
}

ScenarioConfig prepare(const Options &opt) {
    ScenarioConfig cfg = load_config(opt.config);
    if (!opt.setting.empty())
        cfg.setting = parse_setting(opt.setting);
    if (!opt.scaling.empty())
        cfg.scaling = parse_scaling(opt.scaling);
    if (cfg.setting == ModelSetting::PhPh && cfg.scaling != Scaling::none)
        throw ValidationError("the PhPh setting takes no scaling");
    if (opt.p_main) {
        if (!(*opt.p_main >= 0.0 && *opt.p_main <= 1.0))
            throw ValidationError("--p-main outside [0, 1]");
        cfg.traffic.p_main = *opt.p_main;
    }
    if (opt.n_total)
        cfg.traffic.n_total = *opt.n_total;
    if (opt.seed)
        cfg.simulation.seed = *opt.seed;
    return cfg;
}

std::string route_name(const ScenarioConfig &cfg, std::size_t r) {
    return cfg.junction.routes[r].name;
}

void print_fit(std::ostream &os, const std::string &label, const PhaseTypeSpec &ph) {
    os << label << ": mean=" << ph.target_mean << " cv=" << ph.target_cv << " k=" << ph.k
       << " k_star=" << ph.k_star << '\n';
    for (int p = 0; p < ph.k; ++p)
        os << "  phase " << p + 1 << " rate " << ph.rate(p) << '\n';
}

int cmd_fit_report(const Options &opt) {
    std::cout << std::setprecision(6);
    if (opt.mean || opt.cv) {
        if (!opt.mean || !opt.cv)
            throw ValidationError("--mean and --cv go together");
        print_fit(std::cout, "fit", fit_hypoexp(*opt.mean, *opt.cv));
        return 0;
    }
    const ScenarioConfig cfg = prepare(opt);
    const std::string hash = config_hash(cfg);
    auto csv = open_output(opt, "fit_report.csv");
    csv << "config_hash,p_main,n_total,route,n,lambda,mu,rho,v_arrival,v_service,passenger_share,"
           "limit,process,k,k_star,rate_a,rate_b\n";
    const auto loads = route_loads(cfg.junction, cfg.traffic, cfg.arrival_cv);
    for (const auto &l : loads) {
        if (!l.active)
            continue;
        const auto arrival = fit_hypoexp(1.0 / l.lambda, l.v_arrival);
        const auto service = fit_hypoexp(l.service_time, l.v_service);
        std::cout << route_name(cfg, l.route) << ": lambda=" << l.lambda << " mu=" << l.mu
                  << " rho=" << l.rho << " v_S=" << l.v_service << " limit=" << l.limit << '\n';
        print_fit(std::cout, "  arrival", arrival);
        print_fit(std::cout, "  service", service);
        for (const auto &[name, ph] : {std::pair{"arrival", arrival}, std::pair{"service", service}})
            csv << hash << ',' << cfg.traffic.p_main << ',' << cfg.traffic.n_total << ','
                << route_name(cfg, l.route) << ',' << l.n << ',' << l.lambda << ',' << l.mu << ','
                << l.rho << ',' << l.v_arrival << ',' << l.v_service << ',' << l.passenger_share
                << ',' << l.limit << ',' << name << ',' << ph.k << ',' << ph.k_star << ','
                << ph.rate_a << ',' << ph.rate_b << '\n';
    }
    return 0;
}

int cmd_queue_lengths(const Options &opt) {
    const ScenarioConfig cfg = prepare(opt);
    const std::string hash = config_hash(cfg);
    std::vector<double> grid = cfg.sweep.n_total;
    if (opt.n_total || grid.empty())
        grid = {cfg.traffic.n_total};
    auto csv = open_output(opt, "queue_lengths.csv");
    csv << "config_hash,setting,scaling,p_main,n_total,route,queue_length,modeled_queue_length,"
           "scaling_factor,limit,quality,states,transitions\n";
    PhiEvaluator phi(cfg.scenario());
    int status = 0;
    for (double n : grid) {
        try {
            const PhiEvaluation e = phi.evaluate(n);
            for (std::size_t r = 0; r < e.routes.size(); ++r) {
                const auto &re = e.routes[r];
                csv << hash << ',' << to_string(cfg.setting) << ',' << to_string(cfg.scaling)
                    << ',' << cfg.traffic.p_main << ',' << n << ',' << route_name(cfg, r) << ','
                    << re.queue_length << ',' << re.modeled_queue_length << ',' << re.scaling
                    << ',' << re.limit << ',' << re.quality << ',' << e.states << ','
                    << e.transitions << '\n';
            }
            std::cout << "n_total=" << n << " phi=" << e.phi << '\n';
        } catch (const Error &ex) {
            std::cerr << "error: " << ex.what() << '\n';
            status = 1;
        }
    }
    return status;
}

void print_capacity(std::ostream &os, const ScenarioConfig &cfg, const CapacityResult &res) {
    os << std::fixed << std::setprecision(2) << "p_main=" << cfg.traffic.p_main
       << " n_max=" << res.n_max << " bottleneck=" << route_name(cfg, res.bottleneck_route)
       << " evaluations=" << res.evaluations.size() << " status=" << to_string(res.status)
       << '\n'
       << std::defaultfloat;
}

int cmd_capacity(const Options &opt) {
    const ScenarioConfig cfg = prepare(opt);
    const std::string hash = config_hash(cfg);
    const CapacityResult res = find_capacity(cfg.scenario(), cfg.capacity);
    print_capacity(std::cout, cfg, res);

    auto trace = open_output(opt, "trace.csv");
    trace << "config_hash,iteration,n_total,phi" << (opt.timings ? ",wall_seconds" : "") << '\n';
    for (std::size_t i = 0; i < res.evaluations.size(); ++i) {
        const auto &e = res.evaluations[i];
        trace << hash << ',' << i + 1 << ',' << e.n_total << ',' << e.phi;
        if (opt.timings)
            trace << ',' << e.seconds;
        trace << '\n';
    }
    auto csv = open_output(opt, "capacity.csv");
    csv << "config_hash,setting,scaling,p_main,n_max,bottleneck,evaluations,status";
    for (std::size_t r = 0; r < res.qf.size(); ++r)
        csv << ",qf_" << route_name(cfg, r);
    csv << '\n'
        << hash << ',' << to_string(cfg.setting) << ',' << to_string(cfg.scaling) << ','
        << cfg.traffic.p_main << ',' << res.n_max << ','
        << route_name(cfg, res.bottleneck_route) << ',' << res.evaluations.size() << ','
        << to_string(res.status);
    for (double q : res.qf)
        csv << ',' << q;
    csv << '\n';
    return res.status == CapacityStatus::converged ? 0 : 2;
}

int cmd_sweep(const Options &opt) {
    const ScenarioConfig cfg = prepare(opt);
    const std::string hash = config_hash(cfg);
    std::vector<double> shares = cfg.sweep.p_main;
    if (opt.p_main || shares.empty())
        shares = {cfg.traffic.p_main};

    std::vector<std::optional<CapacityResult>> results(shares.size());
    std::vector<std::string> failures(shares.size());
    std::atomic<std::size_t> next{0};
    std::mutex print;
    auto worker = [&] {
        for (std::size_t i = next++; i < shares.size(); i = next++) {
            ScenarioConfig local = cfg;
            local.traffic.p_main = shares[i];
            try {
                results[i] = find_capacity(local.scenario(), local.capacity);
                std::lock_guard lock(print);
                print_capacity(std::cout, local, *results[i]);
            } catch (const Error &e) {
                failures[i] = e.what();
                std::lock_guard lock(print);
                std::cerr << "p_main=" << shares[i] << " failed: " << e.what() << '\n';
            }
        }
    };
    const unsigned jobs = std::max(1u, std::min<unsigned>(opt.jobs, shares.size()));
    std::vector<std::thread> pool;
    for (unsigned j = 1; j < jobs; ++j)
        pool.emplace_back(worker);
    worker();
    for (auto &t : pool)
        t.join();

    auto csv = open_output(opt, "sweep.csv");
    csv << "config_hash,setting,scaling,p_main,n_max,bottleneck,evaluations,status";
    for (std::size_t r = 0; r < cfg.junction.route_count(); ++r)
        csv << ",qf_" << route_name(cfg, r);
    csv << '\n';
    int status = 0;
    for (std::size_t i = 0; i < shares.size(); ++i) {
        csv << hash << ',' << to_string(cfg.setting) << ',' << to_string(cfg.scaling) << ','
            << shares[i] << ',';
        if (!results[i]) {
            csv << ",,," << "error";
            for (std::size_t r = 0; r < cfg.junction.route_count(); ++r)
                csv << ',';
            csv << '\n';
            status = 1;
            continue;
        }
        const auto &res = *results[i];
        csv << res.n_max << ',' << route_name(cfg, res.bottleneck_route) << ','
            << res.evaluations.size() << ',' << to_string(res.status);
        for (double q : res.qf)
            csv << ',' << q;
        csv << '\n';
    }
    return status;
}

int cmd_simulate(const Options &opt) {
    const ScenarioConfig cfg = prepare(opt);
    const std::string hash = config_hash(cfg);
    std::vector<double> grid = cfg.sweep.n_total;
    if (opt.n_total || grid.empty())
        grid = {cfg.traffic.n_total};
    std::sort(grid.begin(), grid.end());

    SimConfig sc;
    sc.horizon = cfg.simulation.horizon;
    sc.replications = cfg.simulation.replications;
    sc.seed = cfg.simulation.seed;
    sc.sample_interval = cfg.simulation.sample_interval;
    sc.queue_cap = cfg.simulation.queue_cap;
    sc.warmup = cfg.simulation.warmup;
    sc.dispatch = cfg.simulation.dispatch;
    sc.jobs = opt.jobs;

    auto csv = open_output(opt, "simulation.csv");
    csv << "config_hash,seed,p_main,n_total,route,mean_queue,standard_error,limit\n";
    const Scenario scenario = cfg.scenario();
    std::vector<std::vector<double>> means;
    std::vector<double> limits;
    for (double n : grid) {
        const auto routes = simulation_routes(scenario, n);
        const SimResult res = simulate(cfg.junction.conflicts, routes, sc);
        TrafficSpec spec = cfg.traffic;
        spec.n_total = n;
        const auto loads = route_loads(cfg.junction, spec, cfg.arrival_cv);
        limits.clear();
        for (std::size_t r = 0; r < routes.size(); ++r) {
            limits.push_back(loads[r].limit);
            csv << hash << ',' << sc.seed << ',' << cfg.traffic.p_main << ',' << n << ','
                << route_name(cfg, r) << ',' << res.mean_queue[r] << ','
                << res.standard_error[r] << ',' << loads[r].limit << '\n';
        }
        means.push_back(res.mean_queue);
        std::cout << "n_total=" << n;
        for (std::size_t r = 0; r < routes.size(); ++r)
            std::cout << ' ' << route_name(cfg, r) << '=' << res.mean_queue[r] << "+-"
                      << res.standard_error[r];
        std::cout << '\n';
    }
    const GridBounds b = capacity_bounds(grid, means, limits);
    auto bounds = open_output(opt, "simulation_bounds.csv");
    bounds << "config_hash,seed,p_main,n_max_lower,n_max_upper\n"
           << hash << ',' << sc.seed << ',' << cfg.traffic.p_main << ',';
    if (b.lower)
        bounds << *b.lower;
    bounds << ',';
    if (b.upper)
        bounds << *b.upper;
    bounds << '\n';
    std::cout << "n_max_lower=" << (b.lower ? std::to_string(*b.lower) : "open")
              << " n_max_upper=" << (b.upper ? std::to_string(*b.upper) : "open") << '\n';
    return 0;
}

/// Compares reproduced figures against a reference document:
/// {"model_sizes": [{"setting", "n_total", "states", "transitions"}],
///  "service_parameters": {"tolerance", "rows": [{"p_main", "mu": [...], "v_service": [...]}]},
///  "capacities": {"tolerance", "rows": [{"setting", "scaling", "p_main", "n_max"}]}}
int cmd_validate_tables(const Options &opt) {
    const ScenarioConfig cfg = prepare(opt);
    const std::string hash = config_hash(cfg);
    if (opt.reference.empty())
        throw ValidationError("validate-tables needs --reference");
    std::ifstream in(opt.reference);
    if (!in)
        throw ValidationError("cannot open reference file '" + opt.reference + "'");
    const json ref = json::parse(in);

    auto csv = open_output(opt, "validate_tables.csv");
    csv << "config_hash,table,key,quantity,expected,actual,tolerance,pass\n";
    int failures = 0;
    auto check = [&](const std::string &table, const std::string &key, const std::string &what,
                     double expected, double actual, double tol) {
        const bool ok = std::abs(actual - expected) <= tol;
        failures += ok ? 0 : 1;
        csv << hash << ',' << table << ',' << key << ',' << what << ',' << expected << ','
            << actual << ',' << tol << ',' << (ok ? "yes" : "no") << '\n';
        std::cout << (ok ? "PASS " : "FAIL ") << table << ' ' << key << ' ' << what
                  << " expected=" << expected << " actual=" << actual << '\n';
    };

    if (ref.contains("model_sizes")) {
        for (const auto &row : ref["model_sizes"]) {
            ScenarioConfig local = cfg;
            local.setting = parse_setting(row.at("setting").get<std::string>());
            local.scaling = Scaling::none;
            const double n = row.value("n_total", 16.0);
            PhiEvaluator phi(local.scenario());
            const PhiEvaluation e = phi.evaluate(n);
            const std::string key = to_string(local.setting);
            check("model_sizes", key, "states", row.at("states").get<double>(),
                  static_cast<double>(e.states), row.value("states_tolerance", 0.0));
            if (row.contains("transitions"))
                check("model_sizes", key, "transitions", row["transitions"].get<double>(),
                      static_cast<double>(e.transitions + e.self_loops),
                      row.value("transitions_tolerance", 0.0));
        }
    }
    if (ref.contains("service_parameters")) {
        const auto &sp = ref["service_parameters"];
        const double tol = sp.value("tolerance", 0.005);
        for (const auto &row : sp.at("rows")) {
            TrafficSpec spec = cfg.traffic;
            spec.p_main = row.at("p_main").get<double>();
            spec.n_total = 1.0;
            const auto loads = route_loads(cfg.junction, spec, cfg.arrival_cv);
            std::ostringstream key;
            key << "p_main=" << spec.p_main;
            for (std::size_t r = 0; r < loads.size(); ++r) {
                check("service_parameters", key.str(), "mu_" + route_name(cfg, r),
                      row.at("mu").at(r).get<double>(), loads[r].mu, tol);
                check("service_parameters", key.str(), "v_service_" + route_name(cfg, r),
                      row.at("v_service").at(r).get<double>(), loads[r].v_service, tol);
            }
        }
    }
    if (ref.contains("capacities")) {
        const auto &cp = ref["capacities"];
        for (const auto &row : cp.at("rows")) {
            ScenarioConfig local = cfg;
            local.setting = parse_setting(row.at("setting").get<std::string>());
            local.scaling = parse_scaling(row.at("scaling").get<std::string>());
            local.traffic.p_main = row.at("p_main").get<double>();
            const CapacityResult res = find_capacity(local.scenario(), local.capacity);
            std::ostringstream key;
            key << to_string(local.setting) << '/' << to_string(local.scaling)
                << "/p_main=" << local.traffic.p_main;
            check("capacities", key.str(), "n_max", row.at("n_max").get<double>(), res.n_max,
                  row.value("tolerance", cp.value("tolerance", 0.3)));
        }
    }
    std::cout << (failures == 0 ? "all checks passed" : std::to_string(failures) + " checks failed")
              << '\n';
    return failures == 0 ? 0 : 1;
}

int cmd_export_model(const Options &opt) {
    const ScenarioConfig cfg = prepare(opt);
    const Scenario sc = cfg.scenario();
    const double n = cfg.traffic.n_total > 0.0 ? cfg.traffic.n_total : 16.0;
    TrafficSpec spec = cfg.traffic;
    spec.n_total = n;
    const auto loads = route_loads(cfg.junction, spec, cfg.arrival_cv);
    const bool ph_a = cfg.setting == ModelSetting::PhM || cfg.setting == ModelSetting::PhPh;
    const bool ph_s = cfg.setting == ModelSetting::MPh || cfg.setting == ModelSetting::PhPh;
    std::vector<std::size_t> active;
    std::vector<RouteProcess> procs;
    std::vector<std::string> names;
    for (const auto &l : loads) {
        if (!l.active)
            continue;
        active.push_back(l.route);
        names.push_back(route_name(cfg, l.route));
        procs.push_back({l.route, fit_hypoexp(1.0 / l.lambda, ph_a ? l.v_arrival : 1.0),
                         fit_hypoexp(l.service_time, ph_s ? l.v_service : 1.0)});
    }
    ConflictMatrix sub(active.size());
    for (std::size_t i = 0; i < active.size(); ++i)
        for (std::size_t j = i + 1; j < active.size(); ++j)
            if (cfg.junction.conflicts(active[i], active[j]))
                sub.set(i, j);
    const CtmcModel model = build_generator(sub, procs, sc.build);
    if (opt.format == "edges") {
        auto out = open_output(opt, "model_edges.txt");
        write_edge_list(model, out);
    } else if (opt.format == "states") {
        auto out = open_output(opt, "model_states.txt");
        write_state_table(model, out);
    } else if (opt.format == "prism") {
        auto out = open_output(opt, "model.prism");
        write_prism_model(model, names, out);
    } else {
        throw ValidationError("unknown export format '" + opt.format + "'");
    }
    std::cout << "states=" << model.state_count() << " transitions=" << model.transition_count()
              << " overflow_self_loops=" << model.overflow_self_loops() << '\n';
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Timetable capacity of railway junctions from phase-type CTMC models"};
    app.require_subcommand(1);
    Options opt;

    auto common = [&](CLI::App *sub, bool needs_config = true) {
        auto *c = sub->add_option("--config", opt.config, "Scenario JSON document");
        if (needs_config)
            c->required();
        c->check(CLI::ExistingFile);
        sub->add_option("--out", opt.out, "Output directory")->capture_default_str();
        sub->add_option("--setting", opt.setting, "MM, PhM, MPh or PhPh");
        sub->add_option("--scaling", opt.scaling, "none, hertel or kingman");
        sub->add_option("--jobs", opt.jobs, "Worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--seed", opt.seed, "Simulation seed");
        sub->add_option("--p-main", opt.p_main, "Share of main line traffic");
        sub->add_option("--n-total", opt.n_total, "Total train count per horizon");
    };

    std::map<std::string, std::function<int(const Options &)>> commands{
        {"fit-report", cmd_fit_report},       {"queue-lengths", cmd_queue_lengths},
        {"capacity", cmd_capacity},           {"sweep", cmd_sweep},
        {"simulate", cmd_simulate},           {"validate-tables", cmd_validate_tables},
        {"export-model", cmd_export_model}};

    auto *fit = app.add_subcommand("fit-report", "Phase-type fits per route, or for --mean/--cv");
    common(fit, false);
    fit->add_option("--mean", opt.mean, "Target mean (minutes)");
    fit->add_option("--cv", opt.cv, "Target coefficient of variation");
    common(app.add_subcommand("queue-lengths", "Expected queue lengths over the n_total grid"));
    auto *cap = app.add_subcommand("capacity", "Capacity search at the configured p_main");
    common(cap);
    cap->add_flag("--timings", opt.timings, "Add wall-clock seconds to the trace");
    common(app.add_subcommand("sweep", "Capacity for every p_main of the sweep grid"));
    common(app.add_subcommand("simulate", "Discrete-event simulation over the n_total grid"));
    auto *val = app.add_subcommand("validate-tables", "Compare reproduced tables to a reference");
    common(val);
    val->add_option("--reference", opt.reference, "Reference JSON")->check(CLI::ExistingFile);
    auto *exp = app.add_subcommand("export-model", "Write the CTMC as edges, states or PRISM");
    common(exp);
    exp->add_option("--format", opt.format, "edges, states or prism")->capture_default_str();

    CLI11_PARSE(app, argc, argv);
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "fit-report" && opt.config.empty() && !(opt.mean && opt.cv)) {
        std::cerr << "fit-report needs --config or --mean with --cv\n";
        return 2;
    }
    try {
        return commands.at(name)(opt);
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
