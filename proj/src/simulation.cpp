#include "junctionq/simulation.hpp"

#include "junctionq/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>

namespace junctionq {

namespace {

constexpr double kNever = std::numeric_limits<double>::infinity();

struct Replication {
    std::vector<double> mean;
    std::vector<std::vector<int>> trace;
    std::uint64_t started = 0;
    std::uint64_t dropped = 0;
    std::uint64_t fifo_violations = 0;
};

Replication run_replication(const ConflictMatrix &conflicts, std::span<const SimRoute> routes,
                            const SimConfig &cfg, std::size_t rep) {
    const std::size_t k = routes.size();
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(rep)};
    std::mt19937_64 rng(seq);

    std::vector<double> next_arrival(k, kNever);
    std::vector<double> service_end(k, kNever);
    std::vector<std::deque<double>> queue(k);
    std::vector<double> last_started(k, -kNever);
    std::vector<std::vector<std::size_t>> neighbours(k);
    for (std::size_t r = 0; r < k; ++r) {
        neighbours[r] = conflicts.neighbours(r);
        if (routes[r].arrival)
            next_arrival[r] = sample(*routes[r].arrival, rng);
    }

    Replication out;
    out.mean.assign(k, 0.0);
    auto busy = [&](std::size_t r) { return service_end[r] != kNever; };
    auto eligible = [&](std::size_t r) {
        if (busy(r))
            return false;
        for (std::size_t j : neighbours[r])
            if (busy(j))
                return false;
        return true;
    };
    auto start = [&](std::size_t r, double now, double arrived) {
        if (arrived < last_started[r])
            ++out.fifo_violations;
        last_started[r] = arrived;
        for (std::size_t j : neighbours[r])
            if (busy(j))
                throw std::logic_error("conflicting routes in service simultaneously");
        service_end[r] = now + sample(routes[r].service, rng);
        ++out.started;
    };

    std::vector<std::size_t> candidates;
    std::size_t samples = 0;
    std::size_t next_sample = 1;
    for (;;) {
        double t = kNever;
        std::size_t who = k;
        bool completion = false;
        for (std::size_t r = 0; r < k; ++r) {
            if (service_end[r] < t) {
                t = service_end[r];
                who = r;
                completion = true;
            }
        }
        for (std::size_t r = 0; r < k; ++r) {
            if (next_arrival[r] < t) {
                t = next_arrival[r];
                who = r;
                completion = false;
            }
        }
        const double sample_time = static_cast<double>(next_sample) * cfg.sample_interval;
        if (sample_time > cfg.horizon && t > cfg.horizon)
            break;
        if (sample_time <= t) {
            if (sample_time >= cfg.warmup) {
                std::vector<int> row(k);
                for (std::size_t r = 0; r < k; ++r) {
                    row[r] = static_cast<int>(queue[r].size());
                    out.mean[r] += row[r];
                }
                ++samples;
                if (cfg.keep_traces)
                    out.trace.push_back(std::move(row));
            }
            ++next_sample;
            continue;
        }

        if (completion) {
            service_end[who] = kNever;
            for (;;) {
                candidates.clear();
                for (std::size_t r = 0; r < k; ++r)
                    if (!queue[r].empty() && eligible(r))
                        candidates.push_back(r);
                if (candidates.empty())
                    break;
                std::size_t pick = candidates.front();
                if (cfg.dispatch == Dispatch::earliest_arrival) {
                    for (std::size_t r : candidates)
                        if (queue[r].front() < queue[pick].front())
                            pick = r;
                } else if (candidates.size() > 1) {
                    pick = candidates[rng() % candidates.size()];
                }
                const double arrived = queue[pick].front();
                queue[pick].pop_front();
                start(pick, t, arrived);
            }
        } else {
            if (queue[who].empty() && eligible(who))
                start(who, t, t);
            else if (cfg.queue_cap && static_cast<int>(queue[who].size()) >= *cfg.queue_cap)
                ++out.dropped;
            else
                queue[who].push_back(t);
            next_arrival[who] = t + sample(*routes[who].arrival, rng);
        }
    }
    for (double &m : out.mean)
        m = samples > 0 ? m / static_cast<double>(samples) : 0.0;
    return out;
}

} // namespace

const char *to_string(Dispatch d) {
    return d == Dispatch::uniform ? "uniform" : "earliest_arrival";
}

Dispatch parse_dispatch(std::string_view name) {
    if (name == "uniform")
        return Dispatch::uniform;
    if (name == "earliest_arrival")
        return Dispatch::earliest_arrival;
    throw ValidationError("unknown dispatch rule '" + std::string(name) +
                          "' (expected uniform or earliest_arrival)");
}

SimResult simulate(const ConflictMatrix &conflicts, std::span<const SimRoute> routes,
                   const SimConfig &config) {
    if (!(config.horizon > 0.0))
        throw ValidationError("simulation horizon must be positive");
    if (config.replications < 1)
        throw ValidationError("at least one replication is required");
    if (!(config.sample_interval > 0.0))
        throw ValidationError("sample interval must be positive");
    if (conflicts.size() != routes.size())
        throw ValidationError("conflict matrix does not match the simulated routes");

    std::vector<Replication> reps(config.replications);
    const unsigned jobs = std::max(1u, std::min<unsigned>(config.jobs, config.replications));
    if (jobs == 1) {
        for (std::size_t i = 0; i < reps.size(); ++i)
            reps[i] = run_replication(conflicts, routes, config, i);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(jobs);
        for (unsigned w = 0; w < jobs; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < reps.size(); i += jobs)
                        reps[i] = run_replication(conflicts, routes, config, i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto &t : pool)
            t.join();
        for (auto &e : errors)
            if (e)
                std::rethrow_exception(e);
    }

    const std::size_t k = routes.size();
    const double n = static_cast<double>(reps.size());
    SimResult res;
    res.mean_queue.assign(k, 0.0);
    res.standard_error.assign(k, 0.0);
    for (const auto &rep : reps) {
        res.replication_means.push_back(rep.mean);
        res.started += rep.started;
        res.dropped += rep.dropped;
        res.fifo_violations += rep.fifo_violations;
        for (std::size_t r = 0; r < k; ++r)
            res.mean_queue[r] += rep.mean[r] / n;
    }
    if (reps.size() > 1) {
        for (std::size_t r = 0; r < k; ++r) {
            double ss = 0.0;
            for (const auto &rep : reps)
                ss += (rep.mean[r] - res.mean_queue[r]) * (rep.mean[r] - res.mean_queue[r]);
            res.standard_error[r] = std::sqrt(ss / (n - 1.0) / n);
        }
    }
    if (config.keep_traces)
        for (auto &rep : reps)
            res.traces.push_back(std::move(rep.trace));
    res.samples_per_replication = 0;
    for (std::size_t s = 1; static_cast<double>(s) * config.sample_interval <= config.horizon; ++s)
        if (static_cast<double>(s) * config.sample_interval >= config.warmup)
            ++res.samples_per_replication;
    return res;
}

std::vector<SimRoute> simulation_routes(const Scenario &scenario, double n_total) {
    TrafficSpec spec = scenario.traffic;
    spec.n_total = n_total;
    const auto loads = route_loads(scenario.junction, spec, scenario.arrival_cv);
    std::vector<SimRoute> out(loads.size());
    for (const auto &l : loads) {
        if (!l.active)
            continue;
        out[l.route].arrival = fit_hypoexp(1.0 / l.lambda, l.v_arrival);
        out[l.route].service = fit_hypoexp(l.service_time, l.v_service);
    }
    return out;
}

GridBounds capacity_bounds(std::span<const double> n_grid,
                           std::span<const std::vector<double>> queue_lengths,
                           std::span<const double> limits) {
    if (n_grid.size() != queue_lengths.size())
        throw ValidationError("one queue-length vector per grid value is required");
    if (!std::is_sorted(n_grid.begin(), n_grid.end()))
        throw ValidationError("the n_total grid must be sorted");
    auto complies = [&](std::size_t i) {
        if (queue_lengths[i].size() != limits.size())
            throw ValidationError("queue lengths and limits differ in size");
        for (std::size_t r = 0; r < limits.size(); ++r)
            if (queue_lengths[i][r] > limits[r])
                return false;
        return true;
    };
    GridBounds b;
    for (std::size_t i = 0; i < n_grid.size() && complies(i); ++i)
        b.lower = n_grid[i];
    for (std::size_t i = n_grid.size(); i-- > 0 && !complies(i);)
        b.upper = n_grid[i];
    return b;
}

} // namespace junctionq
