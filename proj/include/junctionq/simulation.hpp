#pragma once

#include "junctionq/capacity.hpp"
#include "junctionq/phase_type.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace junctionq {

/// A simulated route; a route without arrival process never sees trains.
struct SimRoute {
    std::optional<PhaseTypeSpec> arrival;
    PhaseTypeSpec service;
};

/// How queued trains are picked when a completion frees several routes.
/// uniform mirrors the choice transitions of the chain.
enum class Dispatch { uniform, earliest_arrival };

const char *to_string(Dispatch d);
Dispatch parse_dispatch(std::string_view name);

struct SimConfig {
    double horizon = 1200.0; // minutes
    std::size_t replications = 100;
    std::uint64_t seed = 1;
    double sample_interval = 1.0;
    std::optional<int> queue_cap; // unbounded when empty
    double warmup = 0.0;          // samples before this time are discarded
    Dispatch dispatch = Dispatch::uniform;
    bool keep_traces = false;
    unsigned jobs = 1;
};

struct SimResult {
    std::vector<double> mean_queue;     // per route
    std::vector<double> standard_error; // across replication means
    std::vector<std::vector<double>> replication_means; // [replication][route]
    /// [replication][sample][route] waiting trains, when keep_traces is set.
    std::vector<std::vector<std::vector<int>>> traces;
    std::size_t samples_per_replication = 0;
    std::uint64_t started = 0;
    std::uint64_t dropped = 0;
    std::uint64_t fifo_violations = 0; // starts that overtook an earlier arrival
};

/// Event-driven run with FIFO queues per route. A train starts service only
/// when its own route and every conflicting route are idle; after each
/// completion the eligible queue heads are started in order of arrival.
SimResult simulate(const ConflictMatrix &conflicts, std::span<const SimRoute> routes,
                   const SimConfig &config);

/// Phase-type processes of the scenario at n_total, fitted to the target
/// arrival and service coefficients of variation.
std::vector<SimRoute> simulation_routes(const Scenario &scenario, double n_total);

struct GridBounds {
    std::optional<double> lower; // empty: the smallest grid value already violates
    std::optional<double> upper; // empty: the largest grid value still complies
};

/// Capacity bounds on a sorted n_total grid. lower is the largest grid value
/// up to which every value complies with all limits; upper is the smallest
/// grid value from which on every value violates some limit.
GridBounds capacity_bounds(std::span<const double> n_grid,
                           std::span<const std::vector<double>> queue_lengths,
                           std::span<const double> limits);

} // namespace junctionq
