#pragma once

#include "junctionq/capacity.hpp"
#include "junctionq/simulation.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace junctionq {

struct SimulationSettings {
    double horizon = 1200.0; // minutes per replication
    std::size_t replications = 100;
    std::uint64_t seed = 1;
    double sample_interval = 1.0;
    std::optional<int> queue_cap; // unbounded when empty
    double warmup = 0.0;
    Dispatch dispatch = Dispatch::uniform;

    bool operator==(const SimulationSettings &) const = default;
};

struct SweepSettings {
    std::vector<double> p_main;
    std::vector<double> n_total;

    bool operator==(const SweepSettings &) const = default;
};

struct ScenarioConfig {
    std::string name;
    Junction junction;
    TrafficSpec traffic;
    double arrival_cv = 0.8;
    ModelSetting setting = ModelSetting::PhPh;
    Scaling scaling = Scaling::none;
    int waiting_slots = 5;
    double choice_rate = 600.0;
    double tolerance = 1e-10;
    std::size_t max_iterations = 1'000'000;
    CapacitySearch capacity;
    SweepSettings sweep;
    SimulationSettings simulation;

    Scenario scenario() const;

    bool operator==(const ScenarioConfig &) const = default;
};

/// Parses and validates a scenario document. Errors name the JSON path.
ScenarioConfig parse_config(std::string_view json_text);
ScenarioConfig load_config(const std::string &path);

/// Canonical JSON with every default spelled out; parses back to an equal config.
std::string canonical_json(const ScenarioConfig &config);
/// 16 hex digits of FNV-1a over canonical_json.
std::string config_hash(const ScenarioConfig &config);

} // namespace junctionq
