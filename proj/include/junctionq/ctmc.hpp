#pragma once

#include "junctionq/junction.hpp"
#include "junctionq/phase_type.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace junctionq {

/// Phase-type processes of one modeled route.
struct RouteProcess {
    std::size_t route = 0; // junction route id, used for naming only
    PhaseTypeSpec arrival;
    PhaseTypeSpec service;
};

/// Per-route slice of a CTMC state. Phases are 0-based; an idle route
/// always carries service_phase 0.
struct RouteState {
    int queue = 0;
    bool serving = false;
    int arrival_phase = 0;
    int service_phase = 0;

    bool operator==(const RouteState &) const = default;
};

using ModelState = std::vector<RouteState>;

struct BuildOptions {
    int waiting_slots = 5;
    double choice_rate = 600.0;
    std::size_t state_cap = 30'000'000;
};

/// Reads the JUNCTIONQ_STATE_CAP environment variable, falling back to `fallback`.
std::size_t state_cap_from_env(std::size_t fallback);

/// Dense ranking of all conflict-feasible canonical states. States are
/// ordered by service pattern (bit mask, ascending), then lexicographically
/// over the route tuples (q, arrival phase, service phase) with route 0 most
/// significant.
class StateSpace {
  public:
    StateSpace(const ConflictMatrix &conflicts, std::span<const RouteProcess> routes,
               int waiting_slots);

    std::size_t route_count() const { return dims_.size(); }
    std::uint64_t size() const { return size_; }
    int waiting_slots() const { return waiting_slots_; }
    bool conflicts(std::size_t i, std::size_t j) const { return conflict_mask_[i] >> j & 1u; }
    std::uint32_t neighbour_mask(std::size_t r) const { return conflict_mask_[r]; }

    std::uint64_t rank(std::span<const RouteState> state) const;
    void unrank(std::uint64_t index, std::span<RouteState> out) const;

    /// Number of conflict-feasible service patterns (independent sets).
    std::size_t pattern_count() const { return patterns_.size(); }

  private:
    struct Dim {
        int arrival_phases;
        int service_phases;
    };
    struct Pattern {
        std::uint32_t mask;
        std::uint64_t offset;
    };

    int waiting_slots_;
    std::vector<Dim> dims_;
    std::vector<std::uint32_t> conflict_mask_; // excludes self
    std::vector<Pattern> patterns_;
    std::vector<std::uint64_t> offset_by_mask_;
    std::uint64_t size_ = 0;
};

/// Sparse generator restricted to the states reachable from the empty state.
/// Transitions are stored by destination (incoming lists) with rates looked up
/// through a small per-model rate table.
class CtmcModel {
  public:
    std::size_t state_count() const { return exit_rate_.size(); }
    std::size_t route_count() const { return processes_.size(); }

    /// Off-diagonal transitions (no self-loops).
    std::size_t transition_count() const { return in_source_.size(); }
    /// States in which a blocked single-phase arrival is discarded; such an
    /// event leaves the state unchanged and is not part of the generator.
    std::size_t overflow_self_loops() const { return self_loops_; }
    /// transition_count() plus the merged overflow self-loops, i.e. the
    /// figure a PRISM/Storm export of the same chain reports.
    std::size_t transition_count_with_self_loops() const {
        return transition_count() + overflow_self_loops();
    }

    int waiting_slots() const { return waiting_slots_; }
    double choice_rate() const { return rates_.back(); }
    std::size_t empty_state() const { return empty_state_; }
    const std::vector<RouteProcess> &processes() const { return processes_; }
    const ConflictMatrix &conflicts() const { return conflicts_; }

    double exit_rate(std::size_t state) const { return exit_rate_[state]; }
    std::span<const double> exit_rates() const { return exit_rate_; }

    std::span<const std::uint64_t> in_offsets() const { return in_offsets_; }
    std::span<const std::uint32_t> in_sources() const { return in_source_; }
    std::span<const std::uint8_t> in_rate_ids() const { return in_rate_; }
    std::span<const double> rate_table() const { return rates_; }

    /// Queue length q_r for every state, in state index order.
    std::span<const std::uint8_t> queue_reward(std::size_t r) const { return queue_[r]; }

    ModelState state(std::size_t index) const;
    /// Index of a state, or state_count() when it is not part of the model.
    std::size_t index_of(std::span<const RouteState> state) const;

    template <typename Fn> void for_each_transition(Fn &&fn) const {
        for (std::size_t dst = 0; dst < state_count(); ++dst)
            for (std::uint64_t e = in_offsets_[dst]; e < in_offsets_[dst + 1]; ++e)
                fn(static_cast<std::size_t>(in_source_[e]), dst, rates_[in_rate_[e]]);
    }

  private:
    friend CtmcModel build_generator(const ConflictMatrix &, std::span<const RouteProcess>,
                                     const BuildOptions &);

    std::vector<RouteProcess> processes_;
    ConflictMatrix conflicts_;
    int waiting_slots_ = 0;
    std::size_t empty_state_ = 0;
    std::size_t self_loops_ = 0;
    std::vector<double> rates_;
    std::vector<std::uint64_t> canonical_; // compact index -> StateSpace rank
    std::vector<double> exit_rate_;
    std::vector<std::uint64_t> in_offsets_;
    std::vector<std::uint32_t> in_source_;
    std::vector<std::uint8_t> in_rate_;
    std::vector<std::vector<std::uint8_t>> queue_;
    std::unique_ptr<StateSpace> space_;
};

/// Reachable, conflict-feasible states in model index order. Intended for
/// small models and tests; large models should use build_generator directly.
std::vector<ModelState> enumerate_states(const ConflictMatrix &conflicts,
                                         std::span<const RouteProcess> routes,
                                         const BuildOptions &options);

/// Builds the arrival/service/choice generator. `conflicts` is indexed by
/// position in `routes`.
CtmcModel build_generator(const ConflictMatrix &conflicts, std::span<const RouteProcess> routes,
                          const BuildOptions &options);

/// Plain edge list: one `src dst rate` line per transition.
void write_edge_list(const CtmcModel &model, std::ostream &out);
/// State table: index followed by (q, s, arrival phase, service phase) per route.
void write_state_table(const CtmcModel &model, std::ostream &out);
/// Best-effort PRISM ctmc module describing the same chain.
void write_prism_model(const CtmcModel &model, std::span<const std::string> route_names,
                       std::ostream &out);

} // namespace junctionq
