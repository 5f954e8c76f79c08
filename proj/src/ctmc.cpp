#include "junctionq/ctmc.hpp"

#include "junctionq/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <ostream>
#include <string>

namespace junctionq {

namespace {

constexpr std::size_t kMaxRoutes = 20;
constexpr std::uint64_t kNoPattern = std::numeric_limits<std::uint64_t>::max();

std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
    if (a != 0 && b > kNoPattern / a)
        return kNoPattern;
    return a * b;
}

std::uint32_t serving_mask(std::span<const RouteState> s) {
    std::uint32_t mask = 0;
    for (std::size_t r = 0; r < s.size(); ++r)
        if (s[r].serving)
            mask |= 1u << r;
    return mask;
}

// Rate table layout: four entries per route (arrival a/b, service a/b), then M.
std::uint8_t arrival_rate_id(std::size_t r, const PhaseTypeSpec &ph, int phase) {
    return static_cast<std::uint8_t>(4 * r + (phase < ph.k_star ? 0 : 1));
}
std::uint8_t service_rate_id(std::size_t r, const PhaseTypeSpec &ph, int phase) {
    return static_cast<std::uint8_t>(4 * r + 2 + (phase < ph.k_star ? 0 : 1));
}

/// Calls emit(target, rate_id) for every outgoing transition of `state`
/// (modified in place and restored). Returns true if some arrival is
/// discarded without changing the state.
template <typename Emit>
bool for_each_successor(const StateSpace &space, std::span<const RouteProcess> procs, int m,
                        std::span<RouteState> state, Emit &&emit) {
    const std::uint32_t busy = serving_mask(state);
    const auto choice_id = static_cast<std::uint8_t>(4 * procs.size());
    bool self_loop = false;
    for (std::size_t r = 0; r < state.size(); ++r) {
        RouteState &rs = state[r];
        const RouteState saved = rs;
        const PhaseTypeSpec &arr = procs[r].arrival;
        const PhaseTypeSpec &svc = procs[r].service;
        const bool blocked = (busy & space.neighbour_mask(r)) != 0;
        const bool free = !rs.serving && !blocked;

        // Arrival process.
        const std::uint8_t a_id = arrival_rate_id(r, arr, rs.arrival_phase);
        if (rs.arrival_phase + 1 < arr.k) {
            ++rs.arrival_phase;
            emit(std::span<const RouteState>(state), a_id);
        } else if (free && rs.queue == 0) {
            rs.arrival_phase = 0;
            rs.serving = true;
            rs.service_phase = 0;
            emit(std::span<const RouteState>(state), a_id);
        } else if (rs.queue < m) {
            rs.arrival_phase = 0;
            ++rs.queue;
            emit(std::span<const RouteState>(state), a_id);
        } else if (arr.k > 1) {
            rs.arrival_phase = 0;
            emit(std::span<const RouteState>(state), a_id);
        } else {
            self_loop = true;
        }
        rs = saved;

        // Service process.
        if (rs.serving) {
            const std::uint8_t s_id = service_rate_id(r, svc, rs.service_phase);
            if (rs.service_phase + 1 < svc.k) {
                ++rs.service_phase;
            } else {
                rs.serving = false;
                rs.service_phase = 0;
            }
            emit(std::span<const RouteState>(state), s_id);
            rs = saved;
        }

        // Choice: a queued train takes the free route.
        if (free && rs.queue > 0) {
            --rs.queue;
            rs.serving = true;
            rs.service_phase = 0;
            emit(std::span<const RouteState>(state), choice_id);
            rs = saved;
        }
    }
    return self_loop;
}

} // namespace

std::size_t state_cap_from_env(std::size_t fallback) {
    if (const char *v = std::getenv("JUNCTIONQ_STATE_CAP")) {
        char *end = nullptr;
        const unsigned long long cap = std::strtoull(v, &end, 10);
        if (end != v && *end == '\0' && cap > 0)
            return static_cast<std::size_t>(cap);
    }
    return fallback;
}

StateSpace::StateSpace(const ConflictMatrix &conflicts, std::span<const RouteProcess> routes,
                       int waiting_slots)
    : waiting_slots_(waiting_slots) {
    const std::size_t k = routes.size();
    if (k == 0)
        throw ValidationError("a model needs at least one route");
    if (k > kMaxRoutes)
        throw ResourceError("too many routes for the dense state ranking", k);
    if (conflicts.size() != k)
        throw ValidationError("conflict matrix does not match the modeled routes");
    if (waiting_slots < 0)
        throw ValidationError("waiting slots must be non-negative");

    for (const auto &p : routes) {
        if (p.arrival.k < 1 || p.service.k < 1 || p.arrival.k > 255 || p.service.k > 255)
            throw ValidationError("phase counts must lie in [1, 255]");
        dims_.push_back({p.arrival.k, p.service.k});
    }
    conflict_mask_.assign(k, 0);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
            if (i != j && conflicts(i, j))
                conflict_mask_[i] |= 1u << j;

    offset_by_mask_.assign(std::size_t{1} << k, kNoPattern);
    for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
        bool feasible = true;
        for (std::size_t r = 0; r < k && feasible; ++r)
            if ((mask >> r & 1u) && (mask & conflict_mask_[r]))
                feasible = false;
        if (!feasible)
            continue;
        std::uint64_t block = 1;
        for (std::size_t r = 0; r < k; ++r) {
            const std::uint64_t radix = static_cast<std::uint64_t>(waiting_slots + 1) *
                                        dims_[r].arrival_phases *
                                        ((mask >> r & 1u) ? dims_[r].service_phases : 1);
            block = saturating_mul(block, radix);
        }
        patterns_.push_back({mask, size_});
        offset_by_mask_[mask] = size_;
        size_ = (block == kNoPattern || size_ > kNoPattern - block) ? kNoPattern : size_ + block;
    }
}

std::uint64_t StateSpace::rank(std::span<const RouteState> state) const {
    const std::uint32_t mask = serving_mask(state);
    std::uint64_t idx = 0;
    for (std::size_t r = 0; r < dims_.size(); ++r) {
        const RouteState &s = state[r];
        const std::uint64_t sp = s.serving ? dims_[r].service_phases : 1;
        const std::uint64_t radix =
            static_cast<std::uint64_t>(waiting_slots_ + 1) * dims_[r].arrival_phases * sp;
        const std::uint64_t digit =
            (static_cast<std::uint64_t>(s.queue) * dims_[r].arrival_phases + s.arrival_phase) * sp +
            (s.serving ? s.service_phase : 0);
        idx = idx * radix + digit;
    }
    return offset_by_mask_[mask] + idx;
}

void StateSpace::unrank(std::uint64_t index, std::span<RouteState> out) const {
    auto it = std::upper_bound(patterns_.begin(), patterns_.end(), index,
                               [](std::uint64_t v, const Pattern &p) { return v < p.offset; });
    const Pattern &pat = *std::prev(it);
    std::uint64_t local = index - pat.offset;
    for (std::size_t r = dims_.size(); r-- > 0;) {
        const bool serving = pat.mask >> r & 1u;
        const std::uint64_t sp = serving ? dims_[r].service_phases : 1;
        const std::uint64_t radix =
            static_cast<std::uint64_t>(waiting_slots_ + 1) * dims_[r].arrival_phases * sp;
        std::uint64_t digit = local % radix;
        local /= radix;
        RouteState &s = out[r];
        s.serving = serving;
        s.service_phase = static_cast<int>(digit % sp);
        digit /= sp;
        s.arrival_phase = static_cast<int>(digit % dims_[r].arrival_phases);
        s.queue = static_cast<int>(digit / dims_[r].arrival_phases);
    }
}

ModelState CtmcModel::state(std::size_t index) const {
    ModelState s(route_count());
    space_->unrank(canonical_[index], s);
    return s;
}

std::size_t CtmcModel::index_of(std::span<const RouteState> state) const {
    if (state.size() != route_count())
        return state_count();
    const std::uint64_t key = space_->rank(state);
    auto it = std::lower_bound(canonical_.begin(), canonical_.end(), key);
    if (it == canonical_.end() || *it != key)
        return state_count();
    return static_cast<std::size_t>(it - canonical_.begin());
}

CtmcModel build_generator(const ConflictMatrix &conflicts, std::span<const RouteProcess> routes,
                          const BuildOptions &options) {
    auto space = std::make_unique<StateSpace>(conflicts, routes, options.waiting_slots);
    if (space->size() > options.state_cap) {
        throw ResourceError("conflict-feasible state space has " + std::to_string(space->size()) +
                                " states, above the cap of " + std::to_string(options.state_cap),
                            static_cast<std::size_t>(space->size()));
    }
    if (space->size() >= std::numeric_limits<std::uint32_t>::max())
        throw ResourceError("state space too large for 32-bit indices", space->size());
    if (!(options.choice_rate > 0.0) || !std::isfinite(options.choice_rate))
        throw ValidationError("choice rate must be positive");

    CtmcModel model;
    model.processes_.assign(routes.begin(), routes.end());
    model.conflicts_ = conflicts;
    model.waiting_slots_ = options.waiting_slots;
    for (const auto &p : routes) {
        for (double r : {p.arrival.rate_a, p.arrival.rate_b, p.service.rate_a, p.service.rate_b})
            if (!(r > 0.0) || !std::isfinite(r))
                throw ValidationError("phase rates must be positive and finite");
        model.rates_.insert(model.rates_.end(), {p.arrival.rate_a, p.arrival.rate_b,
                                                 p.service.rate_a, p.service.rate_b});
    }
    model.rates_.push_back(options.choice_rate);

    const std::size_t k = routes.size();
    const int m = options.waiting_slots;
    const auto canonical_size = static_cast<std::size_t>(space->size());

    // Pass 1: breadth-first reachability from the empty state, counting in-degrees.
    std::vector<std::uint64_t> visited((canonical_size + 63) / 64, 0);
    std::vector<std::uint32_t> indegree(canonical_size, 0);
    std::vector<std::uint64_t> frontier;
    ModelState st(k);
    const std::uint64_t start = space->rank(st);
    visited[start / 64] |= std::uint64_t{1} << (start % 64);
    frontier.push_back(start);
    std::size_t self_loops = 0;
    for (std::size_t head = 0; head < frontier.size(); ++head) {
        space->unrank(frontier[head], st);
        const bool loop = for_each_successor(*space, routes, m, st,
                                             [&](std::span<const RouteState> t, std::uint8_t) {
                                                 const std::uint64_t key = space->rank(t);
                                                 ++indegree[key];
                                                 std::uint64_t &w = visited[key / 64];
                                                 const std::uint64_t bit = std::uint64_t{1}
                                                                           << (key % 64);
                                                 if (!(w & bit)) {
                                                     w |= bit;
                                                     frontier.push_back(key);
                                                 }
                                             });
        if (loop)
            ++self_loops;
    }
    const std::size_t n = frontier.size();
    frontier.clear();
    frontier.shrink_to_fit();

    // Compact reachable states, preserving the canonical order.
    std::vector<std::uint32_t> compact_of(canonical_size, 0);
    model.canonical_.reserve(n);
    model.in_offsets_.assign(n + 1, 0);
    for (std::size_t key = 0; key < canonical_size; ++key) {
        if (!(visited[key / 64] >> (key % 64) & 1u))
            continue;
        const std::size_t j = model.canonical_.size();
        compact_of[key] = static_cast<std::uint32_t>(j);
        model.canonical_.push_back(key);
        model.in_offsets_[j + 1] = model.in_offsets_[j] + indegree[key];
    }
    indegree.clear();
    indegree.shrink_to_fit();
    visited.clear();
    visited.shrink_to_fit();

    // Pass 2: fill incoming lists (sources ascending) and exit rates.
    const std::uint64_t nnz = model.in_offsets_[n];
    model.in_source_.resize(nnz);
    model.in_rate_.resize(nnz);
    model.exit_rate_.assign(n, 0.0);
    model.queue_.assign(k, std::vector<std::uint8_t>(n, 0));
    std::vector<std::uint64_t> cursor(model.in_offsets_.begin(), model.in_offsets_.end() - 1);
    for (std::size_t j = 0; j < n; ++j) {
        space->unrank(model.canonical_[j], st);
        for (std::size_t r = 0; r < k; ++r)
            model.queue_[r][j] = static_cast<std::uint8_t>(st[r].queue);
        double exit = 0.0;
        for_each_successor(*space, routes, m, st,
                           [&](std::span<const RouteState> t, std::uint8_t id) {
                               const std::uint32_t dst = compact_of[space->rank(t)];
                               const std::uint64_t pos = cursor[dst]++;
                               model.in_source_[pos] = static_cast<std::uint32_t>(j);
                               model.in_rate_[pos] = id;
                               exit += model.rates_[id];
                           });
        model.exit_rate_[j] = exit;
    }

    model.empty_state_ = compact_of[start];
    model.self_loops_ = self_loops;
    model.space_ = std::move(space);
    return model;
}

std::vector<ModelState> enumerate_states(const ConflictMatrix &conflicts,
                                         std::span<const RouteProcess> routes,
                                         const BuildOptions &options) {
    const CtmcModel model = build_generator(conflicts, routes, options);
    std::vector<ModelState> out;
    out.reserve(model.state_count());
    for (std::size_t i = 0; i < model.state_count(); ++i)
        out.push_back(model.state(i));
    return out;
}

void write_edge_list(const CtmcModel &model, std::ostream &out) {
    const auto precision = out.precision(17);
    model.for_each_transition(
        [&](std::size_t src, std::size_t dst, double rate) { out << src << ' ' << dst << ' ' << rate << '\n'; });
    out.precision(precision);
}

void write_state_table(const CtmcModel &model, std::ostream &out) {
    out << "index";
    for (std::size_t r = 0; r < model.route_count(); ++r)
        out << " q" << r << " s" << r << " a" << r << " p" << r;
    out << '\n';
    for (std::size_t i = 0; i < model.state_count(); ++i) {
        out << i;
        for (const RouteState &s : model.state(i))
            out << ' ' << s.queue << ' ' << (s.serving ? 1 : 0) << ' ' << s.arrival_phase << ' '
                << s.service_phase;
        out << '\n';
    }
}

void write_prism_model(const CtmcModel &model, std::span<const std::string> route_names,
                       std::ostream &out) {
    const std::size_t k = model.route_count();
    auto name = [&](std::size_t r) {
        std::string s = r < route_names.size() ? route_names[r] : "r" + std::to_string(r);
        for (char &c : s)
            if (!std::isalnum(static_cast<unsigned char>(c)))
                c = '_';
        return s;
    };
    auto blocked = [&](std::size_t r) {
        std::string g;
        for (std::size_t j = 0; j < k; ++j)
            if (j != r && model.conflicts()(r, j))
                g += " & s_" + name(j) + "=0";
        return g;
    };
    const auto precision = out.precision(17);
    out << "// Generated by junctionq; discarded single-phase arrivals are omitted.\nctmc\n\n";
    out << "const int m = " << model.waiting_slots() << ";\n";
    out << "const double M = " << model.choice_rate() << ";\n\n";
    out << "module junction\n";
    for (std::size_t r = 0; r < k; ++r) {
        const auto &p = model.processes()[r];
        const std::string n = name(r);
        out << "  q_" << n << " : [0..m] init 0;\n";
        out << "  s_" << n << " : [0..1] init 0;\n";
        out << "  a_" << n << " : [0.." << p.arrival.k - 1 << "] init 0;\n";
        out << "  p_" << n << " : [0.." << p.service.k - 1 << "] init 0;\n";
    }
    out << '\n';
    for (std::size_t r = 0; r < k; ++r) {
        const auto &p = model.processes()[r];
        const std::string n = name(r);
        const std::string free = "s_" + n + "=0" + blocked(r);
        const std::string last = "a_" + n + "=" + std::to_string(p.arrival.k - 1);
        for (int ph = 0; ph + 1 < p.arrival.k; ++ph)
            out << "  [] a_" << n << "=" << ph << " -> " << p.arrival.rate(ph) << " : (a_" << n
                << "'=" << ph + 1 << ");\n";
        const double a_last = p.arrival.rate(p.arrival.k - 1);
        out << "  [] " << last << " & " << free << " & q_" << n << "=0 -> " << a_last << " : (a_"
            << n << "'=0) & (s_" << n << "'=1) & (p_" << n << "'=0);\n";
        out << "  [] " << last << " & !(" << free << " & q_" << n << "=0) & q_" << n << "<m -> "
            << a_last << " : (a_" << n << "'=0) & (q_" << n << "'=q_" << n << "+1);\n";
        if (p.arrival.k > 1)
            out << "  [] " << last << " & !(" << free << " & q_" << n << "=0) & q_" << n
                << "=m -> " << a_last << " : (a_" << n << "'=0);\n";
        for (int ph = 0; ph + 1 < p.service.k; ++ph)
            out << "  [] s_" << n << "=1 & p_" << n << "=" << ph << " -> " << p.service.rate(ph)
                << " : (p_" << n << "'=" << ph + 1 << ");\n";
        out << "  [] s_" << n << "=1 & p_" << n << "=" << p.service.k - 1 << " -> "
            << p.service.rate(p.service.k - 1) << " : (s_" << n << "'=0) & (p_" << n
            << "'=0);\n";
        out << "  [] " << free << " & q_" << n << ">0 -> M : (q_" << n << "'=q_" << n
            << "-1) & (s_" << n << "'=1) & (p_" << n << "'=0);\n";
    }
    out << "endmodule\n\n";
    for (std::size_t r = 0; r < k; ++r)
        out << "rewards \"queue_" << name(r) << "\"\n  true : q_" << name(r)
            << ";\nendrewards\n\n";
    out.precision(precision);
}

} // namespace junctionq
