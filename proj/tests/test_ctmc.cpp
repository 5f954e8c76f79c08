#include "support.hpp"

#include "junctionq/ctmc.hpp"
#include "junctionq/errors.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

using namespace junctionq;

namespace {

using Flat = std::vector<int>; // (q, s, pA, pS) per route, 0-based phases

Flat flatten(const ModelState &s) {
    Flat f;
    for (const auto &r : s)
        f.insert(f.end(), {r.queue, r.serving ? 1 : 0, r.arrival_phase, r.service_phase});
    return f;
}

using Edge = std::tuple<Flat, Flat, double>;

/// Straightforward map-based construction of the same chain, used as oracle.
std::pair<std::set<Flat>, std::multiset<Edge>>
reference_chain(const ConflictMatrix &c, const std::vector<RouteProcess> &p, int m, double M) {
    const std::size_t k = p.size();
    auto blocked = [&](const Flat &u, std::size_t r) {
        for (std::size_t j = 0; j < k; ++j)
            if (j != r && c(r, j) && u[4 * j + 1] == 1)
                return true;
        return false;
    };
    std::set<Flat> seen{Flat(4 * k, 0)};
    std::queue<Flat> todo;
    todo.push(Flat(4 * k, 0));
    std::multiset<Edge> edges;
    while (!todo.empty()) {
        const Flat u = todo.front();
        todo.pop();
        std::vector<std::pair<Flat, double>> out;
        for (std::size_t r = 0; r < k; ++r) {
            const int q = u[4 * r], s = u[4 * r + 1], a = u[4 * r + 2], ps = u[4 * r + 3];
            const auto &A = p[r].arrival;
            const auto &S = p[r].service;
            const double ra = a < A.k_star ? A.rate_a : A.rate_b;
            Flat v = u;
            if (a < A.k - 1) {
                v[4 * r + 2] = a + 1;
                out.push_back({v, ra});
            } else if (s == 0 && !blocked(u, r) && q == 0) {
                v[4 * r + 1] = 1;
                v[4 * r + 2] = 0;
                v[4 * r + 3] = 0;
                out.push_back({v, ra});
            } else if (q < m) {
                v[4 * r] = q + 1;
                v[4 * r + 2] = 0;
                out.push_back({v, ra});
            } else {
                v[4 * r + 2] = 0;
                if (v != u)
                    out.push_back({v, ra});
            }
            if (s == 1) {
                Flat w = u;
                const double rs = ps < S.k_star ? S.rate_a : S.rate_b;
                if (ps < S.k - 1) {
                    w[4 * r + 3] = ps + 1;
                } else {
                    w[4 * r + 1] = 0;
                    w[4 * r + 3] = 0;
                }
                out.push_back({w, rs});
            }
            if (q > 0 && s == 0 && !blocked(u, r)) {
                Flat w = u;
                w[4 * r] = q - 1;
                w[4 * r + 1] = 1;
                w[4 * r + 3] = 0;
                out.push_back({w, M});
            }
        }
        for (auto &[v, rate] : out) {
            edges.insert({u, v, rate});
            if (seen.insert(v).second)
                todo.push(v);
        }
    }
    return {seen, edges};
}

std::vector<RouteProcess> processes(std::size_t k, double arrival_cv, double service_cv) {
    std::vector<RouteProcess> p;
    for (std::size_t r = 0; r < k; ++r)
        p.push_back({r, fit_hypoexp(10.0 + 3.0 * r, arrival_cv), fit_hypoexp(3.0 + r, service_cv)});
    return p;
}

bool conflict_safe(const ConflictMatrix &c, const ModelState &s) {
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = i + 1; j < s.size(); ++j)
            if (c(i, j) && s[i].serving && s[j].serving)
                return false;
    return true;
}

} // namespace

TEST_CASE("M/M validation model size") {
    const auto c = testsupport::path_conflicts();
    std::vector<RouteProcess> p;
    for (std::size_t r = 0; r < 4; ++r)
        p.push_back(testsupport::exponential_route(5.0 / 60.0, 0.3, r));
    const auto t0 = std::chrono::steady_clock::now();
    const CtmcModel model = build_generator(c, p, {});
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(model.state_count() == 10368);
    CHECK(model.transition_count() == 58320);
    CHECK(model.overflow_self_loops() == 5368);
    CHECK(model.transition_count_with_self_loops() == 63688);
    CHECK(secs < 5.0);
}

TEST_CASE("M/PH validation model size") {
    const auto c = testsupport::path_conflicts();
    std::vector<RouteProcess> p;
    for (std::size_t r = 0; r < 4; ++r)
        p.push_back({r, fit_hypoexp(12.0, 1.0), fit_hypoexp(1.0 / 0.3, 0.3)});
    const CtmcModel model = build_generator(c, p, {});
    CHECK(model.state_count() == 623376);
    CHECK(model.transition_count_with_self_loops() == 3664703);
}

TEST_CASE("smallest models") {
    SECTION("one route without waiting slots") {
        ConflictMatrix c(1);
        std::vector<RouteProcess> p{testsupport::exponential_route(1.0, 1.0)};
        const auto states = enumerate_states(c, p, {.waiting_slots = 0});
        CHECK(states.size() == 2);
    }
    SECTION("one route, one slot: birth-death chain") {
        ConflictMatrix c(1);
        std::vector<RouteProcess> p{testsupport::exponential_route(1.0, 1.0)};
        const CtmcModel model = build_generator(c, p, {.waiting_slots = 1});
        // A queued train waits for the choice transition once the route is free.
        REQUIRE(model.state_count() == 4);
        CHECK(model.transition_count() == 5);
        std::set<std::pair<Flat, Flat>> edges;
        model.for_each_transition([&](std::size_t s, std::size_t d, double rate) {
            const Flat from = flatten(model.state(s));
            edges.insert({from, flatten(model.state(d))});
            CHECK(rate == (from == Flat{1, 0, 0, 0} ? 600.0 : 1.0));
        });
        const Flat idle{0, 0, 0, 0}, busy{0, 1, 0, 0}, waiting{1, 1, 0, 0}, ready{1, 0, 0, 0};
        CHECK(edges == std::set<std::pair<Flat, Flat>>{{idle, busy},
                                                       {busy, idle},
                                                       {busy, waiting},
                                                       {waiting, ready},
                                                       {ready, busy}});
    }
}

TEST_CASE("feasible service patterns of the path graph") {
    const auto c = testsupport::path_conflicts();
    std::vector<RouteProcess> p;
    for (std::size_t r = 0; r < 4; ++r)
        p.push_back(testsupport::exponential_route(0.1, 0.3, r));
    const StateSpace space(c, p, 0);
    // Independent sets of the path r1-r2-r3-r4, by brute force.
    int count = 0;
    for (int mask = 0; mask < 16; ++mask) {
        bool ok = true;
        for (int i = 0; i < 3; ++i)
            ok = ok && !((mask >> i & 1) && (mask >> (i + 1) & 1));
        count += ok;
    }
    CHECK(count == 8);
    CHECK(space.pattern_count() == 8);
    CHECK(space.size() == 8u);
}

TEST_CASE("rank and unrank are inverse") {
    const auto c = testsupport::path_conflicts(3);
    const auto p = processes(3, 0.6, 0.45);
    const StateSpace space(c, p, 2);
    ModelState s(3);
    for (std::uint64_t i = 0; i < space.size(); ++i) {
        space.unrank(i, s);
        REQUIRE(space.rank(s) == i);
        REQUIRE(conflict_safe(c, s));
        for (const auto &r : s)
            if (!r.serving)
                REQUIRE(r.service_phase == 0);
    }
}

TEST_CASE("generator matches the reference construction") {
    struct Case {
        std::size_t k;
        double va, vs;
        int m;
        bool path;
    };
    for (const Case cs : {Case{1, 1.0, 1.0, 3, true}, Case{2, 1.0, 1.0, 5, true},
                          Case{2, 1.0, 1.0, 2, false}, Case{2, 0.8, 0.6, 2, true},
                          Case{3, 0.7, 0.5, 2, true}, Case{3, 1.0, 0.45, 1, false}}) {
        INFO("k=" << cs.k << " va=" << cs.va << " vs=" << cs.vs << " m=" << cs.m);
        const ConflictMatrix c = cs.path ? testsupport::path_conflicts(cs.k) : ConflictMatrix(cs.k);
        const auto p = processes(cs.k, cs.va, cs.vs);
        const CtmcModel model = build_generator(c, p, {.waiting_slots = cs.m, .choice_rate = 600.0});
        const auto [states, edges] = reference_chain(c, p, cs.m, 600.0);

        std::set<Flat> got;
        for (std::size_t i = 0; i < model.state_count(); ++i)
            got.insert(flatten(model.state(i)));
        CHECK(got == states);

        std::multiset<Edge> got_edges;
        model.for_each_transition([&](std::size_t s, std::size_t d, double rate) {
            got_edges.insert({flatten(model.state(s)), flatten(model.state(d)), rate});
        });
        CHECK(got_edges == edges);
    }
}

TEST_CASE("generator invariants") {
    const auto c = testsupport::path_conflicts();
    const auto p = processes(4, 0.8, 0.6);
    const int m = 2;
    const CtmcModel model = build_generator(c, p, {.waiting_slots = m});
    const std::size_t n = model.state_count();

    // Conflict safety, queue bound and index round trip on every state.
    for (std::size_t i = 0; i < n; ++i) {
        const auto s = model.state(i);
        REQUIRE(conflict_safe(c, s));
        for (std::size_t r = 0; r < 4; ++r) {
            REQUIRE(s[r].queue <= m);
            REQUIRE(model.queue_reward(r)[i] == s[r].queue);
        }
        REQUIRE(model.index_of(s) == i);
    }

    // No self-loops, positive rates, exit rates equal the outgoing sums.
    std::vector<double> out(n, 0.0);
    model.for_each_transition([&](std::size_t s, std::size_t d, double rate) {
        REQUIRE(s != d);
        REQUIRE(rate > 0.0);
        out[s] += rate;
    });
    for (std::size_t i = 0; i < n; ++i)
        REQUIRE(Catch::Matchers::WithinRel(model.exit_rate(i), 1e-12).match(out[i]));

    // Only arrival-phase advances leave the empty state.
    double expected = 0.0;
    for (const auto &r : p)
        expected += r.arrival.rate_a;
    CHECK_THAT(model.exit_rate(model.empty_state()), Catch::Matchers::WithinRel(expected, 1e-12));
    CHECK(flatten(model.state(model.empty_state())) == Flat(16, 0));
}

TEST_CASE("reachable set is strongly connected") {
    const auto c = testsupport::path_conflicts(3);
    const auto p = processes(3, 0.7, 0.5);
    const CtmcModel model = build_generator(c, p, {.waiting_slots = 2});
    const std::size_t n = model.state_count();
    std::vector<std::vector<std::size_t>> fwd(n), bwd(n);
    model.for_each_transition([&](std::size_t s, std::size_t d, double) {
        fwd[s].push_back(d);
        bwd[d].push_back(s);
    });
    for (const auto *adj : {&fwd, &bwd}) {
        std::vector<char> seen(n, 0);
        std::vector<std::size_t> stack{model.empty_state()};
        seen[model.empty_state()] = 1;
        std::size_t count = 1;
        while (!stack.empty()) {
            const auto u = stack.back();
            stack.pop_back();
            for (auto v : (*adj)[u])
                if (!seen[v]) {
                    seen[v] = 1;
                    ++count;
                    stack.push_back(v);
                }
        }
        CHECK(count == n);
    }
}

TEST_CASE("sampled conflict safety on the PH/PH validation structure") {
    const auto c = testsupport::path_conflicts();
    std::vector<RouteProcess> p;
    for (std::size_t r = 0; r < 4; ++r)
        p.push_back({r, fit_hypoexp(15.0, 0.8), fit_hypoexp(1.0 / 0.3, 0.3)});
    const CtmcModel model = build_generator(c, p, {});
    CHECK(model.state_count() >= 5'000'000);
    CHECK(model.state_count() <= 10'000'000);
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::size_t> pick(0, model.state_count() - 1);
    const auto off = model.in_offsets();
    const auto src = model.in_sources();
    for (int i = 0; i < 2000; ++i) {
        const std::size_t d = pick(rng);
        REQUIRE(conflict_safe(c, model.state(d)));
        for (auto e = off[d]; e < off[d + 1]; ++e)
            REQUIRE(conflict_safe(c, model.state(src[e])));
    }
}

TEST_CASE("state cap") {
    const auto c = testsupport::path_conflicts();
    std::vector<RouteProcess> p;
    for (std::size_t r = 0; r < 4; ++r)
        p.push_back(testsupport::exponential_route(0.1, 0.3, r));
    try {
        build_generator(c, p, {.state_cap = 1000});
        FAIL("expected a resource error");
    } catch (const ResourceError &e) {
        CHECK(e.required() == 8 * 1296u);
    }
    setenv("JUNCTIONQ_STATE_CAP", "1234", 1);
    CHECK(state_cap_from_env(7) == 1234);
    setenv("JUNCTIONQ_STATE_CAP", "junk", 1);
    CHECK(state_cap_from_env(7) == 7);
    unsetenv("JUNCTIONQ_STATE_CAP");
    CHECK(state_cap_from_env(7) == 7);
}

TEST_CASE("exports") {
    ConflictMatrix c(2);
    c.set(0, 1);
    std::vector<RouteProcess> p{{0, fit_hypoexp(5.0, 0.8), fit_hypoexp(2.0, 1.0)},
                                testsupport::exponential_route(0.2, 0.4, 1)};
    const CtmcModel model = build_generator(c, p, {.waiting_slots = 1});

    std::ostringstream edges;
    write_edge_list(model, edges);
    std::size_t lines = 0;
    std::istringstream in(edges.str());
    std::size_t s, d;
    double rate;
    while (in >> s >> d >> rate) {
        ++lines;
        CHECK(s < model.state_count());
        CHECK(d < model.state_count());
    }
    CHECK(lines == model.transition_count());

    std::ostringstream states;
    write_state_table(model, states);
    const std::string table = states.str();
    CHECK(std::count(table.begin(), table.end(), '\n') ==
          static_cast<long>(model.state_count() + 1));

    std::ostringstream prism;
    const std::vector<std::string> names{"north", "south"};
    write_prism_model(model, names, prism);
    CHECK(prism.str().find("ctmc") != std::string::npos);
    CHECK(prism.str().find("q_north : [0..m]") != std::string::npos);
    CHECK(prism.str().find("rewards \"queue_south\"") != std::string::npos);
}
