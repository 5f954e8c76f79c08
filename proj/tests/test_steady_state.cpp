#include "support.hpp"

#include "junctionq/errors.hpp"
#include "junctionq/steady_state.hpp"

#include <Eigen/Dense>
#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace junctionq;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

/// Solves pi Q = 0, sum pi = 1 by dense LU with one balance equation
/// replaced by the normalization.
Eigen::VectorXd dense_stationary(const CtmcModel &model) {
    const auto n = static_cast<Eigen::Index>(model.state_count());
    Eigen::MatrixXd qt = Eigen::MatrixXd::Zero(n, n); // Q transposed
    model.for_each_transition([&](std::size_t s, std::size_t d, double rate) {
        qt(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(s)) += rate;
        qt(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s)) -= rate;
    });
    qt.row(n - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(n - 1) = 1.0;
    return qt.fullPivLu().solve(rhs);
}

/// Truncated M/M/1 queue: the server plus m waiting places.
double mm1k_waiting(double lambda, double mu, int m) {
    const double rho = lambda / mu;
    double norm = 0.0, waiting = 0.0;
    for (int i = 0; i <= m + 1; ++i) {
        const double p = std::pow(rho, i);
        norm += p;
        waiting += std::max(0, i - 1) * p;
    }
    return waiting / norm;
}

SolverOptions tight() {
    SolverOptions o;
    o.tolerance = 1e-15;
    return o;
}

} // namespace

// A fast choice transition reduces one route to the truncated M/M/1 queue.
TEST_CASE("single route matches the truncated M/M/1 closed form") {
    for (const auto &[lambda, mu, m] :
         {std::tuple{0.15, 0.3, 5}, std::tuple{0.5, 0.3, 3}, std::tuple{0.01, 1.0, 0}}) {
        ConflictMatrix c(1);
        std::vector<RouteProcess> p{testsupport::exponential_route(lambda, mu)};
        const CtmcModel model =
            build_generator(c, p, {.waiting_slots = m, .choice_rate = 1e12});
        SolverOptions o;
        o.tolerance = 1e-12;
        const auto dist = stationary(model, o);
        CHECK_THAT(expected_queue_length(dist, model, 0),
                   WithinAbs(mm1k_waiting(lambda, mu, m), 1e-10));

        const double rho = lambda / mu;
        double norm = 0.0;
        for (int i = 0; i <= m + 1; ++i)
            norm += std::pow(rho, i);
        CHECK_THAT(dist.pi[model.empty_state()], WithinAbs(1.0 / norm, 1e-10));
    }
}

TEST_CASE("two-route chains agree with a dense solve") {
    for (bool conflict : {true, false}) {
        ConflictMatrix c(2);
        if (conflict)
            c.set(0, 1);
        std::vector<RouteProcess> p{testsupport::exponential_route(0.1, 0.3, 0),
                                    testsupport::exponential_route(0.2, 0.4, 1)};
        const CtmcModel model = build_generator(c, p, {.waiting_slots = 5});
        REQUIRE(model.state_count() <= 300);
        const Eigen::VectorXd ref = dense_stationary(model);
        for (auto method : {SolverMethod::gauss_seidel, SolverMethod::power}) {
            SolverOptions o = tight();
            o.method = method;
            if (method == SolverMethod::power)
                o.tolerance = 1e-13;
            const auto dist = stationary(model, o);
            double sum = 0.0;
            for (std::size_t i = 0; i < model.state_count(); ++i) {
                REQUIRE(dist.pi[i] >= 0.0);
                CHECK_THAT(dist.pi[i], WithinAbs(ref(static_cast<Eigen::Index>(i)), 1e-10));
                sum += dist.pi[i];
            }
            CHECK_THAT(sum, WithinAbs(1.0, 1e-12));
        }
        if (!conflict) {
            // Independent routes: each queue is its own single-route chain.
            const auto dist = stationary(model, tight());
            for (std::size_t r = 0; r < 2; ++r) {
                ConflictMatrix one(1);
                std::vector<RouteProcess> alone{p[r]};
                alone[0].route = 0;
                const CtmcModel single = build_generator(one, alone, {.waiting_slots = 5});
                CHECK_THAT(expected_queue_length(dist, model, r),
                           WithinAbs(expected_queue_length(stationary(single, tight()), single, 0),
                                     1e-10));
            }
        }
    }
}

TEST_CASE("phase-type chain agrees with a dense solve") {
    ConflictMatrix c(2);
    c.set(0, 1);
    std::vector<RouteProcess> p{{0, fit_hypoexp(8.0, 0.8), fit_hypoexp(3.0, 0.6)},
                                {1, fit_hypoexp(6.0, 0.8), fit_hypoexp(2.5, 0.6)}};
    const CtmcModel model = build_generator(c, p, {.waiting_slots = 2});
    const Eigen::VectorXd ref = dense_stationary(model);
    const auto dist = stationary(model, tight());
    for (std::size_t i = 0; i < model.state_count(); ++i)
        CHECK_THAT(dist.pi[i], WithinAbs(ref(static_cast<Eigen::Index>(i)), 1e-10));
}

TEST_CASE("vanishing demand concentrates on the empty state") {
    const auto c = testsupport::path_conflicts();
    std::vector<RouteProcess> p;
    for (std::size_t r = 0; r < 4; ++r)
        p.push_back(testsupport::exponential_route(1e-9, 0.3, r));
    const CtmcModel model = build_generator(c, p, {});
    const auto dist = stationary(model);
    CHECK(dist.pi[model.empty_state()] > 1.0 - 1e-6);
    for (std::size_t r = 0; r < 4; ++r)
        CHECK(expected_queue_length(dist, model, r) < 1e-9);
}

TEST_CASE("validation model: balance, monotonicity and symmetry") {
    const auto cfg = testsupport::validation();
    const Scenario sc = cfg.scenario();
    std::vector<double> last(4, -1.0);
    for (double n = 4.0; n <= 40.0; n += 4.0) {
        TrafficSpec spec = cfg.traffic;
        spec.n_total = n;
        spec.p_main = 0.5;
        const auto loads = route_loads(cfg.junction, spec, 0.8);
        std::vector<RouteProcess> p;
        for (const auto &l : loads)
            p.push_back(testsupport::exponential_route(l.lambda, l.mu, l.route));
        const CtmcModel model = build_generator(cfg.junction.conflicts, p, sc.build);
        const auto dist = stationary(model, sc.solver);
        INFO("n_total " << n);
        CHECK(dist.residual <= sc.solver.tolerance);
        CHECK_THAT(balance_residual(model, dist.pi), WithinAbs(0.0, sc.solver.tolerance));

        // Global balance at random states.
        std::mt19937_64 rng(static_cast<std::uint64_t>(n));
        std::uniform_int_distribution<std::size_t> pick(0, model.state_count() - 1);
        const auto off = model.in_offsets();
        const auto src = model.in_sources();
        const auto ids = model.in_rate_ids();
        for (int i = 0; i < 1000; ++i) {
            const std::size_t j = pick(rng);
            double in = 0.0;
            for (auto e = off[j]; e < off[j + 1]; ++e)
                in += dist.pi[src[e]] * model.rate_table()[ids[e]];
            REQUIRE(std::abs(in - dist.pi[j] * model.exit_rate(j)) <= 10 * sc.solver.tolerance);
        }

        std::vector<double> L(4);
        for (std::size_t r = 0; r < 4; ++r) {
            L[r] = expected_queue_length(dist, model, r);
            CHECK(L[r] >= last[r]);
        }
        CHECK_THAT(L[0], WithinAbs(L[3], 1e-8));
        CHECK_THAT(L[1], WithinAbs(L[2], 1e-8));
        last = L;
    }
}

TEST_CASE("warm start reaches the same solution") {
    const auto c = testsupport::path_conflicts();
    std::vector<RouteProcess> p;
    for (std::size_t r = 0; r < 4; ++r)
        p.push_back({r, fit_hypoexp(12.0, 0.8), fit_hypoexp(3.0, 1.0)});
    const CtmcModel model = build_generator(c, p, {});
    const auto cold = stationary(model);
    const auto warm = stationary(model, {}, cold.pi);
    CHECK(warm.iterations <= 1);
    for (std::size_t r = 0; r < 4; ++r)
        CHECK_THAT(expected_queue_length(warm, model, r),
                   WithinRel(expected_queue_length(cold, model, r), 1e-6));
}

TEST_CASE("solver failures") {
    const auto c = testsupport::path_conflicts();
    std::vector<RouteProcess> p;
    for (std::size_t r = 0; r < 4; ++r)
        p.push_back(testsupport::exponential_route(0.1, 0.3, r));
    const CtmcModel model = build_generator(c, p, {});
    SolverOptions o;
    o.max_iterations = 3;
    o.check_interval = 1;
    try {
        stationary(model, o);
        FAIL("expected a convergence error");
    } catch (const ConvergenceError &e) {
        CHECK(e.last_residual() > o.tolerance);
    }
    o = {};
    o.tolerance = 0.0;
    CHECK_THROWS_AS(stationary(model, o), ValidationError);
    o = {};
    o.relaxation = 2.5;
    CHECK_THROWS_AS(stationary(model, o), ValidationError);
}
