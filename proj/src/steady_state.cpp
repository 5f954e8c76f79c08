#include "junctionq/steady_state.hpp"

#include "junctionq/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace junctionq {

namespace {

void normalize(std::vector<double> &pi) {
    const double sum = std::accumulate(pi.begin(), pi.end(), 0.0);
    if (!(sum > 0.0) || !std::isfinite(sum))
        throw ConvergenceError("probability mass vanished during iteration", sum);
    for (double &p : pi)
        p /= sum;
}

double inflow(const CtmcModel &model, std::span<const double> pi, std::size_t j) {
    const auto off = model.in_offsets();
    const auto src = model.in_sources();
    const auto ids = model.in_rate_ids();
    const auto rates = model.rate_table();
    double sum = 0.0;
    for (std::uint64_t e = off[j]; e < off[j + 1]; ++e)
        sum += pi[src[e]] * rates[ids[e]];
    return sum;
}

void gauss_seidel_sweep(const CtmcModel &model, std::vector<double> &pi, double omega) {
    const auto exit = model.exit_rates();
    for (std::size_t j = 0; j < pi.size(); ++j) {
        const double gs = inflow(model, pi, j) / exit[j];
        pi[j] = omega == 1.0 ? gs : (1.0 - omega) * pi[j] + omega * gs;
    }
}

void power_step(const CtmcModel &model, const std::vector<double> &pi, std::vector<double> &next,
                double lambda) {
    const auto exit = model.exit_rates();
    for (std::size_t j = 0; j < pi.size(); ++j)
        next[j] = pi[j] * (1.0 - exit[j] / lambda) + inflow(model, pi, j) / lambda;
}

} // namespace

double balance_residual(const CtmcModel &model, std::span<const double> pi) {
    const auto exit = model.exit_rates();
    double worst = 0.0;
    for (std::size_t j = 0; j < pi.size(); ++j)
        worst = std::max(worst, std::abs(inflow(model, pi, j) - pi[j] * exit[j]));
    return worst;
}

void check_irreducible(const CtmcModel &model) {
    const std::size_t n = model.state_count();
    const auto exit = model.exit_rates();
    const auto off = model.in_offsets();
    for (std::size_t j = 0; j < n; ++j) {
        if (n > 1 && !(exit[j] > 0.0))
            throw StructuralError("state " + std::to_string(j) + " is absorbing");
    }
    // Backward search from the empty state over incoming edges.
    std::vector<char> seen(n, 0);
    std::vector<std::uint32_t> stack{static_cast<std::uint32_t>(model.empty_state())};
    seen[model.empty_state()] = 1;
    std::size_t count = 1;
    const auto src = model.in_sources();
    while (!stack.empty()) {
        const std::uint32_t j = stack.back();
        stack.pop_back();
        for (std::uint64_t e = off[j]; e < off[j + 1]; ++e) {
            if (!seen[src[e]]) {
                seen[src[e]] = 1;
                ++count;
                stack.push_back(src[e]);
            }
        }
    }
    if (count != n) {
        throw StructuralError(std::to_string(n - count) +
                              " states cannot return to the empty state; chain is reducible");
    }
}

StationaryDistribution stationary(const CtmcModel &model, const SolverOptions &options,
                                  std::span<const double> initial) {
    if (!(options.tolerance > 0.0))
        throw ValidationError("solver tolerance must be positive");
    if (!(options.relaxation > 0.0 && options.relaxation < 2.0))
        throw ValidationError("relaxation weight must lie in (0, 2)");
    check_irreducible(model);

    const std::size_t n = model.state_count();
    StationaryDistribution dist;
    if (initial.size() == n) {
        dist.pi.assign(initial.begin(), initial.end());
        for (double &p : dist.pi)
            p = std::max(p, 0.0);
    } else {
        dist.pi.assign(n, 1.0 / static_cast<double>(n));
    }
    normalize(dist.pi);
    if (n == 1) {
        dist.residual = 0.0;
        return dist;
    }

    const std::size_t check = std::max<std::size_t>(1, options.check_interval);
    const std::size_t renorm = std::max<std::size_t>(1, options.renormalize_interval);
    std::vector<double> next;
    double lambda = 0.0;
    if (options.method == SolverMethod::power) {
        next.resize(n);
        const auto exit = model.exit_rates();
        lambda = 1.02 * *std::max_element(exit.begin(), exit.end());
    }

    dist.residual = balance_residual(model, dist.pi);
    while (dist.residual > options.tolerance) {
        if (dist.iterations >= options.max_iterations) {
            throw ConvergenceError("stationary solver stopped after " +
                                       std::to_string(dist.iterations) +
                                       " iterations without reaching the tolerance",
                                   dist.residual);
        }
        if (options.method == SolverMethod::gauss_seidel) {
            gauss_seidel_sweep(model, dist.pi, options.relaxation);
        } else {
            power_step(model, dist.pi, next, lambda);
            dist.pi.swap(next);
        }
        ++dist.iterations;
        if (dist.iterations % renorm == 0 || dist.iterations % check == 0)
            normalize(dist.pi);
        if (dist.iterations % check == 0)
            dist.residual = balance_residual(model, dist.pi);
    }
    normalize(dist.pi);
    dist.residual = balance_residual(model, dist.pi);
    return dist;
}

double expected_queue_length(const StationaryDistribution &dist, const CtmcModel &model,
                             std::size_t r) {
    const auto q = model.queue_reward(r);
    double sum = 0.0;
    for (std::size_t j = 0; j < dist.pi.size(); ++j)
        if (q[j] > 0)
            sum += dist.pi[j] * q[j];
    return sum;
}

} // namespace junctionq
