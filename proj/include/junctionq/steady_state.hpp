#pragma once

#include "junctionq/ctmc.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace junctionq {

enum class SolverMethod { gauss_seidel, power };

struct SolverOptions {
    double tolerance = 1e-10; // on max_j |(pi Q)_j|
    std::size_t max_iterations = 1'000'000;
    SolverMethod method = SolverMethod::gauss_seidel;
    double relaxation = 1.0; // SOR weight, Gauss-Seidel only
    std::size_t check_interval = 10;
    std::size_t renormalize_interval = 100;
};

struct StationaryDistribution {
    std::vector<double> pi;
    double residual = 0.0;
    std::size_t iterations = 0;
};

/// Stationary distribution of an irreducible model. `initial`, when its
/// size matches the model, seeds the iteration (warm start).
StationaryDistribution stationary(const CtmcModel &model, const SolverOptions &options = {},
                                  std::span<const double> initial = {});

/// max_j |(pi Q)_j|.
double balance_residual(const CtmcModel &model, std::span<const double> pi);

/// Throws StructuralError unless every state can return to the empty state.
void check_irreducible(const CtmcModel &model);

/// L_r = sum_u pi(u) q_r(u).
double expected_queue_length(const StationaryDistribution &dist, const CtmcModel &model,
                             std::size_t r);

} // namespace junctionq
