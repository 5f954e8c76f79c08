#pragma once

#include "junctionq/approximations.hpp"
#include "junctionq/ctmc.hpp"
#include "junctionq/junction.hpp"
#include "junctionq/steady_state.hpp"

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace junctionq {

/// Everything phi needs besides n_total.
struct Scenario {
    Junction junction;
    TrafficSpec traffic; // n_total is overwritten per evaluation
    double arrival_cv = 0.8;
    ModelSetting setting = ModelSetting::PhPh;
    Scaling scaling = Scaling::none;
    BuildOptions build;
    SolverOptions solver;
};

/// Elementwise L_r / limit_r.
std::vector<double> quality_factors(std::span<const double> queue_lengths,
                                    std::span<const double> limits);

struct RouteEvaluation {
    double queue_length = 0.0; // after scaling
    double modeled_queue_length = 0.0;
    double scaling = 1.0;
    double limit = 0.0;
    double quality = 0.0;
};

struct PhiEvaluation {
    double n_total = 0.0;
    double phi = 0.0;
    std::vector<RouteEvaluation> routes; // indexed by junction route id
    std::size_t states = 0;
    std::size_t transitions = 0;
    std::size_t self_loops = 0; // overflow arrivals, one per state
    std::size_t solver_iterations = 0;
    double seconds = 0.0;
};

/// Evaluates phi(n) = max_r qf_r(n) - 1 for one scenario. Consecutive calls
/// with identical model structure start the solver from the previous solution.
class PhiEvaluator {
  public:
    explicit PhiEvaluator(Scenario scenario);

    PhiEvaluation evaluate(double n_total);
    const Scenario &scenario() const { return scenario_; }

  private:
    Scenario scenario_;
    std::vector<int> warm_signature_;
    std::vector<double> warm_pi_;
};

struct BrentResult {
    double root = 0.0;
    std::size_t iterations = 0;
    std::size_t evaluations = 0;
};

/// Brent's bracketing root finder. Stops once the bracket half-width drops
/// below (xtol + rtol |x|) / 2 or f vanishes.
BrentResult brent_root(const std::function<double(double)> &f, double a, double b, double xtol,
                       double rtol, std::size_t max_iter = 100);

struct CapacitySearch {
    double lower = 1.0;
    double upper = 40.0;
    double xtol = 1e-3;
    double rtol = 1e-3;
    std::size_t max_iterations = 100;

    bool operator==(const CapacitySearch &) const = default;
};

enum class CapacityStatus { converged, above_upper_bound, below_lower_bound };

struct CapacityResult {
    double n_max = 0.0;
    std::vector<double> qf; // per junction route, at n_max
    std::size_t bottleneck_route = 0;
    std::vector<PhiEvaluation> evaluations; // every phi call, bracket ends included
    bool converged = false;
    CapacityStatus status = CapacityStatus::converged;
};

CapacityResult find_capacity(const Scenario &scenario, const CapacitySearch &search = {});

/// iteration,n_total,phi,wall_seconds
void write_trace_csv(const CapacityResult &result, std::ostream &out);

const char *to_string(CapacityStatus s);

} // namespace junctionq
