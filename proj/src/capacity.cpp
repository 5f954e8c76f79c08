#include "junctionq/capacity.hpp"

#include "junctionq/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>

namespace junctionq {

namespace {

[[noreturn]] void rethrow_tagged(double n_total) {
    std::ostringstream tag;
    tag << "at n_total = " << n_total << ": ";
    try {
        throw;
    } catch (const ResourceError &e) {
        throw ResourceError(tag.str() + e.what(), e.required());
    } catch (const ConvergenceError &e) {
        throw ConvergenceError(tag.str() + e.what(), e.last_residual());
    } catch (const FittingError &e) {
        throw FittingError(tag.str() + e.what());
    } catch (const StructuralError &e) {
        throw StructuralError(tag.str() + e.what());
    } catch (const NoDemandError &e) {
        throw NoDemandError(tag.str() + e.what());
    } catch (const ValidationError &e) {
        throw ValidationError(tag.str() + e.what());
    }
}

} // namespace

std::vector<double> quality_factors(std::span<const double> queue_lengths,
                                    std::span<const double> limits) {
    if (queue_lengths.size() != limits.size())
        throw ValidationError("queue lengths and limits differ in size");
    std::vector<double> qf(limits.size());
    for (std::size_t r = 0; r < limits.size(); ++r) {
        if (!(limits[r] > 0.0))
            throw ValidationError("queue-length limits must be positive");
        qf[r] = queue_lengths[r] / limits[r];
    }
    return qf;
}

PhiEvaluator::PhiEvaluator(Scenario scenario) : scenario_(std::move(scenario)) {
    if (scenario_.setting == ModelSetting::PhPh && scenario_.scaling != Scaling::none)
        throw ValidationError("the PhPh setting takes no scaling");
}

PhiEvaluation PhiEvaluator::evaluate(double n_total) {
    const auto start = std::chrono::steady_clock::now();
    PhiEvaluation out;
    out.n_total = n_total;
    try {
        if (!(n_total > 0.0))
            throw ValidationError("n_total must be positive");
        TrafficSpec spec = scenario_.traffic;
        spec.n_total = n_total;
        const auto loads = route_loads(scenario_.junction, spec, scenario_.arrival_cv);
        const bool ph_arrival =
            scenario_.setting == ModelSetting::PhM || scenario_.setting == ModelSetting::PhPh;
        const bool ph_service =
            scenario_.setting == ModelSetting::MPh || scenario_.setting == ModelSetting::PhPh;

        std::vector<std::size_t> active;
        std::vector<RouteProcess> procs;
        std::vector<int> signature;
        for (const auto &l : loads) {
            if (!l.active)
                continue;
            active.push_back(l.route);
            RouteProcess p;
            p.route = l.route;
            p.arrival = fit_hypoexp(1.0 / l.lambda, ph_arrival ? l.v_arrival : 1.0);
            p.service = fit_hypoexp(l.service_time, ph_service ? l.v_service : 1.0);
            signature.insert(signature.end(), {static_cast<int>(l.route), p.arrival.k,
                                               p.service.k});
            procs.push_back(p);
        }

        out.routes.resize(loads.size());
        for (const auto &l : loads)
            out.routes[l.route].limit = l.limit;

        if (!active.empty()) {
            ConflictMatrix sub(active.size());
            for (std::size_t i = 0; i < active.size(); ++i)
                for (std::size_t j = i + 1; j < active.size(); ++j)
                    if (scenario_.junction.conflicts(active[i], active[j]))
                        sub.set(i, j);
            const CtmcModel model = build_generator(sub, procs, scenario_.build);
            const bool warm = signature == warm_signature_;
            const StationaryDistribution dist =
                stationary(model, scenario_.solver,
                           warm ? std::span<const double>(warm_pi_) : std::span<const double>());
            out.states = model.state_count();
            out.transitions = model.transition_count();
            out.self_loops = model.overflow_self_loops();
            out.solver_iterations = dist.iterations;
            for (std::size_t i = 0; i < active.size(); ++i) {
                const RouteLoad &l = loads[active[i]];
                RouteEvaluation &re = out.routes[l.route];
                re.modeled_queue_length = expected_queue_length(dist, model, i);
                re.scaling = scaling_factor(scenario_.scaling, scenario_.setting, l.v_arrival,
                                            l.v_service, l.rho);
                re.queue_length = re.modeled_queue_length * re.scaling;
            }
            warm_signature_ = std::move(signature);
            warm_pi_ = dist.pi;
        }

        std::vector<double> lengths, limits;
        for (const auto &re : out.routes) {
            lengths.push_back(re.queue_length);
            limits.push_back(re.limit);
        }
        const auto qf = quality_factors(lengths, limits);
        for (std::size_t r = 0; r < qf.size(); ++r)
            out.routes[r].quality = qf[r];
        out.phi = (qf.empty() ? 0.0 : *std::max_element(qf.begin(), qf.end())) - 1.0;
    } catch (const Error &) {
        rethrow_tagged(n_total);
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

BrentResult brent_root(const std::function<double(double)> &f, double a, double b, double xtol,
                       double rtol, std::size_t max_iter) {
    if (!(a < b))
        throw ValidationError("brent_root needs a < b");
    if (!(xtol > 0.0) || !(rtol >= 0.0))
        throw ValidationError("brent_root tolerances must be positive");
    BrentResult res;
    double xpre = a, xcur = b;
    double fpre = f(xpre), fcur = f(xcur);
    res.evaluations = 2;
    if (fpre == 0.0) {
        res.root = xpre;
        return res;
    }
    if (fcur == 0.0) {
        res.root = xcur;
        return res;
    }
    if (std::signbit(fpre) == std::signbit(fcur))
        throw BracketError("f has the same sign at both ends of the bracket", fpre, fcur);

    double xblk = 0.0, fblk = 0.0, spre = 0.0, scur = 0.0;
    for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
        if (std::signbit(fpre) != std::signbit(fcur)) {
            xblk = xpre;
            fblk = fpre;
            spre = scur = xcur - xpre;
        }
        if (std::abs(fblk) < std::abs(fcur)) {
            xpre = xcur;
            xcur = xblk;
            xblk = xpre;
            fpre = fcur;
            fcur = fblk;
            fblk = fpre;
        }
        const double delta = (xtol + rtol * std::abs(xcur)) / 2.0;
        const double sbis = (xblk - xcur) / 2.0;
        if (fcur == 0.0 || std::abs(sbis) < delta) {
            res.root = xcur;
            return res;
        }
        if (std::abs(spre) > delta && std::abs(fcur) < std::abs(fpre)) {
            double stry;
            if (xpre == xblk) {
                stry = -fcur * (xcur - xpre) / (fcur - fpre);
            } else {
                const double dpre = (fpre - fcur) / (xpre - xcur);
                const double dblk = (fblk - fcur) / (xblk - xcur);
                stry = -fcur * (fblk * dblk - fpre * dpre) / (dblk * dpre * (fblk - fpre));
            }
            if (2.0 * std::abs(stry) < std::min(std::abs(spre), 3.0 * std::abs(sbis) - delta)) {
                spre = scur;
                scur = stry;
            } else {
                spre = sbis;
                scur = sbis;
            }
        } else {
            spre = sbis;
            scur = sbis;
        }
        xpre = xcur;
        fpre = fcur;
        xcur += std::abs(scur) > delta ? scur : (sbis > 0.0 ? delta : -delta);
        fcur = f(xcur);
        ++res.evaluations;
    }
    std::ostringstream os;
    os << "Brent search did not converge in " << max_iter << " iterations; bracket [" 
       << std::min(xcur, xblk) << ", " << std::max(xcur, xblk) << "]";
    throw ConvergenceError(os.str(), std::abs(fcur));
}

CapacityResult find_capacity(const Scenario &scenario, const CapacitySearch &search) {
    PhiEvaluator phi(scenario);
    CapacityResult result;
    auto f = [&](double n) {
        result.evaluations.push_back(phi.evaluate(n));
        return result.evaluations.back().phi;
    };
    auto finish = [&](const PhiEvaluation &at) {
        result.qf.clear();
        for (const auto &re : at.routes)
            result.qf.push_back(re.quality);
        result.bottleneck_route = static_cast<std::size_t>(
            std::max_element(result.qf.begin(), result.qf.end()) - result.qf.begin());
    };

    try {
        const BrentResult br =
            brent_root(f, search.lower, search.upper, search.xtol, search.rtol,
                       search.max_iterations);
        result.n_max = br.root;
        result.converged = true;
        result.status = CapacityStatus::converged;
    } catch (const BracketError &e) {
        result.converged = false;
        if (e.fb() < 0.0) {
            result.status = CapacityStatus::above_upper_bound;
            result.n_max = search.upper;
        } else {
            result.status = CapacityStatus::below_lower_bound;
            result.n_max = search.lower;
        }
    }
    // The root is always one of the evaluated points.
    auto at = std::find_if(result.evaluations.begin(), result.evaluations.end(),
                           [&](const PhiEvaluation &e) { return e.n_total == result.n_max; });
    finish(at != result.evaluations.end() ? *at : phi.evaluate(result.n_max));
    return result;
}

void write_trace_csv(const CapacityResult &result, std::ostream &out) {
    out << "iteration,n_total,phi,wall_seconds\n";
    const auto precision = out.precision(6);
    for (std::size_t i = 0; i < result.evaluations.size(); ++i) {
        const auto &e = result.evaluations[i];
        out << i + 1 << ',' << e.n_total << ',' << e.phi << ',' << e.seconds << '\n';
    }
    out.precision(precision);
}

const char *to_string(CapacityStatus s) {
    switch (s) {
    case CapacityStatus::converged:
        return "converged";
    case CapacityStatus::above_upper_bound:
        return "above_upper_bound";
    case CapacityStatus::below_lower_bound:
        return "below_lower_bound";
    }
    return "?";
}

} // namespace junctionq
