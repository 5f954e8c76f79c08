#include "junctionq/junction.hpp"

#include "junctionq/errors.hpp"

#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace junctionq {

namespace {

void check_share(const std::string &name, double value) {
    if (!(value >= 0.0 && value <= 1.0)) {
        std::ostringstream os;
        os << "share '" << name << "' = " << value << " outside [0, 1]";
        throw ValidationError(os.str());
    }
}

double share_factor(const ShareRef &ref, const TrafficSpec &spec) {
    if (ref.parameter.empty())
        return 1.0;
    auto it = spec.shares.find(ref.parameter);
    if (it == spec.shares.end())
        throw ValidationError("unknown share parameter '" + ref.parameter + "'");
    return ref.complement ? 1.0 - it->second : it->second;
}

// Weighted headway atoms for route r: weight n_{r,t} n_{r',t'} / (n_r n_conflict).
template <typename Fn>
void for_each_headway_atom(const Junction &junction, const TrainCounts &counts, std::size_t r,
                           Fn &&fn) {
    const double n_r = counts.route_total(r);
    double n_conflict = 0.0;
    for (std::size_t r2 = 0; r2 < junction.route_count(); ++r2)
        if (junction.conflicts(r, r2))
            n_conflict += counts.route_total(r2);
    if (!(n_conflict > 0.0) || !(n_r > 0.0)) {
        throw NoDemandError("route '" + junction.routes[r].name +
                            "' has no conflicting demand; exclude it from the analysis");
    }
    for (std::size_t r2 = 0; r2 < junction.route_count(); ++r2) {
        if (!junction.conflicts(r, r2) || counts.route_total(r2) <= 0.0)
            continue;
        for (std::size_t t = 0; t < counts.types(); ++t) {
            if (counts(r, t) <= 0.0)
                continue;
            for (std::size_t t2 = 0; t2 < counts.types(); ++t2) {
                if (counts(r2, t2) <= 0.0)
                    continue;
                auto h = junction.headways.get({r, t}, {r2, t2});
                if (!h) {
                    throw ValidationError("missing headway h((" + junction.routes[r].name + "," +
                                          junction.train_types[t].name + "),(" +
                                          junction.routes[r2].name + "," +
                                          junction.train_types[t2].name + "))");
                }
                fn(counts(r, t) * counts(r2, t2) / (n_r * n_conflict), *h);
            }
        }
    }
}

} // namespace

ConflictMatrix::ConflictMatrix(std::size_t routes) : n_(routes), cells_(routes * routes, 0) {
    for (std::size_t i = 0; i < n_; ++i)
        cells_[i * n_ + i] = 1;
}

void ConflictMatrix::set(std::size_t i, std::size_t j) {
    cells_[i * n_ + j] = 1;
    cells_[j * n_ + i] = 1;
}

std::vector<std::size_t> ConflictMatrix::neighbours(std::size_t r) const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < n_; ++j)
        if (j != r && (*this)(r, j))
            out.push_back(j);
    return out;
}

void HeadwayTable::set(RequestType leader, RequestType follower, double minutes) {
    if (!(minutes > 0.0))
        throw ValidationError("headway times must be positive");
    entries_[{leader, follower}] = minutes;
}

std::optional<double> HeadwayTable::get(RequestType leader, RequestType follower) const {
    auto it = entries_.find({leader, follower});
    if (it == entries_.end())
        return std::nullopt;
    return it->second;
}

std::optional<std::size_t> Junction::find_route(const std::string &name) const {
    for (const auto &r : routes)
        if (r.name == name)
            return r.id;
    return std::nullopt;
}

std::optional<std::size_t> Junction::find_train_type(const std::string &name) const {
    for (const auto &t : train_types)
        if (t.name == name)
            return t.id;
    return std::nullopt;
}

double TrainCounts::route_total(std::size_t r) const {
    double sum = 0.0;
    for (std::size_t t = 0; t < types_; ++t)
        sum += (*this)(r, t);
    return sum;
}

double TrainCounts::total() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

TrainCounts TrainCounts::scaled(double factor) const {
    TrainCounts out = *this;
    for (auto &v : out.values_)
        v *= factor;
    return out;
}

TrainCounts derive_train_counts(const Junction &junction, const TrafficSpec &spec) {
    check_share("p_main", spec.p_main);
    for (const auto &[name, value] : spec.shares)
        check_share(name, value);
    if (!(spec.n_total >= 0.0))
        throw ValidationError("n_total must be non-negative");

    std::set<std::size_t> main_routes;
    std::set<std::size_t> branch_routes;
    for (const auto &e : spec.demand)
        (e.line == Line::main ? main_routes : branch_routes).insert(e.type.route);

    TrainCounts counts(junction.route_count(), junction.train_type_count());
    for (const auto &e : spec.demand) {
        const bool main = e.line == Line::main;
        const double line_share = main ? spec.p_main : 1.0 - spec.p_main;
        const double directions = static_cast<double>(main ? main_routes.size() : branch_routes.size());
        counts(e.type.route, e.type.train_type) +=
            spec.n_total * line_share / directions * share_factor(e.share, spec);
    }
    return counts;
}

double queue_limit(double passenger_share) {
    if (!(passenger_share >= 0.0 && passenger_share <= 1.0))
        throw ValidationError("passenger share outside [0, 1]");
    return 0.479 * std::exp(-1.3 * passenger_share);
}

double pair_headway(const Junction &junction, const TrainCounts &counts, std::size_t r,
                    std::size_t r2) {
    double weight = 0.0;
    double sum = 0.0;
    for (std::size_t t = 0; t < counts.types(); ++t) {
        for (std::size_t t2 = 0; t2 < counts.types(); ++t2) {
            const double w = counts(r, t) * counts(r2, t2);
            if (w <= 0.0)
                continue;
            auto h = junction.headways.get({r, t}, {r2, t2});
            if (!h) {
                throw ValidationError("missing headway for (" + junction.routes[r].name + "," +
                                      junction.train_types[t].name + ") -> (" +
                                      junction.routes[r2].name + "," +
                                      junction.train_types[t2].name + ")");
            }
            weight += w;
            sum += w * *h;
        }
    }
    if (!(weight > 0.0)) {
        throw UndefinedPairError("route pair (" + junction.routes[r].name + ", " +
                                 junction.routes[r2].name + ") has zero sequence weight");
    }
    return sum / weight;
}

double service_time(const Junction &junction, const TrainCounts &counts, std::size_t r) {
    double n_conflict = 0.0;
    for (std::size_t r2 = 0; r2 < junction.route_count(); ++r2)
        if (junction.conflicts(r, r2))
            n_conflict += counts.route_total(r2);
    if (!(n_conflict > 0.0) || !(counts.route_total(r) > 0.0)) {
        throw NoDemandError("route '" + junction.routes[r].name +
                            "' has no conflicting demand; exclude it from the analysis");
    }
    double b = 0.0;
    for (std::size_t r2 = 0; r2 < junction.route_count(); ++r2) {
        const double n2 = counts.route_total(r2);
        if (!junction.conflicts(r, r2) || n2 <= 0.0)
            continue;
        b += n2 / n_conflict * pair_headway(junction, counts, r, r2);
    }
    return b;
}

double service_cv(const Junction &junction, const TrainCounts &counts, std::size_t r) {
    double m1 = 0.0;
    double m2 = 0.0;
    for_each_headway_atom(junction, counts, r, [&](double w, double h) {
        m1 += w * h;
        m2 += w * h * h;
    });
    const double var = std::max(0.0, m2 - m1 * m1);
    // Atoms that are all equal leave only rounding noise in var.
    if (var <= 1e-14 * m1 * m1)
        return 0.0;
    return std::sqrt(var) / m1;
}

std::vector<RouteLoad> route_loads(const Junction &junction, const TrafficSpec &spec,
                                   double arrival_cv) {
    const TrainCounts counts = derive_train_counts(junction, spec);
    // Headway weights are scale free, so the unit-demand table yields the
    // same service figures and stays defined at n_total = 0.
    TrafficSpec unit = spec;
    unit.n_total = 1.0;
    const TrainCounts shape = derive_train_counts(junction, unit);

    std::vector<RouteLoad> loads(junction.route_count());
    for (std::size_t r = 0; r < junction.route_count(); ++r) {
        RouteLoad &l = loads[r];
        l.route = r;
        l.n = counts.route_total(r);
        l.lambda = l.n / spec.time_horizon;
        l.v_arrival = arrival_cv;

        const double unit_total = shape.route_total(r);
        double passenger = 0.0;
        for (std::size_t t = 0; t < shape.types(); ++t)
            if (junction.train_types[t].traffic_class == TrafficClass::passenger)
                passenger += shape(r, t);
        l.passenger_share = unit_total > 0.0 ? passenger / unit_total : 0.0;
        l.limit = queue_limit(l.passenger_share);

        if (!(unit_total > 0.0))
            continue;
        l.active = spec.n_total > 0.0;
        if (junction.service_override) {
            l.service_time = 1.0 / junction.service_override->rate;
            l.v_service = junction.service_override->cv;
        } else {
            l.service_time = service_time(junction, shape, r);
            l.v_service = service_cv(junction, shape, r);
        }
        l.mu = 1.0 / l.service_time;
        l.rho = l.lambda / l.mu;
    }
    return loads;
}

const char *to_string(TrafficClass c) {
    return c == TrafficClass::passenger ? "passenger" : "freight";
}

const char *to_string(Line l) { return l == Line::main ? "main" : "branch"; }

} // namespace junctionq
