#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace junctionq {

enum class TrafficClass { passenger, freight };

struct TrainType {
    std::size_t id = 0;
    std::string name;
    TrafficClass traffic_class = TrafficClass::passenger;

    bool operator==(const TrainType &) const = default;
};

struct Route {
    std::size_t id = 0;
    std::string name;
    std::string origin;
    std::string destination;

    bool operator==(const Route &) const = default;
};

/// Symmetric route conflict relation. Every route conflicts with itself.
class ConflictMatrix {
  public:
    ConflictMatrix() = default;
    explicit ConflictMatrix(std::size_t routes);

    std::size_t size() const { return n_; }

    bool operator()(std::size_t i, std::size_t j) const { return cells_[i * n_ + j] != 0; }

    /// Marks i and j as conflicting (both directions).
    void set(std::size_t i, std::size_t j);

    /// Routes other than `r` that conflict with it.
    std::vector<std::size_t> neighbours(std::size_t r) const;

    bool operator==(const ConflictMatrix &) const = default;

  private:
    std::size_t n_ = 0;
    std::vector<unsigned char> cells_;
};

/// Occupation request type: a (route, train type) combination.
struct RequestType {
    std::size_t route = 0;
    std::size_t train_type = 0;

    auto operator<=>(const RequestType &) const = default;
};

/// Minimum headway h(leader, follower) in minutes: the time the follower must
/// wait after the leader started service.
class HeadwayTable {
  public:
    void set(RequestType leader, RequestType follower, double minutes);
    std::optional<double> get(RequestType leader, RequestType follower) const;
    std::size_t size() const { return entries_.size(); }

    const std::map<std::pair<RequestType, RequestType>, double> &entries() const {
        return entries_;
    }

    bool operator==(const HeadwayTable &) const = default;

  private:
    std::map<std::pair<RequestType, RequestType>, double> entries_;
};

/// Fixed per-route service parameters replacing the headway derivation
/// (used by the synthetic validation setup with mu_r = 0.3 everywhere).
struct ServiceOverride {
    double rate = 0.0;
    double cv = 1.0;

    bool operator==(const ServiceOverride &) const = default;
};

struct Junction {
    std::vector<Route> routes;
    std::vector<TrainType> train_types;
    ConflictMatrix conflicts;
    HeadwayTable headways;
    std::optional<ServiceOverride> service_override;

    std::size_t route_count() const { return routes.size(); }
    std::size_t train_type_count() const { return train_types.size(); }
    std::optional<std::size_t> find_route(const std::string &name) const;
    std::optional<std::size_t> find_train_type(const std::string &name) const;

    bool operator==(const Junction &) const = default;
};

enum class Line { main, branch };

/// Composition factor of a demand entry: 1, a share parameter p, or 1 - p.
struct ShareRef {
    std::string parameter; // empty means factor 1
    bool complement = false;

    bool operator==(const ShareRef &) const = default;
};

/// One (route, train type) stream and how it draws from n_total.
struct DemandEntry {
    RequestType type;
    Line line = Line::main;
    ShareRef share;

    bool operator==(const DemandEntry &) const = default;
};

/// Demand side: total count, share parameters and the request distribution.
struct TrafficSpec {
    double n_total = 0.0;
    double time_horizon = 60.0;
    double p_main = 0.5;
    std::map<std::string, double> shares; // composition shares, e.g. p_suburban
    std::vector<DemandEntry> demand;

    bool operator==(const TrafficSpec &) const = default;
};

/// Dense n_{r,t} table indexed [route][train type].
class TrainCounts {
  public:
    TrainCounts(std::size_t routes, std::size_t types)
        : types_(types), values_(routes * types, 0.0) {}

    double operator()(std::size_t r, std::size_t t) const { return values_[r * types_ + t]; }
    double &operator()(std::size_t r, std::size_t t) { return values_[r * types_ + t]; }

    std::size_t routes() const { return types_ == 0 ? 0 : values_.size() / types_; }
    std::size_t types() const { return types_; }

    double route_total(std::size_t r) const;
    double total() const;
    TrainCounts scaled(double factor) const;

  private:
    std::size_t types_;
    std::vector<double> values_;
};

struct RouteLoad {
    std::size_t route = 0;
    bool active = false; // false when the route carries no demand
    double n = 0.0;
    double lambda = 0.0;
    double service_time = 0.0;
    double mu = 0.0;
    double rho = 0.0;
    double v_service = 0.0;
    double v_arrival = 0.0;
    double passenger_share = 0.0;
    double limit = 0.0;
};

/// Evaluates the request distribution theta(n_total).
TrainCounts derive_train_counts(const Junction &junction, const TrafficSpec &spec);

/// Queue-length threshold 0.479 * exp(-1.3 * p_pt).
double queue_limit(double passenger_share);

/// Sequence-weighted mean headway between routes r (leader) and r2 (follower).
double pair_headway(const Junction &junction, const TrainCounts &counts, std::size_t r,
                    std::size_t r2);

/// Mean service time b_r over the conflict set of r, including r itself.
double service_time(const Junction &junction, const TrainCounts &counts, std::size_t r);

/// Coefficient of variation of the headway mixture behind service_time.
double service_cv(const Junction &junction, const TrainCounts &counts, std::size_t r);

/// Assembles the per-route arrival/service figures used by every model.
std::vector<RouteLoad> route_loads(const Junction &junction, const TrafficSpec &spec,
                                   double arrival_cv);

const char *to_string(TrafficClass c);
const char *to_string(Line l);

} // namespace junctionq
