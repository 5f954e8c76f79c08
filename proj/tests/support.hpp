#pragma once

#include "junctionq/config.hpp"

#include <string>
#include <vector>

namespace testsupport {

inline std::string data_path(const std::string &name) {
    return std::string(JUNCTIONQ_DATA_DIR) + "/" + name;
}

inline junctionq::ScenarioConfig case_study() {
    return junctionq::load_config(data_path("case_study.json"));
}

inline junctionq::ScenarioConfig validation() {
    return junctionq::load_config(data_path("validation.json"));
}

/// r1-r2, r2-r3, r3-r4 plus the diagonal.
inline junctionq::ConflictMatrix path_conflicts(std::size_t k = 4) {
    junctionq::ConflictMatrix c(k);
    for (std::size_t i = 0; i + 1 < k; ++i)
        c.set(i, i + 1);
    return c;
}

inline junctionq::RouteProcess exponential_route(double lambda, double mu, std::size_t id = 0) {
    return {id, junctionq::fit_hypoexp(1.0 / lambda, 1.0), junctionq::fit_hypoexp(1.0 / mu, 1.0)};
}

} // namespace testsupport
