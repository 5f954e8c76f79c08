#include "junctionq/phase_type.hpp"

#include "junctionq/errors.hpp"

#include <cmath>
#include <sstream>

namespace junctionq {

int phase_count(double cv) {
    if (!(cv > 0.0))
        throw ValidationError("coefficient of variation must be positive");
    if (cv > 1.0) {
        std::ostringstream os;
        os << "coefficient of variation " << cv
           << " > 1 cannot be represented by a hypoexponential distribution";
        throw FittingError(os.str());
    }
    // 1/cv^2 lands a few ulps above an integer for cv = 1/sqrt(n); do not round it up.
    const double inv = 1.0 / (cv * cv);
    return static_cast<int>(std::ceil(inv - 1e-9 * inv));
}

PhaseTypeSpec fit_hypoexp(double mean, double cv) {
    if (!(mean > 0.0) || !std::isfinite(mean))
        throw ValidationError("mean must be positive and finite");
    const int k = phase_count(cv);

    PhaseTypeSpec spec;
    spec.target_mean = mean;
    spec.target_cv = cv;
    spec.k = k;
    spec.k_star = (k + 1) / 2;
    if (k == 1) {
        spec.rate_a = spec.rate_b = 1.0 / mean;
        return spec;
    }

    const double k1 = spec.k_star;
    const double k2 = k - spec.k_star;
    const double v2 = cv * cv;
    double disc = k1 * k2 * (v2 * (k1 + k2) - 1.0);
    const double denom = k1 * (1.0 - v2 * k2);
    if (disc < 0.0 && disc > -1e-9 * k1 * k2)
        disc = 0.0;
    if (disc < 0.0 || !(denom > 0.0)) {
        std::ostringstream os;
        os << "cannot split " << k << " phases for cv " << cv << " (discriminant " << disc
           << ", denominator " << denom << ")";
        throw FittingError(os.str());
    }
    const double e2_star = (k1 * k2 * v2 + std::sqrt(disc)) / denom;
    const double e1 = mean / (1.0 + e2_star);
    const double e2 = mean * e2_star / (1.0 + e2_star);
    spec.rate_a = k1 / e1;
    spec.rate_b = k2 / e2;
    return spec;
}

Moments moments(const PhaseTypeSpec &spec) {
    double mean = 0.0;
    double var = 0.0;
    for (int p = 0; p < spec.k; ++p) {
        const double m = 1.0 / spec.rate(p);
        mean += m;
        var += m * m;
    }
    return {mean, std::sqrt(var) / mean};
}

} // namespace junctionq
