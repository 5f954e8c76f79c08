#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace junctionq {

/// Two consecutive Erlang segments: phases [0, k_star) run at rate_a,
/// phases [k_star, k) at rate_b.
struct PhaseTypeSpec {
    int k = 1;
    int k_star = 1;
    double rate_a = 1.0;
    double rate_b = 1.0;
    double target_mean = 1.0;
    double target_cv = 1.0;

    /// Rate of the 0-based phase `p`.
    double rate(int p) const { return p < k_star ? rate_a : rate_b; }

    bool operator==(const PhaseTypeSpec &) const = default;
};

struct Moments {
    double mean = 0.0;
    double cv = 0.0;
};

/// Minimal number of exponential phases able to reach coefficient of variation `cv`.
int phase_count(double cv);

/// Fits a two-segment hypoexponential distribution to (mean, cv), cv in (0, 1].
PhaseTypeSpec fit_hypoexp(double mean, double cv);

Moments moments(const PhaseTypeSpec &spec);

/// Sum of k exponential draws. Uses the top 53 bits of each 64-bit word,
/// offset by half an ulp so that every draw is strictly positive and finite.
template <typename Urbg> double sample(const PhaseTypeSpec &spec, Urbg &rng) {
    static_assert(Urbg::min() == 0 && Urbg::max() == std::numeric_limits<std::uint64_t>::max(),
                  "sample() expects a 64-bit generator");
    double total = 0.0;
    for (int p = 0; p < spec.k; ++p) {
        const double u = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
        total += -std::log(u) / spec.rate(p);
    }
    return total;
}

} // namespace junctionq
