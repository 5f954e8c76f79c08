#include "junctionq/approximations.hpp"
#include "junctionq/errors.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace junctionq;
using Catch::Matchers::WithinAbs;

TEST_CASE("Hertel factor") {
    // c = 0.5^0.36 * 1.64 - 0.64, gamma = 2 / (0.09 c + 0.64)
    const double c = std::pow(0.5, 0.36) * 1.64 - 0.64;
    CHECK_THAT(c, WithinAbs(0.63786, 5e-5));
    CHECK_THAT(2.0 / (0.09 * c + 0.64), WithinAbs(2.86778, 5e-5));
    CHECK_THAT(hertel_factor(0.8, 0.3, 0.5), WithinAbs(0.34870, 5e-5));
    CHECK_THAT(hertel_factor(0.8, 0.3, 0.5), WithinAbs((0.09 * c + 0.64) / 2.0, 1e-15));
    CHECK_THAT(hertel_factor(1.0, 0.3, 0.5), WithinAbs(0.545, 1e-15));
    CHECK_THROWS_AS(hertel_factor(0.8, 0.3, 1.0), ValidationError);
    CHECK_THROWS_AS(hertel_factor(0.8, 0.3, 0.0), ValidationError);
}

TEST_CASE("Kingman factor") {
    CHECK_THAT(kingman_factor(0.8, 0.3), WithinAbs(0.365, 1e-15));
    CHECK(kingman_factor(1.0, 1.0) == 1.0);
    CHECK_THAT(kingman_factor(1.0, 0.3), WithinAbs(0.545, 1e-15));
}

TEST_CASE("exponential consistency and agreement at v_A = 1") {
    for (double rho = 0.01; rho < 1.0; rho += 0.01) {
        CHECK(hertel_factor(1.0, 1.0, rho) == 1.0);
        for (double vb = 0.05; vb <= 1.0; vb += 0.05)
            CHECK_THAT(hertel_factor(1.0, vb, rho), WithinAbs(kingman_factor(1.0, vb), 1e-12));
    }
    CHECK(kingman_factor(1.0, 1.0) == 1.0);
}

TEST_CASE("Hertel factor is positive and continuous in rho") {
    for (double va : {0.3, 0.8}) {
        double prev = hertel_factor(va, 0.3, 1e-3);
        for (double rho = 2e-3; rho < 0.999; rho += 1e-3) {
            const double f = hertel_factor(va, 0.3, rho);
            CHECK(f > 0.0);
            CHECK(std::abs(f - prev) < 1e-2);
            prev = f;
        }
    }
}

TEST_CASE("formula coefficients per setting") {
    auto mm = select_formula_cvs(ModelSetting::MM, 0.8, 0.3);
    REQUIRE(mm);
    CHECK(mm->arrival == 0.8);
    CHECK(mm->service == 0.3);
    auto phm = select_formula_cvs(ModelSetting::PhM, 0.8, 0.3);
    CHECK(phm->arrival == 1.0);
    CHECK(phm->service == 0.3);
    auto mph = select_formula_cvs(ModelSetting::MPh, 0.8, 0.3);
    CHECK(mph->arrival == 0.8);
    CHECK(mph->service == 1.0);
    CHECK_FALSE(select_formula_cvs(ModelSetting::PhPh, 0.8, 0.3));
}

TEST_CASE("scaling factor dispatch") {
    CHECK(scaling_factor(Scaling::none, ModelSetting::PhPh, 0.8, 0.3, 0.5) == 1.0);
    CHECK(scaling_factor(Scaling::kingman, ModelSetting::MM, 0.8, 0.3, 0.5) ==
          kingman_factor(0.8, 0.3));
    CHECK(scaling_factor(Scaling::hertel, ModelSetting::PhM, 0.8, 0.3, 0.5) ==
          hertel_factor(1.0, 0.3, 0.5));
    CHECK_THROWS_AS(scaling_factor(Scaling::hertel, ModelSetting::PhPh, 0.8, 0.3, 0.5),
                    ValidationError);
    // Saturated routes at the end of a capacity bracket keep a finite factor.
    CHECK(std::isfinite(scaling_factor(Scaling::hertel, ModelSetting::MM, 0.8, 0.3, 1.2)));
}

TEST_CASE("names round trip") {
    for (auto s : {ModelSetting::MM, ModelSetting::PhM, ModelSetting::MPh, ModelSetting::PhPh})
        CHECK(parse_setting(to_string(s)) == s);
    for (auto s : {Scaling::none, Scaling::hertel, Scaling::kingman})
        CHECK(parse_scaling(to_string(s)) == s);
    CHECK_THROWS_AS(parse_setting("GG"), ValidationError);
}
