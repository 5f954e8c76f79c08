#include "junctionq/approximations.hpp"

#include "junctionq/errors.hpp"

#include <cmath>
#include <string>

namespace junctionq {

namespace {

double hertel_expression(double v_arrival, double v_service, double rho) {
    if (!(v_arrival > 0.0) || !(v_service > 0.0))
        throw ValidationError("coefficients of variation must be positive");
    const double va2 = v_arrival * v_arrival;
    const double c = std::pow(rho, 1.0 - va2) * (1.0 + va2) - va2;
    const double gamma = 2.0 / (c * v_service * v_service + va2);
    return 1.0 / gamma;
}

} // namespace

double hertel_factor(double v_arrival, double v_service, double rho) {
    if (!(rho > 0.0 && rho < 1.0))
        throw ValidationError("Hertel scaling needs 0 < rho < 1, got rho = " + std::to_string(rho));
    return hertel_expression(v_arrival, v_service, rho);
}

double kingman_factor(double v_arrival, double v_service) {
    if (!(v_arrival > 0.0) || !(v_service > 0.0))
        throw ValidationError("coefficients of variation must be positive");
    return (v_arrival * v_arrival + v_service * v_service) / 2.0;
}

std::optional<FormulaCvs> select_formula_cvs(ModelSetting setting, double v_arrival,
                                             double v_service) {
    switch (setting) {
    case ModelSetting::MM:
        return FormulaCvs{v_arrival, v_service};
    case ModelSetting::PhM:
        return FormulaCvs{1.0, v_service};
    case ModelSetting::MPh:
        return FormulaCvs{v_arrival, 1.0};
    case ModelSetting::PhPh:
        return std::nullopt;
    }
    return std::nullopt;
}

double scaling_factor(Scaling scaling, ModelSetting setting, double v_arrival, double v_service,
                      double rho) {
    if (scaling == Scaling::none)
        return 1.0;
    const auto cvs = select_formula_cvs(setting, v_arrival, v_service);
    if (!cvs)
        throw ValidationError("the PhPh setting models both processes and takes no scaling");
    if (scaling == Scaling::hertel) {
        if (!(rho > 0.0))
            throw ValidationError("Hertel scaling needs rho > 0");
        return hertel_expression(cvs->arrival, cvs->service, rho);
    }
    return kingman_factor(cvs->arrival, cvs->service);
}

const char *to_string(ModelSetting s) {
    switch (s) {
    case ModelSetting::MM:
        return "MM";
    case ModelSetting::PhM:
        return "PhM";
    case ModelSetting::MPh:
        return "MPh";
    case ModelSetting::PhPh:
        return "PhPh";
    }
    return "?";
}

const char *to_string(Scaling s) {
    switch (s) {
    case Scaling::none:
        return "none";
    case Scaling::hertel:
        return "hertel";
    case Scaling::kingman:
        return "kingman";
    }
    return "?";
}

ModelSetting parse_setting(std::string_view text) {
    for (auto s : {ModelSetting::MM, ModelSetting::PhM, ModelSetting::MPh, ModelSetting::PhPh})
        if (text == to_string(s))
            return s;
    throw ValidationError("unknown model setting '" + std::string(text) + "'");
}

Scaling parse_scaling(std::string_view text) {
    for (auto s : {Scaling::none, Scaling::hertel, Scaling::kingman})
        if (text == to_string(s))
            return s;
    throw ValidationError("unknown scaling '" + std::string(text) + "'");
}

} // namespace junctionq
