#pragma once

#include <optional>
#include <string_view>

namespace junctionq {

/// Which processes the CTMC models explicitly with phase-type distributions.
enum class ModelSetting { MM, PhM, MPh, PhPh };
enum class Scaling { none, hertel, kingman };

struct FormulaCvs {
    double arrival = 1.0;
    double service = 1.0;
};

/// GI/GI correction 1/gamma for a single channel; rho must lie in (0, 1).
double hertel_factor(double v_arrival, double v_service, double rho);
double kingman_factor(double v_arrival, double v_service);

/// Coefficients fed to the scaling formula. A process already modeled with
/// phases contributes cv 1; PhPh needs no scaling and yields nullopt.
std::optional<FormulaCvs> select_formula_cvs(ModelSetting setting, double v_arrival,
                                             double v_service);

/// Multiplier applied to a modeled queue length. Unlike hertel_factor this
/// accepts rho >= 1, where the truncated chain still has a finite queue and
/// the Hertel expression stays finite; bracket ends of a capacity search
/// land there.
double scaling_factor(Scaling scaling, ModelSetting setting, double v_arrival, double v_service,
                      double rho);

const char *to_string(ModelSetting s);
const char *to_string(Scaling s);
ModelSetting parse_setting(std::string_view text);
Scaling parse_scaling(std::string_view text);

} // namespace junctionq
