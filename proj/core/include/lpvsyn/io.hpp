#pragma once

#include <string>

#include <Eigen/Dense>

#include "lpvsyn/data.hpp"
#include "lpvsyn/lpv.hpp"
#include "lpvsyn/synthesis.hpp"
#include "lpvsyn/verification.hpp"

namespace lpvsyn::io {

// JSON documents use row-major dense matrices (arrays of row arrays).

std::string plant_to_json(const LpvaPlant& plant);
LpvaPlant plant_from_json(const std::string& text);

std::string polytope_to_json(const ParamPolytope& polytope);
ParamPolytope polytope_from_json(const std::string& text);

std::string controller_to_json(const GainScheduledController& controller);
GainScheduledController controller_from_json(const std::string& text);

/// Record schema: {"domain", "T", "X_minus", "U", "Theta", "X_delta"}.
std::string record_to_json(const DataRecord& record);
DataRecord record_from_json(const std::string& text);

/// Bound schema: {"Phi11", "Phi12", "Phi22"}.
std::string bound_to_json(const NoiseBound& bound);
NoiseBound bound_from_json(const std::string& text);

/// Certificate schema: {"mode", "P", "K_list", "alpha", "beta", "residuals",
/// "polytope"} plus "Z" and "gamma" for H2 certificates ("S_list" is included
/// for exact round trips).
std::string certificate_to_json(const StabilizationCertificate& cert);
std::string certificate_to_json(const H2Certificate& cert);
StabilizationCertificate certificate_from_json(const std::string& text);
bool certificate_json_has_h2(const std::string& text);
H2Certificate h2_certificate_from_json(const std::string& text);

/// CSV with header "t,x1..xn,u1..um,theta1..thetaL"; theta is evaluated from
/// the parameter signal at the recorded times.
std::string trajectory_to_csv(const StateTrajectory& trajectory, const ParamTrajectory& params);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace lpvsyn::io
